#include "routegraph/trust.hpp"

#include <algorithm>
#include <tuple>

#include "routegraph/registry.hpp"

namespace routegraph::trust {

const char* outcome_name(Outcome o) {
    switch (o) {
    case Outcome::success: return "success";
    case Outcome::failure: return "failure";
    case Outcome::timeout: return "timeout";
    }
    return "failure";
}

nlohmann::json ReliabilityStats::to_json() const {
    return nlohmann::json{{"successes", successes},
                          {"failures", failures},
                          {"timeouts", timeouts},
                          {"consecutive_failures", consecutive_failures},
                          {"last_outcome_at", last_outcome_at}};
}

ReliabilityStats ReliabilityStats::from_json(const nlohmann::json& j) {
    ReliabilityStats s;
    s.successes = j.value("successes", static_cast<std::int64_t>(0));
    s.failures = j.value("failures", static_cast<std::int64_t>(0));
    s.timeouts = j.value("timeouts", static_cast<std::int64_t>(0));
    s.consecutive_failures = j.value("consecutive_failures", static_cast<std::int64_t>(0));
    s.last_outcome_at = j.value("last_outcome_at", static_cast<time_ms>(0));
    return s;
}

ReliabilityStats record_outcome(ReliabilityStats stats, Outcome outcome, time_ms now) {
    switch (outcome) {
    case Outcome::success:
        ++stats.successes;
        stats.consecutive_failures = 0;
        break;
    case Outcome::failure:
        ++stats.failures;
        ++stats.consecutive_failures;
        break;
    case Outcome::timeout:
        ++stats.timeouts;
        ++stats.consecutive_failures;
        break;
    }
    stats.last_outcome_at = now;
    return stats;
}

double freshness(double days_since_update) {
    if (days_since_update < 0) {
        throw NegativeAge("days_since_update must be non-negative");
    }
    return 1.0 / (1.0 + days_since_update / 30.0);
}

nlohmann::json DriftReport::to_json() const {
    nlohmann::json changes = nlohmann::json::array();
    for (const auto& [path, from, to] : type_changes) {
        changes.push_back({{"path", path}, {"from", from}, {"to", to}});
    }
    return nlohmann::json{{"removed_fields", removed_fields},
                          {"type_changes", changes},
                          {"added_fields", added_fields},
                          {"critical", critical}};
}

namespace {

using distill::ResponseShape;

void diff_shapes(const ResponseShape& documented, const ResponseShape& live,
                 const std::string& path, DriftReport& report) {
    if (documented.kind != live.kind) {
        report.type_changes.emplace_back(path.empty() ? "$" : path,
                                         distill::kind_name(documented.kind),
                                         distill::kind_name(live.kind));
        return;
    }
    if (documented.kind == ResponseShape::Kind::object) {
        for (const auto& [name, doc_field] : documented.fields) {
            std::string child = path.empty() ? name : path + "." + name;
            auto it = live.fields.find(name);
            if (it == live.fields.end()) {
                report.removed_fields.push_back(child);
            } else {
                diff_shapes(doc_field, it->second, child, report);
            }
        }
        for (const auto& [name, live_field] : live.fields) {
            if (!documented.fields.count(name)) {
                report.added_fields.push_back(path.empty() ? name : path + "." + name);
            }
        }
    } else if (documented.kind == ResponseShape::Kind::array && documented.element &&
               live.element) {
        diff_shapes(*documented.element, *live.element, path + "[]", report);
    }
}

} // namespace

DriftReport detect_drift(const distill::ResponseShape& documented,
                         const distill::ResponseShape& live) {
    DriftReport report;
    diff_shapes(documented, live, "", report);
    std::sort(report.removed_fields.begin(), report.removed_fields.end());
    std::sort(report.added_fields.begin(), report.added_fields.end());
    std::sort(report.type_changes.begin(), report.type_changes.end());
    report.critical = !report.removed_fields.empty() || !report.type_changes.empty();
    return report;
}

std::vector<ProbeOutcome> verification_pass(graph::Registry& registry, const Prober& prober,
                                            const VerificationConfig& config, time_ms now) {
    struct Target {
        std::string record_id;
        std::string endpoint_key;
        time_ms last_verified_at;
    };
    std::vector<Target> targets;
    for (const auto& record : registry.all_records()) {
        for (const auto& endpoint : record.endpoints) {
            if (!endpoint.safe) continue; // GET-only probing
            targets.push_back({record.id, endpoint.key(), record.last_verified_at});
        }
    }
    // stalest first; ties by id then endpoint for determinism
    std::sort(targets.begin(), targets.end(), [](const Target& a, const Target& b) {
        return std::tie(a.last_verified_at, a.record_id, a.endpoint_key) <
               std::tie(b.last_verified_at, b.record_id, b.endpoint_key);
    });

    // Flags captured at pass start: a failed re-probe of a drift-flagged
    // record is what confirms its failure.
    std::map<std::string, bool> was_flagged;
    struct RecordSummary {
        bool any_critical_drift = false;
        bool any_clean_success = false;
        bool any_failure = false;
    };
    std::map<std::string, RecordSummary> summaries;

    std::vector<ProbeOutcome> outcomes;
    for (const auto& target : targets) {
        auto record = registry.find(target.record_id);
        if (!record) continue;
        const auto* endpoint = record->find_endpoint(target.endpoint_key);
        if (!endpoint) continue;

        if (!was_flagged.count(target.record_id)) {
            was_flagged[target.record_id] =
                record->verification_status == graph::VerificationStatus::drift_flagged;
        }

        ProbeResult probe = prober(*record, target.endpoint_key);
        registry.record_endpoint_outcome(target.record_id, target.endpoint_key, probe.outcome,
                                         now);

        ProbeOutcome out;
        out.record_id = target.record_id;
        out.endpoint_key = target.endpoint_key;
        out.outcome = probe.outcome;

        if (probe.outcome == Outcome::success && probe.body) {
            auto parsed = nlohmann::json::parse(*probe.body, nullptr, false);
            if (!parsed.is_discarded()) {
                out.drift = detect_drift(endpoint->response_schema, distill::infer_shape(parsed));
            }
        }

        auto& summary = summaries[target.record_id];
        if (probe.outcome == Outcome::success) {
            if (out.drift.critical) {
                summary.any_critical_drift = true;
            } else {
                summary.any_clean_success = true;
            }
        } else {
            summary.any_failure = true;
            if (was_flagged[target.record_id]) {
                registry.apply_lifecycle_event(target.record_id,
                                               graph::LifecycleEvent::confirmed_failure, now);
            }
            auto current = registry.find(target.record_id);
            if (current) {
                auto it = current->endpoint_stats.find(target.endpoint_key);
                if (it != current->endpoint_stats.end() &&
                    it->second.consecutive_failures >= config.deprecate_after) {
                    registry.apply_lifecycle_event(
                        target.record_id, graph::LifecycleEvent::low_reliability_warning, now);
                }
            }
        }

        registry.append_event({now, "verification", target.record_id,
                               target.endpoint_key,
                               nlohmann::json{{"outcome", outcome_name(probe.outcome)},
                                              {"drift", out.drift.to_json()}}});
        outcomes.push_back(std::move(out));
    }

    // Per-record status aggregates the whole pass: any critical drift flags
    // the record; an all-clean pass verifies it and re-activates non-active
    // records.
    for (const auto& [record_id, summary] : summaries) {
        if (summary.any_critical_drift) {
            registry.set_verification_status(record_id,
                                             graph::VerificationStatus::drift_flagged, now);
        } else if (summary.any_clean_success && !summary.any_failure) {
            registry.set_verification_status(record_id, graph::VerificationStatus::verified,
                                             now);
            auto current = registry.find(record_id);
            if (current && current->lifecycle != graph::Lifecycle::active) {
                registry.apply_lifecycle_event(record_id, graph::LifecycleEvent::reverified_ok,
                                               now);
            }
        }
    }
    return outcomes;
}

std::vector<ProbeOutcome> VerificationLoop::run_if_due(graph::Registry& registry,
                                                       const Prober& prober, time_ms now) {
    if (!due(now)) return {};
    has_run_ = true;
    last_run_ = now;
    return verification_pass(registry, prober, config_, now);
}

} // namespace routegraph::trust
