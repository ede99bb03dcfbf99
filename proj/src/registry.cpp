#include "routegraph/registry.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

namespace routegraph::graph {

const char* verification_status_name(VerificationStatus s) {
    switch (s) {
    case VerificationStatus::unverified: return "unverified";
    case VerificationStatus::verified: return "verified";
    case VerificationStatus::drift_flagged: return "drift-flagged";
    }
    return "unverified";
}

VerificationStatus verification_status_from_name(const std::string& name) {
    if (name == "verified") return VerificationStatus::verified;
    if (name == "drift-flagged") return VerificationStatus::drift_flagged;
    return VerificationStatus::unverified;
}

const char* lifecycle_name(Lifecycle l) {
    switch (l) {
    case Lifecycle::active: return "active";
    case Lifecycle::deprecated: return "deprecated";
    case Lifecycle::disabled: return "disabled";
    }
    return "active";
}

Lifecycle lifecycle_from_name(const std::string& name) {
    if (name == "deprecated") return Lifecycle::deprecated;
    if (name == "disabled") return Lifecycle::disabled;
    return Lifecycle::active;
}

const char* lifecycle_event_name(LifecycleEvent e) {
    switch (e) {
    case LifecycleEvent::low_reliability_warning: return "low-reliability-warning";
    case LifecycleEvent::confirmed_failure: return "confirmed-failure";
    case LifecycleEvent::reverified_ok: return "reverified-ok";
    }
    return "low-reliability-warning";
}

Lifecycle next_lifecycle(Lifecycle current, LifecycleEvent event) {
    switch (event) {
    case LifecycleEvent::low_reliability_warning:
        return current == Lifecycle::active ? Lifecycle::deprecated : current;
    case LifecycleEvent::confirmed_failure:
        return Lifecycle::disabled;
    case LifecycleEvent::reverified_ok:
        return current == Lifecycle::active ? current : Lifecycle::active;
    }
    return current;
}

const distill::EndpointTemplate* SkillRecord::find_endpoint(const std::string& key) const {
    for (const auto& e : endpoints) {
        if (e.key() == key) return &e;
    }
    return nullptr;
}

nlohmann::json SkillRecord::to_json() const {
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& e : endpoints) {
        eps.push_back(e.to_json(/*publishable=*/true));
    }
    nlohmann::json stats = nlohmann::json::object();
    for (const auto& [key, s] : endpoint_stats) {
        stats[key] = s.to_json();
    }
    return nlohmann::json{{"id", id},
                          {"domain", domain},
                          {"endpoints", eps},
                          {"manifest_text", manifest_text},
                          {"embedding", embedding},
                          {"reliability", reliability},
                          {"last_verified_at", last_verified_at},
                          {"verification_status", verification_status_name(verification_status)},
                          {"lifecycle", lifecycle_name(lifecycle)},
                          {"attributions", attributions},
                          {"last_commit_at", last_commit_at},
                          {"endpoint_stats", stats},
                          {"tier2_opt_in", tier2_opt_in},
                          {"tier2_fee", tier2_fee},
                          {"created_at", created_at},
                          {"updated_at", updated_at}};
}

SkillRecord SkillRecord::from_json(const nlohmann::json& j) {
    SkillRecord r;
    r.id = j.value("id", "");
    r.domain = j.value("domain", "");
    for (const auto& e : j.value("endpoints", nlohmann::json::array())) {
        r.endpoints.push_back(distill::EndpointTemplate::from_json(e));
    }
    r.manifest_text = j.value("manifest_text", "");
    r.embedding = j.value("embedding", std::vector<double>{});
    r.reliability = j.value("reliability", 0.5);
    r.last_verified_at = j.value("last_verified_at", static_cast<time_ms>(0));
    r.verification_status =
        verification_status_from_name(j.value("verification_status", "unverified"));
    r.lifecycle = lifecycle_from_name(j.value("lifecycle", "active"));
    r.attributions = j.value("attributions", std::map<std::string, double>{});
    r.last_commit_at = j.value("last_commit_at", std::map<std::string, time_ms>{});
    if (j.contains("endpoint_stats")) {
        for (auto it = j["endpoint_stats"].begin(); it != j["endpoint_stats"].end(); ++it) {
            r.endpoint_stats[it.key()] = trust::ReliabilityStats::from_json(it.value());
        }
    }
    r.tier2_opt_in = j.value("tier2_opt_in", false);
    r.tier2_fee = j.value("tier2_fee", static_cast<micro_t>(0));
    r.created_at = j.value("created_at", static_cast<time_ms>(0));
    r.updated_at = j.value("updated_at", static_cast<time_ms>(0));
    return r;
}

bool ScoringWeights::valid() const {
    if (similarity < 0 || reliability < 0 || freshness < 0 || verification < 0) return false;
    return std::abs(similarity + reliability + freshness + verification - 1.0) < 1e-9;
}

nlohmann::json ScoredResult::to_json() const {
    return nlohmann::json{{"id", id},
                          {"domain", domain},
                          {"composite", composite},
                          {"components",
                           {{"similarity", components.similarity},
                            {"reliability", components.reliability},
                            {"freshness", components.freshness},
                            {"verification", components.verification}}},
                          {"lifecycle", lifecycle_name(lifecycle)}};
}

nlohmann::json ValidationReport::to_json() const {
    return nlohmann::json{{"passed", passed},
                          {"hard_failures", hard_failures},
                          {"caveats", caveats},
                          {"live_probed", live_probed},
                          {"live_succeeded", live_succeeded}};
}

ValidationReport validate_for_publish(const distill::SkillPackage& pkg,
                                      const LiveCheck& live_check) {
    ValidationReport report;

    if (pkg.domain.empty()) {
        report.hard_failures.push_back("missing-domain");
    }
    if (pkg.endpoints.empty()) {
        report.hard_failures.push_back("no-endpoints");
    }
    if (pkg.manifest_text.empty()) {
        report.hard_failures.push_back("empty-description");
    }
    for (const auto& e : pkg.endpoints) {
        if (e.method.empty() || e.path_template.empty() || e.path_template[0] != '/') {
            report.hard_failures.push_back("invalid-endpoint:" + e.key());
            continue;
        }
        // every {param} in the template must be declared, and names unique
        std::set<std::string> declared;
        bool dup = false;
        for (const auto& p : e.path_params) {
            if (!declared.insert(p.name).second) dup = true;
        }
        std::size_t pos = 0;
        bool undeclared = false;
        while ((pos = e.path_template.find('{', pos)) != std::string::npos) {
            auto end = e.path_template.find('}', pos);
            if (end == std::string::npos) {
                undeclared = true;
                break;
            }
            if (!declared.count(e.path_template.substr(pos + 1, end - pos - 1))) {
                undeclared = true;
            }
            pos = end + 1;
        }
        if (dup || undeclared) {
            report.hard_failures.push_back("invalid-schema:" + e.key());
        }
        if (!e.response_example) {
            report.caveats.push_back("missing-response-example:" + e.key());
        }
    }
    if (!pkg.endpoints.empty()) {
        report.caveats.push_back("unverified-endpoints");
    }

    if (report.hard_failures.empty() && live_check) {
        for (const auto& e : pkg.endpoints) {
            if (!e.safe) continue;
            ++report.live_probed;
            if (live_check(pkg.domain, e)) {
                ++report.live_succeeded;
            }
        }
        if (report.live_probed > 0) {
            double rate = static_cast<double>(report.live_succeeded) /
                          static_cast<double>(report.live_probed);
            if (rate < 0.5 || report.live_succeeded < 1) {
                report.hard_failures.push_back("live-check-below-50-percent");
            }
        }
    }

    report.passed = report.hard_failures.empty();
    return report;
}

SkillSnapshot SkillSnapshot::empty() {
    SkillSnapshot snap;
    snap.embedding = embed_text("");
    return snap;
}

SkillSnapshot make_snapshot(const SkillRecord& record) {
    SkillSnapshot snap;
    snap.lines = distill::canonical_lines(record.endpoints);
    snap.embedding = record.embedding;
    return snap;
}

std::string Registry::record_id_for_domain(const std::string& domain) {
    return "skill:" + domain;
}

Registry::Registry(DeltaScorer scorer) : scorer_(std::move(scorer)) {}

SkillRecord* Registry::find_mutable(const std::string& record_id) {
    for (auto& r : records_) {
        if (r.id == record_id) return &r;
    }
    return nullptr;
}

void Registry::refresh_record_reliability(SkillRecord& record) {
    std::int64_t successes = 0, attempts = 0;
    for (const auto& [key, stats] : record.endpoint_stats) {
        successes += stats.successes;
        attempts += stats.attempts();
    }
    record.reliability =
        static_cast<double>(successes + 1) / static_cast<double>(attempts + 2);
}

PublishOutcome Registry::publish(const distill::SkillPackage& pkg, const ValidationReport& report,
                                 time_ms now) {
    if (!report.passed) {
        throw ValidationFailed(report.hard_failures, "package failed hard validation checks");
    }

    std::unique_lock lock(mutex_);
    PublishOutcome outcome;
    SkillRecord* existing = nullptr;
    for (auto& r : records_) {
        if (r.domain == pkg.domain) {
            existing = &r;
            break;
        }
    }

    if (!existing) {
        SkillRecord record;
        record.id = record_id_for_domain(pkg.domain);
        record.domain = pkg.domain;
        record.endpoints = pkg.endpoints;
        record.manifest_text = pkg.manifest_text;
        record.embedding = embed_text(record.manifest_text);
        record.reliability = 0.5; // uninformative prior
        record.last_verified_at = now;
        record.verification_status = VerificationStatus::unverified;
        record.lifecycle = Lifecycle::active;
        record.created_at = now;
        record.updated_at = now;
        auto fee = site_owner_fees_.find(pkg.domain);
        if (fee != site_owner_fees_.end()) {
            record.tier2_opt_in = true;
            record.tier2_fee = fee->second;
        }

        double score = 1.0;
        if (scorer_) {
            score = scorer_(SkillSnapshot::empty(), make_snapshot(record));
        }
        if (score > 0 && !pkg.contributor.empty()) {
            record.attributions[pkg.contributor] = score;
            record.last_commit_at[pkg.contributor] = now;
        }

        outcome.record_id = record.id;
        outcome.merged = false;
        outcome.delta_score = score;
        outcome.added_schema_lines = static_cast<int>(make_snapshot(record).lines.size());
        records_.push_back(std::move(record));
    } else {
        SkillSnapshot before = make_snapshot(*existing);
        distill::SkillPackage current;
        current.domain = existing->domain;
        current.endpoints = existing->endpoints;
        current.manifest_text = existing->manifest_text;

        auto merge = distill::merge_skills(current, pkg);
        existing->endpoints = merge.merged.endpoints;
        existing->manifest_text = merge.merged.manifest_text;
        existing->embedding = embed_text(existing->manifest_text);
        existing->updated_at = now;

        double score = 0.0;
        if (scorer_) {
            score = scorer_(before, make_snapshot(*existing));
        } else if (!merge.delta.empty()) {
            score = 1.0;
        }
        if (score > 0 && !pkg.contributor.empty()) {
            existing->attributions[pkg.contributor] += score;
            existing->last_commit_at[pkg.contributor] = now;
        }

        outcome.record_id = existing->id;
        outcome.merged = true;
        outcome.delta_score = score;
        outcome.added_schema_lines = merge.delta.added_schema_lines;
    }

    events_.push_back({now, "publish", outcome.record_id,
                       pkg.contributor,
                       nlohmann::json{{"merged", outcome.merged},
                                      {"delta_score", outcome.delta_score},
                                      {"added_schema_lines", outcome.added_schema_lines}}});
    return outcome;
}

std::vector<ScoredResult> Registry::search(const std::string& query, std::size_t k,
                                           const ScoringWeights& weights, time_ms now) const {
    if (!weights.valid()) {
        throw Error("invalid-weights", "scoring weights must be non-negative and sum to 1");
    }
    std::shared_lock lock(mutex_);
    if (records_.empty()) {
        throw EmptyIndex("registry holds no records");
    }
    auto query_embedding = embed_text(query);

    std::vector<ScoredResult> results;
    for (const auto& record : records_) {
        if (record.lifecycle == Lifecycle::disabled) continue;

        ScoreComponents c;
        c.similarity = std::max(0.0, cosine(query_embedding, record.embedding));
        c.reliability = record.reliability;
        double days =
            std::max<double>(0.0, static_cast<double>(now - record.last_verified_at)) /
            static_cast<double>(kMillisPerDay);
        c.freshness = trust::freshness(days);
        switch (record.verification_status) {
        case VerificationStatus::verified: c.verification = 1.0; break;
        case VerificationStatus::drift_flagged: c.verification = 0.5; break;
        case VerificationStatus::unverified: c.verification = 0.0; break;
        }

        // Deprecated records stay discoverable but rank lower: the 0.5
        // penalty is applied to the reported components so composite always
        // equals the weighted dot product of what we report.
        if (record.lifecycle == Lifecycle::deprecated) {
            c.similarity *= 0.5;
            c.reliability *= 0.5;
            c.freshness *= 0.5;
            c.verification *= 0.5;
        }

        ScoredResult r;
        r.id = record.id;
        r.domain = record.domain;
        r.components = c;
        r.lifecycle = record.lifecycle;
        r.composite = weights.similarity * c.similarity + weights.reliability * c.reliability +
                      weights.freshness * c.freshness + weights.verification * c.verification;
        results.push_back(std::move(r));
    }

    std::sort(results.begin(), results.end(), [](const ScoredResult& a, const ScoredResult& b) {
        if (a.composite != b.composite) return a.composite > b.composite;
        return a.id < b.id;
    });
    if (results.size() > k) {
        results.resize(k);
    }
    return results;
}

Lifecycle Registry::apply_lifecycle_event(const std::string& record_id, LifecycleEvent event,
                                          time_ms now) {
    std::unique_lock lock(mutex_);
    SkillRecord* record = find_mutable(record_id);
    if (!record) {
        return Lifecycle::disabled;
    }
    Lifecycle before = record->lifecycle;
    record->lifecycle = next_lifecycle(before, event);
    if (before != record->lifecycle) {
        record->updated_at = now;
        events_.push_back({now, "lifecycle", record_id, lifecycle_event_name(event),
                           nlohmann::json{{"from", lifecycle_name(before)},
                                          {"to", lifecycle_name(record->lifecycle)}}});
    }
    return record->lifecycle;
}

std::optional<SkillRecord> Registry::find(const std::string& record_id) const {
    std::shared_lock lock(mutex_);
    for (const auto& r : records_) {
        if (r.id == record_id) return r;
    }
    return std::nullopt;
}

std::optional<SkillRecord> Registry::find_by_domain(const std::string& domain) const {
    std::shared_lock lock(mutex_);
    for (const auto& r : records_) {
        if (r.domain == domain) return r;
    }
    return std::nullopt;
}

std::vector<SkillRecord> Registry::all_records() const {
    std::shared_lock lock(mutex_);
    return records_;
}

std::size_t Registry::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

void Registry::insert_record(SkillRecord record) {
    std::unique_lock lock(mutex_);
    records_.push_back(std::move(record));
}

void Registry::record_endpoint_outcome(const std::string& record_id,
                                       const std::string& endpoint_key, trust::Outcome outcome,
                                       time_ms now) {
    std::unique_lock lock(mutex_);
    SkillRecord* record = find_mutable(record_id);
    if (!record) return;
    auto& stats = record->endpoint_stats[endpoint_key];
    stats = trust::record_outcome(stats, outcome, now);
    record->last_verified_at = now;
    refresh_record_reliability(*record);
}

void Registry::set_verification_status(const std::string& record_id, VerificationStatus status,
                                       time_ms now) {
    std::unique_lock lock(mutex_);
    SkillRecord* record = find_mutable(record_id);
    if (!record) return;
    record->verification_status = status;
    record->updated_at = now;
}

void Registry::register_site_owner(const std::string& domain, micro_t per_exec_fee) {
    std::unique_lock lock(mutex_);
    site_owner_fees_[domain] = per_exec_fee;
    SkillRecord* record = nullptr;
    for (auto& r : records_) {
        if (r.domain == domain) record = &r;
    }
    if (record) {
        record->tier2_opt_in = true;
        record->tier2_fee = per_exec_fee;
    }
}

void Registry::append_event(EventLogEntry entry) {
    std::unique_lock lock(mutex_);
    events_.push_back(std::move(entry));
}

void Registry::save(const std::string& dir) const {
    std::shared_lock lock(mutex_);
    std::filesystem::create_directories(dir + "/records");
    for (const auto& r : records_) {
        std::string name = r.id;
        std::replace(name.begin(), name.end(), ':', '_');
        std::replace(name.begin(), name.end(), '/', '_');
        write_file(dir + "/records/" + name + ".json", canonical_dump(r.to_json()) + "\n");
    }
    std::string log;
    for (const auto& e : events_) {
        nlohmann::json j{{"timestamp", e.timestamp},
                         {"kind", e.kind},
                         {"record_id", e.record_id},
                         {"detail", e.detail},
                         {"payload", e.payload}};
        log += canonical_dump(j);
        log += '\n';
    }
    write_file(dir + "/events.log", log);
    nlohmann::json owners(site_owner_fees_);
    write_file(dir + "/site_owners.json", canonical_dump(owners) + "\n");
}

void Registry::load_from(const std::string& dir) {
    std::unique_lock lock(mutex_);
    records_.clear();
    events_.clear();
    site_owner_fees_.clear();

    std::string records_dir = dir + "/records";
    if (std::filesystem::exists(records_dir)) {
        std::vector<std::string> files;
        for (const auto& entry : std::filesystem::directory_iterator(records_dir)) {
            if (entry.path().extension() == ".json") {
                files.push_back(entry.path().string());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            records_.push_back(SkillRecord::from_json(nlohmann::json::parse(read_file(file))));
        }
    }
    std::string events_path = dir + "/events.log";
    if (std::filesystem::exists(events_path)) {
        std::istringstream in(read_file(events_path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            events_.push_back({j.value("timestamp", static_cast<time_ms>(0)), j.value("kind", ""),
                               j.value("record_id", ""), j.value("detail", ""),
                               j.value("payload", nlohmann::json::object())});
        }
    }
    std::string owners_path = dir + "/site_owners.json";
    if (std::filesystem::exists(owners_path)) {
        auto owners = nlohmann::json::parse(read_file(owners_path));
        site_owner_fees_ = owners.get<std::map<std::string, micro_t>>();
    }
}

} // namespace routegraph::graph
