#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/errors.hpp"
#include "routegraph/shapes.hpp"
#include "routegraph/util.hpp"

namespace routegraph::graph {
class Registry;
struct SkillRecord;
} // namespace routegraph::graph

namespace routegraph::trust {

enum class Outcome { success, failure, timeout };

const char* outcome_name(Outcome o);

struct ReliabilityStats {
    std::int64_t successes = 0;
    std::int64_t failures = 0;
    std::int64_t timeouts = 0;
    std::int64_t consecutive_failures = 0;
    time_ms last_outcome_at = 0;

    std::int64_t attempts() const { return successes + failures + timeouts; }
    // Laplace-smoothed success rate; 0.5 with no observations.
    double reliability() const {
        return static_cast<double>(successes + 1) / static_cast<double>(attempts() + 2);
    }

    bool operator==(const ReliabilityStats&) const = default;

    nlohmann::json to_json() const;
    static ReliabilityStats from_json(const nlohmann::json& j);
};

ReliabilityStats record_outcome(ReliabilityStats stats, Outcome outcome, time_ms now);

// freshness = 1 / (1 + d/30) for d days since last verification.
double freshness(double days_since_update);

struct DriftReport {
    std::vector<std::string> removed_fields;
    std::vector<std::tuple<std::string, std::string, std::string>> type_changes; // path, old, new
    std::vector<std::string> added_fields;
    bool critical = false;

    bool empty() const {
        return removed_fields.empty() && type_changes.empty() && added_fields.empty();
    }

    nlohmann::json to_json() const;
};

DriftReport detect_drift(const distill::ResponseShape& documented,
                         const distill::ResponseShape& live);

struct VerificationConfig {
    time_ms cadence = 6LL * 60 * 60 * 1000;      // 6 h
    time_ms stale_after = 24LL * 60 * 60 * 1000; // 24 h
    int deprecate_after = 3;                     // consecutive failures
};

struct ProbeResult {
    Outcome outcome = Outcome::failure;
    std::optional<std::string> body; // JSON text on success
};

// Issues one request for a safe endpoint; never called for non-GET routes.
using Prober = std::function<ProbeResult(const graph::SkillRecord& record,
                                         const std::string& endpoint_key)>;

struct ProbeOutcome {
    std::string record_id;
    std::string endpoint_key;
    Outcome outcome = Outcome::failure;
    DriftReport drift;
};

// Probes every safe (GET) endpoint, stalest first. Critical drift flags the
// record; deprecate_after consecutive failures emit a low-reliability
// warning; a failed re-probe of a drift-flagged endpoint confirms failure.
// A clean probe of a non-active record re-activates it.
std::vector<ProbeOutcome> verification_pass(graph::Registry& registry, const Prober& prober,
                                            const VerificationConfig& config, time_ms now);

// Cadence bookkeeping for the background loop; pure logic over an injected clock.
class VerificationLoop {
public:
    VerificationLoop(VerificationConfig config) : config_(config) {}

    bool due(time_ms now) const { return !has_run_ || now - last_run_ >= config_.cadence; }

    std::vector<ProbeOutcome> run_if_due(graph::Registry& registry, const Prober& prober,
                                         time_ms now);

    const VerificationConfig& config() const { return config_; }

private:
    VerificationConfig config_;
    bool has_run_ = false;
    time_ms last_run_ = 0;
};

} // namespace routegraph::trust
