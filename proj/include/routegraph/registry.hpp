#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/distill.hpp"
#include "routegraph/embedding.hpp"
#include "routegraph/errors.hpp"
#include "routegraph/trust.hpp"
#include "routegraph/util.hpp"

namespace routegraph::graph {

enum class VerificationStatus { unverified, verified, drift_flagged };
enum class Lifecycle { active, deprecated, disabled };
enum class LifecycleEvent { low_reliability_warning, confirmed_failure, reverified_ok };

const char* verification_status_name(VerificationStatus s);
VerificationStatus verification_status_from_name(const std::string& name);
const char* lifecycle_name(Lifecycle l);
Lifecycle lifecycle_from_name(const std::string& name);
const char* lifecycle_event_name(LifecycleEvent e);

// Pure transition table: active --warning--> deprecated; any
// --confirmed-failure--> disabled; deprecated/disabled --reverified-ok-->
// active; everything else is a no-op.
Lifecycle next_lifecycle(Lifecycle current, LifecycleEvent event);

struct SkillRecord {
    std::string id; // stable: derived from domain, not insertion order
    std::string domain;
    std::vector<distill::EndpointTemplate> endpoints;
    std::string manifest_text;
    std::vector<double> embedding; // unit norm, kEmbeddingDim
    double reliability = 0.5;
    time_ms last_verified_at = 0;
    VerificationStatus verification_status = VerificationStatus::unverified;
    Lifecycle lifecycle = Lifecycle::active;
    std::map<std::string, double> attributions;          // contributor -> cumulative delta score
    std::map<std::string, time_ms> last_commit_at;       // contributor -> last commit time
    std::map<std::string, trust::ReliabilityStats> endpoint_stats; // endpoint key -> stats
    bool tier2_opt_in = false;
    micro_t tier2_fee = 0;
    time_ms created_at = 0;
    time_ms updated_at = 0;

    const distill::EndpointTemplate* find_endpoint(const std::string& key) const;

    nlohmann::json to_json() const;
    static SkillRecord from_json(const nlohmann::json& j);
};

struct ScoringWeights {
    double similarity = 0.40;
    double reliability = 0.30;
    double freshness = 0.15;
    double verification = 0.15;

    bool valid() const;
};

struct ScoreComponents {
    double similarity = 0.0;
    double reliability = 0.0;
    double freshness = 0.0;
    double verification = 0.0;
};

struct ScoredResult {
    std::string id;
    std::string domain;
    double composite = 0.0;
    ScoreComponents components;
    Lifecycle lifecycle = Lifecycle::active;

    nlohmann::json to_json() const;
};

struct ValidationReport {
    bool passed = false;
    std::vector<std::string> hard_failures;
    std::vector<std::string> caveats;
    // live-check mode results, when run
    int live_probed = 0;
    int live_succeeded = 0;

    nlohmann::json to_json() const;
};

class ValidationFailed : public Error {
public:
    ValidationFailed(std::vector<std::string> failures, const std::string& message)
        : Error("validation-failed", message), failures_(std::move(failures)) {}
    const std::vector<std::string>& failures() const { return failures_; }

private:
    std::vector<std::string> failures_;
};

// Optional live-check probe: returns true when a GET on the endpoint succeeds.
using LiveCheck = std::function<bool(const std::string& domain,
                                     const distill::EndpointTemplate& endpoint)>;

// Hard checks reject; soft checks publish with caveats. In live-check mode
// safe endpoints are probed and the package is rejected below a 50% success
// rate (with at least one success required).
ValidationReport validate_for_publish(const distill::SkillPackage& pkg,
                                      const LiveCheck& live_check = nullptr);

// Inputs to delta-based attribution: the canonical schema lines and the
// manifest embedding of a record at a point in time.
struct SkillSnapshot {
    std::vector<std::string> lines;
    std::vector<double> embedding;

    static SkillSnapshot empty();
};

SkillSnapshot make_snapshot(const SkillRecord& record);

// Scores the marginal contribution between two snapshots (wired to
// econ::delta_score by the application; tests may inject anything).
using DeltaScorer = std::function<double(const SkillSnapshot& before, const SkillSnapshot& after)>;

struct PublishOutcome {
    std::string record_id;
    bool merged = false;           // true when an existing domain record absorbed the package
    double delta_score = 0.0;      // attribution credited to the contributor
    int added_schema_lines = 0;
};

struct EventLogEntry {
    time_ms timestamp = 0;
    std::string kind; // lifecycle | verification | publish
    std::string record_id;
    std::string detail;
    nlohmann::json payload;
};

// The shared route graph: domain records, composite-score search, lifecycle.
// Concurrent readers, single writer; search serves a consistent snapshot.
class Registry {
public:
    explicit Registry(DeltaScorer scorer = nullptr);

    PublishOutcome publish(const distill::SkillPackage& pkg, const ValidationReport& report,
                           time_ms now);

    std::vector<ScoredResult> search(const std::string& query, std::size_t k,
                                     const ScoringWeights& weights, time_ms now) const;

    Lifecycle apply_lifecycle_event(const std::string& record_id, LifecycleEvent event,
                                    time_ms now);

    std::optional<SkillRecord> find(const std::string& record_id) const;
    std::optional<SkillRecord> find_by_domain(const std::string& domain) const;
    std::vector<SkillRecord> all_records() const;
    std::size_t size() const;

    // Direct insertion for seeding fixtures and tests.
    void insert_record(SkillRecord record);

    // Mutation hooks used by the trust engine and execution feedback.
    void record_endpoint_outcome(const std::string& record_id, const std::string& endpoint_key,
                                 trust::Outcome outcome, time_ms now);
    void set_verification_status(const std::string& record_id, VerificationStatus status,
                                 time_ms now);
    void register_site_owner(const std::string& domain, micro_t per_exec_fee);

    void append_event(EventLogEntry entry);
    const std::vector<EventLogEntry>& events() const { return events_; }

    // Directory layout: <dir>/records/<id>.json + <dir>/events.log
    void save(const std::string& dir) const;
    void load_from(const std::string& dir);

    static std::string record_id_for_domain(const std::string& domain);

private:
    SkillRecord* find_mutable(const std::string& record_id);
    void refresh_record_reliability(SkillRecord& record);

    mutable std::shared_mutex mutex_;
    std::vector<SkillRecord> records_;
    std::vector<EventLogEntry> events_;
    std::map<std::string, micro_t> site_owner_fees_; // opted-in domains
    DeltaScorer scorer_;
};

} // namespace routegraph::graph
