#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/distill.hpp"
#include "routegraph/econ.hpp"
#include "routegraph/errors.hpp"
#include "routegraph/pay402.hpp"
#include "routegraph/registry.hpp"
#include "routegraph/simnet.hpp"
#include "routegraph/trust.hpp"
#include "routegraph/util.hpp"

namespace routegraph::orch {

struct IntentQuery {
    std::string text;
    std::optional<std::string> domain_hint;
    std::map<std::string, std::string> params;

    nlohmann::json to_json() const;
    static IntentQuery from_json(const nlohmann::json& j);
};

// Stable cache key: lowercased text + sorted params + domain hint.
std::string intent_key(const IntentQuery& q);

struct RouteCacheEntry {
    std::string intent_key;
    std::string skill_id;
    std::string endpoint_key;
    time_ms resolved_at = 0;
    time_ms ttl = 24LL * 60 * 60 * 1000;
};

// Disk-persisted route cache; entries are valid strictly under their TTL.
class RouteCache {
public:
    RouteCache() = default;
    explicit RouteCache(std::string path); // loads existing entries

    std::optional<RouteCacheEntry> get(const std::string& key, time_ms now) const;
    void put(RouteCacheEntry entry);
    void erase(const std::string& key);
    std::size_t size() const { return entries_.size(); }

private:
    void persist() const;

    std::map<std::string, RouteCacheEntry> entries_;
    std::string path_;
};

struct ExecutionResult {
    nlohmann::json data;
    time_ms total_ms = 0;
    std::string source; // cache | graph | discovery
    std::vector<std::string> fees_paid; // ledger entry references

    nlohmann::json to_json() const;
};

class SchemaMismatch : public Error {
public:
    SchemaMismatch(nlohmann::json data, trust::DriftReport report)
        : Error("schema-mismatch", "response diverged from documented schema"),
          data_(std::move(data)), report_(std::move(report)) {}
    const nlohmann::json& data() const { return data_; }
    const trust::DriftReport& report() const { return report_; }

private:
    nlohmann::json data_;
    trust::DriftReport report_;
};

// --- registry access -------------------------------------------------------

struct SearchResponse {
    std::vector<graph::ScoredResult> results;
    std::optional<std::string> fee_ref;
    bool empty_index = false;
};

struct InstallResponse {
    distill::SkillPackage package;
    graph::SkillRecord record;
    std::optional<std::string> fee_ref;
};

// Client-side view of the shared graph. Implementations count round trips
// so tests can assert the cache short-circuits network traffic and the 402
// handshake adds exactly one extra trip.
class RegistryClient {
public:
    virtual ~RegistryClient() = default;
    virtual SearchResponse search(const std::string& query, std::size_t k) = 0;
    virtual InstallResponse install(const std::string& record_id) = 0;
    virtual graph::PublishOutcome publish(const distill::SkillPackage& pkg) = 0;
    virtual void report_execution(const std::string& record_id, const std::string& endpoint_key,
                                  trust::Outcome outcome, bool drift_critical) = 0;
    virtual std::int64_t request_count() const = 0;
};

// Server-side registry core: 402 gating, pricing, fee routing. Shared by
// the in-process client and the HTTP server.
class RegistryService {
public:
    struct Config {
        econ::FeeSchedule fees;
        econ::CostModel cost_model = econ::CostModel::browser_default();
        econ::FeeSplit split;
        graph::ScoringWeights weights;
        std::size_t default_k = 5;
    };

    RegistryService(graph::Registry& registry, econ::Ledger& ledger,
                    std::shared_ptr<pay402::SettlementAdapter> adapter, const Clock& clock,
                    Config config, std::uint64_t nonce_seed = 0);

    struct Reply {
        int status = 200;
        nlohmann::json body;
    };

    // GET /v1/skills/search?q=&k=   (402-gated per query; empty index is free)
    Reply handle_search(const std::string& query, std::size_t k,
                        const std::optional<std::string>& proof_header);
    // GET /v1/skills/{id}/install   (402-gated, dynamic pricing)
    Reply handle_install(const std::string& record_id,
                         const std::optional<std::string>& proof_header);
    // POST /v1/skills               (free)
    Reply handle_publish(const nlohmann::json& package_json);

    graph::Registry& registry() { return registry_; }
    econ::Ledger& ledger() { return ledger_; }
    pay402::PaymentGate& gate() { return gate_; }
    const Config& config() const { return config_; }
    const Clock& clock() const { return clock_; }

private:
    std::int64_t recent_installs(const std::string& record_id) const;

    graph::Registry& registry_;
    econ::Ledger& ledger_;
    pay402::PaymentGate gate_;
    const Clock& clock_;
    Config config_;
};

// In-process client: same wire behavior (402 challenge + paid retry), no sockets.
class LocalRegistryClient final : public RegistryClient {
public:
    LocalRegistryClient(RegistryService& service, pay402::Wallet wallet);

    SearchResponse search(const std::string& query, std::size_t k) override;
    InstallResponse install(const std::string& record_id) override;
    graph::PublishOutcome publish(const distill::SkillPackage& pkg) override;
    void report_execution(const std::string& record_id, const std::string& endpoint_key,
                          trust::Outcome outcome, bool drift_critical) override;
    std::int64_t request_count() const override { return requests_; }

private:
    RegistryService& service_;
    pay402::Wallet wallet_;
    std::int64_t requests_ = 0;
};

// --- the orchestrator -------------------------------------------------------

struct OrchestratorConfig {
    std::string agent_id = "agent";
    econ::FeeSchedule fees;
    econ::CostModel cost_model = econ::CostModel::browser_default();
    graph::ScoringWeights weights;
    double acceptance_threshold = 0.35;
    std::size_t search_k = 5;
    time_ms cache_ttl = 24LL * 60 * 60 * 1000;
    capture::FilterPolicy filter_policy = capture::FilterPolicy::defaults();
    std::string skill_store_dir; // installed skills persist here when set
};

// Resolves intents through the three-path chain: local cache, paid graph
// lookup, discovery fallback with publish-back.
class Orchestrator {
public:
    Orchestrator(OrchestratorConfig config, RegistryClient& client, simnet::SimWeb& web,
                 distill::CredentialVault& vault, RouteCache& cache, econ::Ledger& ledger);

    ExecutionResult resolve_intent(const IntentQuery& q);

    // One request to the endpoint with vault-applied auth; validates the
    // response shape and reports drift. One refresh-and-retry on 401/403.
    nlohmann::json execute_skill(const distill::SkillPackage& pkg, const std::string& record_id,
                                 const std::string& endpoint_key,
                                 const std::map<std::string, std::string>& params);

    // Drives the simulated browser, distills, publishes. Throws DiscoveryEmpty.
    distill::SkillPackage fallback_discover(const IntentQuery& q, const std::string& domain);

    const std::map<std::string, distill::SkillPackage>& installed() const { return installed_; }
    micro_t cumulative_tier3_spend() const { return tier3_spend_; }

    // Picks the endpoint whose documentation best matches the intent text
    // among those whose required parameters are satisfied.
    static std::optional<std::string> select_endpoint(const distill::SkillPackage& pkg,
                                                      const IntentQuery& q);

private:
    ExecutionResult finish(const std::string& source, nlohmann::json data, time_ms started,
                           std::vector<std::string> fees, const IntentQuery& q,
                           const std::string& skill_id, const std::string& endpoint_key);
    std::optional<std::string> charge_tier2(const std::string& record_id);
    void store_skill(const std::string& record_id, const distill::SkillPackage& pkg);
    const distill::SkillPackage* installed_skill(const std::string& record_id);

    OrchestratorConfig config_;
    RegistryClient& client_;
    simnet::SimWeb& web_;
    distill::CredentialVault& vault_;
    RouteCache& cache_;
    econ::Ledger& ledger_;
    std::map<std::string, distill::SkillPackage> installed_; // record id -> package
    std::map<std::string, graph::SkillRecord> known_records_; // record id -> last seen record
    micro_t tier3_spend_ = 0;
};

} // namespace routegraph::orch
