#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/errors.hpp"
#include "routegraph/registry.hpp"
#include "routegraph/util.hpp"

namespace routegraph::econ {

// Expected browser-rediscovery cost components, integer micro-dollars.
struct CostModel {
    micro_t c_latency = 0;
    micro_t c_compute = 0;
    micro_t c_tokens = 0;
    micro_t c_retry = 0;
    double p_fail = 0.0;

    // Reference cost endpoints for browser rediscovery:
    // cheap task $0.10, expensive task $0.53.
    static CostModel browser_low();
    static CostModel browser_high();
    static CostModel browser_default(); // midpoint-ish working default

    nlohmann::json to_json() const;
    static CostModel from_json(const nlohmann::json& j);
};

micro_t rediscovery_cost(const CostModel& m);

struct FeeSchedule {
    micro_t f_search = 2'000;  // Tier 3, per query
    micro_t f_install = 10'000; // Tier 1 base, one-time
    std::optional<micro_t> f_exec; // Tier 2, per execution, opt-in routes only

    nlohmann::json to_json() const;
    static FeeSchedule from_json(const nlohmann::json& j);
};

enum class AdoptionDecision { use_graph, defect_to_browser };

// Strict inequality: total fees must be strictly below the rediscovery
// cost; equality defects.
AdoptionDecision adoption_decision(const FeeSchedule& fees, std::int64_t n_exec,
                                   const CostModel& m);

struct FeeSplit {
    double contributors = 0.70;
    double maintainers = 0.15;
    double infrastructure = 0.10;
    double treasury = 0.05;

    bool valid() const;
};

struct FeeParts {
    micro_t contributors = 0;
    micro_t maintainers = 0;
    micro_t infrastructure = 0;
    micro_t treasury = 0;

    micro_t total() const { return contributors + maintainers + infrastructure + treasury; }
};

// Exact integer split; parts always sum to F. Remainder micro-units are
// assigned in order C, M, I, T. Ratios must be whole basis points.
FeeParts split_fee(micro_t F, const FeeSplit& split);

struct DeltaWeights {
    double w_lines = 0.5;
    double w_embed = 0.5;
    double epsilon = 0.01; // minimum-delta threshold; dust commits score zero
};

struct DeltaCommit {
    std::string contributor;
    int schema_line_delta = 0;
    double embedding_dissimilarity = 0.0;
    double delta_score = 0.0;
};

DeltaCommit delta_score(const graph::SkillSnapshot& before, const graph::SkillSnapshot& after,
                        const DeltaWeights& weights = {}, const std::string& contributor = "");

// Adapter for graph::Registry attribution.
graph::DeltaScorer make_delta_scorer(const DeltaWeights& weights = {});

// Integer payouts proportional to cumulative delta scores; sum equals
// C_amount exactly. Remainder goes to the highest-score contributor,
// ties broken by lowest contributor id.
std::map<std::string, micro_t> distribute_contributor_share(
    micro_t C_amount, const std::map<std::string, double>& attributions);

// Dynamic Tier-1 pricing bounded by 0.9 x rediscovery cost.
micro_t price_install(const graph::SkillRecord& record, std::int64_t recent_install_count,
                      const CostModel& m, micro_t base, time_ms now);

// Smallest number of cached uses after which cold-start + cached repeats
// beat the per-use baseline: ceil((cold - baseline) / (baseline - cached)).
std::int64_t breakeven(std::int64_t cold_cost_ms, std::int64_t cached_cost_ms,
                       std::int64_t baseline_cost_ms);

// --- ledger ---------------------------------------------------------------

enum class EntryKind { tier1, tier2, tier3, payout };

const char* entry_kind_name(EntryKind k);
EntryKind entry_kind_from_name(const std::string& name);

struct LedgerEntry {
    time_ms timestamp = 0;
    EntryKind kind = EntryKind::tier3;
    std::string payer;
    std::string payee;
    micro_t amount = 0; // strictly positive
    std::string reference;

    nlohmann::json to_json() const;
    static LedgerEntry from_json(const nlohmann::json& j);
};

// Append-only ledger. A Tier-1 charge and its payout fan-out commit as one
// atomic batch; entries are fsync'd per append when file-backed.
class Ledger {
public:
    Ledger() = default;
    explicit Ledger(std::string path); // file-backed, loads existing entries
    ~Ledger();

    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;

    std::string append(LedgerEntry entry);                    // returns entry reference id
    std::vector<std::string> append_batch(std::vector<LedgerEntry> entries);

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    std::map<std::string, micro_t> balances() const; // payee credits minus payer debits
    std::map<std::string, micro_t> totals_by_kind() const;

private:
    void persist(const std::vector<LedgerEntry>& batch);

    std::vector<LedgerEntry> entries_;
    std::string path_;
    int fd_ = -1;
};

struct Tier1Charge {
    std::string tier1_ref;
    std::vector<std::string> payout_refs;
    FeeParts parts;
};

// Charges the payer and atomically fans the fee out: C to contributors by
// cumulative delta score, M to contributors active within the maintainer
// window (folded into C when none), I to "infrastructure", T to "treasury".
Tier1Charge charge_tier1(Ledger& ledger, const graph::SkillRecord& record,
                         const std::string& payer, micro_t fee, const FeeSplit& split,
                         time_ms now, time_ms maintainer_window_ms = 90LL * kMillisPerDay);

} // namespace routegraph::econ
