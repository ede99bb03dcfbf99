#include "routegraph/econ.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fcntl.h>
#include <unistd.h>

namespace routegraph::econ {

CostModel CostModel::browser_low() {
    // $0.02 runtime + $0.04 tokens + $0.04 expected retry = $0.10
    return {0, 20'000, 40'000, 80'000, 0.5};
}

CostModel CostModel::browser_high() {
    // $0.05 runtime + $0.35 tokens + $0.13 expected retry = $0.53
    return {0, 50'000, 350'000, 260'000, 0.5};
}

CostModel CostModel::browser_default() {
    // roughly the midpoint of the published range
    return {0, 30'000, 150'000, 150'000, 0.5};
}

nlohmann::json CostModel::to_json() const {
    return nlohmann::json{{"c_latency", c_latency},
                          {"c_compute", c_compute},
                          {"c_tokens", c_tokens},
                          {"c_retry", c_retry},
                          {"p_fail", p_fail}};
}

CostModel CostModel::from_json(const nlohmann::json& j) {
    CostModel m;
    m.c_latency = j.value("c_latency", static_cast<micro_t>(0));
    m.c_compute = j.value("c_compute", static_cast<micro_t>(0));
    m.c_tokens = j.value("c_tokens", static_cast<micro_t>(0));
    m.c_retry = j.value("c_retry", static_cast<micro_t>(0));
    m.p_fail = j.value("p_fail", 0.0);
    return m;
}

micro_t rediscovery_cost(const CostModel& m) {
    return m.c_latency + m.c_compute + m.c_tokens +
           static_cast<micro_t>(std::llround(m.p_fail * static_cast<double>(m.c_retry)));
}

nlohmann::json FeeSchedule::to_json() const {
    nlohmann::json j{{"f_search", f_search}, {"f_install", f_install}};
    if (f_exec) j["f_exec"] = *f_exec;
    return j;
}

FeeSchedule FeeSchedule::from_json(const nlohmann::json& j) {
    FeeSchedule f;
    f.f_search = j.value("f_search", static_cast<micro_t>(2'000));
    f.f_install = j.value("f_install", static_cast<micro_t>(10'000));
    if (j.contains("f_exec")) f.f_exec = j["f_exec"].get<micro_t>();
    return f;
}

AdoptionDecision adoption_decision(const FeeSchedule& fees, std::int64_t n_exec,
                                   const CostModel& m) {
    micro_t total = fees.f_search + fees.f_install + n_exec * fees.f_exec.value_or(0);
    return total < rediscovery_cost(m) ? AdoptionDecision::use_graph
                                       : AdoptionDecision::defect_to_browser;
}

bool FeeSplit::valid() const {
    if (contributors < 0 || maintainers < 0 || infrastructure < 0 || treasury < 0) return false;
    return std::abs(contributors + maintainers + infrastructure + treasury - 1.0) < 1e-9;
}

namespace {

// Ratios as whole basis points; keeps the split exact in integer arithmetic.
std::int64_t to_basis_points(double ratio) {
    return std::llround(ratio * 10'000.0);
}

} // namespace

FeeParts split_fee(micro_t F, const FeeSplit& split) {
    if (F <= 0) {
        throw InvalidSplit("fee must be positive");
    }
    std::int64_t bp[4] = {to_basis_points(split.contributors), to_basis_points(split.maintainers),
                          to_basis_points(split.infrastructure), to_basis_points(split.treasury)};
    if (bp[0] < 0 || bp[1] < 0 || bp[2] < 0 || bp[3] < 0 ||
        bp[0] + bp[1] + bp[2] + bp[3] != 10'000) {
        throw InvalidSplit("split ratios must be non-negative whole basis points summing to 1");
    }
    micro_t parts[4];
    micro_t assigned = 0;
    for (int i = 0; i < 4; ++i) {
        parts[i] = F * bp[i] / 10'000;
        assigned += parts[i];
    }
    micro_t remainder = F - assigned;
    for (int i = 0; remainder > 0; i = (i + 1) % 4) {
        parts[i] += 1;
        --remainder;
    }
    return {parts[0], parts[1], parts[2], parts[3]};
}

DeltaCommit delta_score(const graph::SkillSnapshot& before, const graph::SkillSnapshot& after,
                        const DeltaWeights& weights, const std::string& contributor) {
    std::multiset<std::string> before_lines(before.lines.begin(), before.lines.end());
    std::multiset<std::string> after_lines(after.lines.begin(), after.lines.end());

    int changed = 0;
    for (const auto& line : after_lines) {
        auto it = before_lines.find(line);
        if (it != before_lines.end()) {
            before_lines.erase(it);
        } else {
            ++changed;
        }
    }
    changed += static_cast<int>(before_lines.size()); // removed lines

    double line_ratio = static_cast<double>(changed) /
                        static_cast<double>(std::max<std::size_t>(1, after.lines.size()));
    double dissimilarity = 1.0 - graph::cosine(before.embedding, after.embedding);

    DeltaCommit commit;
    commit.contributor = contributor;
    commit.schema_line_delta = changed;
    commit.embedding_dissimilarity = dissimilarity;
    double raw = weights.w_lines * line_ratio + weights.w_embed * dissimilarity;
    commit.delta_score = raw >= weights.epsilon ? raw : 0.0;
    return commit;
}

graph::DeltaScorer make_delta_scorer(const DeltaWeights& weights) {
    return [weights](const graph::SkillSnapshot& before, const graph::SkillSnapshot& after) {
        return delta_score(before, after, weights).delta_score;
    };
}

std::map<std::string, micro_t> distribute_contributor_share(
    micro_t C_amount, const std::map<std::string, double>& attributions) {
    double total = 0.0;
    for (const auto& [id, score] : attributions) {
        if (score > 0) total += score;
    }
    if (total <= 0.0) {
        throw NoAttributions("no contributor with a positive delta score");
    }

    std::map<std::string, micro_t> payouts;
    micro_t assigned = 0;
    const std::string* top = nullptr;
    double top_score = -1.0;
    for (const auto& [id, score] : attributions) {
        if (score <= 0) continue;
        micro_t share = static_cast<micro_t>(std::floor(
            static_cast<long double>(C_amount) * static_cast<long double>(score) / total));
        payouts[id] = share;
        assigned += share;
        if (score > top_score) { // ties: first in map order, i.e. lowest id
            top_score = score;
            top = &payouts.find(id)->first;
        }
    }
    if (top) {
        payouts[*top] += C_amount - assigned;
    }
    return payouts;
}

micro_t price_install(const graph::SkillRecord& record, std::int64_t recent_install_count,
                      const CostModel& m, micro_t base, time_ms now) {
    double days = std::max<double>(0.0, static_cast<double>(now - record.last_verified_at)) /
                  static_cast<double>(kMillisPerDay);
    double fresh = trust::freshness(days);
    double demand = std::min(1.0, static_cast<double>(std::max<std::int64_t>(0, recent_install_count)) / 100.0);

    double fee = static_cast<double>(base) * (0.5 + 0.5 * record.reliability) *
                 (0.5 + 0.5 * fresh) * (1.0 + demand);
    micro_t priced = static_cast<micro_t>(std::llround(fee));
    micro_t ceiling = rediscovery_cost(m) * 9 / 10;
    return std::min(priced, ceiling);
}

std::int64_t breakeven(std::int64_t cold_cost_ms, std::int64_t cached_cost_ms,
                       std::int64_t baseline_cost_ms) {
    if (cached_cost_ms >= baseline_cost_ms) {
        throw Unamortizable("cached cost is not below the baseline");
    }
    if (cold_cost_ms <= baseline_cost_ms) {
        return 0; // no premium to amortise
    }
    std::int64_t premium = cold_cost_ms - baseline_cost_ms;
    std::int64_t saving = baseline_cost_ms - cached_cost_ms;
    return (premium + saving - 1) / saving; // ceil
}

const char* entry_kind_name(EntryKind k) {
    switch (k) {
    case EntryKind::tier1: return "tier1";
    case EntryKind::tier2: return "tier2";
    case EntryKind::tier3: return "tier3";
    case EntryKind::payout: return "payout";
    }
    return "tier3";
}

EntryKind entry_kind_from_name(const std::string& name) {
    if (name == "tier1") return EntryKind::tier1;
    if (name == "tier2") return EntryKind::tier2;
    if (name == "payout") return EntryKind::payout;
    return EntryKind::tier3;
}

nlohmann::json LedgerEntry::to_json() const {
    return nlohmann::json{{"timestamp", timestamp}, {"kind", entry_kind_name(kind)},
                          {"payer", payer},         {"payee", payee},
                          {"amount", amount},       {"reference", reference}};
}

LedgerEntry LedgerEntry::from_json(const nlohmann::json& j) {
    LedgerEntry e;
    e.timestamp = j.value("timestamp", static_cast<time_ms>(0));
    e.kind = entry_kind_from_name(j.value("kind", "tier3"));
    e.payer = j.value("payer", "");
    e.payee = j.value("payee", "");
    e.amount = j.value("amount", static_cast<micro_t>(0));
    e.reference = j.value("reference", "");
    return e;
}

Ledger::Ledger(std::string path) : path_(std::move(path)) {
    if (::access(path_.c_str(), F_OK) == 0) {
        std::string content = read_file(path_);
        std::size_t pos = 0;
        while (pos < content.size()) {
            auto nl = content.find('\n', pos);
            std::string line = content.substr(pos, nl == std::string::npos ? std::string::npos
                                                                           : nl - pos);
            if (!line.empty()) {
                auto j = nlohmann::json::parse(line, nullptr, false);
                if (!j.is_discarded()) {
                    entries_.push_back(LedgerEntry::from_json(j));
                }
            }
            if (nl == std::string::npos) break;
            pos = nl + 1;
        }
    }
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
}

Ledger::~Ledger() {
    if (fd_ >= 0) ::close(fd_);
}

std::string Ledger::append(LedgerEntry entry) {
    return append_batch({std::move(entry)}).front();
}

std::vector<std::string> Ledger::append_batch(std::vector<LedgerEntry> batch) {
    for (const auto& e : batch) {
        if (e.amount <= 0) {
            throw InvalidSplit("ledger entries must carry a positive amount");
        }
    }
    std::vector<std::string> refs;
    refs.reserve(batch.size());
    persist(batch);
    for (auto& e : batch) {
        refs.push_back("le-" + std::to_string(entries_.size()));
        entries_.push_back(std::move(e));
    }
    return refs;
}

void Ledger::persist(const std::vector<LedgerEntry>& batch) {
    if (fd_ < 0) return;
    std::string blob;
    for (const auto& e : batch) {
        blob += canonical_dump(e.to_json());
        blob += '\n';
    }
    // single write + fsync so a tier1 charge and its payouts land together
    ssize_t n = ::write(fd_, blob.data(), blob.size());
    (void)n;
    ::fsync(fd_);
}

std::map<std::string, micro_t> Ledger::balances() const {
    std::map<std::string, micro_t> out;
    for (const auto& e : entries_) {
        out[e.payer] -= e.amount;
        out[e.payee] += e.amount;
    }
    return out;
}

std::map<std::string, micro_t> Ledger::totals_by_kind() const {
    std::map<std::string, micro_t> out;
    for (const auto& e : entries_) {
        out[entry_kind_name(e.kind)] += e.amount;
    }
    return out;
}

Tier1Charge charge_tier1(Ledger& ledger, const graph::SkillRecord& record,
                         const std::string& payer, micro_t fee, const FeeSplit& split,
                         time_ms now, time_ms maintainer_window_ms) {
    FeeParts parts = split_fee(fee, split);

    std::map<std::string, micro_t> contributor_payouts =
        distribute_contributor_share(parts.contributors, record.attributions);

    // Maintainer share: contributors with a commit inside the window,
    // weighted by score. Folded into the contributor pool when none qualify.
    std::map<std::string, double> maintainers;
    for (const auto& [id, score] : record.attributions) {
        auto it = record.last_commit_at.find(id);
        if (score > 0 && it != record.last_commit_at.end() &&
            now - it->second <= maintainer_window_ms) {
            maintainers[id] = score;
        }
    }
    if (parts.maintainers > 0) {
        auto m_payouts = maintainers.empty()
                             ? distribute_contributor_share(parts.maintainers, record.attributions)
                             : distribute_contributor_share(parts.maintainers, maintainers);
        for (const auto& [id, amount] : m_payouts) {
            contributor_payouts[id] += amount;
        }
    }

    std::vector<LedgerEntry> batch;
    batch.push_back({now, EntryKind::tier1, payer, "registry-escrow", fee, record.id});
    for (const auto& [id, amount] : contributor_payouts) {
        if (amount > 0) {
            batch.push_back({now, EntryKind::payout, "registry-escrow", id, amount, record.id});
        }
    }
    if (parts.infrastructure > 0) {
        batch.push_back({now, EntryKind::payout, "registry-escrow", "infrastructure",
                         parts.infrastructure, record.id});
    }
    if (parts.treasury > 0) {
        batch.push_back(
            {now, EntryKind::payout, "registry-escrow", "treasury", parts.treasury, record.id});
    }

    auto refs = ledger.append_batch(std::move(batch));
    Tier1Charge charge;
    charge.tier1_ref = refs.front();
    charge.payout_refs.assign(refs.begin() + 1, refs.end());
    charge.parts = parts;
    return charge;
}

} // namespace routegraph::econ
