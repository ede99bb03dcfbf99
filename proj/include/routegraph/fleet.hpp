#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/econ.hpp"
#include "routegraph/orchestrator.hpp"
#include "routegraph/simnet.hpp"

namespace routegraph::simnet {

struct FleetConfig {
    int n_agents = 1;
    int n_sites = 1;
    int steps = 1;
    std::uint64_t seed = 1;
    econ::FeeSchedule fees;
    econ::CostModel cost_model = econ::CostModel::browser_default();
    std::vector<SimSite> sites;
    time_ms start_time = 1'700'000'000'000;

    static FleetConfig from_json(const nlohmann::json& j);
};

struct ResolutionSample {
    std::string agent;
    std::string host;
    std::string source;
    time_ms total_ms = 0;
    std::size_t fee_count = 0;
};

struct FleetMetrics {
    double cache_hit_rate = 0.0;
    double mean_cached_ms = 0.0;
    double mean_graph_ms = 0.0;
    double mean_discovery_ms = 0.0;
    double mean_browser_ms = 0.0;
    std::map<std::string, micro_t> total_fees_by_tier;
    std::map<std::string, micro_t> payouts_by_contributor;
    std::map<std::string, micro_t> tier3_spend_by_agent;
    std::map<std::string, std::int64_t> resolutions_by_source;
    std::int64_t records_created = 0;
    std::int64_t observed_breakeven = -1; // -1 when undefined
    std::vector<ResolutionSample> samples;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// Deterministic stepped simulation: every agent resolves one drawn intent
// per step against a shared registry. Identical (config, seed) pairs
// produce identical metrics.
FleetMetrics run_fleet(const FleetConfig& config);

} // namespace routegraph::simnet
