#include "routegraph/fleet.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace routegraph::simnet {

FleetConfig FleetConfig::from_json(const nlohmann::json& j) {
    FleetConfig cfg;
    cfg.n_agents = j.value("n_agents", 1);
    cfg.n_sites = j.value("n_sites", 0);
    cfg.steps = j.value("steps", 1);
    cfg.seed = j.value("seed", static_cast<std::uint64_t>(1));
    if (j.contains("fee_schedule")) {
        cfg.fees = econ::FeeSchedule::from_json(j["fee_schedule"]);
    }
    if (j.contains("cost_model")) {
        cfg.cost_model = econ::CostModel::from_json(j["cost_model"]);
    }
    cfg.sites = sites_from_json(j);
    if (cfg.n_sites <= 0) {
        cfg.n_sites = static_cast<int>(cfg.sites.size());
    }
    cfg.start_time = j.value("start_time", static_cast<time_ms>(1'700'000'000'000));
    return cfg;
}

nlohmann::json FleetMetrics::to_json() const {
    return nlohmann::json{{"cache_hit_rate", cache_hit_rate},
                          {"mean_cached_ms", mean_cached_ms},
                          {"mean_graph_ms", mean_graph_ms},
                          {"mean_discovery_ms", mean_discovery_ms},
                          {"mean_browser_ms", mean_browser_ms},
                          {"total_fees_by_tier", total_fees_by_tier},
                          {"payouts_by_contributor", payouts_by_contributor},
                          {"tier3_spend_by_agent", tier3_spend_by_agent},
                          {"resolutions_by_source", resolutions_by_source},
                          {"records_created", records_created},
                          {"observed_breakeven", observed_breakeven}};
}

std::string FleetMetrics::to_csv() const {
    std::ostringstream out;
    out << "agent,host,source,total_ms,fee_count\n";
    for (const auto& s : samples) {
        out << s.agent << "," << s.host << "," << s.source << "," << s.total_ms << ","
            << s.fee_count << "\n";
    }
    return out.str();
}

FleetMetrics run_fleet(const FleetConfig& config) {
    VirtualClock clock(config.start_time);
    SimWeb web(clock, config.seed);

    int site_count = std::min<int>(config.n_sites, static_cast<int>(config.sites.size()));
    std::vector<std::string> hosts;
    for (int i = 0; i < site_count; ++i) {
        web.add_site(config.sites[static_cast<std::size_t>(i)]);
        hosts.push_back(config.sites[static_cast<std::size_t>(i)].host);
    }

    auto adapter = std::make_shared<pay402::MockSettlementAdapter>();
    graph::Registry registry(econ::make_delta_scorer());
    econ::Ledger ledger;

    for (const auto& site : config.sites) {
        if (site.flags.tier2_opt_in) {
            registry.register_site_owner(site.host, site.flags.tier2_fee);
        }
    }

    orch::RegistryService::Config service_config;
    service_config.fees = config.fees;
    service_config.cost_model = config.cost_model;
    orch::RegistryService service(registry, ledger, adapter, clock, service_config,
                                  config.seed * 7919 + 17);

    struct Agent {
        std::string id;
        std::unique_ptr<orch::LocalRegistryClient> client;
        std::unique_ptr<distill::CredentialVault> vault;
        std::unique_ptr<orch::RouteCache> cache;
        std::unique_ptr<orch::Orchestrator> orchestrator;
    };
    std::vector<Agent> agents;
    for (int i = 0; i < config.n_agents; ++i) {
        Agent agent;
        agent.id = "agent-" + std::to_string(i + 1);
        pay402::Wallet wallet{agent.id,
                              sha256_hex("wallet|" + agent.id + "|" + std::to_string(config.seed))};
        adapter->register_wallet(wallet);

        agent.client = std::make_unique<orch::LocalRegistryClient>(service, wallet);
        agent.vault = std::make_unique<distill::CredentialVault>();
        agent.cache = std::make_unique<orch::RouteCache>();

        orch::OrchestratorConfig ocfg;
        ocfg.agent_id = agent.id;
        ocfg.fees = config.fees;
        ocfg.cost_model = config.cost_model;
        agent.orchestrator = std::make_unique<orch::Orchestrator>(
            ocfg, *agent.client, web, *agent.vault, *agent.cache, ledger);
        agents.push_back(std::move(agent));
    }

    std::mt19937_64 rng(config.seed);
    FleetMetrics metrics;
    std::map<std::string, std::vector<time_ms>> times_by_source;
    std::vector<time_ms> browser_times;

    for (int step = 0; step < config.steps; ++step) {
        for (auto& agent : agents) {
            if (hosts.empty()) break;
            const std::string& host =
                hosts[rng() % hosts.size()];
            const SimSite* site = web.site(host);
            if (!site || site->intents.empty()) continue;
            const SimIntent& sim_intent = site->intents[rng() % site->intents.size()];

            orch::IntentQuery q;
            q.text = sim_intent.text;
            q.domain_hint = host;
            q.params = sim_intent.params;

            browser_times.push_back(browser_task_ms(web, host, sim_intent.page_path));

            try {
                auto result = agent.orchestrator->resolve_intent(q);
                metrics.resolutions_by_source[result.source] += 1;
                times_by_source[result.source].push_back(result.total_ms);
                metrics.samples.push_back({agent.id, host, result.source, result.total_ms,
                                           result.fees_paid.size()});
            } catch (const Error& err) {
                metrics.resolutions_by_source["failed:" + err.code()] += 1;
                metrics.samples.push_back({agent.id, host, "failed", 0, 0});
            }
        }
    }

    auto mean = [](const std::vector<time_ms>& xs) {
        if (xs.empty()) return 0.0;
        double sum = 0;
        for (auto x : xs) sum += static_cast<double>(x);
        return sum / static_cast<double>(xs.size());
    };

    std::int64_t total = 0, cache_hits = 0;
    for (const auto& [source, count] : metrics.resolutions_by_source) {
        if (source.starts_with("failed")) continue;
        total += count;
        if (source == "cache") cache_hits += count;
    }
    metrics.cache_hit_rate = total > 0 ? static_cast<double>(cache_hits) /
                                             static_cast<double>(total)
                                       : 0.0;
    metrics.mean_cached_ms = mean(times_by_source["cache"]);
    metrics.mean_graph_ms = mean(times_by_source["graph"]);
    metrics.mean_discovery_ms = mean(times_by_source["discovery"]);
    metrics.mean_browser_ms = mean(browser_times);
    metrics.records_created = static_cast<std::int64_t>(registry.size());
    metrics.total_fees_by_tier = ledger.totals_by_kind();

    for (const auto& entry : ledger.entries()) {
        if (entry.kind == econ::EntryKind::payout && entry.payee != "infrastructure" &&
            entry.payee != "treasury") {
            metrics.payouts_by_contributor[entry.payee] += entry.amount;
        }
    }
    for (const auto& agent : agents) {
        metrics.tier3_spend_by_agent[agent.id] = agent.orchestrator->cumulative_tier3_spend();
    }

    if (metrics.mean_cached_ms > 0 && metrics.mean_discovery_ms > 0 &&
        metrics.mean_browser_ms > metrics.mean_cached_ms) {
        metrics.observed_breakeven = econ::breakeven(
            static_cast<std::int64_t>(metrics.mean_discovery_ms),
            static_cast<std::int64_t>(metrics.mean_cached_ms),
            static_cast<std::int64_t>(metrics.mean_browser_ms));
    }
    return metrics;
}

} // namespace routegraph::simnet
