#include "routegraph/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "routegraph/capture.hpp"
#include "routegraph/distill.hpp"
#include "routegraph/econ.hpp"
#include "routegraph/errors.hpp"
#include "routegraph/fleet.hpp"
#include "routegraph/orchestrator.hpp"
#include "routegraph/registry.hpp"
#include "routegraph/simnet.hpp"
#include "routegraph/trust.hpp"
#include "routegraph/util.hpp"

namespace routegraph::cli {

namespace {

struct CliConfig {
    std::string registry_dir = "./registry";
    std::string wallet_path = "./wallet.json";
    std::string vault_path = "./vault.json";
    std::string cache_path = "./route_cache.json";
    std::string ledger_path = "./ledger.jsonl";
    std::string skills_dir = "./skills";
    econ::FeeSchedule fees;
    econ::CostModel cost_model = econ::CostModel::browser_default();
};

CliConfig load_config(const std::string& config_path) {
    CliConfig cfg;
    std::string path = config_path.empty() ? "routegraph.json" : config_path;
    if (std::filesystem::exists(path)) {
        auto j = nlohmann::json::parse(read_file(path), nullptr, false);
        if (!j.is_discarded()) {
            cfg.registry_dir = j.value("registry", cfg.registry_dir);
            cfg.wallet_path = j.value("wallet", cfg.wallet_path);
            cfg.vault_path = j.value("vault", cfg.vault_path);
            cfg.cache_path = j.value("cache", cfg.cache_path);
            cfg.ledger_path = j.value("ledger", cfg.ledger_path);
            cfg.skills_dir = j.value("skills", cfg.skills_dir);
            if (j.contains("fee_schedule")) {
                cfg.fees = econ::FeeSchedule::from_json(j["fee_schedule"]);
            }
            if (j.contains("cost_model")) {
                cfg.cost_model = econ::CostModel::from_json(j["cost_model"]);
            }
        }
    }
    if (const char* env = std::getenv("ROUTEGRAPH_REGISTRY")) {
        cfg.registry_dir = env;
    }
    if (const char* env = std::getenv("ROUTEGRAPH_WALLET")) {
        cfg.wallet_path = env;
    }
    return cfg;
}

std::string dump(const nlohmann::json& j, bool pretty) {
    return (pretty ? j.dump(2) : canonical_dump(j)) + "\n";
}

int exit_code_for(const std::string& code) {
    static const std::set<std::string> kInput = {"malformed-archive", "empty-archive",
                                                 "not-structured"};
    static const std::set<std::string> kPayment = {"bad-signature", "expired", "replay",
                                                   "amount-mismatch", "payment-refused",
                                                   "unknown-wallet"};
    static const std::set<std::string> kUnresolvable = {"unresolvable", "discovery-empty",
                                                        "empty-index", "not-found"};
    if (kInput.count(code)) return 3;
    if (code == "validation-failed") return 4;
    if (kPayment.count(code)) return 5;
    if (kUnresolvable.count(code)) return 6;
    return 7;
}

pay402::Wallet load_or_create_wallet(const std::string& path) {
    if (std::filesystem::exists(path)) {
        return pay402::Wallet::load(path);
    }
    pay402::Wallet wallet{"local-agent", sha256_hex("wallet|" + path)};
    wallet.save(path);
    return wallet;
}

time_ms effective_now(std::int64_t now_flag) {
    if (now_flag >= 0) return now_flag;
    return SystemClock{}.now_ms();
}

struct ResolveEnv {
    VirtualClock clock;
    simnet::SimWeb web;
    graph::Registry registry;
    econ::Ledger ledger;
    std::shared_ptr<pay402::MockSettlementAdapter> adapter;
    distill::CredentialVault vault;
    orch::RouteCache cache;
    pay402::Wallet wallet;

    ResolveEnv(const CliConfig& cfg, const std::string& simnet_path, time_ms now)
        : clock(now), web(clock, 1), registry(econ::make_delta_scorer()),
          ledger(cfg.ledger_path), adapter(std::make_shared<pay402::MockSettlementAdapter>()),
          cache(cfg.cache_path), wallet(load_or_create_wallet(cfg.wallet_path)) {
        if (!simnet_path.empty()) {
            auto config = nlohmann::json::parse(read_file(simnet_path));
            for (auto& site : simnet::sites_from_json(config)) {
                if (site.flags.tier2_opt_in) {
                    registry.register_site_owner(site.host, site.flags.tier2_fee);
                }
                web.add_site(std::move(site));
            }
        }
        if (std::filesystem::exists(cfg.registry_dir)) {
            registry.load_from(cfg.registry_dir);
        }
        vault = distill::CredentialVault::load(cfg.vault_path);
        adapter->register_wallet(wallet);
    }
};

} // namespace

CliResult run(const std::vector<std::string>& args) {
    CLI::App app{"shared route graph toolkit"};
    app.require_subcommand(1);

    bool pretty = false;
    std::string config_path;
    std::int64_t now_flag = -1;
    app.add_flag("--pretty", pretty, "human-readable JSON output");
    app.add_option("--config", config_path, "config file (default ./routegraph.json)");
    app.add_option("--now", now_flag, "timestamp override, ms since epoch");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse a HAR file and classify its entries");
    std::string ingest_har, ingest_policy, ingest_diagnostics;
    ingest->add_option("har", ingest_har, "HAR file")->required();
    ingest->add_option("--policy", ingest_policy, "filter policy JSON");
    ingest->add_option("--diagnostics", ingest_diagnostics, "write skipped/truncated JSON lines");

    // distill
    auto* distill_cmd = app.add_subcommand("distill", "distill a HAR file into skill packages");
    std::string distill_har, distill_out, distill_contributor = "local-agent";
    distill_cmd->add_option("har", distill_har, "HAR file")->required();
    distill_cmd->add_option("--out", distill_out, "output skill directory")->required();
    distill_cmd->add_option("--contributor", distill_contributor, "contributor id");

    // publish
    auto* publish_cmd = app.add_subcommand("publish", "publish a skill directory to the registry");
    std::string publish_dir;
    publish_cmd->add_option("skill-dir", publish_dir, "skill directory")->required();

    // search
    auto* search_cmd = app.add_subcommand("search", "search the registry");
    std::string search_query;
    std::size_t search_k = 5;
    search_cmd->add_option("query", search_query, "query text")->required();
    search_cmd->add_option("-k", search_k, "result count");

    // resolve
    auto* resolve_cmd = app.add_subcommand("resolve", "resolve an intent (three-path chain)");
    std::string resolve_text, resolve_domain, resolve_simnet;
    std::vector<std::string> resolve_params;
    resolve_cmd->add_option("intent", resolve_text, "intent text")->required();
    resolve_cmd->add_option("--domain", resolve_domain, "domain hint");
    resolve_cmd->add_option("--simnet", resolve_simnet, "simnet config JSON")->required();
    resolve_cmd->add_option("--param", resolve_params, "intent parameter k=v");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the verification pass");
    bool verify_once = false;
    std::string verify_simnet;
    verify_cmd->add_flag("--once", verify_once, "run a single pass");
    verify_cmd->add_option("--simnet", verify_simnet, "simnet config JSON")->required();

    // ledger
    auto* ledger_cmd = app.add_subcommand("ledger", "render ledger balances");
    std::string ledger_party;
    ledger_cmd->add_option("--party", ledger_party, "filter to one party");

    // simulate
    auto* simulate_cmd = app.add_subcommand("simulate", "run a deterministic agent fleet");
    std::string simulate_config, simulate_csv;
    simulate_cmd->add_option("fleet-config", simulate_config, "fleet config JSON")->required();
    simulate_cmd->add_option("--csv", simulate_csv, "write per-resolution CSV");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "cached-vs-browser latency comparison");
    std::string bench_config;
    bench_cmd->add_option("simnet-config", bench_config, "simnet config JSON")->required();

    // allow global flags (--pretty, --now, --config) after the subcommand
    for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
        sub->fallthrough();
    }

    CliResult result;
    std::vector<const char*> argv;
    argv.push_back("routegraph");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        result.output = app.help();
        return result;
    } catch (const CLI::ParseError& e) {
        result.exit_code = 2;
        result.error = std::string(e.what()) + "\n";
        return result;
    }

    CliConfig cfg = load_config(config_path);
    const time_ms now = effective_now(now_flag);

    try {
        if (*ingest) {
            auto policy = ingest_policy.empty()
                              ? capture::FilterPolicy::defaults()
                              : capture::FilterPolicy::from_json(
                                    nlohmann::json::parse(read_file(ingest_policy)));
            capture::ParseDiagnostics diagnostics;
            auto archive = capture::parse_archive(read_file(ingest_har), &diagnostics, policy);
            if (!ingest_diagnostics.empty()) {
                write_file(ingest_diagnostics, diagnostics.to_json_lines());
            }
            nlohmann::json kept = nlohmann::json::array();
            int dropped = 0;
            for (const auto& entry : archive.entries) {
                auto verdict = capture::classify_entry(entry, policy);
                if (verdict.keep) {
                    kept.push_back({{"method", entry.method},
                                    {"url", entry.url},
                                    {"reasons", verdict.reasons}});
                } else {
                    ++dropped;
                }
            }
            result.output = dump(nlohmann::json{{"entries", archive.entries.size()},
                                                {"kept", kept.size()},
                                                {"dropped", dropped},
                                                {"kept_entries", kept},
                                                {"skipped", diagnostics.skipped.size()}},
                                 pretty);
        } else if (*distill_cmd) {
            auto policy = capture::FilterPolicy::defaults();
            auto archive = capture::parse_archive(read_file(distill_har), nullptr, policy);
            auto kept = capture::filter_archive(archive, policy);
            auto vault = distill::CredentialVault::load(cfg.vault_path);
            auto packages = distill::distill(kept, vault, distill_contributor, now);
            vault.save(cfg.vault_path);

            nlohmann::json report = nlohmann::json::array();
            for (const auto& pkg : packages) {
                std::string dir = packages.size() == 1 ? distill_out
                                                       : distill_out + "/" + pkg.domain;
                distill::write_skill_dir(pkg, dir);
                report.push_back({{"domain", pkg.domain},
                                  {"endpoints", pkg.endpoints.size()},
                                  {"dir", dir}});
            }
            result.output = dump(nlohmann::json{{"packages", report}}, pretty);
        } else if (*publish_cmd) {
            auto pkg = distill::load_skill_dir(publish_dir);
            auto report = graph::validate_for_publish(pkg);
            graph::Registry registry(econ::make_delta_scorer());
            if (std::filesystem::exists(cfg.registry_dir)) {
                registry.load_from(cfg.registry_dir);
            }
            auto outcome = registry.publish(pkg, report, now);
            registry.save(cfg.registry_dir);
            result.output = dump(nlohmann::json{{"record_id", outcome.record_id},
                                                {"merged", outcome.merged},
                                                {"delta_score", outcome.delta_score},
                                                {"caveats", report.caveats}},
                                 pretty);
        } else if (*search_cmd) {
            graph::Registry registry;
            if (std::filesystem::exists(cfg.registry_dir)) {
                registry.load_from(cfg.registry_dir);
            }
            auto results = registry.search(search_query, search_k, graph::ScoringWeights{}, now);
            nlohmann::json out = nlohmann::json::array();
            for (const auto& r : results) out.push_back(r.to_json());
            result.output = dump(nlohmann::json{{"results", out}}, pretty);
        } else if (*resolve_cmd) {
            ResolveEnv env(cfg, resolve_simnet, now);
            orch::RegistryService::Config service_cfg;
            service_cfg.fees = cfg.fees;
            service_cfg.cost_model = cfg.cost_model;
            orch::RegistryService service(env.registry, env.ledger, env.adapter, env.clock,
                                          service_cfg, 1);
            orch::LocalRegistryClient client(service, env.wallet);
            orch::OrchestratorConfig ocfg;
            ocfg.agent_id = env.wallet.id;
            ocfg.fees = cfg.fees;
            ocfg.cost_model = cfg.cost_model;
            ocfg.skill_store_dir = cfg.skills_dir;
            orch::Orchestrator orchestrator(ocfg, client, env.web, env.vault, env.cache,
                                            env.ledger);

            orch::IntentQuery q;
            q.text = resolve_text;
            if (!resolve_domain.empty()) q.domain_hint = resolve_domain;
            for (const auto& p : resolve_params) {
                auto eq = p.find('=');
                if (eq != std::string::npos) {
                    q.params[p.substr(0, eq)] = p.substr(eq + 1);
                }
            }
            auto res = orchestrator.resolve_intent(q);
            env.registry.save(cfg.registry_dir);
            env.vault.save(cfg.vault_path);
            result.output = dump(res.to_json(), pretty);
        } else if (*verify_cmd) {
            (void)verify_once;
            ResolveEnv env(cfg, verify_simnet, now);
            trust::Prober prober = [&](const graph::SkillRecord& record,
                                       const std::string& endpoint_key) -> trust::ProbeResult {
                const auto* endpoint = record.find_endpoint(endpoint_key);
                if (!endpoint) return {trust::Outcome::failure, std::nullopt};
                auto path = distill::fill_template(endpoint->path_template, endpoint->path_params,
                                                   {{"id", "1"}, {"param", "probe"}});
                if (!path) return {trust::Outcome::failure, std::nullopt};
                try {
                    auto response = env.web.serve(
                        {"GET", "https://" + record.domain + *path, {}, std::nullopt});
                    if (response.status == 200) {
                        return {trust::Outcome::success, response.body};
                    }
                    return {response.status == 599 ? trust::Outcome::timeout
                                                   : trust::Outcome::failure,
                            std::nullopt};
                } catch (const Error&) {
                    return {trust::Outcome::failure, std::nullopt};
                }
            };
            auto outcomes = trust::verification_pass(env.registry, prober,
                                                     trust::VerificationConfig{}, now);
            env.registry.save(cfg.registry_dir);
            nlohmann::json out = nlohmann::json::array();
            for (const auto& o : outcomes) {
                out.push_back({{"record_id", o.record_id},
                               {"endpoint", o.endpoint_key},
                               {"outcome", trust::outcome_name(o.outcome)},
                               {"drift", o.drift.to_json()}});
            }
            result.output = dump(nlohmann::json{{"probes", out}}, pretty);
        } else if (*ledger_cmd) {
            econ::Ledger ledger(cfg.ledger_path);
            auto balances = ledger.balances();
            nlohmann::json out = nlohmann::json::object();
            for (const auto& [party, amount] : balances) {
                if (!ledger_party.empty() && party != ledger_party) continue;
                out[party] = amount;
            }
            result.output = dump(nlohmann::json{{"balances", out},
                                                {"entries", ledger.entries().size()}},
                                 pretty);
        } else if (*simulate_cmd) {
            auto config =
                simnet::FleetConfig::from_json(nlohmann::json::parse(read_file(simulate_config)));
            auto metrics = simnet::run_fleet(config);
            if (!simulate_csv.empty()) {
                write_file(simulate_csv, metrics.to_csv());
            }
            result.output = dump(metrics.to_json(), pretty);
        } else if (*bench_cmd) {
            auto config_json = nlohmann::json::parse(read_file(bench_config));
            simnet::FleetConfig fleet_config;
            fleet_config.sites = simnet::sites_from_json(config_json);
            fleet_config.n_agents = 1;
            fleet_config.n_sites = static_cast<int>(fleet_config.sites.size());
            fleet_config.seed = config_json.value("seed", 1);

            VirtualClock clock(now);
            simnet::SimWeb web(clock, fleet_config.seed);
            for (auto& site : fleet_config.sites) web.add_site(site);

            auto adapter = std::make_shared<pay402::MockSettlementAdapter>();
            graph::Registry registry(econ::make_delta_scorer());
            econ::Ledger ledger;
            orch::RegistryService::Config service_cfg;
            service_cfg.fees = cfg.fees;
            service_cfg.cost_model = cfg.cost_model;
            orch::RegistryService service(registry, ledger, adapter, clock, service_cfg, 1);
            pay402::Wallet wallet{"bench-agent", sha256_hex("bench-wallet")};
            adapter->register_wallet(wallet);
            orch::LocalRegistryClient client(service, wallet);
            distill::CredentialVault vault;
            orch::RouteCache cache;
            orch::OrchestratorConfig ocfg;
            ocfg.agent_id = "bench-agent";
            ocfg.fees = cfg.fees;
            ocfg.cost_model = cfg.cost_model;
            orch::Orchestrator orchestrator(ocfg, client, web, vault, cache, ledger);

            nlohmann::json rows = nlohmann::json::array();
            std::vector<double> ratios;
            for (const auto& host : web.hosts()) {
                const auto* site = web.site(host);
                for (const auto& intent : site->intents) {
                    orch::IntentQuery q{intent.text, host, intent.params};
                    try {
                        orchestrator.resolve_intent(q); // warm
                        auto warmed = orchestrator.resolve_intent(q);
                        time_ms browser = simnet::browser_task_ms(web, host, intent.page_path);
                        double ratio = warmed.total_ms > 0
                                           ? static_cast<double>(browser) /
                                                 static_cast<double>(warmed.total_ms)
                                           : 0.0;
                        ratios.push_back(ratio);
                        rows.push_back({{"host", host},
                                        {"intent", intent.text},
                                        {"cached_ms", warmed.total_ms},
                                        {"browser_ms", browser},
                                        {"speedup", ratio}});
                    } catch (const Error& err) {
                        rows.push_back({{"host", host},
                                        {"intent", intent.text},
                                        {"error", err.code()}});
                    }
                }
            }
            double mean_ratio = 0.0, median_ratio = 0.0;
            if (!ratios.empty()) {
                for (double r : ratios) mean_ratio += r;
                mean_ratio /= static_cast<double>(ratios.size());
                std::sort(ratios.begin(), ratios.end());
                median_ratio = ratios[ratios.size() / 2];
            }
            result.output = dump(nlohmann::json{{"tasks", rows},
                                                {"mean_speedup", mean_ratio},
                                                {"median_speedup", median_ratio}},
                                 pretty);
        }
    } catch (const graph::ValidationFailed& err) {
        result.exit_code = 4;
        result.error = dump(nlohmann::json{{"error", err.code()},
                                           {"message", err.what()},
                                           {"hard_failures", err.failures()}},
                            pretty);
    } catch (const Error& err) {
        result.exit_code = exit_code_for(err.code());
        result.error = dump(nlohmann::json{{"error", err.code()}, {"message", err.what()}},
                            pretty);
    } catch (const std::exception& e) {
        result.exit_code = 1;
        result.error = dump(nlohmann::json{{"error", "internal"}, {"message", e.what()}}, pretty);
    }
    return result;
}

int main_entry(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    auto result = run(args);
    if (!result.output.empty()) std::cout << result.output;
    if (!result.error.empty()) std::cerr << result.error;
    return result.exit_code;
}

} // namespace routegraph::cli
