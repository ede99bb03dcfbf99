// routegraphd — serves the registry HTTP API (search/install/publish, all
// 402-gated where priced) plus the local intent endpoint when a simnet
// config is supplied.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <memory>
#include <thread>

#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "routegraph/econ.hpp"
#include "routegraph/http_api.hpp"
#include "routegraph/orchestrator.hpp"
#include "routegraph/registry.hpp"
#include "routegraph/simnet.hpp"
#include "routegraph/util.hpp"

namespace {
std::function<void()> g_stop;
void handle_signal(int) {
    if (g_stop) g_stop();
}
} // namespace

int main(int argc, char** argv) {
    using namespace routegraph;

    CLI::App app{"route graph registry server"};
    std::string registry_dir = "./registry";
    std::string ledger_path = "./ledger.jsonl";
    std::string simnet_path;
    std::string wallet_path = "./wallet.json";
    std::int64_t now_flag = -1;
    app.add_option("--registry", registry_dir, "registry directory");
    app.add_option("--ledger", ledger_path, "ledger file");
    app.add_option("--simnet", simnet_path, "simnet config enabling /v1/intent/resolve");
    app.add_option("--wallet", wallet_path, "server-side agent wallet");
    app.add_option("--now", now_flag, "virtual clock start, ms since epoch");
    CLI11_PARSE(app, argc, argv);

    VirtualClock clock(now_flag >= 0 ? now_flag : SystemClock{}.now_ms());
    simnet::SimWeb web(clock, 1);

    graph::Registry registry(econ::make_delta_scorer());
    if (std::filesystem::exists(registry_dir)) {
        registry.load_from(registry_dir);
    }
    econ::Ledger ledger(ledger_path);
    auto adapter = std::make_shared<pay402::MockSettlementAdapter>();

    orch::RegistryService::Config config;
    orch::RegistryService service(registry, ledger, adapter, clock, config);

    std::unique_ptr<orch::Orchestrator> orchestrator;
    std::unique_ptr<orch::LocalRegistryClient> client;
    distill::CredentialVault vault;
    orch::RouteCache cache("./route_cache.json");
    if (!simnet_path.empty()) {
        auto sim = nlohmann::json::parse(read_file(simnet_path));
        for (auto& site : simnet::sites_from_json(sim)) {
            if (site.flags.tier2_opt_in) {
                registry.register_site_owner(site.host, site.flags.tier2_fee);
            }
            web.add_site(std::move(site));
        }
        pay402::Wallet wallet{"routegraphd", sha256_hex("routegraphd|" + wallet_path)};
        adapter->register_wallet(wallet);
        client = std::make_unique<orch::LocalRegistryClient>(service, wallet);
        orch::OrchestratorConfig ocfg;
        ocfg.agent_id = wallet.id;
        orchestrator = std::make_unique<orch::Orchestrator>(ocfg, *client, web, vault, cache,
                                                            ledger);
    }

    orch::HttpApiServer server(service, orchestrator.get());
    int port = server.start();
    std::cout << "{\"listening\": " << port << "}" << std::endl;

    std::atomic<bool> running{true};
    g_stop = [&] {
        running.store(false);
        server.stop();
    };
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    if (::isatty(STDIN_FILENO)) {
        // interactive: "quit" or EOF stops the server
        std::string line;
        while (running.load() && std::getline(std::cin, line)) {
            if (line == "quit" || line == "stop") break;
        }
    } else {
        // detached: run until signalled
        while (running.load()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
        }
    }
    server.stop();
    registry.save(registry_dir);
    return 0;
}
