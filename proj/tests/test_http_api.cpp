#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include "routegraph/http_api.hpp"
#include "routegraph/fleet.hpp"

using namespace routegraph;
using namespace routegraph::orch;

namespace {

nlohmann::json fixture_json(const std::string& name) {
    return nlohmann::json::parse(read_file(std::string(ROUTEGRAPH_FIXTURE_DIR) + "/" + name));
}

struct ServerRig {
    VirtualClock clock{1'760'000'000'000};
    simnet::SimWeb web{clock, 7};
    graph::Registry registry{econ::make_delta_scorer()};
    econ::Ledger ledger;
    std::shared_ptr<pay402::MockSettlementAdapter> adapter =
        std::make_shared<pay402::MockSettlementAdapter>();
    RegistryService service;
    pay402::Wallet wallet{"agent-1", "agent-1-secret"};
    distill::CredentialVault vault;
    RouteCache cache;
    LocalRegistryClient local_client;
    Orchestrator orchestrator;
    HttpApiServer server;
    int port = 0;

    static RegistryService::Config config() { return {}; }
    static OrchestratorConfig orch_config() {
        OrchestratorConfig c;
        c.agent_id = "agent-1";
        return c;
    }

    ServerRig()
        : service(registry, ledger, adapter, clock, config(), 42),
          local_client(service, wallet),
          orchestrator(orch_config(), local_client, web, vault, cache, ledger),
          server(service, &orchestrator) {
        adapter->register_wallet(wallet);
        for (auto& site : simnet::sites_from_json(fixture_json("simnet_basic.json"))) {
            web.add_site(std::move(site));
        }
        port = server.start();
    }

    void seed_shop_record() {
        auto pkg = orchestrator.fallback_discover(
            IntentQuery{"shop sim products", std::string("shop.sim"), {{"id", "101"}}},
            "shop.sim");
        registry.publish(pkg, graph::validate_for_publish(pkg), clock.now_ms());
    }
};

} // namespace

TEST_CASE("gated search replies 402 with terms, then 200 with a valid proof") {
    ServerRig rig;
    rig.seed_shop_record();
    httplib::Client http("127.0.0.1", rig.port);

    auto first = http.Get("/v1/skills/search?q=shop%20sim%20products&k=3");
    REQUIRE(first);
    CHECK(first->status == 402);
    auto challenge = nlohmann::json::parse(first->body);
    CHECK(challenge["payment_required"] == true);
    auto terms = pay402::PaymentTerms::from_json(challenge["terms"]);
    CHECK(terms.amount == 2'000); // default tier3 fee

    auto proof = pay402::sign_proof(terms, rig.wallet);
    httplib::Headers headers{{pay402::kProofHeader, proof.to_header_value()}};
    auto second = http.Get("/v1/skills/search?q=shop%20sim%20products&k=3", headers);
    REQUIRE(second);
    CHECK(second->status == 200);
    auto body = nlohmann::json::parse(second->body);
    REQUIRE(body["results"].size() >= 1);
    CHECK(body["results"][0]["id"] == "skill:shop.sim");
    CHECK(body.contains("fee_ref"));
}

TEST_CASE("replaying the same proof is rejected as replay") {
    ServerRig rig;
    rig.seed_shop_record();
    httplib::Client http("127.0.0.1", rig.port);

    auto first = http.Get("/v1/skills/search?q=shop&k=1");
    auto terms = pay402::PaymentTerms::from_json(nlohmann::json::parse(first->body)["terms"]);
    auto proof = pay402::sign_proof(terms, rig.wallet);
    httplib::Headers headers{{pay402::kProofHeader, proof.to_header_value()}};

    auto paid = http.Get("/v1/skills/search?q=shop&k=1", headers);
    CHECK(paid->status == 200);
    auto replayed = http.Get("/v1/skills/search?q=shop&k=1", headers);
    CHECK(replayed->status == 409);
    CHECK(nlohmann::json::parse(replayed->body)["error"] == "replay");
}

TEST_CASE("a proof over tampered terms is rejected as bad signature") {
    ServerRig rig;
    rig.seed_shop_record();
    httplib::Client http("127.0.0.1", rig.port);

    auto first = http.Get("/v1/skills/search?q=shop&k=1");
    auto terms = pay402::PaymentTerms::from_json(nlohmann::json::parse(first->body)["terms"]);
    auto cheaper = terms;
    cheaper.amount = 1; // tampered amount
    auto proof = pay402::sign_proof(cheaper, rig.wallet);
    httplib::Headers headers{{pay402::kProofHeader, proof.to_header_value()}};
    auto reply = http.Get("/v1/skills/search?q=shop&k=1", headers);
    CHECK(reply->status == 400);
    CHECK(nlohmann::json::parse(reply->body)["error"] == "bad-signature");
}

TEST_CASE("the handshake costs exactly one extra round trip versus ungated") {
    ServerRig rig; // registry intentionally empty: the search is served free
    HttpRegistryClient client("127.0.0.1", rig.port, rig.wallet);

    auto empty = client.search("anything", 3);
    CHECK(empty.empty_index);
    std::int64_t ungated_trips = client.request_count();
    CHECK(ungated_trips == 1);

    rig.seed_shop_record();
    auto paid = client.search("shop sim products", 3);
    CHECK_FALSE(paid.results.empty());
    CHECK(paid.fee_ref.has_value());
    std::int64_t gated_trips = client.request_count() - ungated_trips;
    CHECK(gated_trips == 2); // exactly one extra round trip
}

TEST_CASE("install over HTTP returns the package and charges tier1") {
    ServerRig rig;
    rig.seed_shop_record();
    HttpRegistryClient client("127.0.0.1", rig.port, rig.wallet);

    auto install = client.install("skill:shop.sim");
    CHECK(install.package.domain == "shop.sim");
    CHECK(install.package.endpoints.size() == 2);
    CHECK(install.record.id == "skill:shop.sim");
    CHECK(install.fee_ref.has_value());

    micro_t tier1 = rig.ledger.totals_by_kind().at("tier1");
    CHECK(tier1 > 0);
    CHECK(tier1 < econ::rediscovery_cost(rig.service.config().cost_model));
}

TEST_CASE("publish over HTTP validates and creates the record") {
    ServerRig rig;
    HttpRegistryClient client("127.0.0.1", rig.port, rig.wallet);

    auto pkg = rig.orchestrator.fallback_discover(
        IntentQuery{"news sim stories", std::string("news.sim"), {}}, "news.sim");
    auto outcome = client.publish(pkg);
    CHECK(outcome.record_id == "skill:news.sim");
    CHECK_FALSE(outcome.merged);
    CHECK(rig.registry.size() == 1);

    distill::SkillPackage bad;
    bad.domain = "bad.example";
    CHECK_THROWS_AS(client.publish(bad), graph::ValidationFailed);
}

TEST_CASE("unknown record install returns 404 -> Unresolvable") {
    ServerRig rig;
    HttpRegistryClient client("127.0.0.1", rig.port, rig.wallet);
    CHECK_THROWS_AS(client.install("skill:ghost.example"), Unresolvable);
}

TEST_CASE("POST /v1/intent/resolve runs the three-path chain end to end") {
    ServerRig rig;
    httplib::Client http("127.0.0.1", rig.port);

    IntentQuery q{"shop sim products price product detail api", std::string("shop.sim"),
                  {{"id", "101"}}};
    auto res = http.Post("/v1/intent/resolve", canonical_dump(q.to_json()), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto body = nlohmann::json::parse(res->body);
    CHECK(body["timing"]["source"] == "discovery");
    CHECK(body["data"]["id"] == 101);

    auto again = http.Post("/v1/intent/resolve", canonical_dump(q.to_json()),
                           "application/json");
    CHECK(nlohmann::json::parse(again->body)["timing"]["source"] == "cache");

    auto bad = http.Post("/v1/intent/resolve", "{not json", "application/json");
    CHECK(bad->status == 400);
}
