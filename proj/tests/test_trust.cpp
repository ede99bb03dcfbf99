#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "routegraph/registry.hpp"
#include "routegraph/trust.hpp"

using namespace routegraph;
using namespace routegraph::trust;

namespace {

distill::ResponseShape shape_of(const char* json_text) {
    return distill::infer_shape(nlohmann::json::parse(json_text));
}

graph::SkillRecord probe_record(const std::string& domain, bool safe_endpoint,
                                time_ms last_verified) {
    graph::SkillRecord r;
    r.id = graph::Registry::record_id_for_domain(domain);
    r.domain = domain;
    r.manifest_text = "record for " + domain;
    r.embedding = graph::embed_text(r.manifest_text);
    r.last_verified_at = last_verified;
    distill::EndpointTemplate e;
    e.method = safe_endpoint ? "GET" : "POST";
    e.path_template = "/api/data";
    e.response_schema = shape_of(R"({"price":1,"name":"x"})");
    e.safe = safe_endpoint;
    r.endpoints.push_back(e);
    return r;
}

} // namespace

// --- record_outcome -----------------------------------------------------------

TEST_CASE("fresh stats plus one success gives reliability 2/3") {
    ReliabilityStats stats;
    stats = record_outcome(stats, Outcome::success, 10);
    CHECK(stats.successes == 1);
    CHECK(stats.reliability() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("zero observations means the 0.5 prior") {
    ReliabilityStats stats;
    CHECK(stats.reliability() == 0.5);
}

TEST_CASE("success resets the consecutive failure counter") {
    ReliabilityStats stats;
    stats = record_outcome(stats, Outcome::failure, 1);
    stats = record_outcome(stats, Outcome::timeout, 2);
    CHECK(stats.consecutive_failures == 2);
    stats = record_outcome(stats, Outcome::success, 3);
    CHECK(stats.consecutive_failures == 0);
    CHECK(stats.failures == 1);
    CHECK(stats.timeouts == 1);
}

TEST_CASE("reliability stays strictly inside (0,1) and counters stay consistent") {
    std::mt19937_64 rng(4242);
    ReliabilityStats stats;
    for (int i = 0; i < 5'000; ++i) {
        auto outcome = static_cast<Outcome>(rng() % 3);
        stats = record_outcome(stats, outcome, i);
        CHECK(stats.reliability() > 0.0);
        CHECK(stats.reliability() < 1.0);
        CHECK(stats.consecutive_failures <= stats.failures + stats.timeouts);
    }
}

// --- freshness ------------------------------------------------------------------

TEST_CASE("freshness matches the stated decay points") {
    CHECK(freshness(0) == 1.0);
    CHECK(freshness(30) == 0.5);
    CHECK(freshness(90) == 0.25);
}

TEST_CASE("freshness is strictly decreasing and bounded in (0,1]") {
    double prev = freshness(0);
    CHECK(prev == 1.0);
    for (double d = 0.5; d < 2'000; d *= 1.7) {
        double f = freshness(d);
        CHECK(f < prev);
        CHECK(f > 0.0);
        prev = f;
    }
    CHECK_THROWS_AS(freshness(-1), NegativeAge);
}

// --- detect_drift ------------------------------------------------------------------

TEST_CASE("identical shapes produce an empty non-critical report") {
    auto s = shape_of(R"({"price":1,"items":[{"sku":"a"}]})");
    auto report = detect_drift(s, s);
    CHECK(report.empty());
    CHECK_FALSE(report.critical);
}

TEST_CASE("removed field is critical") {
    auto documented = shape_of(R"({"price":1,"name":"x"})");
    auto live = shape_of(R"({"name":"x"})");
    auto report = detect_drift(documented, live);
    REQUIRE(report.removed_fields.size() == 1);
    CHECK(report.removed_fields[0] == "price");
    CHECK(report.critical);
}

TEST_CASE("added field is informational only") {
    auto documented = shape_of(R"({"name":"x"})");
    auto live = shape_of(R"({"name":"x","etag":"abc"})");
    auto report = detect_drift(documented, live);
    REQUIRE(report.added_fields.size() == 1);
    CHECK(report.added_fields[0] == "etag");
    CHECK_FALSE(report.critical);
}

TEST_CASE("type change is critical, with nested paths") {
    auto documented = shape_of(R"({"meta":{"count":3},"rows":[{"price":1}]})");
    auto live = shape_of(R"({"meta":{"count":"3"},"rows":[{"price":"1"}]})");
    auto report = detect_drift(documented, live);
    REQUIRE(report.type_changes.size() == 2);
    CHECK(std::get<0>(report.type_changes[0]) == "meta.count");
    CHECK(std::get<0>(report.type_changes[1]) == "rows[].price");
    CHECK(report.critical);
}

TEST_CASE("drift is asymmetric: removals flip to additions when reversed") {
    auto a = shape_of(R"({"x":1,"y":2})");
    auto b = shape_of(R"({"x":1})");
    auto forward = detect_drift(a, b);
    auto backward = detect_drift(b, a);
    CHECK(forward.removed_fields == backward.added_fields);
    CHECK(forward.added_fields == backward.removed_fields);
}

TEST_CASE("drift on random shapes is empty against itself") {
    std::mt19937_64 rng(8);
    std::function<distill::ResponseShape(int)> gen = [&](int depth) -> distill::ResponseShape {
        using K = distill::ResponseShape::Kind;
        int pick = static_cast<int>(rng() % (depth >= 2 ? 3 : 5));
        switch (pick) {
        case 0: return distill::ResponseShape::scalar(K::string);
        case 1: return distill::ResponseShape::scalar(K::number);
        case 2: return distill::ResponseShape::scalar(K::boolean);
        case 3: {
            auto obj = distill::ResponseShape::object();
            for (int i = 0; i < 3; ++i) obj.fields.emplace("f" + std::to_string(i), gen(depth + 1));
            return obj;
        }
        default: return distill::ResponseShape::array(gen(depth + 1));
        }
    };
    for (int i = 0; i < 100; ++i) {
        auto s = gen(0);
        CHECK(detect_drift(s, s).empty());
    }
}

// --- verification_pass ----------------------------------------------------------------

TEST_CASE("stale records are probed before fresh ones") {
    graph::Registry registry;
    time_ms now = 100LL * 60 * 60 * 1000; // 100 h
    registry.insert_record(probe_record("fresh.example", true, now - 2LL * 3600 * 1000));
    registry.insert_record(probe_record("stale.example", true, now - 48LL * 3600 * 1000));

    std::vector<std::string> order;
    Prober prober = [&](const graph::SkillRecord& record, const std::string&) -> ProbeResult {
        order.push_back(record.domain);
        return {Outcome::success, std::string(R"({"price":2,"name":"y"})")};
    };
    verification_pass(registry, prober, VerificationConfig{}, now);
    REQUIRE(order.size() == 2);
    CHECK(order[0] == "stale.example");
    CHECK(order[1] == "fresh.example");
}

TEST_CASE("verification never issues a non-GET probe") {
    graph::Registry registry;
    registry.insert_record(probe_record("posts.example", false, 0)); // POST-only skill
    registry.insert_record(probe_record("gets.example", true, 0));

    std::vector<std::string> probed;
    Prober prober = [&](const graph::SkillRecord& record,
                        const std::string& endpoint_key) -> ProbeResult {
        probed.push_back(record.domain + " " + endpoint_key);
        const auto* e = record.find_endpoint(endpoint_key);
        REQUIRE(e != nullptr);
        CHECK(e->method == "GET"); // safe-only rule, asserted on the probe trace
        return {Outcome::success, std::string(R"({"price":1,"name":"x"})")};
    };
    auto outcomes = verification_pass(registry, prober, VerificationConfig{}, 1'000);
    CHECK(outcomes.size() == 1);
    REQUIRE(probed.size() == 1);
    CHECK(probed[0].starts_with("gets.example"));
}

TEST_CASE("three consecutive probe failures deprecate the record") {
    graph::Registry registry;
    registry.insert_record(probe_record("flaky.example", true, 0));
    Prober failing = [](const graph::SkillRecord&, const std::string&) -> ProbeResult {
        return {Outcome::failure, std::nullopt};
    };
    VerificationConfig config; // deprecate_after = 3
    verification_pass(registry, failing, config, 1);
    verification_pass(registry, failing, config, 2);
    CHECK(registry.find_by_domain("flaky.example")->lifecycle == graph::Lifecycle::active);
    verification_pass(registry, failing, config, 3);
    CHECK(registry.find_by_domain("flaky.example")->lifecycle == graph::Lifecycle::deprecated);
}

TEST_CASE("critical drift flags the record; failed re-probe confirms failure") {
    graph::Registry registry;
    registry.insert_record(probe_record("drifty.example", true, 0));

    Prober drifted = [](const graph::SkillRecord&, const std::string&) -> ProbeResult {
        return {Outcome::success, std::string(R"({"name":"x"})")}; // price removed
    };
    verification_pass(registry, drifted, VerificationConfig{}, 1);
    CHECK(registry.find_by_domain("drifty.example")->verification_status ==
          graph::VerificationStatus::drift_flagged);
    CHECK(registry.find_by_domain("drifty.example")->lifecycle == graph::Lifecycle::active);

    Prober failing = [](const graph::SkillRecord&, const std::string&) -> ProbeResult {
        return {Outcome::failure, std::nullopt};
    };
    verification_pass(registry, failing, VerificationConfig{}, 2);
    CHECK(registry.find_by_domain("drifty.example")->lifecycle == graph::Lifecycle::disabled);
}

TEST_CASE("clean probe of a non-active record restores it to active") {
    graph::Registry registry;
    registry.insert_record(probe_record("redeemed.example", true, 0));
    registry.apply_lifecycle_event("skill:redeemed.example",
                                   graph::LifecycleEvent::confirmed_failure, 1);
    CHECK(registry.find_by_domain("redeemed.example")->lifecycle == graph::Lifecycle::disabled);

    Prober healthy = [](const graph::SkillRecord&, const std::string&) -> ProbeResult {
        return {Outcome::success, std::string(R"({"price":3,"name":"z"})")};
    };
    verification_pass(registry, healthy, VerificationConfig{}, 2);
    CHECK(registry.find_by_domain("redeemed.example")->lifecycle == graph::Lifecycle::active);
    CHECK(registry.find_by_domain("redeemed.example")->verification_status ==
          graph::VerificationStatus::verified);
}

TEST_CASE("verification outcomes land in the registry event log") {
    graph::Registry registry;
    registry.insert_record(probe_record("logged.example", true, 0));
    Prober healthy = [](const graph::SkillRecord&, const std::string&) -> ProbeResult {
        return {Outcome::success, std::string(R"({"price":1,"name":"x"})")};
    };
    verification_pass(registry, healthy, VerificationConfig{}, 7);
    bool found = false;
    for (const auto& e : registry.events()) {
        if (e.kind == "verification") found = true;
    }
    CHECK(found);
}

TEST_CASE("the loop honours its cadence on the injected clock") {
    graph::Registry registry;
    registry.insert_record(probe_record("cadence.example", true, 0));
    int probes = 0;
    Prober counting = [&](const graph::SkillRecord&, const std::string&) -> ProbeResult {
        ++probes;
        return {Outcome::success, std::string(R"({"price":1,"name":"x"})")};
    };
    VerificationLoop loop{VerificationConfig{}};
    time_ms hour = 3'600'000;
    loop.run_if_due(registry, counting, 0);
    CHECK(probes == 1);
    loop.run_if_due(registry, counting, 3 * hour); // not due yet (cadence 6 h)
    CHECK(probes == 1);
    loop.run_if_due(registry, counting, 6 * hour);
    CHECK(probes == 2);
}
