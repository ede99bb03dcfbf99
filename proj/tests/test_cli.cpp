#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "routegraph/cli.hpp"
#include "routegraph/util.hpp"

using namespace routegraph;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) {
    return std::string(ROUTEGRAPH_FIXTURE_DIR) + "/" + name;
}

struct TempSpace {
    fs::path dir;
    std::string config_path;

    TempSpace() {
        dir = fs::temp_directory_path() / ("rg_cli_" + std::to_string(::getpid()) + "_" +
                                           std::to_string(counter()));
        fs::create_directories(dir);
        nlohmann::json config{{"registry", (dir / "registry").string()},
                              {"wallet", (dir / "wallet.json").string()},
                              {"vault", (dir / "vault.json").string()},
                              {"cache", (dir / "cache.json").string()},
                              {"ledger", (dir / "ledger.jsonl").string()}};
        config_path = (dir / "config.json").string();
        write_file(config_path, canonical_dump(config));
    }
    ~TempSpace() { fs::remove_all(dir); }

    static int counter() {
        static int n = 0;
        return ++n;
    }

    cli::CliResult run(std::vector<std::string> args) {
        args.insert(args.begin(), {"--config", config_path});
        return cli::run(args);
    }
};

} // namespace

TEST_CASE("ingest reports kept and dropped entries as JSON") {
    TempSpace space;
    auto result = space.run({"ingest", fixture("shop.har")});
    REQUIRE(result.exit_code == 0);
    auto j = nlohmann::json::parse(result.output);
    CHECK(j["entries"] == 12);
    CHECK(j["kept"] == 4);
    CHECK(j["dropped"] == 8);
}

TEST_CASE("ingest on a malformed file exits with the input error code") {
    TempSpace space;
    auto bad = (space.dir / "bad.har").string();
    write_file(bad, "{truncated");
    auto result = space.run({"ingest", bad});
    CHECK(result.exit_code == 3);
    CHECK(nlohmann::json::parse(result.error)["error"] == "malformed-archive");
}

TEST_CASE("distill writes a skill directory with manifest and endpoints") {
    TempSpace space;
    auto out = (space.dir / "skill").string();
    auto result = space.run({"--now", "1760000000000", "distill", fixture("shop.har"),
                             "--out", out, "--contributor", "alice"});
    REQUIRE(result.exit_code == 0);
    auto j = nlohmann::json::parse(result.output);
    CHECK(j["packages"][0]["domain"] == "shop.example");
    CHECK(j["packages"][0]["endpoints"] == 3);
    CHECK(fs::exists(out + "/manifest.md"));
    CHECK(fs::exists(out + "/endpoints.json"));
    CHECK(fs::exists(out + "/auth.local.json"));

    // vault got the captured credential; the skill dir did not
    auto vault = nlohmann::json::parse(read_file((space.dir / "vault.json").string()));
    CHECK(vault.contains("shop.example:cookie:session"));
    CHECK(read_file(out + "/endpoints.json").find("s3cr3t") == std::string::npos);
}

TEST_CASE("publish then search round trips through the registry directory") {
    TempSpace space;
    auto out = (space.dir / "skill").string();
    REQUIRE(space.run({"--now", "1760000000000", "distill", fixture("shop.har"), "--out", out})
                .exit_code == 0);

    auto publish = space.run({"--now", "1760000000000", "publish", out});
    REQUIRE(publish.exit_code == 0);
    auto pj = nlohmann::json::parse(publish.output);
    CHECK(pj["record_id"] == "skill:shop.example");
    CHECK(pj["merged"] == false);

    auto search = space.run({"--now", "1760000003600", "search", "shop example products", "-k", "3"});
    REQUIRE(search.exit_code == 0);
    auto sj = nlohmann::json::parse(search.output);
    REQUIRE(sj["results"].size() == 1);
    CHECK(sj["results"][0]["id"] == "skill:shop.example");
    CHECK(sj["results"][0]["components"].contains("similarity"));

    // replayable: identical inputs and --now give byte-identical output
    auto search2 = space.run({"--now", "1760000003600", "search", "shop example products", "-k", "3"});
    CHECK(search.output == search2.output);
}

TEST_CASE("search on an empty registry exits with the unresolvable class") {
    TempSpace space;
    auto result = space.run({"search", "anything"});
    CHECK(result.exit_code == 6);
    CHECK(nlohmann::json::parse(result.error)["error"] == "empty-index");
}

TEST_CASE("publishing an invalid skill directory fails validation with exit 4") {
    TempSpace space;
    auto dir = (space.dir / "empty_skill").string();
    fs::create_directories(dir);
    nlohmann::json empty{{"domain", "x.example"},
                         {"endpoints", nlohmann::json::array()},
                         {"manifest_text", ""},
                         {"contributor", "nobody"},
                         {"created_at", 0}};
    write_file(dir + "/endpoints.json", canonical_dump(empty));
    auto result = space.run({"publish", dir});
    CHECK(result.exit_code == 4);
    auto err = nlohmann::json::parse(result.error);
    CHECK(err["error"] == "validation-failed");
    CHECK(err["hard_failures"].size() >= 1);
}

TEST_CASE("resolve runs the chain against simnet and persists state") {
    TempSpace space;
    auto resolve = space.run({"--now", "1760000000000", "resolve",
                              "shop sim products price product detail api", "--domain",
                              "shop.sim", "--simnet", fixture("simnet_basic.json"), "--param",
                              "id=101"});
    REQUIRE(resolve.exit_code == 0);
    auto j = nlohmann::json::parse(resolve.output);
    CHECK(j["timing"]["source"] == "discovery");
    CHECK(j["data"]["id"] == 101);
    CHECK(fs::exists(space.dir / "registry" / "records"));

    auto search = space.run({"--now", "1760000000000", "search", "shop sim products"});
    CHECK(search.exit_code == 0);
    CHECK(nlohmann::json::parse(search.output)["results"].size() == 1);
}

TEST_CASE("verify --once probes safe endpoints and records outcomes") {
    TempSpace space;
    REQUIRE(space.run({"--now", "1760000000000", "resolve",
                       "shop sim products price product detail api", "--domain", "shop.sim",
                       "--simnet", fixture("simnet_basic.json"), "--param", "id=101"})
                .exit_code == 0);
    auto verify = space.run({"--now", "1760000600000", "verify", "--once", "--simnet",
                             fixture("simnet_basic.json")});
    REQUIRE(verify.exit_code == 0);
    auto j = nlohmann::json::parse(verify.output);
    REQUIRE(j["probes"].size() >= 1);
    for (const auto& probe : j["probes"]) {
        CHECK(probe["outcome"] == "success");
    }
}

TEST_CASE("ledger renders balances and handles the empty case") {
    TempSpace space;
    auto empty = space.run({"ledger"});
    REQUIRE(empty.exit_code == 0);
    auto ej = nlohmann::json::parse(empty.output);
    CHECK(ej["entries"] == 0);
    CHECK(ej["balances"].empty());
}

TEST_CASE("simulate runs a fleet config deterministically") {
    TempSpace space;
    auto csv_path = (space.dir / "fleet.csv").string();
    auto a = space.run({"simulate", fixture("fleet_demo.json"), "--csv", csv_path});
    REQUIRE(a.exit_code == 0);
    auto b = space.run({"simulate", fixture("fleet_demo.json")});
    CHECK(a.output == b.output);
    auto j = nlohmann::json::parse(a.output);
    CHECK(j["records_created"].get<int>() >= 1);
    CHECK(j["cache_hit_rate"].get<double>() > 0.0);
    CHECK(fs::exists(csv_path));
    CHECK(read_file(csv_path).starts_with("agent,host,source"));
}

TEST_CASE("bench reports cached-versus-browser speedups") {
    TempSpace space;
    auto result = space.run({"--now", "1760000000000", "bench", fixture("simnet_basic.json")});
    REQUIRE(result.exit_code == 0);
    auto j = nlohmann::json::parse(result.output);
    CHECK(j["mean_speedup"].get<double>() >= 3.0);
    bool saw_fast = false;
    for (const auto& row : j["tasks"]) {
        if (row.contains("speedup") && row["host"] == "fast.sim") {
            saw_fast = true;
            CHECK(row["speedup"].get<double>() == doctest::Approx(28.75));
        }
    }
    CHECK(saw_fast);
}

TEST_CASE("pretty output is indented JSON") {
    TempSpace space;
    auto result = space.run({"--pretty", "ledger"});
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("\n  ") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    auto result = cli::run({"no-such-command"});
    CHECK(result.exit_code == 2);
    CHECK_FALSE(result.error.empty());
}
