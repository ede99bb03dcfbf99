#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "routegraph/capture.hpp"
#include "routegraph/distill.hpp"

using namespace routegraph;
using namespace routegraph::distill;

namespace {

std::string fixture(const std::string& name) {
    return read_file(std::string(ROUTEGRAPH_FIXTURE_DIR) + "/" + name);
}

std::vector<capture::CaptureEntry> shop_api_entries() {
    auto archive = capture::parse_archive(fixture("shop.har"));
    return capture::filter_archive(archive, capture::FilterPolicy::defaults());
}

} // namespace

// --- normalize_paths ---------------------------------------------------

TEST_CASE("numeric segment becomes integer id param") {
    auto groups = normalize_paths({"/api/users/48213"});
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].path_template == "/api/users/{id}");
    REQUIRE(groups[0].params.size() == 1);
    CHECK(groups[0].params[0].name == "id");
    CHECK(groups[0].params[0].kind == ParamKind::integer);
}

TEST_CASE("stable single path stays literal") {
    auto groups = normalize_paths({"/health"});
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].path_template == "/health");
    CHECK(groups[0].params.empty());
}

TEST_CASE("cross-sample variation collapses to opaque param") {
    auto groups = normalize_paths({"/v1/doc/a1x", "/v1/doc/b2y"});
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].path_template == "/v1/doc/{param}");
    REQUIRE(groups[0].params.size() == 1);
    CHECK(groups[0].params[0].kind == ParamKind::opaque);
    CHECK(groups[0].samples.size() == 2);
}

TEST_CASE("uuid segments become uuid params") {
    auto groups = normalize_paths({"/jobs/20f5b9b2-93cd-4c1f-8f9a-0c2b4a8de901"});
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].path_template == "/jobs/{id}");
    CHECK(groups[0].params[0].kind == ParamKind::uuid);
}

TEST_CASE("resource names without value-looking segments never merge") {
    auto groups = normalize_paths({"/api/users", "/api/orders"});
    CHECK(groups.size() == 2); // words, not ids: they stay distinct endpoints
}

TEST_CASE("every sample matches exactly one returned template") {
    std::vector<std::string> samples = {
        "/api/users/1", "/api/users/2048", "/api/users",    "/health",
        "/v1/doc/a1x",  "/v1/doc/b2y",     "/api/orders/7", "/files/report.pdf",
    };
    auto groups = normalize_paths(samples);
    for (const auto& sample : samples) {
        int matches = 0;
        for (const auto& g : groups) {
            bool in_group =
                std::find(g.samples.begin(), g.samples.end(), sample) != g.samples.end();
            if (in_group) {
                ++matches;
                CHECK(template_matches(g.path_template, g.params, sample));
            }
        }
        CHECK(matches == 1);
    }
}

TEST_CASE("template soundness on randomized integer paths") {
    std::mt19937_64 rng(20260115);
    for (int round = 0; round < 50; ++round) {
        std::vector<std::string> samples;
        int n = 1 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) {
            samples.push_back("/api/things/" + std::to_string(rng() % 1'000'000));
        }
        auto groups = normalize_paths(samples);
        REQUIRE(groups.size() == 1);
        CHECK(groups[0].path_template == "/api/things/{id}");
        for (const auto& s : samples) {
            CHECK(template_matches(groups[0].path_template, groups[0].params, s));
        }
    }
}

TEST_CASE("fill_template validates parameter kinds") {
    std::vector<PathParam> params{{"id", ParamKind::integer}};
    CHECK(fill_template("/api/users/{id}", params, {{"id", "42"}}) == "/api/users/42");
    CHECK_FALSE(fill_template("/api/users/{id}", params, {{"id", "abc"}}).has_value());
    CHECK_FALSE(fill_template("/api/users/{id}", params, {}).has_value());
}

// --- infer_shape --------------------------------------------------------

TEST_CASE("empty object infers to empty object shape") {
    auto shape = infer_shape(nlohmann::json::object());
    CHECK(shape.kind == ResponseShape::Kind::object);
    CHECK(shape.fields.empty());
}

TEST_CASE("github-style stars and forks infer to number fields") {
    auto shape = infer_shape(nlohmann::json{{"stars", 5}, {"forks", 2}});
    REQUIRE(shape.kind == ResponseShape::Kind::object);
    REQUIRE(shape.fields.size() == 2);
    CHECK(shape.fields.at("stars").kind == ResponseShape::Kind::number);
    CHECK(shape.fields.at("forks").kind == ResponseShape::Kind::number);
}

TEST_CASE("array elements unify field-union-wise with optional marks") {
    auto shape = infer_shape(nlohmann::json::parse(R"([{"a":1},{"a":2,"b":"x"}])"));
    REQUIRE(shape.kind == ResponseShape::Kind::array);
    const auto& element = *shape.element;
    REQUIRE(element.kind == ResponseShape::Kind::object);
    CHECK(element.fields.at("a").kind == ResponseShape::Kind::number);
    CHECK_FALSE(element.fields.at("a").optional);
    CHECK(element.fields.at("b").kind == ResponseShape::Kind::string);
    CHECK(element.fields.at("b").optional);
}

TEST_CASE("null unified with a kind keeps the kind marked optional") {
    auto shape = infer_shape(nlohmann::json::parse(R"([{"v":null},{"v":3}])"));
    const auto& v = shape.element->fields.at("v");
    CHECK(v.kind == ResponseShape::Kind::number);
    CHECK(v.optional);
}

TEST_CASE("non-JSON body raises NotStructured") {
    CHECK_THROWS_AS(infer_shape_from_text("<html>nope</html>"), NotStructured);
}

TEST_CASE("shape idempotence: infer(render(shape)) == shape") {
    std::mt19937_64 rng(99);
    // generator for shapes with no optional flags (a single rendered value
    // cannot encode optionality)
    std::function<ResponseShape(int)> gen = [&](int depth) -> ResponseShape {
        int pick = static_cast<int>(rng() % (depth >= 2 ? 4 : 6));
        switch (pick) {
        case 0: return ResponseShape::scalar(ResponseShape::Kind::string);
        case 1: return ResponseShape::scalar(ResponseShape::Kind::number);
        case 2: return ResponseShape::scalar(ResponseShape::Kind::boolean);
        case 3: return ResponseShape::scalar(ResponseShape::Kind::null_kind);
        case 4: {
            ResponseShape obj = ResponseShape::object();
            int n = 1 + static_cast<int>(rng() % 3);
            for (int i = 0; i < n; ++i) {
                obj.fields.emplace("f" + std::to_string(i), gen(depth + 1));
            }
            return obj;
        }
        default: return ResponseShape::array(gen(depth + 1));
        }
    };
    for (int round = 0; round < 200; ++round) {
        ResponseShape shape = gen(0);
        CHECK(infer_shape(render_example(shape)) == shape);
    }
}

TEST_CASE("unify is idempotent") {
    auto shape = infer_shape(nlohmann::json::parse(
        R"({"a":1,"b":[{"x":"s"}],"c":{"d":true,"e":null}})"));
    CHECK(unify(shape, shape) == shape);
}

// --- extract_auth --------------------------------------------------------

TEST_CASE("bearer header extracts with credential in vault only") {
    capture::CaptureEntry entry;
    entry.method = "GET";
    entry.url = "https://api.example/v1/me";
    entry.request_headers = {{"Authorization", "Bearer abc-token-123"}};
    CredentialVault vault;
    auto auth = extract_auth(entry, vault);
    CHECK(auth.kind == AuthKind::bearer);
    CHECK(auth.location == "Authorization");
    CHECK(vault.get(auth.value_ref) == std::string("abc-token-123"));
    // descriptor itself carries no credential bytes
    CHECK(auth.value_ref.find("abc-token-123") == std::string::npos);
}

TEST_CASE("no auth headers extracts kind none") {
    capture::CaptureEntry entry;
    entry.method = "GET";
    entry.url = "https://api.example/v1/public";
    CredentialVault vault;
    auto auth = extract_auth(entry, vault);
    CHECK(auth.kind == AuthKind::none);
    CHECK(auth.location.empty());
    CHECK(auth.value_ref.empty());
}

TEST_CASE("bearer outranks cookie when both present") {
    capture::CaptureEntry entry;
    entry.method = "GET";
    entry.url = "https://api.example/v1/me";
    entry.request_headers = {{"Authorization", "Bearer tok"},
                             {"Cookie", "session=sess-value"}};
    CredentialVault vault;
    CHECK(extract_auth(entry, vault).kind == AuthKind::bearer);
}

TEST_CASE("api key header and session cookie extract") {
    capture::CaptureEntry with_key;
    with_key.method = "GET";
    with_key.url = "https://api.example/v1/data";
    with_key.request_headers = {{"X-Api-Key", "k-123"}};
    CredentialVault vault;
    auto key_auth = extract_auth(with_key, vault);
    CHECK(key_auth.kind == AuthKind::api_key_header);
    CHECK(key_auth.location == "X-Api-Key");

    capture::CaptureEntry with_cookie;
    with_cookie.method = "GET";
    with_cookie.url = "https://api.example/v1/data";
    with_cookie.request_headers = {{"Cookie", "theme=dark; sessionid=s-9"}};
    auto cookie_auth = extract_auth(with_cookie, vault);
    CHECK(cookie_auth.kind == AuthKind::cookie);
    CHECK(cookie_auth.location == "sessionid");
    CHECK(vault.get(cookie_auth.value_ref) == std::string("s-9"));
}

// --- distill -------------------------------------------------------------

TEST_CASE("shop.har distills into one package with 3 templates") {
    CredentialVault vault;
    auto packages = distill::distill(shop_api_entries(), vault, "alice", 1'700'000'000'000LL);
    REQUIRE(packages.size() == 1);
    const auto& pkg = packages[0];
    CHECK(pkg.domain == "shop.example");
    REQUIRE(pkg.endpoints.size() == 3);

    std::set<std::string> keys;
    for (const auto& e : pkg.endpoints) keys.insert(e.key());
    CHECK(keys == std::set<std::string>{"GET /api/products/{id}", "GET /api/search",
                                        "POST /api/cart"});

    // the two product fetches collapsed into one template
    const EndpointTemplate* products = nullptr;
    for (const auto& e : pkg.endpoints) {
        if (e.key() == "GET /api/products/{id}") products = &e;
    }
    REQUIRE(products != nullptr);
    CHECK(products->safe);
    CHECK(products->auth.kind == AuthKind::cookie);
    CHECK(products->response_schema.fields.count("price") == 1);
    CHECK(products->response_example.has_value());

    // query schema for search
    for (const auto& e : pkg.endpoints) {
        if (e.key() == "GET /api/search") {
            CHECK(e.query_schema.at("q").required);
            CHECK(e.query_schema.at("limit").kind == ResponseShape::Kind::number);
        }
        if (e.key() == "POST /api/cart") {
            CHECK_FALSE(e.safe);
            REQUIRE(e.body_schema.has_value());
            CHECK(e.body_schema->fields.count("product_id") == 1);
        }
    }
    CHECK_FALSE(pkg.manifest_text.empty());
    CHECK(vault.get("shop.example:cookie:session") == std::string("s3cr3t-c00kie-value"));
}

TEST_CASE("entries spanning two hosts produce two packages") {
    auto shop = capture::parse_archive(fixture("shop.har"));
    auto news = capture::parse_archive(fixture("news.har"));
    auto entries = capture::filter_archive(shop, capture::FilterPolicy::defaults());
    for (auto& e : capture::filter_archive(news, capture::FilterPolicy::defaults())) {
        entries.push_back(e);
    }
    CredentialVault vault;
    auto packages = distill::distill(entries, vault, "alice", 0);
    CHECK(packages.size() == 2);
}

TEST_CASE("single GET entry yields one safe endpoint") {
    capture::CaptureEntry e;
    e.method = "GET";
    e.url = "https://solo.example/api/ping";
    e.response_status = 200;
    e.response_media_type = "application/json";
    e.response_body = R"({"pong":true})";
    CredentialVault vault;
    auto packages = distill::distill({e}, vault, "bob", 0);
    REQUIRE(packages.size() == 1);
    REQUIRE(packages[0].endpoints.size() == 1);
    CHECK(packages[0].endpoints[0].safe);
}

TEST_CASE("distilling nothing raises NoApiEntries") {
    CredentialVault vault;
    CHECK_THROWS_AS(distill::distill({}, vault, "x", 0), NoApiEntries);
}

// --- merge_skills ----------------------------------------------------------

namespace {

SkillPackage shop_package(const std::string& contributor) {
    CredentialVault vault;
    return distill::distill(shop_api_entries(), vault, contributor, 0)[0];
}

} // namespace

TEST_CASE("merging disjoint endpoint sets concatenates with full delta") {
    auto base = shop_package("alice");
    SkillPackage incoming;
    incoming.domain = "shop.example";
    incoming.contributor = "bob";
    EndpointTemplate extra;
    extra.method = "GET";
    extra.path_template = "/api/stock/{id}";
    extra.path_params = {{"id", ParamKind::integer}};
    extra.response_schema = infer_shape(nlohmann::json{{"stock", 3}});
    extra.safe = true;
    incoming.endpoints.push_back(extra);
    incoming.manifest_text = render_manifest(incoming.domain, incoming.endpoints);

    auto result = merge_skills(base, incoming);
    CHECK(result.merged.endpoints.size() == base.endpoints.size() + 1);
    REQUIRE(result.delta.added_endpoints.size() == 1);
    CHECK(result.delta.added_endpoints[0] == "GET /api/stock/{id}");
    CHECK(result.delta.changed_endpoints.empty());
}

TEST_CASE("merging identical packages is a no-op with empty delta") {
    auto base = shop_package("alice");
    auto result = merge_skills(base, base);
    CHECK(result.merged.endpoints == base.endpoints);
    CHECK(result.delta.empty());
    CHECK(result.delta.added_schema_lines == 0);
}

TEST_CASE("incoming query params union in and the delta counts added lines") {
    auto base = shop_package("alice");
    auto incoming = base;
    incoming.contributor = "bob";
    for (auto& e : incoming.endpoints) {
        if (e.key() == "GET /api/search") {
            e.query_schema["sort"] = {ResponseShape::Kind::string, false};
            e.query_schema["page"] = {ResponseShape::Kind::number, false};
        }
    }

    // independent oracle: line diff over the canonical serialization
    const EndpointTemplate *before = nullptr, *after = nullptr;
    for (const auto& e : base.endpoints) {
        if (e.key() == "GET /api/search") before = &e;
    }
    for (const auto& e : incoming.endpoints) {
        if (e.key() == "GET /api/search") after = &e;
    }
    auto before_lines = canonical_lines(*before);
    auto after_lines = canonical_lines(*after);
    std::set<std::string> before_set(before_lines.begin(), before_lines.end());
    int expected_added = 0;
    for (const auto& line : after_lines) {
        if (!before_set.count(line)) ++expected_added;
    }
    CHECK(expected_added == 2);

    auto result = merge_skills(base, incoming);
    REQUIRE(result.delta.changed_endpoints.size() == 1);
    CHECK(result.delta.changed_endpoints[0].second == 2);
    CHECK(result.delta.added_schema_lines == 2);
}

TEST_CASE("merge rejects mismatched domains") {
    auto base = shop_package("alice");
    SkillPackage other;
    other.domain = "elsewhere.example";
    CHECK_THROWS_AS(merge_skills(base, other), DomainMismatch);
}

TEST_CASE("merge on disjoint sets is associative") {
    auto a = shop_package("alice");
    auto make_single = [](const std::string& contributor, const std::string& tmpl) {
        SkillPackage pkg;
        pkg.domain = "shop.example";
        pkg.contributor = contributor;
        EndpointTemplate e;
        e.method = "GET";
        e.path_template = tmpl;
        e.path_params = {{"id", ParamKind::integer}};
        e.response_schema = infer_shape(nlohmann::json{{"v", 1}});
        e.safe = true;
        pkg.endpoints.push_back(e);
        pkg.manifest_text = render_manifest(pkg.domain, pkg.endpoints);
        return pkg;
    };
    auto b = make_single("bob", "/api/b/{id}");
    auto c = make_single("carol", "/api/c/{id}");

    auto left = merge_skills(merge_skills(a, b).merged, c).merged;
    auto right = merge_skills(a, merge_skills(b, c).merged).merged;
    CHECK(left.endpoints == right.endpoints);
}

TEST_CASE("merge on disjoint sets is commutative up to endpoint order") {
    auto a = shop_package("alice");
    SkillPackage b;
    b.domain = "shop.example";
    b.contributor = "bob";
    EndpointTemplate extra;
    extra.method = "DELETE";
    extra.path_template = "/api/cart/{id}";
    extra.path_params = {{"id", ParamKind::integer}};
    extra.response_schema = ResponseShape::object();
    b.endpoints.push_back(extra);
    b.manifest_text = render_manifest(b.domain, b.endpoints);

    auto ab = merge_skills(a, b).merged;
    auto ba = merge_skills(b, a).merged;
    CHECK(ab.endpoints == ba.endpoints); // endpoints kept canonically sorted
}

// --- packaging ---------------------------------------------------------------

TEST_CASE("publishable serialization leaks no vault-stored credential") {
    CredentialVault vault;
    auto packages = distill::distill(shop_api_entries(), vault, "alice", 0);
    std::string payload = canonical_dump(packages[0].to_publishable_json());
    payload += render_manifest(packages[0].domain, packages[0].endpoints);
    for (const auto& [key, secret] : vault.entries()) {
        CHECK(payload.find(secret) == std::string::npos);
    }
    CHECK_FALSE(vault.entries().empty());
}

TEST_CASE("skill directory round trips through disk") {
    CredentialVault vault;
    auto pkg = distill::distill(shop_api_entries(), vault, "alice", 42)[0];
    std::string dir = std::filesystem::temp_directory_path() / "rg_skill_test";
    std::filesystem::remove_all(dir);
    write_skill_dir(pkg, dir);

    CHECK(std::filesystem::exists(dir + "/manifest.md"));
    CHECK(std::filesystem::exists(dir + "/endpoints.json"));
    CHECK(std::filesystem::exists(dir + "/auth.local.json"));
    CHECK(std::filesystem::exists(dir + "/client.stub.ts"));

    auto mode = std::filesystem::status(dir + "/auth.local.json").permissions();
    CHECK((mode & std::filesystem::perms::others_read) == std::filesystem::perms::none);
    CHECK((mode & std::filesystem::perms::group_read) == std::filesystem::perms::none);

    auto loaded = load_skill_dir(dir);
    CHECK(loaded.domain == pkg.domain);
    CHECK(loaded.endpoints.size() == pkg.endpoints.size());
    // vault refs restored from auth.local.json
    for (const auto& e : loaded.endpoints) {
        if (e.auth.kind != AuthKind::none) {
            CHECK_FALSE(e.auth.value_ref.empty());
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("manifest rendering is deterministic") {
    auto a = shop_package("alice");
    auto b = shop_package("alice");
    CHECK(render_manifest(a.domain, a.endpoints) == render_manifest(b.domain, b.endpoints));
    CHECK(render_client_stub(a) == render_client_stub(b));
}
