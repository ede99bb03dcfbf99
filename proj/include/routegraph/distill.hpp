#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/capture.hpp"
#include "routegraph/shapes.hpp"
#include "routegraph/util.hpp"

namespace routegraph::distill {

enum class AuthKind { none, cookie, bearer, api_key_header };

const char* auth_kind_name(AuthKind kind);
AuthKind auth_kind_from_name(const std::string& name);

// Credential material never leaves the vault; a descriptor carries only the
// vault key under `value_ref`.
struct AuthDescriptor {
    AuthKind kind = AuthKind::none;
    std::string location;  // header or cookie name; empty for kind == none
    std::string value_ref; // vault key; empty for kind == none

    bool operator==(const AuthDescriptor&) const = default;

    nlohmann::json to_json(bool publishable) const;
    static AuthDescriptor from_json(const nlohmann::json& j);
};

// Local credential store. Single writer; persisted with owner-only mode.
class CredentialVault {
public:
    void put(const std::string& key, const std::string& secret);
    std::optional<std::string> get(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return secrets_; }

    void save(const std::string& path) const;
    static CredentialVault load(const std::string& path);

private:
    std::map<std::string, std::string> secrets_;
};

enum class ParamKind { integer, uuid, opaque };

const char* param_kind_name(ParamKind kind);
ParamKind param_kind_from_name(const std::string& name);

struct PathParam {
    std::string name;
    ParamKind kind = ParamKind::opaque;

    bool operator==(const PathParam&) const = default;
};

struct QueryParamSpec {
    ResponseShape::Kind kind = ResponseShape::Kind::string;
    bool required = false;

    bool operator==(const QueryParamSpec&) const = default;
};

struct EndpointTemplate {
    std::string method;
    std::string path_template; // "/api/users/{id}"
    std::vector<PathParam> path_params;
    std::map<std::string, QueryParamSpec> query_schema;
    std::optional<ResponseShape> body_schema;
    ResponseShape response_schema;
    AuthDescriptor auth;
    bool safe = false; // true iff method == GET
    std::optional<nlohmann::json> response_example;

    bool operator==(const EndpointTemplate&) const = default;

    // "GET /api/users/{id}" — identity for merging and attribution.
    std::string key() const;

    nlohmann::json to_json(bool publishable) const;
    static EndpointTemplate from_json(const nlohmann::json& j);
};

struct SkillPackage {
    std::string domain;
    std::vector<EndpointTemplate> endpoints; // sorted by (path_template, method)
    std::string manifest_text;
    std::vector<AuthDescriptor> auth_local; // vault refs, kept out of publishable payload
    std::string contributor;
    time_ms created_at = 0;

    nlohmann::json to_publishable_json() const;
    static SkillPackage from_publishable_json(const nlohmann::json& j);
};

// --- path template inference --------------------------------------------

struct PathTemplateGroup {
    std::string path_template;
    std::vector<PathParam> params;
    std::vector<std::string> samples;
};

bool looks_like_uuid(const std::string& segment);
bool looks_like_integer(const std::string& segment);

// Numeric segments become {id} (integer), UUID segments {id} (uuid), and
// segments that vary across samples with matching surroundings collapse to
// an opaque {param}. Every sample matches exactly one returned template.
std::vector<PathTemplateGroup> normalize_paths(const std::vector<std::string>& samples);

// True when `path` matches `tmpl` under the declared parameter kinds.
bool template_matches(const std::string& tmpl, const std::vector<PathParam>& params,
                      const std::string& path);

// Fills {param} segments from the given values; returns nullopt when a
// required parameter is missing or fails its kind check.
std::optional<std::string> fill_template(const std::string& tmpl,
                                         const std::vector<PathParam>& params,
                                         const std::map<std::string, std::string>& values);

// --- extraction ----------------------------------------------------------

// Precedence when several auth signals are present: bearer > api-key > cookie.
AuthDescriptor extract_auth(const capture::CaptureEntry& entry, CredentialVault& vault);

std::vector<SkillPackage> distill(const std::vector<capture::CaptureEntry>& entries,
                                  CredentialVault& vault, const std::string& contributor,
                                  time_ms now);

struct MergeDelta {
    std::string contributor;
    std::vector<std::string> added_endpoints;                    // endpoint keys
    std::vector<std::pair<std::string, int>> changed_endpoints;  // key, added schema lines
    int added_schema_lines = 0;

    bool empty() const { return added_endpoints.empty() && changed_endpoints.empty(); }
};

struct MergeResult {
    SkillPackage merged;
    MergeDelta delta;
};

// Endpoint identity is (method, path_template). Existing schemas win; the
// incoming side can only add (union). Throws DomainMismatch.
MergeResult merge_skills(const SkillPackage& existing, const SkillPackage& incoming);

// --- rendering -----------------------------------------------------------

std::string render_manifest(const std::string& domain,
                            const std::vector<EndpointTemplate>& endpoints);

// Per-endpoint documentation section, used for intent-to-endpoint matching.
std::string render_endpoint_doc(const std::string& domain, const EndpointTemplate& endpoint);

// One stable text line per schema fact; the unit of delta attribution.
std::vector<std::string> canonical_lines(const EndpointTemplate& endpoint);
std::vector<std::string> canonical_lines(const std::vector<EndpointTemplate>& endpoints);

// TypeScript-flavoured client stub, emitted as documentation only.
std::string render_client_stub(const SkillPackage& pkg);

// --- disk format ---------------------------------------------------------
// <dir>/manifest.md, <dir>/endpoints.json, <dir>/auth.local.json (0600),
// <dir>/client.stub.ts

void write_skill_dir(const SkillPackage& pkg, const std::string& dir);
SkillPackage load_skill_dir(const std::string& dir);

} // namespace routegraph::distill
