#include "routegraph/distill.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <sstream>

namespace routegraph::distill {

namespace {

std::vector<std::string> split_segments(const std::string& path) {
    std::vector<std::string> segments;
    std::size_t pos = 0;
    while (pos < path.size()) {
        if (path[pos] == '/') {
            ++pos;
            continue;
        }
        auto next = path.find('/', pos);
        segments.push_back(path.substr(pos, next == std::string::npos ? std::string::npos
                                                                      : next - pos));
        if (next == std::string::npos) break;
        pos = next;
    }
    return segments;
}

// Segments eligible for opaque generalization look like values rather than
// resource names: they contain a digit or are long token-ish strings.
bool opaque_eligible(const std::string& segment) {
    if (segment.size() >= 16) return true;
    return std::any_of(segment.begin(), segment.end(),
                       [](unsigned char c) { return std::isdigit(c); });
}

struct Seg {
    enum class Type { literal, integer, uuid, opaque };
    Type type = Type::literal;
    std::string literal;

    bool operator==(const Seg&) const = default;
    bool operator<(const Seg& other) const {
        if (type != other.type) return type < other.type;
        return literal < other.literal;
    }
};

using SegTemplate = std::vector<Seg>;

SegTemplate initial_template(const std::string& path) {
    SegTemplate out;
    for (const auto& seg : split_segments(path)) {
        Seg s;
        if (looks_like_integer(seg)) {
            s.type = Seg::Type::integer;
        } else if (looks_like_uuid(seg)) {
            s.type = Seg::Type::uuid;
        } else {
            s.type = Seg::Type::literal;
            s.literal = seg;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string render_template(const SegTemplate& tmpl, std::vector<PathParam>* params_out) {
    std::string out;
    int int_count = 0, opaque_count = 0;
    if (tmpl.empty()) return "/";
    for (const auto& seg : tmpl) {
        out += "/";
        switch (seg.type) {
        case Seg::Type::literal:
            out += seg.literal;
            break;
        case Seg::Type::integer:
        case Seg::Type::uuid: {
            ++int_count;
            std::string name = int_count == 1 ? "id" : "id" + std::to_string(int_count);
            out += "{" + name + "}";
            if (params_out) {
                params_out->push_back(
                    {name, seg.type == Seg::Type::integer ? ParamKind::integer : ParamKind::uuid});
            }
            break;
        }
        case Seg::Type::opaque: {
            ++opaque_count;
            std::string name = opaque_count == 1 ? "param" : "param" + std::to_string(opaque_count);
            out += "{" + name + "}";
            if (params_out) {
                params_out->push_back({name, ParamKind::opaque});
            }
            break;
        }
        }
    }
    return out;
}

} // namespace

const char* auth_kind_name(AuthKind kind) {
    switch (kind) {
    case AuthKind::none: return "none";
    case AuthKind::cookie: return "cookie";
    case AuthKind::bearer: return "bearer";
    case AuthKind::api_key_header: return "api-key-header";
    }
    return "none";
}

AuthKind auth_kind_from_name(const std::string& name) {
    if (name == "cookie") return AuthKind::cookie;
    if (name == "bearer") return AuthKind::bearer;
    if (name == "api-key-header") return AuthKind::api_key_header;
    return AuthKind::none;
}

nlohmann::json AuthDescriptor::to_json(bool publishable) const {
    nlohmann::json j{{"kind", auth_kind_name(kind)}};
    if (kind != AuthKind::none) {
        j["location"] = location;
        if (!publishable) {
            j["value_ref"] = value_ref;
        }
    }
    return j;
}

AuthDescriptor AuthDescriptor::from_json(const nlohmann::json& j) {
    AuthDescriptor a;
    a.kind = auth_kind_from_name(j.value("kind", "none"));
    if (a.kind != AuthKind::none) {
        a.location = j.value("location", "");
        a.value_ref = j.value("value_ref", "");
    }
    return a;
}

void CredentialVault::put(const std::string& key, const std::string& secret) {
    secrets_[key] = secret;
}

std::optional<std::string> CredentialVault::get(const std::string& key) const {
    auto it = secrets_.find(key);
    if (it == secrets_.end()) return std::nullopt;
    return it->second;
}

void CredentialVault::save(const std::string& path) const {
    nlohmann::json j(secrets_);
    write_file_private(path, canonical_dump(j));
}

CredentialVault CredentialVault::load(const std::string& path) {
    CredentialVault vault;
    if (!std::filesystem::exists(path)) return vault;
    auto j = nlohmann::json::parse(read_file(path));
    vault.secrets_ = j.get<std::map<std::string, std::string>>();
    return vault;
}

const char* param_kind_name(ParamKind kind) {
    switch (kind) {
    case ParamKind::integer: return "integer";
    case ParamKind::uuid: return "uuid";
    case ParamKind::opaque: return "opaque";
    }
    return "opaque";
}

ParamKind param_kind_from_name(const std::string& name) {
    if (name == "integer") return ParamKind::integer;
    if (name == "uuid") return ParamKind::uuid;
    return ParamKind::opaque;
}

std::string EndpointTemplate::key() const {
    return method + " " + path_template;
}

nlohmann::json EndpointTemplate::to_json(bool publishable) const {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : path_params) {
        params.push_back({{"name", p.name}, {"kind", param_kind_name(p.kind)}});
    }
    nlohmann::json query = nlohmann::json::object();
    for (const auto& [name, spec] : query_schema) {
        query[name] = {{"kind", kind_name(spec.kind)}, {"required", spec.required}};
    }
    nlohmann::json j{{"method", method},
                     {"path_template", path_template},
                     {"path_params", params},
                     {"query_schema", query},
                     {"response_schema", shape_to_json(response_schema)},
                     {"auth", auth.to_json(publishable)},
                     {"safe", safe}};
    if (body_schema) {
        j["body_schema"] = shape_to_json(*body_schema);
    }
    if (response_example) {
        j["response_example"] = *response_example;
    }
    return j;
}

EndpointTemplate EndpointTemplate::from_json(const nlohmann::json& j) {
    EndpointTemplate e;
    e.method = j.value("method", "GET");
    e.path_template = j.value("path_template", "/");
    for (const auto& p : j.value("path_params", nlohmann::json::array())) {
        e.path_params.push_back(
            {p.value("name", ""), param_kind_from_name(p.value("kind", "opaque"))});
    }
    if (j.contains("query_schema")) {
        for (auto it = j["query_schema"].begin(); it != j["query_schema"].end(); ++it) {
            e.query_schema[it.key()] = {kind_from_name(it.value().value("kind", "string")),
                                        it.value().value("required", false)};
        }
    }
    if (j.contains("body_schema")) {
        e.body_schema = shape_from_json(j["body_schema"]);
    }
    if (j.contains("response_schema")) {
        e.response_schema = shape_from_json(j["response_schema"]);
    }
    if (j.contains("auth")) {
        e.auth = AuthDescriptor::from_json(j["auth"]);
    }
    e.safe = e.method == "GET";
    if (j.contains("response_example")) {
        e.response_example = j["response_example"];
    }
    return e;
}

nlohmann::json SkillPackage::to_publishable_json() const {
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& e : endpoints) {
        eps.push_back(e.to_json(/*publishable=*/true));
    }
    return nlohmann::json{{"domain", domain},
                          {"endpoints", eps},
                          {"manifest_text", manifest_text},
                          {"contributor", contributor},
                          {"created_at", created_at}};
}

SkillPackage SkillPackage::from_publishable_json(const nlohmann::json& j) {
    SkillPackage pkg;
    pkg.domain = j.value("domain", "");
    for (const auto& e : j.value("endpoints", nlohmann::json::array())) {
        pkg.endpoints.push_back(EndpointTemplate::from_json(e));
    }
    pkg.manifest_text = j.value("manifest_text", "");
    pkg.contributor = j.value("contributor", "");
    pkg.created_at = j.value("created_at", static_cast<time_ms>(0));
    return pkg;
}

bool looks_like_uuid(const std::string& segment) {
    // 8-4-4-4-12 hex
    static constexpr std::size_t kGroups[] = {8, 4, 4, 4, 12};
    if (segment.size() != 36) return false;
    std::size_t pos = 0;
    for (std::size_t g = 0; g < 5; ++g) {
        if (g > 0) {
            if (segment[pos] != '-') return false;
            ++pos;
        }
        for (std::size_t i = 0; i < kGroups[g]; ++i, ++pos) {
            if (!std::isxdigit(static_cast<unsigned char>(segment[pos]))) return false;
        }
    }
    return true;
}

bool looks_like_integer(const std::string& segment) {
    return !segment.empty() && std::all_of(segment.begin(), segment.end(), [](unsigned char c) {
        return std::isdigit(c);
    });
}

std::vector<PathTemplateGroup> normalize_paths(const std::vector<std::string>& samples) {
    // Group samples by their per-segment template, then repeatedly merge
    // template pairs that differ in exactly one value-looking position.
    std::map<SegTemplate, std::vector<std::string>> groups;
    for (const auto& sample : samples) {
        groups[initial_template(sample)].push_back(sample);
    }

    bool merged_any = true;
    while (merged_any) {
        merged_any = false;
        std::vector<SegTemplate> keys;
        keys.reserve(groups.size());
        for (const auto& [tmpl, _] : groups) keys.push_back(tmpl);

        for (std::size_t i = 0; i < keys.size() && !merged_any; ++i) {
            for (std::size_t j = i + 1; j < keys.size() && !merged_any; ++j) {
                const SegTemplate& a = keys[i];
                const SegTemplate& b = keys[j];
                if (a.size() != b.size() || a.size() < 2) continue;
                std::size_t diff_pos = a.size();
                std::size_t diffs = 0;
                for (std::size_t p = 0; p < a.size(); ++p) {
                    if (!(a[p] == b[p])) {
                        diff_pos = p;
                        ++diffs;
                    }
                }
                if (diffs != 1) continue;

                const Seg& sa = a[diff_pos];
                const Seg& sb = b[diff_pos];
                bool a_ok = sa.type != Seg::Type::literal || opaque_eligible(sa.literal);
                bool b_ok = sb.type != Seg::Type::literal || opaque_eligible(sb.literal);
                if (!a_ok || !b_ok) continue;

                SegTemplate merged = a;
                if (sa.type == sb.type && sa.type != Seg::Type::literal) {
                    merged[diff_pos] = sa; // same marker, keep the kind
                } else {
                    merged[diff_pos] = Seg{Seg::Type::opaque, ""};
                }

                auto samples_a = std::move(groups[a]);
                auto samples_b = std::move(groups[b]);
                groups.erase(a);
                groups.erase(b);
                auto& bucket = groups[merged];
                bucket.insert(bucket.end(), samples_a.begin(), samples_a.end());
                bucket.insert(bucket.end(), samples_b.begin(), samples_b.end());
                merged_any = true;
            }
        }
    }

    std::vector<PathTemplateGroup> out;
    for (auto& [tmpl, matched] : groups) {
        PathTemplateGroup group;
        group.path_template = render_template(tmpl, &group.params);
        std::sort(matched.begin(), matched.end());
        matched.erase(std::unique(matched.begin(), matched.end()), matched.end());
        group.samples = std::move(matched);
        out.push_back(std::move(group));
    }
    std::sort(out.begin(), out.end(), [](const PathTemplateGroup& a, const PathTemplateGroup& b) {
        return a.path_template < b.path_template;
    });
    return out;
}

bool template_matches(const std::string& tmpl, const std::vector<PathParam>& params,
                      const std::string& path) {
    auto tmpl_segs = split_segments(tmpl);
    auto path_segs = split_segments(path);
    if (tmpl_segs.size() != path_segs.size()) return false;
    auto kind_of = [&](const std::string& name) {
        for (const auto& p : params) {
            if (p.name == name) return p.kind;
        }
        return ParamKind::opaque;
    };
    for (std::size_t i = 0; i < tmpl_segs.size(); ++i) {
        const std::string& t = tmpl_segs[i];
        if (t.size() >= 2 && t.front() == '{' && t.back() == '}') {
            switch (kind_of(t.substr(1, t.size() - 2))) {
            case ParamKind::integer:
                if (!looks_like_integer(path_segs[i])) return false;
                break;
            case ParamKind::uuid:
                if (!looks_like_uuid(path_segs[i])) return false;
                break;
            case ParamKind::opaque:
                if (path_segs[i].empty()) return false;
                break;
            }
        } else if (t != path_segs[i]) {
            return false;
        }
    }
    return true;
}

std::optional<std::string> fill_template(const std::string& tmpl,
                                         const std::vector<PathParam>& params,
                                         const std::map<std::string, std::string>& values) {
    auto kind_of = [&](const std::string& name) {
        for (const auto& p : params) {
            if (p.name == name) return p.kind;
        }
        return ParamKind::opaque;
    };
    std::string out;
    for (const auto& seg : split_segments(tmpl)) {
        out += "/";
        if (seg.size() >= 2 && seg.front() == '{' && seg.back() == '}') {
            std::string name = seg.substr(1, seg.size() - 2);
            auto it = values.find(name);
            if (it == values.end() || it->second.empty()) return std::nullopt;
            switch (kind_of(name)) {
            case ParamKind::integer:
                if (!looks_like_integer(it->second)) return std::nullopt;
                break;
            case ParamKind::uuid:
                if (!looks_like_uuid(it->second)) return std::nullopt;
                break;
            case ParamKind::opaque:
                break;
            }
            out += it->second;
        } else {
            out += seg;
        }
    }
    if (out.empty()) out = "/";
    return out;
}

namespace {

bool session_like_cookie_name(const std::string& name) {
    std::string n = to_lower(name);
    return n.find("sess") != std::string::npos || n.find("sid") != std::string::npos ||
           n.find("token") != std::string::npos || n.find("auth") != std::string::npos;
}

bool api_key_header_name(const std::string& name) {
    std::string n = to_lower(name);
    return n.starts_with("x-") && n.ends_with("-key");
}

std::string vault_key_for(const std::string& host, AuthKind kind, const std::string& location) {
    return host + ":" + auth_kind_name(kind) + ":" + to_lower(location);
}

} // namespace

AuthDescriptor extract_auth(const capture::CaptureEntry& entry, CredentialVault& vault) {
    auto url = parse_url(entry.url);
    std::string host = url ? url->host : "";

    const std::string* bearer_value = nullptr;
    const std::string* api_key_value = nullptr;
    std::string api_key_location;
    std::string cookie_name, cookie_value;

    for (const auto& [name, value] : entry.request_headers) {
        if (iequals(name, "Authorization")) {
            std::string lower = to_lower(value);
            if (lower.starts_with("bearer ")) {
                bearer_value = &value;
            }
        } else if (api_key_header_name(name)) {
            api_key_value = &value;
            api_key_location = name;
        } else if (iequals(name, "Cookie") && cookie_name.empty()) {
            std::size_t pos = 0;
            while (pos < value.size()) {
                auto semi = value.find(';', pos);
                std::string pair = value.substr(
                    pos, semi == std::string::npos ? std::string::npos : semi - pos);
                auto eq = pair.find('=');
                if (eq != std::string::npos) {
                    std::string cname = pair.substr(0, eq);
                    cname.erase(0, cname.find_first_not_of(" \t"));
                    if (session_like_cookie_name(cname)) {
                        cookie_name = cname;
                        cookie_value = pair.substr(eq + 1);
                        break;
                    }
                }
                if (semi == std::string::npos) break;
                pos = semi + 1;
            }
        }
    }

    AuthDescriptor out;
    if (bearer_value) {
        out.kind = AuthKind::bearer;
        out.location = "Authorization";
        out.value_ref = vault_key_for(host, out.kind, out.location);
        vault.put(out.value_ref, bearer_value->substr(7)); // token past "Bearer "
    } else if (api_key_value) {
        out.kind = AuthKind::api_key_header;
        out.location = api_key_location;
        out.value_ref = vault_key_for(host, out.kind, out.location);
        vault.put(out.value_ref, *api_key_value);
    } else if (!cookie_name.empty()) {
        out.kind = AuthKind::cookie;
        out.location = cookie_name;
        out.value_ref = vault_key_for(host, out.kind, out.location);
        vault.put(out.value_ref, cookie_value);
    }
    return out;
}

namespace {

int auth_rank(AuthKind kind) {
    switch (kind) {
    case AuthKind::bearer: return 3;
    case AuthKind::api_key_header: return 2;
    case AuthKind::cookie: return 1;
    case AuthKind::none: return 0;
    }
    return 0;
}

ResponseShape::Kind query_value_kind(const std::string& value) {
    if (value == "true" || value == "false") return ResponseShape::Kind::boolean;
    if (!value.empty() && std::all_of(value.begin(), value.end(), [](unsigned char c) {
            return std::isdigit(c) || c == '.' || c == '-';
        })) {
        return ResponseShape::Kind::number;
    }
    return ResponseShape::Kind::string;
}

void sort_endpoints(std::vector<EndpointTemplate>& endpoints) {
    std::sort(endpoints.begin(), endpoints.end(),
              [](const EndpointTemplate& a, const EndpointTemplate& b) {
                  if (a.path_template != b.path_template) return a.path_template < b.path_template;
                  return a.method < b.method;
              });
}

} // namespace

std::vector<SkillPackage> distill(const std::vector<capture::CaptureEntry>& entries,
                                  CredentialVault& vault, const std::string& contributor,
                                  time_ms now) {
    if (entries.empty()) {
        throw NoApiEntries("no entries to distill");
    }

    std::map<std::string, std::vector<const capture::CaptureEntry*>> by_host;
    for (const auto& entry : entries) {
        auto url = parse_url(entry.url);
        if (!url) continue;
        by_host[url->host].push_back(&entry);
    }
    if (by_host.empty()) {
        throw NoApiEntries("no entries with parseable URLs");
    }

    std::vector<SkillPackage> packages;
    for (const auto& [host, host_entries] : by_host) {
        std::vector<std::string> paths;
        for (const auto* e : host_entries) {
            paths.push_back(parse_url(e->url)->path);
        }
        std::sort(paths.begin(), paths.end());
        paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
        auto groups = normalize_paths(paths);

        auto group_for = [&](const std::string& path) -> const PathTemplateGroup* {
            for (const auto& g : groups) {
                if (std::find(g.samples.begin(), g.samples.end(), path) != g.samples.end()) {
                    return &g;
                }
            }
            return nullptr;
        };

        // endpoint key -> working state
        struct Working {
            EndpointTemplate endpoint;
            std::map<std::string, int> query_seen; // name -> sample count
            int sample_count = 0;
            bool has_response = false;
            bool has_body = false;
        };
        std::map<std::string, Working> working;

        for (const auto* e : host_entries) {
            auto url = parse_url(e->url);
            const auto* group = group_for(url->path);
            if (!group) continue;

            std::string key = e->method + " " + group->path_template;
            auto [it, fresh] = working.try_emplace(key);
            Working& w = it->second;
            if (fresh) {
                w.endpoint.method = e->method;
                w.endpoint.path_template = group->path_template;
                w.endpoint.path_params = group->params;
                w.endpoint.safe = e->method == "GET";
                w.endpoint.response_schema =
                    ResponseShape::scalar(ResponseShape::Kind::null_kind);
            }
            ++w.sample_count;

            for (const auto& [name, value] : parse_query(url->query)) {
                auto qit = w.endpoint.query_schema.find(name);
                if (qit == w.endpoint.query_schema.end()) {
                    w.endpoint.query_schema[name] = {query_value_kind(value), false};
                }
                w.query_seen[name] += 1;
            }

            if (e->request_body) {
                auto parsed = nlohmann::json::parse(e->request_body->bytes, nullptr, false);
                if (!parsed.is_discarded()) {
                    ResponseShape shape = infer_shape(parsed);
                    w.endpoint.body_schema =
                        w.has_body ? unify(*w.endpoint.body_schema, shape) : shape;
                    w.has_body = true;
                }
            }

            if (e->response_body && !e->response_truncated) {
                auto parsed = nlohmann::json::parse(*e->response_body, nullptr, false);
                if (!parsed.is_discarded()) {
                    ResponseShape shape = infer_shape(parsed);
                    w.endpoint.response_schema =
                        w.has_response ? unify(w.endpoint.response_schema, shape) : shape;
                    if (!w.has_response) {
                        w.endpoint.response_example = parsed;
                    }
                    w.has_response = true;
                }
            }

            AuthDescriptor auth = extract_auth(*e, vault);
            if (auth_rank(auth.kind) > auth_rank(w.endpoint.auth.kind)) {
                w.endpoint.auth = auth;
            }
        }

        SkillPackage pkg;
        pkg.domain = host;
        pkg.contributor = contributor;
        pkg.created_at = now;
        std::set<std::string> auth_refs;
        for (auto& [key, w] : working) {
            for (auto& [name, spec] : w.endpoint.query_schema) {
                spec.required = w.query_seen[name] == w.sample_count;
            }
            if (w.endpoint.auth.kind != AuthKind::none &&
                auth_refs.insert(w.endpoint.auth.value_ref).second) {
                pkg.auth_local.push_back(w.endpoint.auth);
            }
            pkg.endpoints.push_back(std::move(w.endpoint));
        }
        sort_endpoints(pkg.endpoints);
        pkg.manifest_text = render_manifest(pkg.domain, pkg.endpoints);
        packages.push_back(std::move(pkg));
    }
    return packages;
}

MergeResult merge_skills(const SkillPackage& existing, const SkillPackage& incoming) {
    if (existing.domain != incoming.domain) {
        throw DomainMismatch("cannot merge " + incoming.domain + " into " + existing.domain);
    }

    MergeResult result;
    result.merged = existing;
    result.delta.contributor = incoming.contributor;

    auto find_existing = [&](const std::string& key) -> EndpointTemplate* {
        for (auto& e : result.merged.endpoints) {
            if (e.key() == key) return &e;
        }
        return nullptr;
    };

    for (const auto& inc : incoming.endpoints) {
        EndpointTemplate* cur = find_existing(inc.key());
        if (!cur) {
            result.merged.endpoints.push_back(inc);
            result.delta.added_endpoints.push_back(inc.key());
            result.delta.added_schema_lines += static_cast<int>(canonical_lines(inc).size());
            continue;
        }

        auto before_lines = canonical_lines(*cur);

        // union: incoming may add query params, body/response fields, auth
        for (const auto& [name, spec] : inc.query_schema) {
            if (!cur->query_schema.count(name)) {
                cur->query_schema[name] = {spec.kind, false};
            }
        }
        cur->response_schema = unify(cur->response_schema, inc.response_schema);
        if (inc.body_schema) {
            cur->body_schema =
                cur->body_schema ? unify(*cur->body_schema, *inc.body_schema) : *inc.body_schema;
        }
        if (cur->auth.kind == AuthKind::none && inc.auth.kind != AuthKind::none) {
            cur->auth = inc.auth;
        }
        if (!cur->response_example && inc.response_example) {
            cur->response_example = inc.response_example;
        }

        auto after_lines = canonical_lines(*cur);
        int added = 0;
        auto before_set = std::set<std::string>(before_lines.begin(), before_lines.end());
        for (const auto& line : after_lines) {
            if (!before_set.count(line)) ++added;
        }
        if (added > 0) {
            result.delta.changed_endpoints.emplace_back(inc.key(), added);
            result.delta.added_schema_lines += added;
        }
    }

    std::vector<EndpointTemplate>* eps = &result.merged.endpoints;
    std::sort(eps->begin(), eps->end(), [](const EndpointTemplate& a, const EndpointTemplate& b) {
        if (a.path_template != b.path_template) return a.path_template < b.path_template;
        return a.method < b.method;
    });

    for (const auto& a : incoming.auth_local) {
        bool present = std::any_of(result.merged.auth_local.begin(),
                                   result.merged.auth_local.end(),
                                   [&](const AuthDescriptor& d) { return d == a; });
        if (!present) result.merged.auth_local.push_back(a);
    }

    result.merged.manifest_text = render_manifest(result.merged.domain, result.merged.endpoints);
    return result;
}

std::string render_endpoint_doc(const std::string& domain, const EndpointTemplate& endpoint) {
    std::ostringstream out;
    out << "## " << endpoint.method << " " << endpoint.path_template << "\n\n";
    out << "Calls `" << domain << endpoint.path_template << "`.\n\n";
    out << "- auth: " << auth_kind_name(endpoint.auth.kind);
    if (endpoint.auth.kind != AuthKind::none) {
        out << " (" << endpoint.auth.location << ")";
    }
    out << "\n";
    if (!endpoint.path_params.empty()) {
        out << "- path params:";
        for (const auto& p : endpoint.path_params) {
            out << " " << p.name << " (" << param_kind_name(p.kind) << ")";
        }
        out << "\n";
    }
    if (!endpoint.query_schema.empty()) {
        out << "- query params:";
        for (const auto& [name, spec] : endpoint.query_schema) {
            out << " " << name << " (" << kind_name(spec.kind)
                << (spec.required ? ", required)" : ")");
        }
        out << "\n";
    }
    if (endpoint.body_schema) {
        out << "- request body: `" << shape_to_string(*endpoint.body_schema) << "`\n";
    }
    out << "- response: `" << shape_to_string(endpoint.response_schema) << "`\n";
    return out.str();
}

std::string render_manifest(const std::string& domain,
                            const std::vector<EndpointTemplate>& endpoints) {
    std::ostringstream out;
    out << "# " << domain << "\n\n";
    out << "Callable routes distilled from captured traffic for `" << domain << "`.\n\n";
    std::vector<const EndpointTemplate*> sorted;
    for (const auto& e : endpoints) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](const EndpointTemplate* a, const EndpointTemplate* b) {
        if (a->path_template != b->path_template) return a->path_template < b->path_template;
        return a->method < b->method;
    });
    for (const auto* e : sorted) {
        out << render_endpoint_doc(domain, *e) << "\n";
    }
    return out.str();
}

std::vector<std::string> canonical_lines(const EndpointTemplate& endpoint) {
    std::vector<std::string> lines;
    std::string prefix = endpoint.key();
    lines.push_back(prefix);
    for (const auto& p : endpoint.path_params) {
        lines.push_back(prefix + " | path " + p.name + ":" + param_kind_name(p.kind));
    }
    for (const auto& [name, spec] : endpoint.query_schema) {
        lines.push_back(prefix + " | query " + name + ":" + kind_name(spec.kind) +
                        (spec.required ? " required" : ""));
    }
    if (endpoint.auth.kind != AuthKind::none) {
        lines.push_back(prefix + " | auth " + auth_kind_name(endpoint.auth.kind) + " " +
                        to_lower(endpoint.auth.location));
    }
    if (endpoint.body_schema) {
        for (const auto& line : flatten_shape(*endpoint.body_schema)) {
            lines.push_back(prefix + " | body " + line);
        }
    }
    for (const auto& line : flatten_shape(endpoint.response_schema)) {
        lines.push_back(prefix + " | response " + line);
    }
    std::sort(lines.begin(), lines.end());
    return lines;
}

std::vector<std::string> canonical_lines(const std::vector<EndpointTemplate>& endpoints) {
    std::vector<std::string> lines;
    for (const auto& e : endpoints) {
        auto el = canonical_lines(e);
        lines.insert(lines.end(), el.begin(), el.end());
    }
    std::sort(lines.begin(), lines.end());
    return lines;
}

namespace {

std::string ts_type(const ResponseShape& shape) {
    using Kind = ResponseShape::Kind;
    switch (shape.kind) {
    case Kind::object: {
        std::string out = "{ ";
        for (const auto& [name, field] : shape.fields) {
            out += name;
            if (field.optional) out += "?";
            out += ": " + ts_type(field) + "; ";
        }
        return out + "}";
    }
    case Kind::array:
        return (shape.element ? ts_type(*shape.element) : std::string("unknown")) + "[]";
    case Kind::string: return "string";
    case Kind::number: return "number";
    case Kind::boolean: return "boolean";
    case Kind::null_kind: return "null";
    }
    return "unknown";
}

std::string camel_identifier(const EndpointTemplate& e) {
    std::string out = to_lower(e.method);
    bool upper = true;
    for (char c : e.path_template) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(upper ? static_cast<char>(std::toupper(c)) : c);
            upper = false;
        } else {
            upper = true;
        }
    }
    return out;
}

} // namespace

std::string render_client_stub(const SkillPackage& pkg) {
    std::ostringstream out;
    out << "// Generated client stub for " << pkg.domain << " — documentation artifact,\n";
    out << "// not compiled or executed by this project.\n\n";
    for (const auto& e : pkg.endpoints) {
        out << "export async function " << camel_identifier(e) << "(";
        bool first = true;
        for (const auto& p : e.path_params) {
            if (!first) out << ", ";
            first = false;
            out << p.name << ": " << (p.kind == ParamKind::integer ? "number" : "string");
        }
        for (const auto& [name, spec] : e.query_schema) {
            if (!first) out << ", ";
            first = false;
            out << name << (spec.required ? ": " : "?: ")
                << (spec.kind == ResponseShape::Kind::number ? "number" : "string");
        }
        out << "): Promise<" << ts_type(e.response_schema) << "> {\n";
        out << "  // " << e.method << " https://" << pkg.domain << e.path_template << "\n";
        out << "  throw new Error(\"stub\");\n}\n\n";
    }
    return out.str();
}

void write_skill_dir(const SkillPackage& pkg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir + "/manifest.md", pkg.manifest_text);

    nlohmann::json endpoints_doc = pkg.to_publishable_json();
    write_file(dir + "/endpoints.json", canonical_dump(endpoints_doc) + "\n");

    nlohmann::json auth = nlohmann::json::array();
    for (const auto& a : pkg.auth_local) {
        auth.push_back(a.to_json(/*publishable=*/false));
    }
    write_file_private(dir + "/auth.local.json", canonical_dump(auth) + "\n");

    write_file(dir + "/client.stub.ts", render_client_stub(pkg));
}

SkillPackage load_skill_dir(const std::string& dir) {
    auto j = nlohmann::json::parse(read_file(dir + "/endpoints.json"));
    SkillPackage pkg = SkillPackage::from_publishable_json(j);
    std::string auth_path = dir + "/auth.local.json";
    if (std::filesystem::exists(auth_path)) {
        auto auth = nlohmann::json::parse(read_file(auth_path));
        std::map<std::string, AuthDescriptor> by_location;
        for (const auto& a : auth) {
            AuthDescriptor d = AuthDescriptor::from_json(a);
            pkg.auth_local.push_back(d);
            by_location[auth_kind_name(d.kind) + std::string(":") + to_lower(d.location)] = d;
        }
        // re-attach vault refs stripped from the publishable payload
        for (auto& e : pkg.endpoints) {
            if (e.auth.kind == AuthKind::none) continue;
            auto it = by_location.find(auth_kind_name(e.auth.kind) + std::string(":") +
                                       to_lower(e.auth.location));
            if (it != by_location.end()) {
                e.auth = it->second;
            }
        }
    }
    std::string manifest_path = dir + "/manifest.md";
    if (std::filesystem::exists(manifest_path)) {
        pkg.manifest_text = read_file(manifest_path);
    }
    return pkg;
}

} // namespace routegraph::distill
