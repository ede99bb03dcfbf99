#include "routegraph/simnet.hpp"

#include <algorithm>

namespace routegraph::simnet {

EndpointSpec* SimSite::find_endpoint(const std::string& method, const std::string& path) {
    for (auto& e : endpoints) {
        if (e.method == method && distill::template_matches(e.path_template, e.params, path)) {
            return &e;
        }
    }
    return nullptr;
}

const EndpointSpec* SimSite::find_endpoint_by_key(const std::string& key) const {
    for (const auto& e : endpoints) {
        if (e.method + " " + e.path_template == key) return &e;
    }
    return nullptr;
}

void SimSite::inject_drift(const std::string& endpoint_key, const std::string& kind,
                           const std::string& field) {
    for (auto& e : endpoints) {
        if (e.method + " " + e.path_template == endpoint_key) {
            e.mutations.push_back({kind, field});
            return;
        }
    }
    throw NotFound("no endpoint " + endpoint_key + " on " + host);
}

void SimSite::clear_drift(const std::string& endpoint_key) {
    for (auto& e : endpoints) {
        if (e.method + " " + e.path_template == endpoint_key) {
            e.mutations.clear();
            return;
        }
    }
    throw NotFound("no endpoint " + endpoint_key + " on " + host);
}

void SimSite::set_failure(const std::string& endpoint_key, FailureMode mode) {
    for (auto& e : endpoints) {
        if (e.method + " " + e.path_template == endpoint_key) {
            e.failure = mode;
            return;
        }
    }
    throw NotFound("no endpoint " + endpoint_key + " on " + host);
}

namespace {

std::map<std::string, std::string> extract_params(const EndpointSpec& endpoint,
                                                  const std::string& path,
                                                  const std::string& query) {
    std::map<std::string, std::string> out;
    // walk template and concrete path in parallel
    auto split = [](const std::string& p) {
        std::vector<std::string> segs;
        std::size_t pos = 0;
        while (pos < p.size()) {
            if (p[pos] == '/') {
                ++pos;
                continue;
            }
            auto next = p.find('/', pos);
            segs.push_back(
                p.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
            if (next == std::string::npos) break;
            pos = next;
        }
        return segs;
    };
    auto tmpl_segs = split(endpoint.path_template);
    auto path_segs = split(path);
    for (std::size_t i = 0; i < tmpl_segs.size() && i < path_segs.size(); ++i) {
        const auto& t = tmpl_segs[i];
        if (t.size() >= 2 && t.front() == '{' && t.back() == '}') {
            out[t.substr(1, t.size() - 2)] = path_segs[i];
        }
    }
    for (const auto& [name, value] : parse_query(query)) {
        out[name] = value;
    }
    return out;
}

nlohmann::json render_value(const nlohmann::json& tmpl, const SimSite& site,
                            const EndpointSpec& endpoint,
                            const std::map<std::string, std::string>& params,
                            std::uint64_t seed) {
    if (tmpl.is_object()) {
        nlohmann::json out = nlohmann::json::object();
        for (auto it = tmpl.begin(); it != tmpl.end(); ++it) {
            out[it.key()] = render_value(it.value(), site, endpoint, params, seed);
        }
        return out;
    }
    if (tmpl.is_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& item : tmpl) {
            out.push_back(render_value(item, site, endpoint, params, seed));
        }
        return out;
    }
    if (tmpl.is_string()) {
        const std::string s = tmpl.get<std::string>();
        if (s.starts_with("$p:")) {
            auto it = params.find(s.substr(3));
            return it == params.end() ? nlohmann::json("") : nlohmann::json(it->second);
        }
        if (s.starts_with("$pi:")) {
            auto it = params.find(s.substr(4));
            if (it != params.end() && distill::looks_like_integer(it->second)) {
                return nlohmann::json(std::stoll(it->second));
            }
            return nlohmann::json(0);
        }
        if (s.starts_with("$n:")) {
            std::uint64_t h = fnv1a64(site.host + "|" + endpoint.path_template + "|" + s, seed);
            return nlohmann::json(static_cast<double>(h % 10'000) / 100.0);
        }
        return tmpl;
    }
    return tmpl;
}

void apply_mutations(nlohmann::json& body, const std::vector<EndpointSpec::Mutation>& mutations) {
    if (!body.is_object()) return;
    for (const auto& m : mutations) {
        if (m.kind == "remove-field") {
            body.erase(m.field);
        } else if (m.kind == "change-type") {
            if (body.contains(m.field)) {
                const auto& v = body[m.field];
                if (v.is_number()) {
                    body[m.field] = canonical_dump(v); // number -> string
                } else if (v.is_string()) {
                    body[m.field] = 0;
                } else {
                    body[m.field] = canonical_dump(v);
                }
            }
        } else if (m.kind == "add-field") {
            body[m.field] = "x-added";
        }
    }
}

} // namespace

nlohmann::json render_response(const SimSite& site, const EndpointSpec& endpoint,
                               const std::map<std::string, std::string>& params,
                               std::uint64_t seed) {
    nlohmann::json body = render_value(endpoint.response_template, site, endpoint, params, seed);
    apply_mutations(body, endpoint.mutations);
    return body;
}

void SimWeb::add_site(SimSite site) {
    sites_[site.host] = std::move(site);
}

SimSite* SimWeb::site(const std::string& host) {
    auto it = sites_.find(host);
    return it == sites_.end() ? nullptr : &it->second;
}

const SimSite* SimWeb::site(const std::string& host) const {
    auto it = sites_.find(host);
    return it == sites_.end() ? nullptr : &it->second;
}

std::vector<std::string> SimWeb::hosts() const {
    std::vector<std::string> out;
    for (const auto& [host, _] : sites_) out.push_back(host);
    return out;
}

SimResponse SimWeb::serve(const SimRequest& request) {
    trace_.push_back(request);

    auto url = parse_url(request.url);
    if (!url) {
        throw NotFound("unparseable url " + request.url);
    }
    auto sit = sites_.find(url->host);
    if (sit == sites_.end()) {
        throw NotFound("no such host " + url->host);
    }
    SimSite& site = sit->second;

    bool is_browser = request.headers.count(kBrowserMarkerHeader) > 0;
    if (site.flags.bot_protected && !is_browser) {
        throw BotBlocked(url->host + " rejects non-browser traffic");
    }

    if (EndpointSpec* endpoint = site.find_endpoint(request.method, url->path)) {
        clock_.advance(endpoint->latency_ms);
        if (endpoint->failure == FailureMode::http_500) {
            return {500, "application/json", R"({"error":"internal"})", endpoint->latency_ms};
        }
        if (endpoint->failure == FailureMode::timeout) {
            return {599, "", "", endpoint->latency_ms};
        }
        if (endpoint->requires_auth) {
            // cookie-gated endpoints accept the captured session cookie
            auto cookie = request.headers.find("Cookie");
            bool ok = !site.session_cookie.empty() && cookie != request.headers.end() &&
                      cookie->second.find(site.session_cookie) != std::string::npos;
            if (!ok) {
                return {401, "application/json", R"({"error":"unauthorized"})",
                        endpoint->latency_ms};
            }
        }
        auto params = extract_params(*endpoint, url->path, url->query);
        nlohmann::json body = render_response(site, *endpoint, params, seed_);
        return {200, "application/json", canonical_dump(body), endpoint->latency_ms};
    }

    if (request.method == "GET") {
        auto pit = site.pages.find(url->path);
        if (pit != site.pages.end()) {
            clock_.advance(pit->second.latency_ms);
            std::string html = "<!doctype html><html><head><title>" + pit->second.title +
                               "</title></head><body><h1>" + pit->second.title +
                               "</h1></body></html>";
            return {200, "text/html", html, pit->second.latency_ms};
        }
    }
    throw NotFound(request.method + " " + request.url);
}

namespace {

distill::PathParam param_from_json(const nlohmann::json& j) {
    return {j.value("name", ""), distill::param_kind_from_name(j.value("kind", "opaque"))};
}

} // namespace

SimSite site_from_json(const nlohmann::json& j) {
    SimSite site;
    site.host = j.value("host", "");
    if (j.contains("flags")) {
        const auto& f = j["flags"];
        site.flags.bot_protected = f.value("bot_protected", false);
        site.flags.html_only = f.value("html_only", false);
        site.flags.tier2_opt_in = f.value("tier2_opt_in", false);
        site.flags.tier2_fee = f.value("tier2_fee", static_cast<micro_t>(0));
    }
    site.session_cookie = j.value("session_cookie", "");
    for (const auto& p : j.value("pages", nlohmann::json::array())) {
        PageSpec page;
        page.path = p.value("path", "/");
        page.title = p.value("title", site.host);
        page.latency_ms = p.value("latency_ms", static_cast<time_ms>(2'000));
        for (const auto& c : p.value("calls", nlohmann::json::array())) {
            page.calls.push_back({c.value("method", "GET"), c.value("path", "/")});
        }
        site.pages[page.path] = std::move(page);
    }
    for (const auto& e : j.value("endpoints", nlohmann::json::array())) {
        EndpointSpec endpoint;
        endpoint.method = e.value("method", "GET");
        endpoint.path_template = e.value("path_template", "/");
        for (const auto& p : e.value("params", nlohmann::json::array())) {
            endpoint.params.push_back(param_from_json(p));
        }
        endpoint.latency_ms = e.value("latency_ms", static_cast<time_ms>(630));
        endpoint.response_template = e.value("response_template", nlohmann::json::object());
        endpoint.requires_auth = e.value("requires_auth", false);
        site.endpoints.push_back(std::move(endpoint));
    }
    for (const auto& i : j.value("intents", nlohmann::json::array())) {
        SimIntent intent;
        intent.text = i.value("text", "");
        intent.params = i.value("params", std::map<std::string, std::string>{});
        intent.page_path = i.value("page", "/");
        intent.endpoint_key = i.value("endpoint", "");
        site.intents.push_back(std::move(intent));
    }
    return site;
}

std::vector<SimSite> sites_from_json(const nlohmann::json& config) {
    std::vector<SimSite> out;
    for (const auto& s : config.value("sites", nlohmann::json::array())) {
        out.push_back(site_from_json(s));
    }
    return out;
}

capture::CaptureArchive simulate_browse(SimWeb& web, const std::string& host) {
    const SimSite* site = web.site(host);
    if (!site) {
        throw NotFound("no such host " + host);
    }

    capture::CaptureArchive archive;
    archive.source_label = "simnet:" + host;

    auto record = [&](const SimRequest& request, const SimResponse& response) {
        capture::CaptureEntry entry;
        entry.method = request.method;
        entry.url = request.url;
        entry.request_headers = request.headers;
        if (request.body) {
            entry.request_body = capture::HttpBody{"application/json", *request.body};
        }
        entry.response_status = response.status;
        entry.response_media_type = response.media_type;
        entry.response_body = response.body;
        entry.started_at = web.clock().now_ms() - response.latency_ms;
        entry.duration_ms = static_cast<double>(response.latency_ms);
        archive.entries.push_back(std::move(entry));
    };

    std::map<std::string, std::string> browser_headers{{kBrowserMarkerHeader, "1"}};
    if (!site->session_cookie.empty()) {
        browser_headers["Cookie"] = "session=" + site->session_cookie;
    }

    for (const auto& [path, page] : site->pages) {
        SimRequest page_request{"GET", "https://" + host + path, browser_headers, std::nullopt};
        record(page_request, web.serve(page_request));

        if (site->flags.html_only) {
            continue; // server-rendered site: the page triggers no XHRs
        }
        for (const auto& call : page.calls) {
            SimRequest xhr{call.method, "https://" + host + call.path, browser_headers,
                           std::nullopt};
            if (call.method != "GET") {
                xhr.body = R"({"source":"page"})";
                xhr.headers["Content-Type"] = "application/json";
            }
            record(xhr, web.serve(xhr));
        }
    }
    if (archive.entries.empty()) {
        throw NotFound("site has no pages to browse");
    }
    return archive;
}

time_ms browser_task_ms(const SimWeb& web, const std::string& host,
                        const std::string& page_path) {
    const SimSite* site = web.site(host);
    if (!site) return 0;
    auto it = site->pages.find(page_path);
    return it == site->pages.end() ? 0 : it->second.latency_ms;
}

} // namespace routegraph::simnet
