#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/capture.hpp"
#include "routegraph/distill.hpp"
#include "routegraph/errors.hpp"
#include "routegraph/util.hpp"

namespace routegraph::simnet {

// Requests from the simulated browser carry this marker; bot-protected
// sites reject anything without it.
inline constexpr const char* kBrowserMarkerHeader = "X-Sim-Browser";

struct SimRequest {
    std::string method;
    std::string url;
    std::map<std::string, std::string> headers;
    std::optional<std::string> body;
};

struct SimResponse {
    int status = 200;
    std::string media_type;
    std::string body;
    time_ms latency_ms = 0;
};

struct SimCall {
    std::string method;
    std::string path; // concrete, may carry a query string
};

struct PageSpec {
    std::string path;
    std::string title;
    time_ms latency_ms = 2'000;
    std::vector<SimCall> calls; // XHRs the page issues while rendering
};

enum class FailureMode { none, http_500, timeout };

struct EndpointSpec {
    std::string method = "GET";
    std::string path_template; // "/api/products/{id}"
    std::vector<distill::PathParam> params;
    time_ms latency_ms = 630;
    nlohmann::json response_template; // see render rules below
    bool requires_auth = false;
    FailureMode failure = FailureMode::none;

    // drift mutations applied to rendered responses, in order
    struct Mutation {
        std::string kind; // remove-field | change-type | add-field
        std::string field;
    };
    std::vector<Mutation> mutations;
};

struct SiteFlags {
    bool bot_protected = false;
    bool html_only = false;
    bool tier2_opt_in = false;
    micro_t tier2_fee = 0;
};

// Canned intent a fleet agent may draw for this site. `page_path` names the
// page a browser-only agent would load for the same answer.
struct SimIntent {
    std::string text;
    std::map<std::string, std::string> params;
    std::string page_path;
    std::string endpoint_key;
};

struct SimSite {
    std::string host;
    SiteFlags flags;
    std::map<std::string, PageSpec> pages;
    std::vector<EndpointSpec> endpoints;
    std::vector<SimIntent> intents;
    std::string session_cookie; // browser sends "session=<value>" when set

    EndpointSpec* find_endpoint(const std::string& method, const std::string& path);
    const EndpointSpec* find_endpoint_by_key(const std::string& key) const;

    void inject_drift(const std::string& endpoint_key, const std::string& kind,
                      const std::string& field);
    void clear_drift(const std::string& endpoint_key);
    void set_failure(const std::string& endpoint_key, FailureMode mode);
};

// Template value rules: "$p:name" substitutes the path/query param as a
// string, "$pi:name" as a number, "$n:key" renders a seeded stable number.
nlohmann::json render_response(const SimSite& site, const EndpointSpec& endpoint,
                               const std::map<std::string, std::string>& params,
                               std::uint64_t seed);

class SimWeb {
public:
    explicit SimWeb(VirtualClock& clock, std::uint64_t seed = 1) : clock_(clock), seed_(seed) {}

    void add_site(SimSite site);
    SimSite* site(const std::string& host);
    const SimSite* site(const std::string& host) const;
    std::vector<std::string> hosts() const;

    // Serves one request, advancing the clock by the configured latency.
    // Throws NotFound / BotBlocked.
    SimResponse serve(const SimRequest& request);

    const std::vector<SimRequest>& trace() const { return trace_; }
    void clear_trace() { trace_.clear(); }

    VirtualClock& clock() { return clock_; }
    std::uint64_t seed() const { return seed_; }

private:
    VirtualClock& clock_;
    std::uint64_t seed_;
    std::map<std::string, SimSite> sites_;
    std::vector<SimRequest> trace_;
};

// Loads site definitions from the declarative JSON config.
std::vector<SimSite> sites_from_json(const nlohmann::json& config);
SimSite site_from_json(const nlohmann::json& j);

// Drives the simulated browser over every page of the site, paying page
// latencies, and returns the captured traffic (pages, XHRs, declared noise).
capture::CaptureArchive simulate_browse(SimWeb& web, const std::string& host);

// Browser-path latency for a task answered by `page_path`: the page render.
time_ms browser_task_ms(const SimWeb& web, const std::string& host, const std::string& page_path);

} // namespace routegraph::simnet
