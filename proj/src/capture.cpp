#include "routegraph/capture.hpp"

#include <algorithm>
#include <cctype>

namespace routegraph::capture {

namespace {

const std::vector<std::string> kDefaultNoiseHosts = {
    "google-analytics.com", "googletagmanager.com", "doubleclick.net",
    "segment.io",           "segment.com",          "mixpanel.com",
    "amplitude.com",        "hotjar.com",           "clarity.ms",
    "sentry.io",            "nr-data.net",          "newrelic.com",
    "facebook.net",         "adsrvr.org",           "scorecardresearch.com",
    "cdn.jsdelivr.net",     "cdnjs.cloudflare.com", "unpkg.com",
    "fonts.googleapis.com", "gstatic.com",
};

const std::vector<std::string> kDefaultAssetTypes = {
    "image/", "font/",        "audio/",
    "video/", "text/css",     "text/javascript",
    "application/javascript", "application/x-javascript",
    "application/font-woff",  "application/font-woff2",
    "application/wasm",       "application/x-font-ttf",
};

std::string normalize_media_type(const std::string& media_type) {
    auto semi = media_type.find(';');
    std::string base = semi == std::string::npos ? media_type : media_type.substr(0, semi);
    while (!base.empty() && std::isspace(static_cast<unsigned char>(base.back()))) base.pop_back();
    return to_lower(base);
}

bool is_json_or_xml(const std::string& media_type) {
    std::string mt = normalize_media_type(media_type);
    if (mt == "application/json" || mt == "text/json" || mt == "application/xml" ||
        mt == "text/xml") {
        return true;
    }
    if (mt.ends_with("+json") || mt.ends_with("+xml")) {
        return true;
    }
    return false;
}

bool valid_method_token(const std::string& method) {
    if (method.empty()) return false;
    return std::all_of(method.begin(), method.end(), [](unsigned char c) {
        return std::isalpha(c) || c == '-';
    });
}

bool path_has_api_pattern(const std::string& path) {
    std::string p = to_lower(path);
    if (p.find("/api/") != std::string::npos || p.ends_with("/api")) return true;
    if (p.find("/rest/") != std::string::npos) return true;
    if (p.find("graphql") != std::string::npos) return true;
    if (p.ends_with(".json")) return true;
    // versioned prefix: /v1/, /v12/ at any depth
    std::size_t pos = 0;
    while ((pos = p.find("/v", pos)) != std::string::npos) {
        std::size_t i = pos + 2;
        std::size_t digits = 0;
        while (i < p.size() && std::isdigit(static_cast<unsigned char>(p[i]))) {
            ++i;
            ++digits;
        }
        if (digits > 0 && (i == p.size() || p[i] == '/')) return true;
        pos += 2;
    }
    return false;
}

bool body_is_structured(const CaptureEntry& entry) {
    if (!entry.response_body || entry.response_truncated) return false;
    const std::string& body = *entry.response_body;
    if (body.empty()) return false;
    auto parsed = nlohmann::json::parse(body, nullptr, false);
    if (!parsed.is_discarded() && (parsed.is_object() || parsed.is_array())) {
        return true;
    }
    // crude XML probe: opening tag plus a closing tag, and not an HTML page
    std::size_t start = body.find_first_not_of(" \t\r\n");
    if (start == std::string::npos || body[start] != '<') return false;
    std::string lower = to_lower(body.substr(start, 64));
    if (lower.starts_with("<!doctype") || lower.starts_with("<html")) return false;
    return body.find("</") != std::string::npos || lower.starts_with("<?xml");
}

} // namespace

std::string ParseDiagnostics::to_json_lines() const {
    std::string out;
    for (const auto& item : skipped) {
        nlohmann::json j{{"event", "skipped"},
                         {"index", item.original_index},
                         {"reason", item.reason},
                         {"url", item.url}};
        out += canonical_dump(j);
        out += '\n';
    }
    for (const auto& item : truncated) {
        nlohmann::json j{{"event", "truncated"},
                         {"index", item.original_index},
                         {"reason", item.reason},
                         {"url", item.url}};
        out += canonical_dump(j);
        out += '\n';
    }
    return out;
}

FilterPolicy FilterPolicy::defaults() {
    FilterPolicy p;
    p.noise_hosts = kDefaultNoiseHosts;
    p.asset_media_types = kDefaultAssetTypes;
    return p;
}

FilterPolicy FilterPolicy::from_json(const nlohmann::json& j) {
    FilterPolicy p;
    p.noise_hosts = j.value("noise_hosts", kDefaultNoiseHosts);
    p.asset_media_types = j.value("asset_media_types", kDefaultAssetTypes);
    p.body_cap_bytes = j.value("body_cap_bytes", static_cast<std::size_t>(1 << 20));
    return p;
}

nlohmann::json FilterPolicy::to_json() const {
    return nlohmann::json{{"noise_hosts", noise_hosts},
                          {"asset_media_types", asset_media_types},
                          {"body_cap_bytes", body_cap_bytes}};
}

bool FilterPolicy::host_blocked(const std::string& host) const {
    std::string h = to_lower(host);
    for (const auto& pattern : noise_hosts) {
        if (h == pattern) return true;
        if (h.size() > pattern.size() && h.ends_with(pattern) &&
            h[h.size() - pattern.size() - 1] == '.') {
            return true;
        }
    }
    return false;
}

bool FilterPolicy::is_asset_media_type(const std::string& media_type) const {
    std::string mt = normalize_media_type(media_type);
    if (mt.empty()) return false;
    for (const auto& pattern : asset_media_types) {
        if (pattern.ends_with('/')) {
            if (mt.starts_with(pattern)) return true;
        } else if (mt == pattern) {
            return true;
        }
    }
    return false;
}

bool FilterVerdict::has_reason(const std::string& r) const {
    return std::find(reasons.begin(), reasons.end(), r) != reasons.end();
}

CaptureArchive parse_archive(const std::string& raw, ParseDiagnostics* diagnostics,
                             const FilterPolicy& policy) {
    auto doc = nlohmann::json::parse(raw, nullptr, false);
    if (doc.is_discarded()) {
        throw MalformedArchive("input is not valid JSON");
    }
    if (!doc.is_object() || !doc.contains("log") || !doc["log"].is_object() ||
        !doc["log"].contains("entries") || !doc["log"]["entries"].is_array()) {
        throw MalformedArchive("missing log.entries");
    }
    const auto& entries = doc["log"]["entries"];
    if (entries.empty()) {
        throw EmptyArchive("archive has zero entries");
    }

    ParseDiagnostics local;
    ParseDiagnostics& diag = diagnostics ? *diagnostics : local;

    CaptureArchive archive;
    archive.source_label = doc["log"].value("creator", nlohmann::json::object()).value("name", "");

    std::size_t index = 0;
    for (const auto& e : entries) {
        auto skip = [&](const std::string& reason, const std::string& url) {
            diag.skipped.push_back({index, reason, url});
        };
        const std::string url = e.value("request", nlohmann::json::object()).value("url", "");
        if (!e.contains("request") || !e.contains("response")) {
            skip("missing-request-or-response", url);
            ++index;
            continue;
        }
        const auto& req = e["request"];
        const auto& res = e["response"];

        CaptureEntry entry;
        entry.method = req.value("method", "");
        entry.url = url;
        if (!parse_url(entry.url)) {
            skip("unparseable-url", url);
            ++index;
            continue;
        }
        if (!valid_method_token(entry.method)) {
            skip("bad-method", url);
            ++index;
            continue;
        }
        std::transform(entry.method.begin(), entry.method.end(), entry.method.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });

        entry.response_status = res.value("status", 0);
        if (entry.response_status < 100 || entry.response_status > 599) {
            skip("bad-status", url);
            ++index;
            continue;
        }

        if (req.contains("headers") && req["headers"].is_array()) {
            for (const auto& h : req["headers"]) {
                entry.request_headers[h.value("name", "")] = h.value("value", "");
            }
        }
        if (req.contains("postData") && req["postData"].is_object()) {
            HttpBody body;
            body.media_type = req["postData"].value("mimeType", "");
            body.bytes = req["postData"].value("text", "");
            entry.request_body = std::move(body);
        }

        if (res.contains("content") && res["content"].is_object()) {
            entry.response_media_type = res["content"].value("mimeType", "");
            if (res["content"].contains("text")) {
                std::string text = res["content"].value("text", "");
                if (text.size() > policy.body_cap_bytes) {
                    text.resize(policy.body_cap_bytes);
                    entry.response_truncated = true;
                    diag.truncated.push_back({index, "body-over-cap", url});
                }
                entry.response_body = std::move(text);
            }
        }

        if (e.contains("startedDateTime")) {
            auto t = parse_iso8601(e["startedDateTime"].get<std::string>());
            if (!t) {
                skip("bad-timestamp", url);
                ++index;
                continue;
            }
            entry.started_at = *t;
        }
        entry.duration_ms = std::max(0.0, e.value("time", 0.0));

        archive.entries.push_back(std::move(entry));
        ++index;
    }

    if (archive.entries.empty()) {
        throw EmptyArchive("no usable entries after parsing");
    }

    std::stable_sort(archive.entries.begin(), archive.entries.end(),
                     [](const CaptureEntry& a, const CaptureEntry& b) {
                         return a.started_at < b.started_at;
                     });
    return archive;
}

nlohmann::json serialize_archive(const CaptureArchive& archive) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : archive.entries) {
        nlohmann::json headers = nlohmann::json::array();
        for (const auto& [name, value] : e.request_headers) {
            headers.push_back({{"name", name}, {"value", value}});
        }
        nlohmann::json req{{"method", e.method}, {"url", e.url}, {"headers", headers}};
        if (e.request_body) {
            req["postData"] = {{"mimeType", e.request_body->media_type},
                               {"text", e.request_body->bytes}};
        }
        nlohmann::json content{{"mimeType", e.response_media_type}};
        if (e.response_body) {
            content["text"] = *e.response_body;
        }
        nlohmann::json entry{{"request", req},
                             {"response", {{"status", e.response_status}, {"content", content}}},
                             {"startedDateTime", format_iso8601(e.started_at)},
                             {"time", e.duration_ms}};
        entries.push_back(std::move(entry));
    }
    return nlohmann::json{
        {"log",
         {{"version", "1.2"},
          {"creator", {{"name", archive.source_label}, {"version", "1.0"}}},
          {"entries", entries}}}};
}

FilterVerdict classify_entry(const CaptureEntry& entry, const FilterPolicy& policy) {
    FilterVerdict verdict;
    auto url = parse_url(entry.url);
    const std::string host = url ? url->host : "";
    const std::string path = url ? url->path : "";

    if (policy.host_blocked(host)) {
        verdict.keep = false;
        verdict.reasons = {kReasonNoiseDomain};
        return verdict;
    }
    if (policy.is_asset_media_type(entry.response_media_type)) {
        verdict.keep = false;
        verdict.reasons = {kReasonStaticAsset};
        return verdict;
    }

    if (is_json_or_xml(entry.response_media_type)) {
        verdict.reasons.push_back(kReasonContentType);
    }
    if (path_has_api_pattern(path)) {
        verdict.reasons.push_back(kReasonUrlPattern);
    }
    if (entry.method == "POST" || entry.method == "PUT" || entry.method == "PATCH" ||
        entry.method == "DELETE") {
        verdict.reasons.push_back(kReasonMethod);
    }
    if (body_is_structured(entry)) {
        verdict.reasons.push_back(kReasonResponseStructure);
    }

    verdict.keep = !verdict.reasons.empty();
    if (!verdict.keep) {
        verdict.reasons = {kReasonNoApiSignal};
    }
    return verdict;
}

std::vector<CaptureEntry> filter_archive(const CaptureArchive& archive,
                                         const FilterPolicy& policy) {
    std::vector<CaptureEntry> kept;
    for (const auto& entry : archive.entries) {
        if (classify_entry(entry, policy).keep) {
            kept.push_back(entry);
        }
    }
    return kept;
}

} // namespace routegraph::capture
