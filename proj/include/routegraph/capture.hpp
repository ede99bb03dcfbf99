#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "routegraph/errors.hpp"
#include "routegraph/util.hpp"

namespace routegraph::capture {

struct HttpBody {
    std::string media_type;
    std::string bytes;

    bool operator==(const HttpBody&) const = default;
};

// One HAR request/response pair.
struct CaptureEntry {
    std::string method;
    std::string url;
    std::map<std::string, std::string> request_headers;
    std::optional<HttpBody> request_body;
    int response_status = 0;
    std::string response_media_type;
    std::optional<std::string> response_body;
    bool response_truncated = false;
    time_ms started_at = 0;
    double duration_ms = 0.0;

    bool operator==(const CaptureEntry&) const = default;
};

struct CaptureArchive {
    std::vector<CaptureEntry> entries; // capture order: started_at non-decreasing
    std::string source_label;

    bool operator==(const CaptureArchive&) const = default;
};

struct ParseDiagnostics {
    struct Item {
        std::size_t original_index = 0;
        std::string reason; // unparseable-url | bad-status | bad-method | truncated-body
        std::string url;
    };
    std::vector<Item> skipped;
    std::vector<Item> truncated;

    // One JSON object per line.
    std::string to_json_lines() const;
};

struct FilterPolicy {
    std::vector<std::string> noise_hosts;       // matches host and subdomains
    std::vector<std::string> asset_media_types; // exact or "<type>/" prefix
    std::size_t body_cap_bytes = 1 << 20;

    static FilterPolicy defaults();
    static FilterPolicy from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    bool host_blocked(const std::string& host) const;
    bool is_asset_media_type(const std::string& media_type) const;
};

struct FilterVerdict {
    bool keep = false;
    std::vector<std::string> reasons;

    bool has_reason(const std::string& r) const;
};

// Verdict reason identifiers.
inline constexpr const char* kReasonNoiseDomain = "noise-domain";
inline constexpr const char* kReasonStaticAsset = "static-asset";
inline constexpr const char* kReasonContentType = "content-type";
inline constexpr const char* kReasonUrlPattern = "url-pattern";
inline constexpr const char* kReasonMethod = "method";
inline constexpr const char* kReasonResponseStructure = "response-structure";
inline constexpr const char* kReasonNoApiSignal = "no-api-signal";

CaptureArchive parse_archive(const std::string& raw, ParseDiagnostics* diagnostics = nullptr,
                             const FilterPolicy& policy = FilterPolicy::defaults());

nlohmann::json serialize_archive(const CaptureArchive& archive);

// Pure and total: same (entry, policy) always yields the same verdict.
// Rule precedence: noise-domain > static-asset > content-type > url-pattern
// > method > response-structure.
FilterVerdict classify_entry(const CaptureEntry& entry, const FilterPolicy& policy);

std::vector<CaptureEntry> filter_archive(const CaptureArchive& archive, const FilterPolicy& policy);

} // namespace routegraph::capture
