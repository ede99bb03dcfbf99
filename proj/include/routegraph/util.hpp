#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace routegraph {

// Milliseconds since the Unix epoch.
using time_ms = std::int64_t;

// Integer micro-dollars. All money in the system is exact integer arithmetic.
using micro_t = std::int64_t;

constexpr time_ms kMillisPerDay = 86'400'000;

micro_t micro_from_dollars(double dollars);
double dollars_from_micro(micro_t amount);

// Injectable clock so TTL, expiry and latency logic are testable without
// wall time. simnet drives a VirtualClock; the CLI defaults to SystemClock
// unless --now is given.
class Clock {
public:
    virtual ~Clock() = default;
    virtual time_ms now_ms() const = 0;
};

class SystemClock final : public Clock {
public:
    time_ms now_ms() const override;
};

class VirtualClock final : public Clock {
public:
    explicit VirtualClock(time_ms start = 0) : now_(start) {}
    time_ms now_ms() const override { return now_; }
    void advance(time_ms delta) { now_ += delta; }
    void set(time_ms t) { now_ = t; }

private:
    time_ms now_;
};

struct ParsedUrl {
    std::string scheme;
    std::string host;
    int port = -1; // -1 when not explicit
    std::string path;
    std::string query; // raw, without '?'
};

std::optional<ParsedUrl> parse_url(std::string_view url);

// Query string -> ordered (name, value) pairs, percent-decoded.
std::vector<std::pair<std::string, std::string>> parse_query(std::string_view query);

std::string url_decode(std::string_view s);

// ISO-8601 with millisecond precision ("2026-01-15T10:00:00.123Z",
// offsets accepted on input). Returns nullopt on malformed input.
std::optional<time_ms> parse_iso8601(std::string_view s);
std::string format_iso8601(time_ms t);

// --- hashing -----------------------------------------------------------

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::array<std::uint8_t, 32> sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string hmac_sha256_hex(std::string_view key, std::string_view message);

std::string to_hex(const std::uint8_t* data, std::size_t len);

std::string base64_encode(std::string_view data);
std::optional<std::string> base64_decode(std::string_view data);

// --- misc --------------------------------------------------------------

std::string to_lower(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

// Sorted-key, no-whitespace JSON dump. nlohmann::json objects are already
// key-ordered; this pins the textual form used for digests and files.
std::string canonical_dump(const nlohmann::json& j);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
// 0600 on POSIX; used for vault and auth.local.json.
void write_file_private(const std::string& path, std::string_view content);

} // namespace routegraph
