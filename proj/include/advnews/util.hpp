#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace advnews {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Errors. ConfigError maps to exit code 2, everything else to 1.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

/// A completion could not be parsed into the expected shape.
struct ParseFailure : Error {
    using Error::Error;
};

struct GatewayError : Error {
    using Error::Error;
};

/// Transport-level failure worth retrying (connect error, 429, 5xx).
struct TransientGatewayError : GatewayError {
    using GatewayError::GatewayError;
};

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Collapse every whitespace run to a single space and trim the ends.
std::string normalize_ws(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

std::vector<std::string> split_lines(std::string_view text);

// ---------------------------------------------------------------------------
// Calendar dates (ISO-8601, date only)
// ---------------------------------------------------------------------------

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    static std::optional<Date> parse(std::string_view iso);
    std::string to_string() const;  // YYYY-MM-DD
    bool valid() const;

    auto operator<=>(const Date&) const = default;
};

/// Current UTC date.
Date today_utc();

/// Current UTC instant as "YYYY-MM-DDThh:mm:ssZ".
std::string now_utc_iso();

// ---------------------------------------------------------------------------
// SHA-256 (used for cache keys and corpus/index content hashes)
// ---------------------------------------------------------------------------

class Sha256 {
public:
    Sha256();
    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }
    std::array<std::uint8_t, 32> finish();

    static std::string hex(std::string_view data);

private:
    void process_block(const std::uint8_t* block);

    std::array<std::uint32_t, 8> state_;
    std::array<std::uint8_t, 64> buffer_;
    std::size_t buffered_ = 0;
    std::uint64_t total_bytes_ = 0;
};

// ---------------------------------------------------------------------------
// Deterministic sampling. std::shuffle / uniform_int_distribution are not
// pinned across standard libraries, so sampling is implemented directly on
// mt19937_64 output to keep results byte-stable everywhere.
// ---------------------------------------------------------------------------

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// First `n` entries of a Fisher-Yates permutation of [0, count).
std::vector<std::size_t> sample_indices(std::size_t count, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

/// Write via a temp file + rename so concurrent writers are last-writer-wins.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Calls `fn(line_number, line)` for every line; line numbers start at 1.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, const std::string&)>& fn);

// ---------------------------------------------------------------------------
// Parallel loop: runs fn(i) for i in [0, n) on up to `workers` threads.
// fn must handle its own per-item failures; an escaped exception is rethrown
// on the calling thread after all workers join.
// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace advnews
