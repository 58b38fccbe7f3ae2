#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace decoy {

std::string trim(std::string_view s);
std::string casefold(std::string_view s);

// Collapses any whitespace run to a single space (does not trim the ends).
std::string collapse_whitespace(std::string_view s);

// casefold + trim + collapse: the canonical form used when comparing values.
std::string normalize_for_match(std::string_view s);

// Casefold, split on non-alphanumeric runs. Shared by the n-gram metrics.
std::vector<std::string> tokenize(std::string_view text);

std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::optional<long> parse_int(std::string_view s);

// FNV-1a 64-bit. Used for template checksums, config hashes, and seed mixing.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string to_hex(std::uint64_t v);

std::uint64_t splitmix64(std::uint64_t x);

// Mixes a base seed with context strings into a per-call RNG seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view a, std::string_view b = {});

// Keeps [A-Za-z0-9._-], replaces everything else with '_': trace file names.
std::string sanitize_filename(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

std::string iso8601_now();

} // namespace decoy
