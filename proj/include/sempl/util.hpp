#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sempl {

std::string trim(std::string_view s);

// Collapses runs of whitespace to single spaces and trims the ends.
std::string collapse_spaces(std::string_view s);

std::string to_lower(std::string_view s);

// Uppercases the first character when it is ASCII; other scripts are left as-is.
std::string capitalize_first(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

std::vector<std::string> split_whitespace(std::string_view s);

// FNV-1a, used for stable token hashing.
std::uint64_t fnv1a64(std::string_view s);

// Hex SHA-256 of a byte string / of a file's contents.
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::string& path);

// Unbiased draw from [0, n) via rejection sampling. std::uniform_int_distribution
// is implementation-defined, so reproducible sampling goes through this.
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t n);

// Deterministic Fisher-Yates shuffle built on bounded_rand.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded_rand(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// First k elements of a deterministic partial shuffle, order as drawn.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k,
                                        std::mt19937_64& rng);

std::string read_file(const std::string& path);

// Writes via a temp file in the same directory, then renames into place.
void atomic_write_file(const std::string& path, std::string_view contents);

std::string utc_timestamp();

}  // namespace sempl
