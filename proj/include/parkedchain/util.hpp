#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace parkedchain {

/// Independent deterministic stream for (seed, stream id).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Splits one CSV line on commas and trims surrounding whitespace. No quoting.
std::vector<std::string> split_csv(std::string_view line);

/// Strict numeric parsing; throws ParseError(what, row) on trailing garbage.
double parse_double(std::string_view s, std::size_t row = 0);
long long parse_int(std::string_view s, std::size_t row = 0);

/// Shortest round-trip formatting, used for every CSV number so output is byte-stable.
std::string fmt(double v);

}  // namespace parkedchain
