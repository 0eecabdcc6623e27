#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ocuflow::text {

std::string to_lower(std::string_view s);

// Lowercase, trim, and collapse internal runs of whitespace to one space.
std::string normalize(std::string_view s);

bool iequals(std::string_view a, std::string_view b) noexcept;

bool contains_ci(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char sep);

std::string trim(std::string_view s);

// 64-bit FNV-1a. Used for fixture keys and content hashes, never for security.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::string hex64(std::uint64_t value);

// Fixed-precision decimal rendering ("%.*f") for report text.
std::string fixed(double value, int decimals);

// Percent rendering of a fraction: 0.988 -> "98.8%".
std::string percent(double fraction, int decimals = 1);

}  // namespace ocuflow::text
