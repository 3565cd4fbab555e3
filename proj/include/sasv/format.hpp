#pragma once

// Number <-> text helpers shared by every file format.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sasv {

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);

/// Nine significant digits, trailing zeros kept (score files).
std::string format_score(double v);

/// Whole-token parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_int(std::string_view token);

/// Splits on runs of spaces/tabs; strips a trailing '\r'.
std::vector<std::string_view> split_fields(std::string_view line);

} // namespace sasv
