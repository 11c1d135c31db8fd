#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vmot::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  // 1-based source line of each row
};

/// Reads a comma-separated file with a one-line header. Blank lines are
/// skipped; cells are trimmed of surrounding whitespace.
Table read(const std::string& path);
Table parse(std::istream& in);

/// Parses a numeric cell; throws ParseError naming `line` on failure.
/// Accepts "inf", "+inf" and "-inf".
double to_double(std::string_view cell, std::size_t line);

/// Empty cell -> nullopt.
std::optional<double> to_optional_double(std::string_view cell, std::size_t line);

/// Shortest round-trippable decimal representation ("+inf"/"-inf" for infinities).
std::string format(double v);

}  // namespace vmot::csv
