#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace frame_sampler::csv {

/// Shortest decimal text that reads back to the same double. NaN maps to "".
std::string format_double(double value);

/// Reads a field written by format_double; "" maps to NaN.
double parse_double(std::string_view field);

long long parse_integer(std::string_view field);

/// Plain comma split. The formats written here never quote fields.
std::vector<std::string> split_line(std::string_view line);

/// A header plus rows of raw fields.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position by name, or throws InputError naming `context`.
    std::size_t column(std::string_view name, std::string_view context = "csv") const;
};

/// Reads a header line and all remaining non-empty lines. Every row must match the header width.
Table read_table(std::istream &in, std::string_view context = "csv");

/// Writes one row joined by commas and terminated by LF.
void write_row(std::ostream &out, const std::vector<std::string> &fields);

} // namespace frame_sampler::csv
