#include "frame_sampler/csv.hpp"

#include "frame_sampler/errors.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace frame_sampler::csv {

std::string format_double(double value) {
    if (std::isnan(value)) {
        return {};
    }
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) {
        throw ConsistencyError("failed to format double");
    }
    return {buffer, end};
}

double parse_double(std::string_view field) {
    if (field.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double value = 0.0;
    auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || end != field.data() + field.size()) {
        throw InputError("not a number: '" + std::string{field} + "'");
    }
    return value;
}

long long parse_integer(std::string_view field) {
    long long value = 0;
    auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || end != field.data() + field.size()) {
        throw InputError("not an integer: '" + std::string{field} + "'");
    }
    return value;
}

std::vector<std::string> split_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            return fields;
        }
        fields.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::size_t Table::column(std::string_view name, std::string_view context) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == name) {
            return c;
        }
    }
    throw InputError(std::string{context} + ": missing column '" + std::string{name} + "'");
}

Table read_table(std::istream &in, std::string_view context) {
    Table table;
    std::string line;
    if (!std::getline(in, line)) {
        throw InputError(std::string{context} + ": empty file");
    }
    table.header = split_line(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = split_line(line);
        if (fields.size() != table.header.size()) {
            throw InputError(std::string{context} + ": line " + std::to_string(line_no) + " has " +
                             std::to_string(fields.size()) + " fields, header has " +
                             std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

void write_row(std::ostream &out, const std::vector<std::string> &fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out << ',';
        }
        out << fields[i];
    }
    out << '\n';
}

} // namespace frame_sampler::csv
