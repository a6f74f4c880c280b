#include "frame_sampler/config.hpp"

#include "frame_sampler/csv.hpp"
#include "frame_sampler/errors.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

namespace frame_sampler {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto pos = text.find(',', start);
        if (pos == std::string_view::npos) {
            pos = text.size();
        }
        auto item = trim(text.substr(start, pos - start));
        if (!item.empty()) {
            items.emplace_back(item);
        }
        start = pos + 1;
    }
    return items;
}

ConfigFile ConfigFile::parse(std::istream &in, std::string source) {
    ConfigFile config;
    config.source_ = std::move(source);
    config.sections_[""];
    config.order_.emplace_back();

    std::string current;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto where = config.source_ + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(where + ": unterminated section header");
            }
            current = std::string{trim(line.substr(1, line.size() - 2))};
            if (current.empty()) {
                throw ConfigError(where + ": empty section name");
            }
            if (config.sections_.find(current) == config.sections_.end()) {
                config.sections_[current];
                config.order_.push_back(current);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(where + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ConfigError(where + ": missing key");
        }
        auto &section = config.sections_[current];
        if (section.find(key) != section.end()) {
            throw ConfigError(where + ": duplicate key '" + std::string{key} + "'");
        }
        section.emplace(std::string{key}, Entry{std::string{trim(line.substr(eq + 1))}, line_no});
    }
    return config;
}

ConfigFile ConfigFile::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    return parse(in, path.string());
}

bool ConfigFile::has_section(std::string_view name) const { return sections_.find(name) != sections_.end(); }

std::vector<std::string> ConfigFile::sections_with_prefix(std::string_view prefix) const {
    std::vector<std::string> names;
    for (const auto &name : order_) {
        if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) {
            names.push_back(name);
        }
    }
    return names;
}

const ConfigFile::Entry *ConfigFile::find(std::string_view section, std::string_view key) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) {
        return nullptr;
    }
    auto e = s->second.find(key);
    return e == s->second.end() ? nullptr : &e->second;
}

void ConfigFile::fail(const Entry &entry, std::string_view key, std::string_view what) const {
    throw ConfigError(source_ + ":" + std::to_string(entry.line) + ": key '" + std::string{key} + "' " +
                      std::string{what} + ", got '" + entry.value + "'");
}

std::optional<std::string> ConfigFile::get(std::string_view section, std::string_view key) const {
    if (const auto *entry = find(section, key)) {
        return entry->value;
    }
    return std::nullopt;
}

std::string ConfigFile::get_string(std::string_view section, std::string_view key, std::string fallback) const {
    if (const auto *entry = find(section, key)) {
        return entry->value;
    }
    return fallback;
}

double ConfigFile::get_double(std::string_view section, std::string_view key, double fallback) const {
    const auto *entry = find(section, key);
    if (entry == nullptr) {
        return fallback;
    }
    try {
        const double v = csv::parse_double(entry->value);
        if (v != v) {
            fail(*entry, key, "must be a number");
        }
        return v;
    } catch (const ConfigError &) {
        throw;
    } catch (const InputError &) {
        fail(*entry, key, "must be a number");
    }
}

long long ConfigFile::get_int(std::string_view section, std::string_view key, long long fallback) const {
    const auto *entry = find(section, key);
    if (entry == nullptr) {
        return fallback;
    }
    try {
        return csv::parse_integer(entry->value);
    } catch (const InputError &) {
        fail(*entry, key, "must be an integer");
    }
}

bool ConfigFile::get_bool(std::string_view section, std::string_view key, bool fallback) const {
    const auto *entry = find(section, key);
    if (entry == nullptr) {
        return fallback;
    }
    const auto &v = entry->value;
    if (v == "1" || v == "true" || v == "yes") {
        return true;
    }
    if (v == "0" || v == "false" || v == "no") {
        return false;
    }
    fail(*entry, key, "must be a boolean (0/1/true/false)");
}

std::vector<std::string> ConfigFile::get_list(std::string_view section, std::string_view key,
                                              std::vector<std::string> fallback) const {
    if (const auto *entry = find(section, key)) {
        return split_list(entry->value);
    }
    return fallback;
}

std::vector<double> ConfigFile::get_doubles(std::string_view section, std::string_view key,
                                            std::vector<double> fallback) const {
    const auto *entry = find(section, key);
    if (entry == nullptr) {
        return fallback;
    }
    std::vector<double> values;
    try {
        for (const auto &item : split_list(entry->value)) {
            values.push_back(csv::parse_double(item));
        }
    } catch (const InputError &) {
        fail(*entry, key, "must be a comma-separated list of numbers");
    }
    return values;
}

void ConfigFile::require_known_keys(std::string_view section,
                                    std::initializer_list<std::string_view> allowed) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) {
        return;
    }
    for (const auto &[key, entry] : s->second) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            const auto where = section.empty() ? std::string{"top level"} : "[" + std::string{section} + "]";
            throw ConfigError(source_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "' in " +
                              where);
        }
    }
}

} // namespace frame_sampler
