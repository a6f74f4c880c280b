#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace frame_sampler {

/// `key = value` configuration with `[section]` headers and `#` comments.
///
/// Keys before the first header belong to the unnamed section "". Values are
/// kept as trimmed text; typed getters convert on access and report the
/// source line on failure.
class ConfigFile {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };
    using Section = std::map<std::string, Entry, std::less<>>;

    static ConfigFile parse(std::istream &in, std::string source = "config");
    static ConfigFile load(const std::filesystem::path &path);

    const std::string &source() const noexcept { return source_; }

    bool has_section(std::string_view name) const;

    /// Section names starting with `prefix` (e.g. "outcome."), in file order.
    std::vector<std::string> sections_with_prefix(std::string_view prefix) const;

    std::optional<std::string> get(std::string_view section, std::string_view key) const;

    std::string get_string(std::string_view section, std::string_view key, std::string fallback) const;
    double get_double(std::string_view section, std::string_view key, double fallback) const;
    long long get_int(std::string_view section, std::string_view key, long long fallback) const;
    bool get_bool(std::string_view section, std::string_view key, bool fallback) const;
    /// Comma-separated list; empty items are dropped.
    std::vector<std::string> get_list(std::string_view section, std::string_view key,
                                      std::vector<std::string> fallback) const;
    std::vector<double> get_doubles(std::string_view section, std::string_view key,
                                    std::vector<double> fallback) const;

    /// Throws ConfigError naming the first key of `section` not in `allowed`.
    void require_known_keys(std::string_view section, std::initializer_list<std::string_view> allowed) const;

private:
    const Entry *find(std::string_view section, std::string_view key) const;
    [[noreturn]] void fail(const Entry &entry, std::string_view key, std::string_view what) const;

    std::string source_;
    std::map<std::string, Section, std::less<>> sections_;
    std::vector<std::string> order_;
};

std::vector<std::string> split_list(std::string_view text);

} // namespace frame_sampler
