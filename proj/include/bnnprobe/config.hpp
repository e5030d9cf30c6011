#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bnnprobe {

/// INI-style document: `[section]` headers, `key = value` lines, and `#` or
/// `;` comment lines. Every lookup error names the file, line, and field.
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<config>");
    static Config load(const std::filesystem::path& path);

    const std::string& text() const { return text_; }
    const std::string& origin() const { return origin_; }
    /// Section names in file order.
    const std::vector<std::string>& sections() const { return order_; }
    bool has_section(const std::string& section) const { return entries_.count(section) > 0; }
    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::optional<std::string>& fallback = std::nullopt) const;
    double get_double(const std::string& section, const std::string& key,
                      std::optional<double> fallback = std::nullopt) const;
    long long get_int(const std::string& section, const std::string& key,
                      std::optional<long long> fallback = std::nullopt) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::optional<std::uint64_t> fallback = std::nullopt) const;
    bool get_bool(const std::string& section, const std::string& key,
                  std::optional<bool> fallback = std::nullopt) const;
    /// Comma-separated list.
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::optional<std::vector<double>>& fallback = std::nullopt) const;

    /// Comma-separated list of trimmed, nonempty names.
    std::vector<std::string> get_strings(const std::string& section, const std::string& key,
                                         const std::optional<std::vector<std::string>>& fallback =
                                             std::nullopt) const;

    /// Rejects keys in `section` not listed in `allowed`.
    void require_known(const std::string& section, const std::set<std::string>& allowed) const;
    /// Error message prefixed with the location of (section, key).
    [[noreturn]] void fail(const std::string& section, const std::string& key,
                           const std::string& message) const;

private:
    struct Entry {
        std::string value;
        int line;
    };
    const Entry* find(const std::string& section, const std::string& key) const;

    std::string text_;
    std::string origin_;
    std::vector<std::string> order_;
    std::map<std::string, std::map<std::string, Entry>> entries_;
    std::map<std::string, int> section_lines_;
};

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

}  // namespace bnnprobe
