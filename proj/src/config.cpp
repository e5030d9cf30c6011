#include "bnnprobe/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bnnprobe/error.hpp"

namespace bnnprobe {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
    Config c;
    c.text_ = text;
    c.origin_ = origin;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    auto error = [&](const std::string& msg) {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
    };
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(raw);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') error("unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) error("empty section name");
            if (c.entries_.count(section)) error("duplicate section [" + section + "]");
            c.entries_[section];
            c.order_.push_back(section);
            c.section_lines_[section] = line;
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) error("expected 'key = value'");
        if (section.empty()) error("key outside of any section");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) error("empty key");
        auto& sec = c.entries_[section];
        if (sec.count(key)) error("duplicate key '" + key + "' in [" + section + "]");
        sec[key] = Entry{trim(s.substr(eq + 1)), line};
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

bool Config::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
    const auto s = entries_.find(section);
    if (s == entries_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
}

void Config::fail(const std::string& section, const std::string& key, const std::string& message) const {
    int line = 0;
    if (const Entry* e = find(section, key)) {
        line = e->line;
    } else if (auto it = section_lines_.find(section); it != section_lines_.end()) {
        line = it->second;
    }
    std::string where = origin_;
    if (line > 0) where += ":" + std::to_string(line);
    if (key.empty()) throw ConfigError(where + ": [" + section + "]: " + message);
    throw ConfigError(where + ": [" + section + "] " + key + ": " + message);
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::optional<std::string>& fallback) const {
    if (const Entry* e = find(section, key)) return e->value;
    if (fallback) return *fallback;
    fail(section, key, "required field is missing");
}

namespace {

template <class T>
bool parse_number(const std::string& s, T& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

double Config::get_double(const std::string& section, const std::string& key,
                          std::optional<double> fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        if (fallback) return *fallback;
        fail(section, key, "required field is missing");
    }
    double v = 0.0;
    if (!parse_number(e->value, v)) fail(section, key, "expected a number, got '" + e->value + "'");
    return v;
}

long long Config::get_int(const std::string& section, const std::string& key,
                          std::optional<long long> fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        if (fallback) return *fallback;
        fail(section, key, "required field is missing");
    }
    long long v = 0;
    if (!parse_number(e->value, v)) fail(section, key, "expected an integer, got '" + e->value + "'");
    return v;
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::optional<std::uint64_t> fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        if (fallback) return *fallback;
        fail(section, key, "required field is missing");
    }
    std::uint64_t v = 0;
    if (!parse_number(e->value, v)) {
        fail(section, key, "expected a nonnegative integer, got '" + e->value + "'");
    }
    return v;
}

bool Config::get_bool(const std::string& section, const std::string& key,
                      std::optional<bool> fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        if (fallback) return *fallback;
        fail(section, key, "required field is missing");
    }
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    fail(section, key, "expected true or false, got '" + e->value + "'");
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::optional<std::vector<double>>& fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        if (fallback) return *fallback;
        fail(section, key, "required field is missing");
    }
    std::vector<double> out;
    std::istringstream in(e->value);
    std::string item;
    while (std::getline(in, item, ',')) {
        double v = 0.0;
        if (!parse_number(trim(item), v)) fail(section, key, "bad list element '" + trim(item) + "'");
        out.push_back(v);
    }
    if (out.empty()) fail(section, key, "empty list");
    return out;
}

std::vector<std::string> Config::get_strings(
    const std::string& section, const std::string& key,
    const std::optional<std::vector<std::string>>& fallback) const {
    const Entry* e = find(section, key);
    if (!e) {
        if (fallback) return *fallback;
        fail(section, key, "required field is missing");
    }
    std::vector<std::string> out;
    std::istringstream in(e->value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(section, key, "empty list element");
        out.push_back(item);
    }
    if (out.empty()) fail(section, key, "empty list");
    return out;
}

void Config::require_known(const std::string& section, const std::set<std::string>& allowed) const {
    const auto s = entries_.find(section);
    if (s == entries_.end()) return;
    for (const auto& [key, entry] : s->second) {
        if (!allowed.count(key)) fail(section, key, "unknown field");
    }
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace bnnprobe
