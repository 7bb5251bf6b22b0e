#include "am/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "am/csvio.hpp"

namespace am {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// strips a trailing comment that is not inside a string literal
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

bool parse_number(const std::string& tok, double* out) {
    if (tok.empty()) return false;
    char* end = nullptr;
    *out = std::strtod(tok.c_str(), &end);
    return end == tok.c_str() + tok.size();
}

ConfigValue parse_scalar(const std::string& tok, std::int64_t line) {
    if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"')
        return {tok.substr(1, tok.size() - 2)};
    if (tok == "true") return {true};
    if (tok == "false") return {false};
    double num = 0.0;
    if (parse_number(tok, &num)) return {num};
    throw ConfigError(line, "cannot parse value '" + tok + "'");
}

std::vector<std::string> split_array_items(const std::string& inner, std::int64_t line) {
    std::vector<std::string> items;
    std::string cur;
    bool in_str = false;
    for (char c : inner) {
        if (c == '"') in_str = !in_str;
        if (c == ',' && !in_str) {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) items.push_back(trim(cur));
    if (in_str) throw ConfigError(line, "unterminated string in array");
    return items;
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::int64_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[')
            throw ConfigError(line_no, "sections are not supported; use flat keys");
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(line_no, "empty key");
        if (cfg.values_.count(key)) throw ConfigError(line_no, "duplicate key '" + key + "'");
        if (val.empty()) throw ConfigError(line_no, "empty value for '" + key + "'");

        if (val.front() == '[') {
            if (val.back() != ']') throw ConfigError(line_no, "unterminated array");
            const auto items = split_array_items(val.substr(1, val.size() - 2), line_no);
            if (items.empty()) {
                cfg.values_[key] = ConfigValue{std::vector<double>{}};
                continue;
            }
            if (items[0].front() == '"') {
                std::vector<std::string> arr;
                for (const auto& it : items) {
                    auto sv = parse_scalar(it, line_no);
                    if (!sv.is_string())
                        throw ConfigError(line_no, "mixed array types for '" + key + "'");
                    arr.push_back(std::get<std::string>(sv.v));
                }
                cfg.values_[key] = ConfigValue{std::move(arr)};
            } else {
                std::vector<double> arr;
                for (const auto& it : items) {
                    double num = 0.0;
                    if (!parse_number(it, &num))
                        throw ConfigError(line_no, "non-numeric array item '" + it + "'");
                    arr.push_back(num);
                }
                cfg.values_[key] = ConfigValue{std::move(arr)};
            }
        } else {
            cfg.values_[key] = parse_scalar(val, line_no);
        }
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    return parse(read_text_file(path));
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_string()) throw ConfigError("key '" + key + "' must be a string");
    return std::get<std::string>(it->second.v);
}

double Config::get_number(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_number()) throw ConfigError("key '" + key + "' must be a number");
    return std::get<double>(it->second.v);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_number()) throw ConfigError("key '" + key + "' must be a number");
    const double v = std::get<double>(it->second.v);
    const auto i = static_cast<std::int64_t>(v);
    if (static_cast<double>(i) != v)
        throw ConfigError("key '" + key + "' must be an integer");
    return i;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (!it->second.is_bool()) throw ConfigError("key '" + key + "' must be a boolean");
    return std::get<bool>(it->second.v);
}

std::vector<double> Config::get_numbers(const std::string& key,
                                        std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.is_number()) return {std::get<double>(it->second.v)};
    if (!it->second.is_number_array())
        throw ConfigError("key '" + key + "' must be a number array");
    return std::get<std::vector<double>>(it->second.v);
}

std::vector<std::string> Config::get_strings(const std::string& key,
                                             std::vector<std::string> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.is_string()) return {std::get<std::string>(it->second.v)};
    if (!it->second.is_string_array())
        throw ConfigError("key '" + key + "' must be a string array");
    return std::get<std::vector<std::string>>(it->second.v);
}

void Config::require_known(const std::vector<std::string>& known) const {
    for (const auto& [key, _] : values_) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown key '" + key + "'");
    }
}

std::string Config::dump() const {
    std::string out;
    for (const auto& [key, value] : values_) {
        out += key + " = ";
        if (value.is_string()) {
            out += '"' + std::get<std::string>(value.v) + '"';
        } else if (value.is_bool()) {
            out += std::get<bool>(value.v) ? "true" : "false";
        } else if (value.is_number()) {
            out += format_double(std::get<double>(value.v));
        } else if (value.is_number_array()) {
            out += '[';
            const auto& arr = std::get<std::vector<double>>(value.v);
            for (std::size_t i = 0; i < arr.size(); ++i) {
                if (i) out += ", ";
                out += format_double(arr[i]);
            }
            out += ']';
        } else {
            out += '[';
            const auto& arr = std::get<std::vector<std::string>>(value.v);
            for (std::size_t i = 0; i < arr.size(); ++i) {
                if (i) out += ", ";
                out += '"' + arr[i] + '"';
            }
            out += ']';
        }
        out += '\n';
    }
    return out;
}

}  // namespace am
