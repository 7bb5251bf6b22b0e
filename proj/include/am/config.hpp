#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace am {

// Flat TOML subset: `key = value` lines, `#` comments, string / number /
// boolean scalars and homogeneous arrays. Sections are rejected; the point
// is a single self-describing key-value document per run.
struct ConfigValue {
    std::variant<std::string, double, bool, std::vector<double>,
                 std::vector<std::string>> v;

    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_number() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_number_array() const { return std::holds_alternative<std::vector<double>>(v); }
    bool is_string_array() const {
        return std::holds_alternative<std::vector<std::string>>(v);
    }
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::int64_t line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg), line_(0) {}
    std::int64_t line() const { return line_; }

private:
    std::int64_t line_;
};

class Config {
public:
    static Config parse(const std::string& text);
    static Config parse_file(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::map<std::string, ConfigValue>& values() const { return values_; }

    // typed getters; wrong type raises ConfigError naming the key
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_number(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_numbers(const std::string& key,
                                    std::vector<double> fallback) const;
    std::vector<std::string> get_strings(const std::string& key,
                                         std::vector<std::string> fallback) const;

    void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }

    // every key must appear in `known`; unknown keys raise ConfigError
    void require_known(const std::vector<std::string>& known) const;

    // canonical serialization of the resolved document
    std::string dump() const;

private:
    std::map<std::string, ConfigValue> values_;
};

}  // namespace am
