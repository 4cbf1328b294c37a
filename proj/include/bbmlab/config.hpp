#pragma once

// Run configuration: flat `key = value` lines under `[section]` headers.
// Keys before the first header belong to the "" section.  `#` and `;`
// start comments.  The canonical text (sections and keys sorted) is what
// gets hashed and persisted next to every output.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbmlab::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    void set(const std::string& section, const std::string& key, const std::string& value);
    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& section, const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    /// Comma-separated reals.
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const;

    /// Sorted, normalised text; parse(canonical()) reproduces the config.
    std::string canonical() const;
    /// FNV-1a 64 of canonical(), 16 hex digits.
    std::string hash() const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const { return data_; }

private:
    const std::string* find(const std::string& section, const std::string& key) const;
    std::map<std::string, std::map<std::string, std::string>> data_;
};

std::uint64_t fnv1a64(const std::string& bytes);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

} // namespace bbmlab::config
