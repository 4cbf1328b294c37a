#include "bbmlab/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bbmlab::config {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s)
{
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
}

std::string where(const std::string& section, const std::string& key)
{
    return section.empty() ? key : section + "." + key;
}

} // namespace

Config Config::parse(const std::string& text)
{
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto cut = line.find_first_of("#;");
        if (cut != std::string::npos) line.resize(cut);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_name(section)) throw ConfigError("line " + std::to_string(lineno) + ": bad section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (!valid_name(key)) throw ConfigError("line " + std::to_string(lineno) + ": bad key");
        if (cfg.has(section, key))
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + where(section, key));
        cfg.set(section, key, value);
    }
    return cfg;
}

Config Config::load(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void Config::set(const std::string& section, const std::string& key, const std::string& value)
{
    if (!section.empty() && !valid_name(section)) throw ConfigError("bad section name " + section);
    if (!valid_name(key)) throw ConfigError("bad key " + key);
    if (value.find('\n') != std::string::npos) throw ConfigError("value of " + where(section, key) + " spans lines");
    data_[section][key] = value;
}

bool Config::has(const std::string& section, const std::string& key) const
{
    return find(section, key) != nullptr;
}

const std::string* Config::find(const std::string& section, const std::string& key) const
{
    const auto s = data_.find(section);
    if (s == data_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const
{
    const auto* v = find(section, key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const
{
    const auto* v = find(section, key);
    if (!v) return fallback;
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
        throw ConfigError(where(section, key) + ": not a number: " + *v);
    return out;
}

std::int64_t Config::get_int(const std::string& section, const std::string& key, std::int64_t fallback) const
{
    const auto* v = find(section, key);
    if (!v) return fallback;
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) {
        // Accept integral reals such as 1e6.
        const double d = get_double(section, key, 0.0);
        if (d != static_cast<double>(static_cast<std::int64_t>(d)))
            throw ConfigError(where(section, key) + ": not an integer: " + *v);
        return static_cast<std::int64_t>(d);
    }
    return out;
}

std::uint64_t Config::get_uint(const std::string& section, const std::string& key, std::uint64_t fallback) const
{
    const auto* v = find(section, key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
        throw ConfigError(where(section, key) + ": not an unsigned integer: " + *v);
    return out;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const
{
    const auto* v = find(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(where(section, key) + ": not a boolean: " + *v);
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const
{
    const auto* v = find(section, key);
    if (!v) return fallback;
    std::vector<double> out;
    std::istringstream in(*v);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        double d = 0.0;
        const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), d);
        if (item.empty() || ec != std::errc() || p != item.data() + item.size())
            throw ConfigError(where(section, key) + ": not a list of numbers: " + *v);
        out.push_back(d);
    }
    return out;
}

std::string Config::canonical() const
{
    std::string out;
    for (const auto& [section, keys] : data_) {
        if (keys.empty()) continue;
        if (!section.empty()) out += "[" + section + "]\n";
        for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
    }
    return out;
}

std::string Config::hash() const
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
    return buf;
}

std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_double(double v)
{
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ec == std::errc() ? p : buf);
}

} // namespace bbmlab::config
