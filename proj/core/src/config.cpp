#include "gpfuse/config.hpp"

#include <fstream>
#include <sstream>

#include "gpfuse/types.hpp"

namespace gpfuse {

namespace {
std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}
} // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open config file");
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path + ":" + std::to_string(lineno) + ": expected key = value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& def) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? def : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ArgumentError("config key '" + key + "': cannot parse '" + it->second + "'");
    }
}

int KeyValueConfig::get_int(const std::string& key, int def) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw ArgumentError("config key '" + key + "': cannot parse '" + it->second + "'");
    }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t def) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw ArgumentError("config key '" + key + "': cannot parse '" + it->second + "'");
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ArgumentError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                const std::vector<double>& def) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(trim(item)));
        } catch (const std::exception&) {
            throw ArgumentError("config key '" + key + "': cannot parse list item '" + item + "'");
        }
    }
    return out;
}

} // namespace gpfuse
