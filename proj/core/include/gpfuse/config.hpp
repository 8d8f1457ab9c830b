#pragma once

#include <map>
#include <string>
#include <vector>

namespace gpfuse {

/// Flat key-value config: `section.key = value` lines, `#` comments. Every
/// key can be overridden afterwards (CLI flags win over the file).
class KeyValueConfig {
public:
    KeyValueConfig() = default;
    static KeyValueConfig from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& def) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

} // namespace gpfuse
