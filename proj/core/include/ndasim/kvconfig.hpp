#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ndasim {

/// Flat key=value configuration. Lines starting with '#' are comments;
/// `include <path>` splices another file (relative to the including file).
/// Later assignments override earlier ones.
class KeyValueConfig {
public:
    static KeyValueConfig from_file(const std::filesystem::path& path);
    static KeyValueConfig from_string(const std::string& text, const std::filesystem::path& base_dir = ".");

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void merge(const KeyValueConfig& other);
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> raw(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& def) const;
    std::int64_t get_int(const std::string& key, std::int64_t def) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t def) const;  // accepts 0x hex
    double get_double(const std::string& key, double def) const;              // accepts a/b fractions
    bool get_bool(const std::string& key, bool def) const;

    /// Keys that were present but never read; used to reject typos.
    std::vector<std::string> unused_keys() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    void parse(const std::string& text, const std::filesystem::path& base_dir, int depth);

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> touched_;
};

}  // namespace ndasim
