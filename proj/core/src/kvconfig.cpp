#include "ndasim/kvconfig.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ndasim/errors.hpp"

namespace ndasim {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError(p.string(), "cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
    KeyValueConfig cfg;
    cfg.parse(read_file(path), path.parent_path(), 0);
    return cfg;
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text, const std::filesystem::path& base_dir) {
    KeyValueConfig cfg;
    cfg.parse(text, base_dir, 0);
    return cfg;
}

void KeyValueConfig::parse(const std::string& text, const std::filesystem::path& base_dir, int depth) {
    if (depth > 16) throw ConfigError("include", "include nesting too deep");
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.rfind("include ", 0) == 0) {
            const auto target = base_dir / trim(line.substr(8));
            parse(read_file(target), target.parent_path(), depth + 1);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        }
        values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> KeyValueConfig::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    touched_.insert(key);
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& def) const {
    return raw(key).value_or(def);
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t def) const {
    auto v = raw(key);
    if (!v) return def;
    try {
        std::size_t used = 0;
        const auto x = std::stoll(*v, &used, 0);
        if (used != v->size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + *v + "'");
    }
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t def) const {
    auto v = raw(key);
    if (!v) return def;
    try {
        if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument("negative");
        std::size_t used = 0;
        const auto x = std::stoull(*v, &used, 0);
        if (used != v->size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a non-negative integer, got '" + *v + "'");
    }
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
    auto v = raw(key);
    if (!v) return def;
    try {
        const auto slash = v->find('/');
        if (slash != std::string::npos) {
            return std::stod(v->substr(0, slash)) / std::stod(v->substr(slash + 1));
        }
        std::size_t used = 0;
        const double x = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + *v + "'");
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
    auto v = raw(key);
    if (!v) return def;
    if (*v == "1" || *v == "true" || *v == "on" || *v == "yes") return true;
    if (*v == "0" || *v == "false" || *v == "off" || *v == "no") return false;
    throw ConfigError(key, "expected a boolean, got '" + *v + "'");
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
        if (!touched_.count(k)) out.push_back(k);
    }
    return out;
}

}  // namespace ndasim
