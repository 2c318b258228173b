#pragma once
#include <ds2p/error.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ds2p::cli {

// Flat key = value settings; '#' starts a comment.
class Settings
{
public:
    static Settings from_file(const std::string& path)
    {
        std::ifstream is(path);
        if (!is) throw ParameterError("cannot read config file " + path);
        Settings out;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ParameterError(path + ":" + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ParameterError(path + ":" + std::to_string(lineno) + ": empty key");
            if (out.values_.count(key)) {
                throw ParameterError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            }
            out.values_[key] = trim(line.substr(eq + 1));
        }
        return out;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    // "key=value" from the command line.
    void set_assignment(const std::string& kv)
    {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ParameterError("--set expects KEY=VALUE, got '" + kv + "'");
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void reject_unknown(const std::set<std::string>& allowed, const std::string& command) const
    {
        for (const auto& [k, v] : values_) {
            if (!allowed.count(k)) throw ParameterError("unknown key '" + k + "' for command " + command);
        }
    }

    std::string str(const std::string& key, const std::string& fallback) const
    {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string required(const std::string& key) const
    {
        const auto it = values_.find(key);
        if (it == values_.end() || it->second.empty()) throw ParameterError("missing required key '" + key + "'");
        return it->second;
    }

    double real(const std::string& key, double fallback) const
    {
        return has(key) ? parse_real(key, values_.at(key)) : fallback;
    }

    long long integer(const std::string& key, long long fallback) const
    {
        return has(key) ? parse_integer(key, values_.at(key)) : fallback;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const
    {
        if (!has(key)) return fallback;
        const long long v = parse_integer(key, values_.at(key));
        if (v < 0) throw ParameterError("key '" + key + "' must be non-negative");
        return static_cast<std::uint64_t>(v);
    }

    bool boolean(const std::string& key, bool fallback) const
    {
        if (!has(key)) return fallback;
        const std::string& v = values_.at(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ParameterError("key '" + key + "' expects true or false, got '" + v + "'");
    }

    std::vector<double> reals(const std::string& key, std::vector<double> fallback) const
    {
        if (!has(key)) return fallback;
        std::vector<double> out;
        for (const auto& item : split(values_.at(key), ',')) out.push_back(parse_real(key, item));
        if (out.empty()) throw ParameterError("key '" + key + "' needs at least one value");
        return out;
    }

    std::vector<long long> integers(const std::string& key, std::vector<long long> fallback) const
    {
        if (!has(key)) return fallback;
        std::vector<long long> out;
        for (const auto& item : split(values_.at(key), ',')) out.push_back(parse_integer(key, item));
        if (out.empty()) throw ParameterError("key '" + key + "' needs at least one value");
        return out;
    }

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    static std::vector<std::string> split(const std::string& s, char sep)
    {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, sep)) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

private:
    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double parse_real(const std::string& key, const std::string& v)
    {
        try {
            std::size_t used = 0;
            const double out = std::stod(v, &used);
            if (used == v.size()) return out;
        } catch (const std::exception&) {
        }
        throw ParameterError("key '" + key + "' expects a number, got '" + v + "'");
    }

    static long long parse_integer(const std::string& key, const std::string& v)
    {
        long long out = 0;
        const auto* end = v.data() + v.size();
        const auto res = std::from_chars(v.data(), end, out);
        if (res.ec != std::errc() || res.ptr != end) {
            throw ParameterError("key '" + key + "' expects an integer, got '" + v + "'");
        }
        return out;
    }

    std::map<std::string, std::string> values_;
};

} // namespace ds2p::cli
