// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hgs/core/common.hpp"

#include <filesystem>
#include <fstream>
#include <map>

namespace hgs::io {

/// Flat "key = value" text configuration. '#' starts a comment.
class KvConfig {
public:
    static KvConfig parse(const std::string& text) {
        KvConfig cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto trim = [](std::string s) {
                size_t b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                size_t e = s.find_last_not_of(" \t\r");
                return s.substr(b, e - b + 1);
            };
            std::string t = trim(line);
            if (t.empty()) continue;
            auto eq = t.find('=');
            check(eq != std::string::npos, "config: line ", lineno, " is not 'key = value': ", t);
            std::string key = trim(t.substr(0, eq));
            std::string value = trim(t.substr(eq + 1));
            check(!key.empty(), "config: empty key on line ", lineno);
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static KvConfig load(const std::filesystem::path& path) {
        std::ifstream f(path);
        check(f.good(), "config: cannot open ", path.string());
        std::stringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

    /// Applies one "key=value" override (the CLI --set form).
    void set(const std::string& assignment) {
        auto eq = assignment.find('=');
        check(eq != std::string::npos, "--set expects key=value, got ", assignment);
        values_[assignment.substr(0, eq)] = assignment.substr(eq + 1);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            size_t pos = 0;
            double v = std::stod(it->second, &pos);
            check(pos == it->second.size(), "");
            return v;
        } catch (...) {
            throw Error(cat("config: key '", key, "' is not a number: ", it->second));
        }
    }

    int64_t get_int(const std::string& key, int64_t fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            size_t pos = 0;
            int64_t v = std::stoll(it->second, &pos);
            check(pos == it->second.size(), "");
            return v;
        } catch (...) {
            throw Error(cat("config: key '", key, "' is not an integer: ", it->second));
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw Error(cat("config: key '", key, "' is not a boolean: ", v));
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

} // namespace hgs::io
