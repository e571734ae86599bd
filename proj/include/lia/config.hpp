#pragma once

// Flat dotted-key configuration files: "key = value" lines, '#' comments.
// The whole run is one artifact, so the file is hashed (together with the
// format and search-order versions) into the snapshot fingerprint.

#include "lia/errors.hpp"
#include "lia/rational.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace lia {

inline constexpr const char* snapshot_format_version = "1";

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

class config {
    std::map<std::string, std::string> kv_;

    static const std::vector<std::string>& known_prefixes() {
        static const std::vector<std::string> p{
            "atoms",        "process.", "catalog.", "marketmaker.",
            "firm.",        "logic.",   "diagnostics.", "output."};
        return p;
    }

public:
    static config parse(const std::string& text) {
        config out;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) throw parse_error("expected 'key = value'", line_no);
            auto trim = [](std::string s) {
                auto a = s.find_first_not_of(" \t\r");
                if (a == std::string::npos) return std::string();
                auto b = s.find_last_not_of(" \t\r");
                return s.substr(a, b - a + 1);
            };
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw parse_error("empty key", line_no);
            bool ok = false;
            for (const auto& p : known_prefixes())
                if (key == p || key.rfind(p, 0) == 0) {
                    ok = true;
                    break;
                }
            if (!ok) throw parse_error("unknown config key '" + key + "'", line_no);
            if (out.kv_.count(key)) throw parse_error("duplicate key '" + key + "'", line_no);
            out.kv_.emplace(std::move(key), std::move(value));
        }
        return out;
    }

    static config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open config file: " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str());
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& dflt = "") const {
        auto it = kv_.find(key);
        return it == kv_.end() ? dflt : it->second;
    }

    int get_int(const std::string& key, int dflt) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return dflt;
        try {
            std::size_t used = 0;
            int v = std::stoi(it->second, &used);
            if (used != it->second.size()) throw config_error("");
            return v;
        } catch (...) {
            throw config_error("config key '" + key + "' is not an integer: " + it->second);
        }
    }

    rat get_rat(const std::string& key, const rat& dflt) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) return dflt;
        auto r = rat::parse(it->second);
        if (!r) throw config_error("config key '" + key + "' is not a rational: " + it->second);
        return *r;
    }

    // values of key.1, key.2, ... in index order, densely numbered
    std::vector<std::string> numbered(const std::string& prefix) const {
        std::vector<std::string> out;
        for (int i = 1;; ++i) {
            auto it = kv_.find(prefix + "." + std::to_string(i));
            if (it == kv_.end()) break;
            out.push_back(it->second);
        }
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

    // covers every parameter and the frozen search order
    std::uint64_t fingerprint() const {
        std::uint64_t h = fnv1a64("lia-config-v1");
        for (const auto& [k, v] : kv_) {
            h = fnv1a64(k, h);
            h = fnv1a64("=", h);
            h = fnv1a64(v, h);
            h = fnv1a64(";", h);
        }
        return h;
    }
};

// semicolon-separated list helper for sentence lists and pair declarations
inline std::vector<std::string> split_list(const std::string& text, char sep = ';') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(sep, start);
        std::string part = text.substr(start, end == std::string::npos ? std::string::npos
                                                                       : end - start);
        auto a = part.find_first_not_of(" \t");
        if (a != std::string::npos) {
            auto b = part.find_last_not_of(" \t");
            out.push_back(part.substr(a, b - a + 1));
        }
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return out;
}

} // namespace lia
