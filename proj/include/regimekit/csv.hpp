#ifndef REGIMEKIT_CSV_HPP
#define REGIMEKIT_CSV_HPP

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "regimekit/errors.hpp"

namespace regimekit::csv {

// Split one CSV line. Handles double-quoted fields (quotes stripped,
// embedded commas kept); no multi-line fields.
inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (char c : line) {
        if (quoted) {
            if (c == '"') quoted = false;
            else field.push_back(c);
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Case-insensitive column lookup, -1 if absent.
    int column(const std::string& name) const {
        std::string want = lower(trim(name));
        for (std::size_t i = 0; i < header.size(); ++i)
            if (lower(trim(header[i])) == want) return static_cast<int>(i);
        return -1;
    }
};

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFoundError("cannot open '" + path + "'");
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
            line.erase(0, 3);  // UTF-8 BOM
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) {
            first = false;
            continue;
        }
        auto fields = split_line(line);
        if (first) t.header = std::move(fields);
        else t.rows.push_back(std::move(fields));
        first = false;
    }
    return t;
}

// 17 significant digits: enough to round-trip any double exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline bool parse_double(const std::string& s, double& out) {
    std::string t = trim(s);
    if (t.empty()) return false;
    const char* begin = t.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + t.size() && std::isfinite(out);
}

}  // namespace regimekit::csv

#endif
