#pragma once
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>
#include <caspar/errors.hpp>

namespace caspar::text {

inline std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view line, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::string> split_whitespace(const std::string& line)
{
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open input file '" + path + "'");
    return in;
}

inline std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open output file '" + path + "'");
    return out;
}

/// Non-empty, non-comment lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::string& path)
{
    auto in = open_input(path);
    std::vector<std::pair<std::size_t, std::string>> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.emplace_back(no, std::move(t));
    }
    return out;
}

inline bool is_missing_token(const std::string& s)
{
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

inline double parse_double(const std::string& s, const std::string& source, std::size_t line)
{
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (s.empty() || end != begin + s.size() || !std::isfinite(v)) {
        throw ParseError(source, line, "expected a finite number, got '" + s + "'");
    }
    return v;
}

inline long long parse_int(const std::string& s, const std::string& source, std::size_t line)
{
    const char* begin = s.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(begin, &end, 10);
    if (s.empty() || end != begin + s.size()) {
        throw ParseError(source, line, "expected an integer, got '" + s + "'");
    }
    return v;
}

} // namespace caspar::text
