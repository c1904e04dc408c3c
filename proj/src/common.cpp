#include "painpair/common.hpp"

#include <omp.h>

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace painpair {

int worker_threads() {
    int n = int(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("PAINPAIR_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap > 0) n = std::min<long>(n, cap);
    }
    return n;
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

double parse_double(const std::string& s, const std::string& context) {
    const std::string t = trim(s);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size())
        fail(context + ": expected a number, got '" + s + "'");
    return value;
}

long parse_long(const std::string& s, const std::string& context) {
    const std::string t = trim(s);
    long value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size())
        fail(context + ": expected an integer, got '" + s + "'");
    return value;
}

Csv read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("csv: cannot open '" + path + "'");
    Csv csv;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            for (auto& c : split(line, ',')) csv.header.push_back(trim(c));
            continue;
        }
        if (trim(line).empty()) continue;
        auto cells = split(line, ',');
        if (cells.size() != csv.header.size())
            fail("csv: '" + path + "' row " + std::to_string(lineno) + " has " +
                 std::to_string(cells.size()) + " cells, header has " +
                 std::to_string(csv.header.size()));
        for (auto& c : cells) c = trim(c);
        csv.rows.push_back(std::move(cells));
    }
    return csv;
}

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace painpair
