#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace painpair {

/// Error with a short machine-parsable "<area>: <detail>" message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

// ---------------------------------------------------------------------------
// Deterministic randomness.
//
// All draws go through mt19937_64 plus the explicit mappings below.
// std::*_distribution is implementation-defined and would break run-to-run
// reproducibility across toolchains, so it is not used anywhere.

using Rng = std::mt19937_64;

inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Derived seed for (seed, path...). Distinct paths decorrelate; the same
/// (seed, path) always maps to the same value.
inline uint64_t subseed(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t h = mix64(seed ^ 0x5ca1ab1e0ddba11ull);
    for (uint64_t p : path) h = mix64(h ^ mix64(p));
    return h;
}

/// Independent random stream for (seed, path...).
inline Rng substream(uint64_t seed, std::initializer_list<uint64_t> path) {
    return Rng(subseed(seed, path));
}

/// Uniform double in [0, 1).
inline double u01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double a, double b) { return a + (b - a) * u01(rng); }

/// Uniform integer in [0, n), rejection sampled (no modulo bias).
inline uint64_t uniform_index(Rng& rng, uint64_t n) {
    if (n == 0) fail("rng: uniform_index with n=0");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do { x = rng(); } while (x >= limit);
    return x % n;
}

/// Standard normal via the polar method.
inline double gaussian(Rng& rng) {
    for (;;) {
        const double u = 2.0 * u01(rng) - 1.0;
        const double v = 2.0 * u01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// Deterministic in-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

// ---------------------------------------------------------------------------
// Parallel reduction layout.
//
// Work that feeds a reduction is split into a fixed number of chunks and the
// partial results are combined in chunk order, so results are bitwise
// identical no matter how many worker threads run the chunks.

constexpr int kReduceChunks = 8;

inline std::pair<long, long> chunk_range(long n, int chunk) {
    const long per = (n + kReduceChunks - 1) / kReduceChunks;
    return {std::min<long>(chunk * per, n), std::min<long>((chunk + 1) * per, n)};
}

/// Worker cap: min(hardware, PAINPAIR_THREADS if set).
int worker_threads();

// ---------------------------------------------------------------------------
// Small string/parse helpers.

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

/// Minimal CSV: comma separated, no quoting, first line is the header.
struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // each padded/checked to header size
};
Csv read_csv(const std::string& path);

uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull);

}  // namespace painpair
