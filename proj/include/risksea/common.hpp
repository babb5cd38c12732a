#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace risksea {

// Blockchain addresses are opaque strings; we never interpret their bytes.
using Address = std::string;

// Thrown for bad configuration / bad arguments (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown for malformed or missing data at runtime (CLI exit code 3).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a, 64 bit. Used for partition assignment and seed derivation;
// must stay stable because partition files and seeded outputs are fixtures.
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// splitmix64 finalizer; decorrelates nearby seed values before they
// reach an engine.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) {
    return mix64(mix64(a, b), c);
}

// Deterministic RNG. std::mt19937_64 is fully specified by the standard;
// the distribution mappings below are pinned here so outputs never depend
// on a library's implementation-defined distributions.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, n). Modulo bias is < n / 2^64, irrelevant at our scales.
    uint64_t uniform(uint64_t n) { return n ? eng_() % n : 0; }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform_real() { return (eng_() >> 11) * 0x1.0p-53; }

    double uniform_real(double lo, double hi) {
        return lo + (hi - lo) * uniform_real();
    }

    double normal() {
        // Box-Muller; one value per call keeps the stream position obvious.
        double u1 = uniform_real();
        double u2 = uniform_real();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Partial Fisher-Yates: permutes the first k slots of v in place.
    template <typename T>
    void partial_shuffle(std::vector<T>& v, size_t k) {
        const size_t n = v.size();
        for (size_t i = 0; i < k && i + 1 < n; ++i) {
            size_t j = i + uniform(n - i);
            std::swap(v[i], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

inline std::vector<std::string_view> split_view(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

// Shortest-decimal float formatting with 9 significant digits; round-trips
// IEEE binary32 exactly. Canonical for embedding and model files.
std::string format_f32(float v);

// 64-bit content hash of a file, hex encoded. Used in stage manifests.
std::string file_hash_hex(const std::filesystem::path& p);

// Writes content to a temp file in the same directory, then renames.
// Readers never observe partially written files.
void atomic_write(const std::filesystem::path& p, const std::string& content);

}  // namespace risksea
