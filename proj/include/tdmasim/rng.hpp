#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tdmasim {

// Deterministic RNG wrapper. std::uniform_*_distribution is implementation-defined,
// and reruns must be byte-identical, so the engine is mt19937_64 with fixed mappings.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform over [0, 1) with 53 bits of entropy.
    double real01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform over {0, ..., n-1}; n >= 1. Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return real01() < p;
    }

    // Sample an index proportionally to non-negative weights (their sum need not be 1).
    // Returns -1 if all weights are zero.
    int categorical(const std::vector<double>& w) {
        double total = 0.0;
        for (double x : w) total += x;
        if (total <= 0.0) return -1;
        double u = real01() * total;
        double acc = 0.0;
        int last_positive = -1;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] <= 0.0) continue;
            last_positive = static_cast<int>(i);
            acc += w[i];
            if (u < acc) return last_positive;
        }
        return last_positive;  // guard against fp round-off at the tail
    }

private:
    std::mt19937_64 eng_;
};

// splitmix64; used to derive independent substream seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t k = 0) {
    std::uint64_t h = master;
    for (char c : tag) h = mix_seed(h ^ static_cast<unsigned char>(c));
    return mix_seed(h ^ k);
}

}  // namespace tdmasim
