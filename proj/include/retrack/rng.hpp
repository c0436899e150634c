#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace retrack {

// splitmix64, used for seeding and for hashing salts into stream seeds.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** with a 64-bit seed expanded through splitmix64.
/// Chosen (over std::mt19937) so the exact generator is nameable and
/// reproducible across implementations.
class Xoshiro256ss {
public:
    explicit Xoshiro256ss(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Symmetric jitter in [-mag, mag].
    double jitter(double mag) { return uniform(-mag, mag); }

    bool coin(double p) { return uniform() < p; }

    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

/// Stateless stream derivation: mixes a root seed with up to four salts so
/// independent draws (per frame, per context, per purpose) never share state.
inline Xoshiro256ss derive_stream(std::uint64_t seed, std::uint64_t a,
                                  std::uint64_t b = 0, std::uint64_t c = 0,
                                  std::uint64_t d = 0) {
    std::uint64_t s = seed;
    std::uint64_t h = splitmix64_next(s);
    s ^= a + 0x9E3779B97F4A7C15ULL;
    h ^= splitmix64_next(s);
    s ^= b + 0xD1B54A32D192ED03ULL;
    h ^= splitmix64_next(s);
    s ^= c + 0x8CB92BA72F3D8DD7ULL;
    h ^= splitmix64_next(s);
    s ^= d + 0xEB44ACCAB455D165ULL;
    h ^= splitmix64_next(s);
    return Xoshiro256ss(h);
}

/// Random unit vector (coordinates uniform in [-1,1], then normalized).
inline std::vector<double> random_unit_vector(Xoshiro256ss& rng, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm_sq = 0.0;
    for (auto& x : v) {
        x = rng.uniform(-1.0, 1.0);
        norm_sq += x * x;
    }
    if (norm_sq <= 0.0) {  // astronomically unlikely; fall back to a basis vector
        v[0] = 1.0;
        norm_sq = 1.0;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v) x *= inv;
    return v;
}

}  // namespace retrack
