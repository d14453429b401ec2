#ifndef QS_RNG_HPP
#define QS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace qs {

// splitmix64 step; used to derive independent stream seeds from key tuples.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Hash a key tuple into one 64-bit stream seed. Order-sensitive.
inline uint64_t derive_seed(std::initializer_list<uint64_t> keys) {
    uint64_t state = 0x6A09E667F3BCC908ULL;
    uint64_t h = 0;
    for (uint64_t k : keys) {
        state ^= k;
        h = splitmix64(state) ^ (h * 0x100000001B3ULL);
    }
    return h;
}

// Deterministic random stream. mt19937_64 is fully specified by the
// standard; the uniform/normal transforms below are hand-rolled so the
// produced sequences are identical across platforms and library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // Uniform double in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Standard normal via Box-Muller; caches the second variate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Integer in [0, bound) via 128-bit multiply; deterministic, bias < 2^-64.
    uint64_t integer(uint64_t bound) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(gen_()) * bound) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(integer(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace qs

#endif // QS_RNG_HPP
