#ifndef GRASPKIT_RANDOM_HPP
#define GRASPKIT_RANDOM_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

namespace graspkit {

// splitmix64 generator. The standard <random> distributions are
// implementation-defined, so byte-identical outputs across platforms
// require generating uniforms by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double next_in(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform in [0, n). Modulo bias is irrelevant at the n used here; what
    // matters is that the mapping is fixed.
    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Independent child stream, stable under reordering of sibling forks.
    Rng fork(std::uint64_t salt) const {
        Rng child(state_ ^ (salt * 0xD1B54A32D192ED03ull + 0x2545F4914F6CDD1Dull));
        child.next_u64();
        return child;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[next_below(i)]);
    }

private:
    std::uint64_t state_;
};

// FNV-1a, the content-hash primitive used for corpus fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xCBF29CE484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace graspkit

#endif
