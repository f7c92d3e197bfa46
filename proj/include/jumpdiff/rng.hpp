#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace jumpdiff {

namespace detail {

// splitmix64 finalizer; good avalanche for deriving substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace detail

// Deterministic random stream with named/indexed substreams. The engine is
// std::mt19937_64 (fully specified by the standard); all draw helpers are
// implemented here rather than with std::*_distribution, whose algorithms are
// implementation-defined and would tie reproducibility to the stdlib build.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed)
        : seed_(seed), engine_(detail::mix64(seed)) {}

    // Substreams derive from the root seed, not the engine position, so a
    // fork is unaffected by draws made on the parent.
    RandomStream fork(std::string_view name) const {
        return RandomStream(detail::mix64(seed_ ^ detail::fnv1a(name)));
    }
    RandomStream fork(std::string_view name, std::uint64_t index) const {
        return RandomStream(
            detail::mix64(detail::mix64(seed_ ^ detail::fnv1a(name)) + index));
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double real01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("RandomStream::index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r < limit) return static_cast<std::size_t>(r % n);
        }
    }

    // Standard normal via Box-Muller; the spare is cached, and copying the
    // stream copies the cache, so replaying from a snapshot is exact.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = real01();
        const double u2 = real01();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::vector<double> normal_vector(std::size_t n) {
        std::vector<double> out(n);
        for (double& v : out) v = normal();
        return out;
    }

    // Fisher-Yates; uniform over permutations.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[index(i)]);
        }
    }

    // Draw from a normalized discrete distribution by CDF walk.
    std::size_t categorical(std::span<const double> probs) {
        if (probs.empty()) throw std::invalid_argument("RandomStream::categorical: empty distribution");
        const double u = real01();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.size() - 1;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace jumpdiff
