#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace jrlab {

// Counter-based pseudo-random stream with value semantics.
//
// Each draw hashes (key, counter) through the SplitMix64 finalizer, so a
// stream is fully described by two integers: copying an Rng replays the
// same sequence, and child streams derived from distinct tags are
// independent of both the parent's position and each other.  This is what
// makes runs reproducible under refactoring: work items address their
// randomness by tag instead of by draw order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : key_(finalize(seed ^ 0x6a09e667f3bcc909ull)) {}

    struct State {
        std::uint64_t key;
        std::uint64_t counter;
    };
    State state() const { return {key_, counter_}; }

    std::uint64_t next_u64() {
        ++counter_;
        return finalize(key_ + 0x9e3779b97f4a7c15ull * counter_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r = next_u64();
        while (r >= limit) r = next_u64();
        return r % n;
    }

    // Standard normal via Box-Muller; one deterministic draw per call.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]: keeps log() finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    void fill_normal(double* out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) out[i] = normal();
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream addressed by tag; does not advance this stream.
    Rng child(std::uint64_t tag) const {
        Rng c(0);
        c.key_ = finalize(key_ ^ finalize(tag ^ 0x94d049bb133111ebull));
        c.counter_ = 0;
        return c;
    }

  private:
    static std::uint64_t finalize(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace jrlab
