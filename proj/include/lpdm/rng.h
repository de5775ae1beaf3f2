#ifndef LPDM_RNG_H
#define LPDM_RNG_H

#include <cstdint>
#include <random>

namespace lpdm {

/// Seedable generator with counter-derived substreams. Every random decision
/// in the toolkit flows from one root seed; substreams are keyed by
/// (step, sample index, purpose) so the order in which work units are
/// processed never changes what they draw.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(mix(seed)) {}

    static Rng substream(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t d = 0) {
        uint64_t s = mix(seed);
        s = mix(s ^ (a + 0x9e3779b97f4a7c15ULL));
        s = mix(s ^ (b + 0xbf58476d1ce4e5b9ULL));
        s = mix(s ^ (d + 0x94d049bb133111ebULL));
        return Rng(raw_tag{}, s);
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    /// Inclusive range.
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }

    float normal() { return std::normal_distribution<float>(0.0f, 1.0f)(engine_); }

    std::mt19937_64& engine() { return engine_; }

  private:
    struct raw_tag {};
    Rng(raw_tag, uint64_t s) : engine_(s) {}

    // splitmix64 finalizer
    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace lpdm

#endif
