#ifndef SIXDMA_RNG_HPP
#define SIXDMA_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace sixdma {

// Deterministic RNG with named substreams. A stream is identified by the
// master seed plus a chain of fork labels, so a consumer that owns stream
// (seed, trial) produces the same values no matter which thread runs it or
// in which order trials are evaluated.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(mix(0x9e3779b97f4a7c15ull, seed)), engine_(state_) {}

    // Child stream derived from this stream's identity, not its position.
    Rng fork(std::uint64_t label) const { return Rng(mix(state_, label), 0); }

    std::uint64_t bits() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    // Standard normal via Box-Muller; implementation-independent across
    // standard libraries, which keeps outputs byte-stable.
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // CN(0,1): unit-variance circularly symmetric complex Gaussian.
    std::complex<double> cgaussian() {
        const double re = gaussian();
        const double im = gaussian();
        return {re * M_SQRT1_2, im * M_SQRT1_2};
    }

  private:
    Rng(std::uint64_t mixed, int) : state_(mixed), engine_(mixed) {}

    // splitmix64-style avalanche combine.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    std::mt19937_64 engine_;
};

} // namespace sixdma

#endif
