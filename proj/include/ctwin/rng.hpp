#ifndef CTWIN_RNG_HPP
#define CTWIN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "ctwin/common.hpp"

namespace ctwin {

/// Deterministic random stream. All distribution transforms are done here from
/// raw 64-bit draws so that sequences are bit-reproducible across standard
/// library implementations (std::normal_distribution is not portable).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller. Always consumes exactly two uniforms.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform(); // u1 == 0 would give log(0)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    /// Circularly-symmetric complex Gaussian with E|z|^2 == variance.
    cplx cnormal(double variance) {
        const double s = std::sqrt(variance * 0.5);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    /// Uniform direction on the unit sphere.
    void sphere(double &x, double &y, double &z) {
        const double c = uniform(-1.0, 1.0);
        const double phi = uniform(0.0, kTwoPi);
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        x = s * std::cos(phi);
        y = s * std::sin(phi);
        z = c;
    }

  private:
    std::mt19937_64 eng_;
};

/// SplitMix64 finalizer; used to derive independent stream seeds from a base
/// seed plus arbitrary indices (trial number, ray index, ...).
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a) {
    return mix_seed(base ^ mix_seed(a));
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return mix_seed(mix_seed(base ^ mix_seed(a)) ^ mix_seed(b));
}

/// FNV-1a over a byte string; stable across platforms and builds (std::hash is
/// not guaranteed to be), used wherever a hash feeds a persisted seed.
inline std::uint64_t fnv1a(const std::string &s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace ctwin

#endif
