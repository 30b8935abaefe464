#ifndef KDL_RNG_HPP
#define KDL_RNG_HPP

#include <cstdint>
#include <cmath>
#include <vector>

#include "linalg.hpp"

namespace kdl {

/// splitmix64 — stable across platforms, unlike std distributions.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// uniform in [0, 1)
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    double normal() {
        // Box–Muller; one value per call keeps the stream simple to reason about.
        double u1 = u01(), u2 = u01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Vec in_ball(int n, double radius) {
        while (true) {
            Vec v(n);
            for (double& x : v) x = uniform(-1.0, 1.0);
            if (dot(v, v) <= 1.0) return radius * std::move(v);
        }
    }

    Vec on_sphere(int ambient_dim) {
        while (true) {
            Vec v(ambient_dim);
            for (double& x : v) x = normal();
            double n = norm2(v);
            if (n > 1e-8) return (1.0 / n) * std::move(v);
        }
    }

    /// Deterministic fork for a labeled sub-stream.
    Rng fork(std::uint64_t label) const {
        Rng r(state ^ (0x6a09e667f3bcc909ULL + label * 0x9e3779b97f4a7c15ULL));
        r.next_u64();
        return r;
    }
};

/// Halton low-discrepancy sequence (bases 2,3,5,7,11,13,17,19).
inline double halton(std::uint64_t index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

inline Vec halton_point(std::uint64_t index, int dim) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    Vec v(dim);
    for (int j = 0; j < dim; ++j) v[j] = halton(index + 1, primes[j % 8]);
    return v;
}

}  // namespace kdl

#endif  // KDL_RNG_HPP
