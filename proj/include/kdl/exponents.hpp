#ifndef KDL_EXPONENTS_HPP
#define KDL_EXPONENTS_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "curves.hpp"
#include "mapspec.hpp"

namespace kdl {

/// Classification of a volume direction (a,b,c) of a three-factor splitting.
struct DirectionVerdict {
    int m = 0, n = 0, k = 0;
    int a = 0, b = 0, c = 0;
    bool bad = false;         // |b - c| <= 1
    bool bound_holds = true;  // bad and k <= (m+1)/2  =>  b, c >= k
};

/// Classify a direction (a,b,c) with a+b+c = 2n for a map context (m, n, k):
/// bad iff |b-c| <= 1, and for k below the threshold every bad direction must
/// have both b and c at least k.
inline DirectionVerdict direction_classify(int m, int n, int k, int a, int b, int c) {
    if (m <= n || n < 1 || k < 1)
        throw InvalidInput("direction_classify: need m > n >= 1 and k >= 1");
    if (a < 0 || b < 0 || c < 0 || a + b + c != 2 * n)
        throw InvalidInput("direction_classify: (a,b,c) must be nonnegative with a+b+c = 2n");
    if (a > 2 * n - m - 1)
        throw InvalidInput("direction_classify: a exceeds 2n-m-1");
    if (b > n || c > n) throw InvalidInput("direction_classify: b and c cannot exceed n");
    DirectionVerdict v;
    v.m = m;
    v.n = n;
    v.k = k;
    v.a = a;
    v.b = b;
    v.c = c;
    v.bad = std::abs(b - c) <= 1;
    v.bound_holds = !(v.bad && 2 * k <= m + 1) || (b >= k && c >= k);
    return v;
}

/// The exponents governing suspension constructions and volume bounds.
struct ExponentReport {
    int m = 0, n = 0, p = 0, q = 0, k = 0;
    double suspension_exponent = 0.0;   // (p/(m-p)) * (k - q m / p)
    double suspension_threshold = 0.0;  // q m / p: k above it makes the exponent positive
    double hprinciple_threshold = 0.0;  // (m+1)/2: k above it admits small k-dilation
    double volume_exponent = 0.0;       // (m+1)/(m+1-n)
    bool suspension_feasible = false;
    bool hprinciple_feasible = false;
};

inline ExponentReport exponent_report(int m, int n, int p, int q, int k) {
    if (m <= n || n < 1) throw InvalidInput("exponent_report: need m > n >= 1");
    if (p < 1 || p > m || q < 1 || q > n) throw InvalidInput("exponent_report: need 1 <= p <= m, 1 <= q <= n");
    if (p == m) throw InvalidInput("exponent_report: p = m makes the suspension exponent singular");
    ExponentReport r;
    r.m = m;
    r.n = n;
    r.p = p;
    r.q = q;
    r.k = k;
    r.suspension_threshold = static_cast<double>(q) * m / p;
    r.suspension_exponent =
        (static_cast<double>(p) / (m - p)) * (k - r.suspension_threshold);
    r.hprinciple_threshold = (m + 1) / 2.0;
    r.volume_exponent = static_cast<double>(m + 1) / (m + 1 - n);
    r.suspension_feasible = k > r.suspension_threshold;
    r.hprinciple_feasible = k > r.hprinciple_threshold;
    return r;
}

/// Measurements of a linked-tube pair: linking number of the cores, certified
/// thickness radii, and the scale-invariant product L R1² R2².
struct GehringResult {
    long long linking = 0;
    double r1 = 0.0, r2 = 0.0;       // inner (certified) thickness radii
    double outer1 = 0.0, outer2 = 0.0;  // outer radii around the cores
    double core_distance = 0.0;
    double product = 0.0;  // L * r1^2 * r2^2
};

namespace detail {

/// Core curve of a tube map (image of S¹(δ) x {0}).
inline PolyCurve tube_core(const MapSpec& t, int samples) {
    if (t.domain.kind != ChartDesc::Kind::tube || t.domain.d1 != 1)
        throw InvalidInput("tube_core: expected a tube domain over S^1");
    PolyCurve c;
    const double delta = t.domain.radius;
    for (int i = 0; i < samples; ++i) {
        double th = 2.0 * std::numbers::pi * i / samples;
        Vec x(static_cast<std::size_t>(t.domain.ambient_dim()), 0.0);
        x[0] = delta * std::cos(th);
        x[1] = delta * std::sin(th);
        c.vertices.push_back(t.eval(x));
    }
    return c;
}

inline double point_to_curve(const Vec& p, const PolyCurve& c) {
    double best = 1e300;
    for (std::size_t i = 0; i < c.size(); ++i)
        best = std::min(best,
                        segment_distance(p, p, c.vertices[i], c.vertices[(i + 1) % c.size()]));
    return best;
}

/// Inner and outer radii of the tube image around its core: min distance of
/// the boundary image and max distance of the sampled image.
inline void tube_radii(const MapSpec& t, const PolyCurve& core, int samples, double& inner,
                       double& outer) {
    const double delta = t.domain.radius;
    inner = 1e300;
    outer = 0.0;
    for (int i = 0; i < samples; ++i) {
        double th = 2.0 * std::numbers::pi * i / samples;
        for (int jj = 0; jj < samples; ++jj) {
            double ph = 2.0 * std::numbers::pi * jj / samples;
            for (double rad : {0.5, 1.0}) {
                Vec x(static_cast<std::size_t>(t.domain.ambient_dim()), 0.0);
                x[0] = delta * std::cos(th);
                x[1] = delta * std::sin(th);
                x[2] = rad * std::cos(ph);
                x[3] = rad * std::sin(ph);
                double d = point_to_curve(t.eval(x), core);
                if (rad == 1.0) inner = std::min(inner, d);
                outer = std::max(outer, d);
            }
        }
    }
}

}  // namespace detail

/// Linking-versus-thickness measurement for two disjoint tubes in R³: the
/// linking number of the core curves, certified thickness radii, and the
/// product L r1² r2² for empirical comparison across families.
inline GehringResult gehring_experiment(const MapSpec& t1, const MapSpec& t2, int samples = 48) {
    if (t1.target.ambient_dim() != 3 || t2.target.ambient_dim() != 3)
        throw InvalidInput("gehring_experiment: tubes must land in R^3");
    GehringResult g;
    PolyCurve c1 = detail::tube_core(t1, samples);
    PolyCurve c2 = detail::tube_core(t2, samples);
    detail::tube_radii(t1, c1, samples, g.r1, g.outer1);
    detail::tube_radii(t2, c2, samples, g.r2, g.outer2);
    g.core_distance = curve_distance(c1, c2);
    // sufficient disjointness certificate: the sampled tube images stay in
    // the outer-radius neighborhoods of their cores
    if (g.core_distance <= g.outer1 + g.outer2)
        throw ProximityError("gehring_experiment: tube neighborhoods overlap (cores " +
                             std::to_string(g.core_distance) + " apart, outer radii " +
                             std::to_string(g.outer1) + " + " + std::to_string(g.outer2) + ")");
    g.linking = linking_number(c1, c2);
    g.product = static_cast<double>(g.linking) * g.r1 * g.r1 * g.r2 * g.r2;
    return g;
}

/// A solid torus of revolution in R³ as a tube map: S¹(δ) x B² -> R³ with
/// core circle of radius `major` around `axis_point` in the plane normal to
/// `axis`, and cross-sectional radius `minor`.
inline MapSpec torus_tube(const Vec& center, const Vec& axis, double major, double minor,
                          double delta = 1.0) {
    if (axis.size() != 3 || center.size() != 3)
        throw InvalidInput("torus_tube: center and axis must be 3-vectors");
    if (major <= minor || minor <= 0.0)
        throw InvalidInput("torus_tube: need major > minor > 0");
    Vec w = normalized(axis);
    Vec u{1.0, 0.0, 0.0};
    if (std::fabs(w[0]) > 0.9) u = Vec{0.0, 1.0, 0.0};
    u = normalized(u - dot(u, w) * w);
    Vec v = cross3(w, u);
    MapSpec m;
    m.kind = "torus_tube";
    m.params["major"] = major;
    m.params["minor"] = minor;
    m.domain = ChartDesc::tube_chart(1, 2, delta);
    m.target = ChartDesc::euclidean_chart({1.0, 1.0, 1.0});
    m.eval = [center, u, v, w, major, minor, delta](const Vec& x) {
        double th = std::atan2(x[1], x[0]);
        // ball coordinates: first spans the radial direction, second the axis
        double rr = major + minor * x[2];
        Vec p = center + (rr * std::cos(th)) * u + (rr * std::sin(th)) * v +
                (minor * x[3]) * w;
        (void)delta;
        return p;
    };
    return m;
}

}  // namespace kdl

#endif  // KDL_EXPONENTS_HPP
