#ifndef KDL_CURVES_HPP
#define KDL_CURVES_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "rng.hpp"

namespace kdl {

struct ProximityError : std::runtime_error {
    explicit ProximityError(const std::string& what) : std::runtime_error(what) {}
};

struct OracleMismatch : std::runtime_error {
    explicit OracleMismatch(const std::string& what) : std::runtime_error(what) {}
};

/// Closed oriented polyline: the last vertex connects back to the first.
struct PolyCurve {
    std::vector<Vec> vertices;

    int ambient() const { return vertices.empty() ? 0 : static_cast<int>(vertices[0].size()); }
    std::size_t size() const { return vertices.size(); }

    double length() const {
        double l = 0.0;
        for (std::size_t i = 0; i < vertices.size(); ++i)
            l += dist2(vertices[i], vertices[(i + 1) % vertices.size()]);
        return l;
    }

    void validate(double tol = 1e-9) const {
        if (vertices.size() < 3) throw InvalidInput("PolyCurve: need at least 3 vertices");
        for (std::size_t i = 0; i < vertices.size(); ++i)
            if (dist2(vertices[i], vertices[(i + 1) % vertices.size()]) <= tol)
                throw InvalidInput("PolyCurve: consecutive vertices coincide");
    }
};

inline Vec cross3(const Vec& a, const Vec& b) {
    return Vec{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

/// Minimum distance between the segments [p1,p2] and [q1,q2].
inline double segment_distance(const Vec& p1, const Vec& p2, const Vec& q1, const Vec& q2) {
    Vec d1 = p2 - p1, d2 = q2 - q1, r = p1 - q1;
    double a = dot(d1, d1), e = dot(d2, d2), f = dot(d2, r);
    double s = 0.0, t = 0.0;
    if (a > 1e-300) {
        double c = dot(d1, r), b = dot(d1, d2);
        double denom = a * e - b * b;
        if (denom > 1e-300) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
        t = e > 1e-300 ? std::clamp((b * s + f) / e, 0.0, 1.0) : 0.0;
        s = std::clamp((dot(d1, q1 + t * d2 - p1)) / a, 0.0, 1.0);
    } else if (e > 1e-300) {
        t = std::clamp(f / e, 0.0, 1.0);
    }
    return dist2(p1 + s * d1, q1 + t * d2);
}

/// Minimum distance between two closed polylines.
inline double curve_distance(const PolyCurve& c1, const PolyCurve& c2) {
    double best = 1e300;
    for (std::size_t i = 0; i < c1.size(); ++i)
        for (std::size_t j = 0; j < c2.size(); ++j)
            best = std::min(best, segment_distance(c1.vertices[i],
                                                   c1.vertices[(i + 1) % c1.size()],
                                                   c2.vertices[j],
                                                   c2.vertices[(j + 1) % c2.size()]));
    return best;
}

namespace detail {

/// Gauss linking contribution of one segment pair: the signed solid angle of
/// the quadrilateral spanned by the endpoint differences, divided by 4π.
inline double pair_linking(const Vec& r1, const Vec& r2, const Vec& r3, const Vec& r4) {
    Vec r13 = r3 - r1, r14 = r4 - r1, r23 = r3 - r2, r24 = r4 - r2;
    auto unit_normal = [](const Vec& a, const Vec& b) {
        Vec w = cross3(a, b);
        double n = norm2(w);
        return n > 1e-14 ? (1.0 / n) * w : Vec{0.0, 0.0, 0.0};
    };
    Vec n1 = unit_normal(r13, r14);
    Vec n2 = unit_normal(r14, r24);
    Vec n3 = unit_normal(r24, r23);
    Vec n4 = unit_normal(r23, r13);
    auto wrap = [](double x) { return std::asin(std::clamp(x, -1.0, 1.0)); };
    double omega = wrap(dot(n1, n2)) + wrap(dot(n2, n3)) + wrap(dot(n3, n4)) + wrap(dot(n4, n1));
    double sg = dot(cross3(r4 - r3, r2 - r1), r13);
    return (sg >= 0.0 ? 1.0 : -1.0) * omega / (4.0 * std::numbers::pi);
}

/// Signed-crossing linking number in the projection along w: sum of crossing
/// signs where the first curve passes over the second.  Returns false when
/// the direction is non-generic (near-parallel crossing, grazing endpoint,
/// ambiguous height).
inline bool crossing_linking(const PolyCurve& c1, const PolyCurve& c2, const Vec& w,
                             long long& out) {
    // orthonormal screen (u, v) with (u, v, w) right-handed
    Vec u{1.0, 0.0, 0.0};
    if (std::fabs(w[0]) > 0.9) u = Vec{0.0, 1.0, 0.0};
    u = u - dot(u, w) * w;
    u = normalized(u);
    Vec v = cross3(w, u);
    auto flat = [&](const Vec& x) { return Vec{dot(u, x), dot(v, x)}; };
    double scale = std::max(c1.length(), c2.length());
    const double eps = 1e-7;
    long long total = 0;
    for (std::size_t i = 0; i < c1.size(); ++i) {
        Vec p1 = c1.vertices[i], p2 = c1.vertices[(i + 1) % c1.size()];
        Vec a1 = flat(p1), a2 = flat(p2);
        for (std::size_t j = 0; j < c2.size(); ++j) {
            Vec q1 = c2.vertices[j], q2 = c2.vertices[(j + 1) % c2.size()];
            Vec b1 = flat(q1), b2 = flat(q2);
            double d1x = a2[0] - a1[0], d1y = a2[1] - a1[1];
            double d2x = b2[0] - b1[0], d2y = b2[1] - b1[1];
            double det = d1x * d2y - d1y * d2x;
            double rx = b1[0] - a1[0], ry = b1[1] - a1[1];
            double l1 = std::hypot(d1x, d1y), l2 = std::hypot(d2x, d2y);
            if (std::fabs(det) <= eps * l1 * l2) {
                // parallel in projection: ambiguous only if the segments
                // actually overlap on screen
                if (segment_distance({a1[0], a1[1], 0.0}, {a2[0], a2[1], 0.0},
                                     {b1[0], b1[1], 0.0}, {b2[0], b2[1], 0.0}) <= eps * scale)
                    return false;
                continue;
            }
            double s = (rx * d2y - ry * d2x) / det;
            double t = (rx * d1y - ry * d1x) / det;
            if (s < -eps || s > 1.0 + eps || t < -eps || t > 1.0 + eps) continue;
            if (s < eps || s > 1.0 - eps || t < eps || t > 1.0 - eps) return false;
            double h1 = dot(w, p1 + s * (p2 - p1));
            double h2 = dot(w, q1 + t * (q2 - q1));
            if (std::fabs(h1 - h2) <= eps * scale) return false;
            if (h1 > h2) total += det > 0.0 ? 1 : -1;
        }
    }
    out = total;
    return true;
}

}  // namespace detail

/// Linking number of two disjoint closed curves in R³: closed-form Gauss
/// integral over segment pairs, cross-checked against the signed-crossing
/// count in a generic projection.
inline long long linking_number(const PolyCurve& c1, const PolyCurve& c2, double tol = 1e-6) {
    c1.validate();
    c2.validate();
    if (c1.ambient() != 3 || c2.ambient() != 3)
        throw InvalidInput("linking_number: curves must live in R^3");
    if (curve_distance(c1, c2) <= tol)
        throw ProximityError("linking_number: curves come within the tolerance of each other");
    double gauss = 0.0;
    for (std::size_t i = 0; i < c1.size(); ++i) {
        const Vec& r1 = c1.vertices[i];
        const Vec& r2 = c1.vertices[(i + 1) % c1.size()];
        for (std::size_t j = 0; j < c2.size(); ++j)
            gauss += detail::pair_linking(r1, r2, c2.vertices[j],
                                          c2.vertices[(j + 1) % c2.size()]);
    }
    long long rounded = std::llround(gauss);
    if (std::fabs(gauss - static_cast<double>(rounded)) > 0.2)
        throw OracleMismatch("linking_number: Gauss integral " + std::to_string(gauss) +
                             " is far from an integer");
    // independent oracle: signed crossings in a generic projection
    Rng rng(0x9e3779b97f4a7c15ULL);
    bool checked = false;
    for (int attempt = 0; attempt < 24 && !checked; ++attempt) {
        Vec w = rng.on_sphere(3);
        long long crossings = 0;
        if (!detail::crossing_linking(c1, c2, w, crossings)) continue;
        checked = true;
        if (crossings != rounded)
            throw OracleMismatch("linking_number: crossing count " + std::to_string(crossings) +
                                 " disagrees with the Gauss integral " + std::to_string(rounded));
    }
    if (!checked)
        throw OracleMismatch("linking_number: no generic projection direction found");
    return rounded;
}

}  // namespace kdl

#endif  // KDL_CURVES_HPP
