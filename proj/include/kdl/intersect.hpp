#ifndef KDL_INTERSECT_HPP
#define KDL_INTERSECT_HPP

#include <algorithm>
#include <cmath>
#include <optional>

#include "chain.hpp"
#include "linalg.hpp"

namespace kdl {

/// Axis-parallel rectangle (product of intervals, possibly degenerate).
struct AxisRect {
    Vec lo, hi;
    int ambient() const { return static_cast<int>(lo.size()); }
    int dim() const {
        int d = 0;
        for (int i = 0; i < ambient(); ++i)
            if (hi[i] > lo[i]) ++d;
        return d;
    }
};

inline AxisRect rect_of(const Face& f, const Vec& shift = {}) {
    AxisRect r;
    f.bounds(r.lo, r.hi);
    if (!shift.empty())
        for (int i = 0; i < r.ambient(); ++i) {
            r.lo[i] += shift[i];
            r.hi[i] += shift[i];
        }
    return r;
}

struct IntersectResult {
    int value = 0;        // mod-2 intersection count
    bool transverse = true;
};

namespace detail {

inline double simplex_diameter(const std::vector<Vec>& pts) {
    double d = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, dist2(pts[i], pts[j]));
    return d;
}

}  // namespace detail

/// Mod-2 count of intersections between an axis-parallel rectangle and a PL
/// chain of complementary dimension.  `transverse` is cleared whenever some
/// intersection point comes within `tol` of the rectangle boundary, of a
/// simplex face, or whenever a simplex is (numerically) parallel to the
/// rectangle plane and touches it.
inline IntersectResult intersect_count(const AxisRect& r, const PLChain& t, double tol = -1.0) {
    const int n = r.ambient();
    if (r.dim() + t.dim != n)
        throw InvalidInput("intersect_count: dimensions are not complementary");
    if (tol < 0.0) tol = 1e-9 * std::max(t.scale(), 1e-300);
    std::vector<int> fixed, span;
    for (int i = 0; i < n; ++i)
        (r.hi[i] > r.lo[i] ? span : fixed).push_back(i);
    const int d = t.dim;  // == fixed.size()
    IntersectResult out;
    for (const auto& [key, pts] : t.simplices) {
        // Solve for barycentric coordinates hitting the rectangle plane.
        Mat a(d, d);
        Vec b(d);
        for (int e = 0; e < d; ++e) {
            int i = fixed[e];
            for (int j = 0; j < d; ++j) a(e, j) = pts[j + 1][i] - pts[0][i];
            b[e] = r.lo[i] - pts[0][i];
        }
        double diam = detail::simplex_diameter(pts);
        auto lam = solve(a, b, 1e-12);
        if (!lam) {
            // Parallel (or degenerate in the fixed coordinates): flag any touch.
            for (const Vec& p : pts) {
                bool near = true;
                for (int i = 0; i < n; ++i)
                    if (p[i] < r.lo[i] - tol || p[i] > r.hi[i] + tol) near = false;
                if (near) {
                    out.transverse = false;
                    break;
                }
            }
            continue;
        }
        Vec x = pts[0];
        double lsum = 0.0;
        for (int j = 0; j < d; ++j) {
            lsum += (*lam)[j];
            for (int i = 0; i < n; ++i) x[i] += (*lam)[j] * (pts[j + 1][i] - pts[0][i]);
        }
        double clear = 1e300;  // points (d = 0) have no simplex boundary to clear
        if (d > 0) {
            double bclear = 1.0 - lsum;
            for (int j = 0; j < d; ++j) bclear = std::min(bclear, (*lam)[j]);
            clear = bclear * std::max(diam, 1e-300);
        }
        for (int i : span) clear = std::min({clear, x[i] - r.lo[i], r.hi[i] - x[i]});
        if (clear > tol) {
            out.value ^= 1;
        } else if (clear >= -tol) {
            out.transverse = false;
            if (clear > 0.0) out.value ^= 1;
        }
    }
    return out;
}

inline IntersectResult intersect_count(const Face& r, const PLChain& t, const Vec& shift = {}) {
    return intersect_count(rect_of(r, shift), t, 1e-9 * std::max(r.scale, t.scale()));
}

/// Mod-2 intersection count of two PL chains of complementary dimensions.
inline IntersectResult intersect_count(const PLChain& a, const PLChain& b, double tol = -1.0) {
    if (a.empty() || b.empty()) return {};
    const int n = a.ambient();
    if (a.dim + b.dim != n)
        throw InvalidInput("intersect_count: dimensions are not complementary");
    if (tol < 0.0) tol = 1e-9 * std::max({a.scale(), b.scale(), 1e-300});
    IntersectResult out;
    // Bounding boxes: any intersection point lies in both convex hulls, so
    // box-disjoint pairs (beyond tol) cannot contribute and are skipped.
    auto boxes_of = [n](const PLChain& c) {
        std::vector<std::pair<Vec, Vec>> bx;
        for (const auto& [k, pts] : c.simplices) {
            Vec lo(static_cast<std::size_t>(n), 1e300), hi(static_cast<std::size_t>(n), -1e300);
            for (const Vec& p : pts)
                for (int i = 0; i < n; ++i) {
                    lo[static_cast<std::size_t>(i)] = std::min(lo[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i)]);
                    hi[static_cast<std::size_t>(i)] = std::max(hi[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i)]);
                }
            bx.emplace_back(std::move(lo), std::move(hi));
        }
        return bx;
    };
    auto abx = boxes_of(a), bbx = boxes_of(b);
    std::size_t ia = 0;
    for (const auto& [ka, pa] : a.simplices) {
        const auto& [alo, ahi] = abx[ia++];
        std::size_t ib = 0;
        for (const auto& [kb, pb] : b.simplices) {
            const auto& [blo, bhi] = bbx[ib++];
            bool apart = false;
            for (int i = 0; i < n && !apart; ++i)
                if (ahi[static_cast<std::size_t>(i)] < blo[static_cast<std::size_t>(i)] - tol ||
                    bhi[static_cast<std::size_t>(i)] < alo[static_cast<std::size_t>(i)] - tol)
                    apart = true;
            if (apart) continue;
            // p0a + Ea l = p0b + Eb m  ->  [Ea | -Eb] (l,m) = p0b - p0a
            Mat m(n, n);
            Vec rhs(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < a.dim; ++j) m(i, j) = pa[j + 1][i] - pa[0][i];
                for (int j = 0; j < b.dim; ++j) m(i, a.dim + j) = -(pb[j + 1][i] - pb[0][i]);
                rhs[i] = pb[0][i] - pa[0][i];
            }
            auto sol = solve(m, rhs, 1e-12);
            if (!sol) {
                // Parallel pair: an intersection requires the offset between
                // base points to lie in the joint direction space, so pairs
                // whose affine hulls are separated can be skipped outright.
                Svd sv = svd(m);
                double smax = 0.0;
                for (double sval : sv.s) smax = std::max(smax, sval);
                Vec res = rhs;
                for (std::size_t j = 0; j < sv.s.size(); ++j) {
                    if (sv.s[j] <= 1e-10 * std::max(smax, 1e-300)) continue;
                    double c = 0.0;
                    for (int i = 0; i < n; ++i) c += sv.u(i, static_cast<int>(j)) * rhs[i];
                    for (int i = 0; i < n; ++i) res[i] -= c * sv.u(i, static_cast<int>(j));
                }
                if (norm2(res) > tol) continue;
                // co-planar: flag only if the simplices come close
                double gap = 1e300;
                for (const Vec& p : pa)
                    for (const Vec& q : pb) gap = std::min(gap, dist2(p, q));
                double reach = detail::simplex_diameter(pa) + detail::simplex_diameter(pb);
                if (gap <= reach + tol) out.transverse = false;
                continue;
            }
            auto clearance = [&](const std::vector<Vec>& pts, int d, int off) {
                if (d == 0) return 1e300;  // a point has no simplex boundary
                double s = 0.0, c = 1e300;
                for (int j = 0; j < d; ++j) {
                    s += (*sol)[off + j];
                    c = std::min(c, (*sol)[off + j]);
                }
                c = std::min(c, 1.0 - s);
                return c * std::max(detail::simplex_diameter(pts), 1e-300);
            };
            double clear = std::min(clearance(pa, a.dim, 0), clearance(pb, b.dim, a.dim));
            if (clear > tol) {
                out.value ^= 1;
            } else if (clear >= -tol) {
                out.transverse = false;
                if (clear > 0.0) out.value ^= 1;
            }
        }
    }
    return out;
}

}  // namespace kdl

#endif  // KDL_INTERSECT_HPP
