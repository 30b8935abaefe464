#ifndef KDL_FIBER_HPP
#define KDL_FIBER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "curves.hpp"
#include "linalg.hpp"
#include "mapspec.hpp"
#include "rng.hpp"

namespace kdl {

struct TracingError : std::runtime_error {
    explicit TracingError(const std::string& what) : std::runtime_error(what) {}
};

struct FiberTrace {
    std::vector<PolyCurve> curves;  // disjoint closed fibers, canonically oriented
    double total_length = 0.0;
    double min_s2 = 1e300;  // smallest second singular value met along the trace
};

namespace detail {

inline Vec from_frame(const std::vector<Vec>& frame, const Vec& coeffs) {
    Vec out(frame[0].size(), 0.0);
    for (std::size_t j = 0; j < frame.size(); ++j) out = out + coeffs[j] * frame[j];
    return out;
}

/// Least-squares solve J d = r for a small framed Jacobian via its SVD,
/// ignoring singular directions below the cutoff.
inline Vec pinv_apply(const Mat& j, const Vec& r, double cutoff) {
    Svd sv = svd(j);
    Vec d(static_cast<std::size_t>(j.cols), 0.0);
    for (std::size_t k = 0; k < sv.s.size(); ++k) {
        if (sv.s[k] <= cutoff) continue;
        double c = 0.0;
        for (int i = 0; i < j.rows; ++i) c += sv.u(i, static_cast<int>(k)) * r[static_cast<std::size_t>(i)];
        c /= sv.s[k];
        for (int i = 0; i < j.cols; ++i) d[static_cast<std::size_t>(i)] += c * sv.v(i, static_cast<int>(k));
    }
    return d;
}

/// Gauss–Newton step of x toward the fiber F(x) = y on the domain sphere.
/// Returns the residual after the step; a negative value reports failure.
inline double fiber_correct(const MapSpec& map, const Vec& y, Vec& x, int iters) {
    for (int it = 0; it < iters; ++it) {
        Vec r = map.eval(x) - y;
        if (norm2(r) < 1e-11) return norm2(r);
        Mat j;
        std::vector<Vec> dframe, tframe;
        try {
            dframe = tangent_frame(map.domain, x);
            tframe = tangent_frame(map.target, map.eval(x));
            j = jacobian_in_frames(map, x, 1e-6);
        } catch (const BoundaryProximity&) {
            return -1.0;
        }
        Vec rf(tframe.size());
        for (std::size_t i = 0; i < tframe.size(); ++i) rf[i] = dot(tframe[i], r);
        Vec d = pinv_apply(j, rf, 1e-8);
        if (norm2(d) > 0.5) d = (0.5 / norm2(d)) * d;  // trust region
        x = normalized(x - from_frame(dframe, d));
    }
    return norm2(map.eval(x) - y);
}

/// Unit fiber tangent at x: the right-null direction of the framed Jacobian,
/// expressed in ambient coordinates.  Also reports s_2 for the regularity gate.
inline Vec fiber_tangent(const MapSpec& map, const Vec& x, double& s2) {
    auto dframe = tangent_frame(map.domain, x);
    Mat j = jacobian_in_frames(map, x, 1e-6);
    Svd sv = svd(j);  // j is 2x3: right factor v is 3x2; the null direction
    // completes v's columns to an orthonormal basis of the domain frame
    Vec n(3);
    // cross product of the two rows of v^T (columns of v) in frame coordinates
    Vec a{sv.v(0, 0), sv.v(1, 0), sv.v(2, 0)};
    Vec b{sv.v(0, 1), sv.v(1, 1), sv.v(2, 1)};
    n = cross3(a, b);
    double nn = norm2(n);
    if (nn < 1e-9) throw TracingError("fiber tangent is degenerate");
    n = (1.0 / nn) * n;
    s2 = sv.s.size() > 1 ? sv.s[1] : 0.0;
    return from_frame(dframe, n);
}

/// Canonical fiber orientation: t is positive when (u1, u2, t, x) is a
/// positively oriented frame of R⁴, where J u_i hits a positively oriented
/// tangent frame of the target sphere.
inline bool tangent_is_positive(const MapSpec& map, const Vec& x, const Vec& t) {
    auto dframe = tangent_frame(map.domain, x);
    Vec fx = map.eval(x);
    auto tframe = tangent_frame(map.target, fx);
    // orient the target frame against the outward normal of S²
    double o3 = dot(cross3(tframe[0], tframe[1]), fx);
    Mat j = jacobian_in_frames(map, x, 1e-6);
    Vec e0(2, 0.0), e1(2, 0.0);
    e0[0] = 1.0;
    e1[1] = 1.0;
    Vec a0 = pinv_apply(j, e0, 1e-8);
    Vec a1 = pinv_apply(j, e1, 1e-8);
    Vec u0 = from_frame(dframe, a0);
    Vec u1 = from_frame(dframe, a1);
    // det of the 4x4 frame (u0, u1, t, x) by elimination
    Mat m(4, 4);
    for (int i = 0; i < 4; ++i) {
        m(i, 0) = u0[static_cast<std::size_t>(i)];
        m(i, 1) = u1[static_cast<std::size_t>(i)];
        m(i, 2) = t[static_cast<std::size_t>(i)];
        m(i, 3) = x[static_cast<std::size_t>(i)];
    }
    double det = 1.0;
    for (int c = 0; c < 4; ++c) {
        int piv = c;
        for (int r = c + 1; r < 4; ++r)
            if (std::fabs(m(r, c)) > std::fabs(m(piv, c))) piv = r;
        if (piv != c) {
            for (int k = 0; k < 4; ++k) std::swap(m(c, k), m(piv, k));
            det = -det;
        }
        if (m(c, c) == 0.0) return true;  // degenerate: keep the current sign
        det *= m(c, c);
        for (int r = c + 1; r < 4; ++r) {
            double f = m(r, c) / m(c, c);
            for (int k = c; k < 4; ++k) m(r, k) -= f * m(c, k);
        }
    }
    return (o3 >= 0.0 ? det : -det) > 0.0;
}

}  // namespace detail

/// Trace the fiber F⁻¹(y) of a map S³ → S² by predictor–corrector
/// continuation: seeds from multistart Gauss–Newton, steps along the kernel
/// of the Jacobian with curvature-adaptive length in [1e-4, 1e-2], loops
/// closed on returning within step/2 of the start.
inline FiberTrace fiber_trace(const MapSpec& map, const Vec& y, double step = 1e-2,
                              std::uint64_t seed = 1, int nseeds = 250) {
    if (map.domain.kind != ChartDesc::Kind::sphere || map.domain.d1 != 3)
        throw InvalidInput("fiber_trace: domain must be S^3");
    step = std::clamp(step, 1e-4, 1e-2);
    FiberTrace out;
    Rng rng(seed ^ 0xd1b54a32d192ed03ULL);
    std::vector<Vec> roots;
    for (int i = 0; i < nseeds; ++i) {
        Vec x = rng.on_sphere(4);
        double res = detail::fiber_correct(map, y, x, 40);
        if (res < 0.0 || res > 1e-9) continue;
        bool fresh = true;
        for (const Vec& r : roots)
            if (dist2(r, x) < std::max(step, 1e-3)) fresh = false;
        if (fresh) roots.push_back(x);
    }
    auto on_existing = [&](const Vec& x) {
        for (const PolyCurve& c : out.curves)
            for (std::size_t i = 0; i < c.size(); ++i)
                if (segment_distance(x, x, c.vertices[i], c.vertices[(i + 1) % c.size()]) <
                    2.0 * step)
                    return true;
        return false;
    };
    for (const Vec& root : roots) {
        if (on_existing(root)) continue;
        PolyCurve curve;
        Vec x = root;
        double s2 = 0.0;
        Vec t = detail::fiber_tangent(map, x, s2);
        if (s2 < 1e-3) throw TracingError("fiber_trace: value is not regular (s2 < 1e-3)");
        if (!detail::tangent_is_positive(map, x, t)) t = -1.0 * t;
        double h = step;
        double travelled = 0.0;
        const double budget = 64.0;
        curve.vertices.push_back(x);
        while (true) {
            Vec xp = normalized(x + h * t);
            double res = detail::fiber_correct(map, y, xp, 8);
            if (res < 0.0 || res > 1e-9) {
                h *= 0.5;
                if (h < 1e-4) throw TracingError("fiber_trace: corrector diverged");
                continue;
            }
            double s2n = 0.0;
            Vec tn = detail::fiber_tangent(map, xp, s2n);
            if (s2n < 1e-3) throw TracingError("fiber_trace: value is not regular (s2 < 1e-3)");
            if (dot(tn, t) < 0.0) tn = -1.0 * tn;
            // curvature-adaptive: shrink on sharp turns, relax toward the cap
            double turn = dist2(tn, t);
            if (turn > 0.2) {
                h = std::max(1e-4, 0.5 * h);
            } else if (turn < 0.05) {
                h = std::min(step, 2.0 * h);
            }
            travelled += dist2(x, xp);
            x = xp;
            t = tn;
            out.min_s2 = std::min(out.min_s2, s2n);
            if (travelled > 3.0 * step && dist2(x, root) < step / 2.0) break;  // closed
            curve.vertices.push_back(x);
            if (travelled > budget)
                throw TracingError("fiber_trace: fiber failed to close within the length budget");
        }
        out.total_length += curve.length();
        out.curves.push_back(std::move(curve));
    }
    return out;
}

/// Stereographic projection of a curve on S³ to R³ from a coordinate pole
/// chosen away from all the given curves.
inline std::vector<PolyCurve> stereographic_project(const std::vector<PolyCurve>& curves,
                                                    double min_pole_gap = 0.2) {
    Vec pole;
    double best = -1.0;
    for (int axis = 0; axis < 4; ++axis)
        for (double sgn : {1.0, -1.0}) {
            Vec p(4, 0.0);
            p[static_cast<std::size_t>(axis)] = sgn;
            double gap = 1e300;
            for (const PolyCurve& c : curves)
                for (const Vec& v : c.vertices) gap = std::min(gap, dist2(p, v));
            if (gap > best) {
                best = gap;
                pole = p;
            }
        }
    if (best < min_pole_gap)
        throw TracingError("stereographic_project: no coordinate pole clears the curves");
    // orthonormal basis of the equatorial R³, right-handed with the pole so
    // projections from different poles give consistently signed linking
    std::vector<Vec> basis;
    for (int axis = 0; axis < 4; ++axis) {
        Vec e(4, 0.0);
        e[static_cast<std::size_t>(axis)] = 1.0;
        e = e - dot(e, pole) * pole;
        if (norm2(e) > 0.5) basis.push_back(normalized(e));
    }
    {
        Mat m(4, 4);
        for (int i = 0; i < 4; ++i) {
            for (int c = 0; c < 3; ++c) m(i, c) = basis[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
            m(i, 3) = pole[static_cast<std::size_t>(i)];
        }
        double det = 1.0;
        for (int c = 0; c < 4; ++c) {
            int piv = c;
            for (int r = c + 1; r < 4; ++r)
                if (std::fabs(m(r, c)) > std::fabs(m(piv, c))) piv = r;
            if (piv != c) {
                for (int k = 0; k < 4; ++k) std::swap(m(c, k), m(piv, k));
                det = -det;
            }
            if (m(c, c) == 0.0) { det = 0.0; break; }
            det *= m(c, c);
            for (int r = c + 1; r < 4; ++r) {
                double f = m(r, c) / m(c, c);
                for (int k = c; k < 4; ++k) m(r, k) -= f * m(c, k);
            }
        }
        if (det < 0.0) std::swap(basis[0], basis[1]);
    }
    std::vector<PolyCurve> out;
    for (const PolyCurve& c : curves) {
        PolyCurve pc;
        for (const Vec& v : c.vertices) {
            double denom = 1.0 - dot(v, pole);
            pc.vertices.push_back(
                Vec{dot(basis[0], v) / denom, dot(basis[1], v) / denom, dot(basis[2], v) / denom});
        }
        out.push_back(std::move(pc));
    }
    return out;
}

/// Hopf invariant of a map S³ → S²: the linking number of two traced regular
/// fibers after stereographic projection, required to agree across three
/// independent choices of the regular-value pair.
inline long long hopf_invariant(const MapSpec& map, std::uint64_t seed = 1, double step = 1e-2) {
    Rng rng(seed ^ 0xa0761d6478bd642fULL);
    std::vector<long long> values;
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < 15 && values.size() < 3; ++attempt) {
        Vec y1 = rng.on_sphere(3);
        Vec y2 = rng.on_sphere(3);
        if (dist2(y1, y2) < 0.8) continue;
        try {
            FiberTrace f1 = fiber_trace(map, y1, step, seed + 31 * attempt);
            FiberTrace f2 = fiber_trace(map, y2, step, seed + 31 * attempt + 7);
            if (f1.curves.empty() || f2.curves.empty()) {
                values.push_back(0);  // no fiber found: null-homotopic sample
                continue;
            }
            std::vector<PolyCurve> all = f1.curves;
            all.insert(all.end(), f2.curves.begin(), f2.curves.end());
            auto flat = stereographic_project(all);
            long long lk = 0;
            for (std::size_t i = 0; i < f1.curves.size(); ++i)
                for (std::size_t j = 0; j < f2.curves.size(); ++j)
                    lk += linking_number(flat[i], flat[f1.curves.size() + j]);
            values.push_back(lk);
        } catch (const TracingError& e) {
            last_error = e.what();
        } catch (const ProximityError& e) {
            last_error = e.what();
        }
    }
    if (values.size() < 3)
        throw TracingError("hopf_invariant: fewer than three usable regular-value pairs (" +
                           last_error + ")");
    if (values[0] != values[1] || values[1] != values[2])
        throw OracleMismatch("hopf_invariant: resampled values disagree");
    return values[0];
}

}  // namespace kdl

#endif  // KDL_FIBER_HPP
