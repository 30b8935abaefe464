#ifndef KDL_MAPS_BASIC_HPP
#define KDL_MAPS_BASIC_HPP

#include <cmath>
#include <numbers>

#include "mapspec.hpp"

namespace kdl {

namespace detail {

/// c in [-1,1]^p -> (max-norm radius t, euclidean unit direction u).
inline void cube_polar(const Vec& c, double& t, Vec& u) {
    t = 0.0;
    for (double x : c) t = std::max(t, std::fabs(x));
    double n = norm2(c);
    if (n < 1e-14) {
        u = Vec(c.size(), 0.0);
        u[0] = 1.0;
    } else {
        u = (1.0 / n) * c;
    }
}

inline double second_largest_abs(const Vec& c) {
    double m1 = -1.0, m2 = -1.0;
    for (double x : c) {
        double a = std::fabs(x);
        if (a > m1) m2 = m1, m1 = a;
        else if (a > m2) m2 = a;
    }
    return m2;
}

}  // namespace detail

/// Degree-1 collapse [0,1]^p -> S^p: boundary to the basepoint (-1,0,...,0),
/// center to its antipode.  Radial in the max-norm.
inline MapSpec cube_to_sphere(int p) {
    if (p < 1) throw InvalidInput("cube_to_sphere: p >= 1 required");
    MapSpec m;
    m.kind = "cube_to_sphere";
    m.params["p"] = p;
    m.domain = ChartDesc::rectangle_chart(std::vector<double>(p, 1.0));
    m.target = ChartDesc::sphere_chart(p);
    m.lipschitz_bound = 2.0 * std::numbers::pi * std::sqrt(static_cast<double>(p));
    m.eval = [p](const Vec& x) {
        Vec c(p);
        for (int i = 0; i < p; ++i) c[i] = 2.0 * x[i] - 1.0;
        double t;
        Vec u;
        detail::cube_polar(c, t, u);
        Vec out(p + 1);
        out[0] = std::cos(std::numbers::pi * t);
        double s = std::sin(std::numbers::pi * t);
        for (int i = 0; i < p; ++i) out[i + 1] = s * u[i];
        return out;
    };
    if (p >= 2) {
        m.nonsmooth_loci.push_back(
            {"max-norm ridge", [p](const Vec& x) {
                 Vec c(p);
                 for (int i = 0; i < p; ++i) c[i] = 2.0 * x[i] - 1.0;
                 double t;
                 Vec u;
                 detail::cube_polar(c, t, u);
                 return (t - detail::second_largest_abs(c)) / 4.0;
             }});
    }
    m.nonsmooth_loci.push_back({"center", [p](const Vec& x) {
                                    Vec c(p);
                                    for (int i = 0; i < p; ++i) c[i] = 2.0 * x[i] - 1.0;
                                    return norm2(c) / 2.0;
                                }});
    return m;
}

/// Inverse of cube_to_sphere on the sphere minus the basepoint; basepoint maps
/// to a boundary point of the cube.
inline Vec cube_to_sphere_inverse(int p, const Vec& y) {
    double y0 = std::clamp(y[0], -1.0, 1.0);
    double t = std::acos(y0) / std::numbers::pi;
    Vec c(p, 0.0);
    if (t > 1e-12) {
        Vec u(y.begin() + 1, y.end());
        double un = norm2(u);
        if (un < 1e-14) {
            u = Vec(p, 0.0);
            u[0] = 1.0;
        } else {
            u = (1.0 / un) * u;
        }
        double uinf = 0.0;
        for (double v : u) uinf = std::max(uinf, std::fabs(v));
        c = (t / uinf) * u;
    }
    Vec x(p);
    for (int i = 0; i < p; ++i) x[i] = (c[i] + 1.0) / 2.0;
    return x;
}

/// Hopf map S^3 -> S^2 in complex coordinates (z1,z2) -> (2 z1 conj(z2), |z1|^2-|z2|^2).
inline MapSpec hopf_map() {
    MapSpec m;
    m.kind = "hopf";
    m.domain = ChartDesc::sphere_chart(3);
    m.target = ChartDesc::sphere_chart(2);
    m.lipschitz_bound = 2.0;
    m.eval = [](const Vec& x) {
        double a = x[0], b = x[1], c = x[2], d = x[3];
        return Vec{2.0 * (a * c + b * d), 2.0 * (b * c - a * d),
                   a * a + b * b - c * c - d * d};
    };
    m.jac = [](const Vec& x) {
        double a = x[0], b = x[1], c = x[2], d = x[3];
        Mat j(3, 4);
        j(0, 0) = 2 * c; j(0, 1) = 2 * d; j(0, 2) = 2 * a; j(0, 3) = 2 * b;
        j(1, 0) = -2 * d; j(1, 1) = 2 * c; j(1, 2) = 2 * b; j(1, 3) = -2 * a;
        j(2, 0) = 2 * a; j(2, 1) = 2 * b; j(2, 2) = -2 * c; j(2, 3) = -2 * d;
        return j;
    };
    return m;
}

/// Degree-d self-map of S^3: (z1,z2) -> (z1^d / |z1|^{d-1}, z2).
inline MapSpec sphere3_degree_map(int d) {
    MapSpec m;
    m.kind = "composite";
    m.params["degree"] = d;
    m.domain = ChartDesc::sphere_chart(3);
    m.target = ChartDesc::sphere_chart(3);
    m.eval = [d](const Vec& x) {
        double r = std::hypot(x[0], x[1]);
        Vec out = x;
        if (r > 1e-300) {
            double th = std::atan2(x[1], x[0]) * d;
            out[0] = r * std::cos(th);
            out[1] = r * std::sin(th);
        }
        return out;
    };
    m.nonsmooth_loci.push_back(
        {"z1 = 0 circle", [](const Vec& x) { return std::hypot(x[0], x[1]); }});
    return m;
}

/// Smash map S^q x S^r -> S^{q+r}: collapse the wedge to the basepoint; built
/// from cube quotients of both factors and one cube_to_sphere on the product.
inline MapSpec smash_map(int q, int r) {
    if (q < 1 || r < 1) throw InvalidInput("smash_map: q,r >= 1 required");
    MapSpec m;
    m.kind = "smash";
    m.params["q"] = q;
    m.params["r"] = r;
    m.domain = ChartDesc::sphere_product_chart(q, r);
    m.target = ChartDesc::sphere_chart(q + r);
    MapSpec cts = cube_to_sphere(q + r);
    auto cts_eval = cts.eval;
    m.lipschitz_bound = *cts.lipschitz_bound * 2.0;
    m.eval = [q, r, cts_eval](const Vec& x) {
        Vec yq(x.begin(), x.begin() + q + 1);
        Vec yr(x.begin() + q + 1, x.end());
        Vec cq = cube_to_sphere_inverse(q, yq);
        Vec cr = cube_to_sphere_inverse(r, yr);
        cq.insert(cq.end(), cr.begin(), cr.end());
        return cts_eval(cq);
    };
    auto factor_locus = [](int p, int off, const Vec& x) {
        Vec y(x.begin() + off, x.begin() + off + p + 1);
        double t = std::acos(std::clamp(y[0], -1.0, 1.0)) / std::numbers::pi;
        Vec c = cube_to_sphere_inverse(p, y);
        for (double& v : c) v = 2.0 * v - 1.0;
        double ridge = p >= 2 ? (t - detail::second_largest_abs(c)) / 4.0 : 1e300;
        // wedge (t near 1), antipode (t near 0), max-norm ridge of the factor
        return 0.3 * std::min({1.0 - t, t, ridge});
    };
    m.nonsmooth_loci.push_back(
        {"first-factor seams", [q, factor_locus](const Vec& x) { return factor_locus(q, 0, x); }});
    m.nonsmooth_loci.push_back(
        {"second-factor seams",
         [q, r, factor_locus](const Vec& x) { return factor_locus(r, q + 1, x); }});
    return m;
}

inline MapSpec linear_map(const Mat& a, std::vector<double> box) {
    MapSpec m;
    m.kind = "linear";
    m.domain = ChartDesc::rectangle_chart(std::move(box));
    m.target = ChartDesc::euclidean_chart(std::vector<double>(a.rows, 1.0));
    Mat acopy = a;
    m.eval = [acopy](const Vec& x) { return acopy * x; };
    m.jac = [acopy](const Vec&) { return acopy; };
    m.lipschitz_bound = singular_values(a).empty() ? 0.0 : singular_values(a)[0];
    return m;
}

inline MapSpec constant_map(ChartDesc domain, Vec value) {
    MapSpec m;
    m.kind = "constant";
    m.domain = std::move(domain);
    m.target = ChartDesc::euclidean_chart(std::vector<double>(value.size(), 1.0));
    int da = m.domain.ambient_dim();
    Vec v = std::move(value);
    m.eval = [v](const Vec&) { return v; };
    m.jac = [v, da](const Vec&) { return Mat(static_cast<int>(v.size()), da); };
    m.lipschitz_bound = 0.0;
    return m;
}

/// Mod-2 preimage count of y: grid + random search, Gauss-Newton polish in
/// tangent frames, cluster and count.  Used for degree checks.
inline int preimage_count_mod2(const MapSpec& map, const Vec& y, long density,
                               std::uint64_t seed, double cluster_tol = 1e-4) {
    Rng rng(seed);
    std::vector<Vec> roots;
    double fit_tol = 1e-9;
    for (long i = 0; i < density; ++i) {
        Vec x = map.domain.sample(rng);
        // Gauss-Newton on |F(x)-y|^2 in tangent frames
        bool ok = true;
        for (int it = 0; it < 60; ++it) {
            Vec res = map.eval(x) - y;
            double rn = norm2(res);
            if (rn < fit_tol) break;
            Mat j;
            try {
                j = finite_difference_jacobian(map, x, 1e-6);
            } catch (const BoundaryProximity&) {
                ok = false;
                break;
            }
            auto frame = tangent_frame(map.domain, x);
            // solve (J^T J) d = -J^T res_in_target_frames
            Vec res_f;
            if (map.target.kind == ChartDesc::Kind::sphere) {
                auto tf = tangent_frame(map.target, map.eval(x));
                res_f.resize(tf.size());
                for (std::size_t t = 0; t < tf.size(); ++t) res_f[t] = dot(tf[t], res);
            } else {
                res_f = res;
            }
            Mat jt = transpose(j);
            Mat jtj = jt * j;
            for (int dgi = 0; dgi < jtj.rows; ++dgi) jtj(dgi, dgi) += 1e-12;
            Vec rhs = jt * res_f;
            auto sol = solve(jtj, rhs, 1e-14);
            if (!sol) {
                ok = false;
                break;
            }
            double stepn = norm2(*sol);
            double cap = 0.2;
            double fac = stepn > cap ? cap / stepn : 1.0;
            for (std::size_t c = 0; c < frame.size(); ++c)
                x = chart_step(map.domain, x, frame[c], -fac * (*sol)[c]);
            if (it == 59) ok = false;
        }
        if (!ok) continue;
        if (norm2(map.eval(x) - y) > 10 * fit_tol) continue;
        bool dup = false;
        for (const Vec& r : roots) dup = dup || dist2(r, x) < cluster_tol;
        if (!dup) roots.push_back(x);
    }
    return static_cast<int>(roots.size() % 2);
}

}  // namespace kdl

#endif  // KDL_MAPS_BASIC_HPP
