#ifndef KDL_SQUEEZE_HPP
#define KDL_SQUEEZE_HPP

#include <cmath>
#include <numbers>

#include "retraction.hpp"

namespace kdl {

struct SqueezeParams {
    int n = 2, k = 2;
    double delta = 1.0 / 64.0;
    double W = 0.1;
    double r = 0.1;

    SqueezeParams(int n_, int k_, double delta_, double W_, double r_)
        : n(n_), k(k_), delta(delta_), W(W_), r(r_) {
        if (!(k_ >= 1 && k_ <= n_)) throw InvalidInput("SqueezeParams: need 1 <= k <= n");
        if (!(W_ > 0.0 && W_ < 0.5)) throw InvalidInput("SqueezeParams: need 0 < W < 1/2");
        if (!(r_ > 0.0 && r_ <= 0.1)) throw InvalidInput("SqueezeParams: need 0 < r <= 1/10");
        if (!(delta_ > 0.0 && delta_ <= r_ / (4.0 * std::sqrt(static_cast<double>(n_)))))
            throw InvalidInput("SqueezeParams: need 0 < delta <= r/(4 sqrt(n))");
    }

    double rho() const { return r / 4.0; }
};

namespace detail {

/// log chart of S^n at e_0: x -> v in R^n (tangent coordinates 1..n).
inline Vec sphere_log_e0(const Vec& x) {
    const int n = static_cast<int>(x.size()) - 1;
    Vec w(x.begin() + 1, x.end());
    double s = norm2(w);
    double theta = std::atan2(s, std::clamp(x[0], -1.0, 1.0));
    if (s < 1e-300) {
        Vec v(n, 0.0);
        if (x[0] < 0.0) v[0] = std::numbers::pi;  // antipode
        return v;
    }
    return (theta / s) * w;
}

/// Jacobian of sphere_log_e0, n rows by n+1 ambient columns.
inline Mat sphere_log_e0_jac(const Vec& x) {
    const int n = static_cast<int>(x.size()) - 1;
    Vec w(x.begin() + 1, x.end());
    double s = norm2(w);
    double c = x[0];
    double theta = std::atan2(s, std::clamp(c, -1.0, 1.0));
    Mat j(n, n + 1);
    if (s < 1e-12) {
        for (int i = 0; i < n; ++i) j(i, i + 1) = 1.0;
        return j;
    }
    double g = theta / s;
    double q = (c * s - theta) / (s * s);
    for (int i = 0; i < n; ++i) {
        j(i, 0) = -w[i];
        for (int jj = 0; jj < n; ++jj)
            j(i, jj + 1) = (i == jj ? g : 0.0) + q * w[i] * (w[jj] / s);
    }
    return j;
}

}  // namespace detail

/// Degree-1 map S^n -> S^n concentrating the k-dilation near the thick part
/// V_W: in the log chart at the antipode of the basepoint, rescale by delta,
/// apply the periodic retraction, and wrap a small ball of radius rho back
/// over the sphere, sending everything else to the basepoint.
struct SqueezeMap {
    SqueezeParams p;
    PeriodicRetraction retraction;
    Vec y0, q;  // chart center and basepoint (antipodes)

    explicit SqueezeMap(SqueezeParams params)
        : p(params), retraction(params.n, params.k, params.W),
          y0(params.n + 1, 0.0), q(params.n + 1, 0.0) {
        y0[0] = 1.0;
        q[0] = -1.0;
    }

    /// z -> sphere: wrap the ball of radius rho around S^n, |z| >= rho -> q.
    Vec wrap(const Vec& z) const {
        const int n = p.n;
        double rho = p.rho();
        double nz = norm2(z);
        if (nz >= rho) return q;
        double a = std::numbers::pi * nz / rho;
        Vec out(n + 1, 0.0);
        out[0] = std::cos(a);
        if (nz > 1e-300) {
            double s = std::sin(a) / nz;
            for (int i = 0; i < n; ++i) out[i + 1] = s * z[i];
        }
        return out;
    }

    Mat wrap_jac(const Vec& z) const {
        const int n = p.n;
        double rho = p.rho();
        double nz = norm2(z);
        Mat j(n + 1, n);
        if (nz >= rho) return j;  // constant region
        double c = std::numbers::pi / rho;
        if (nz < 1e-12) {
            for (int i = 0; i < n; ++i) j(i + 1, i) = c;
            return j;
        }
        double a = c * nz, sa = std::sin(a), ca = std::cos(a);
        for (int col = 0; col < n; ++col) {
            double zh = z[col] / nz;
            j(0, col) = -sa * c * zh;
            for (int row = 0; row < n; ++row) {
                double d = ca * c * (z[row] / nz) * zh;
                d += (sa / nz) * ((row == col ? 1.0 : 0.0) - (z[row] / nz) * zh);
                j(row + 1, col) = d;
            }
        }
        return j;
    }

    std::optional<Vec> chart(const Vec& x) const {
        Vec v = detail::sphere_log_e0(x);
        if (norm2(v) >= 3.0 * p.rho()) return std::nullopt;
        return v;
    }

    Vec eval(const Vec& x) const {
        auto v = chart(x);
        if (!v) return q;
        Vec z = (1.0 / p.delta) * *v;
        z = retraction.eval(z);
        return wrap(p.delta * z);
    }

    /// true when x lands (in the rescaled chart) within W of the lattice
    /// (n-k)-skeleton, i.e. inside the region where the map stays
    /// full-rank.
    bool in_thick_part(const Vec& x) const {
        auto v = chart(x);
        if (!v) return false;
        Vec y = (1.0 / p.delta) * *v;
        return retraction.skeleton_distance(y) < p.W;
    }

    /// Ambient Jacobian (n+1 rows, n+1 columns); composed analytically so
    /// the rank collapse off the thick part is exact.
    Mat jacobian(const Vec& x) const {
        const int n = p.n;
        auto v = chart(x);
        if (!v) return Mat(n + 1, n + 1);
        Mat jl = detail::sphere_log_e0_jac(x);
        Vec y = (1.0 / p.delta) * *v;
        Mat jr = retraction.jacobian(y);  // scale-free: d(delta R(v/delta)) = JR dv
        Vec z = p.delta * retraction.eval(y);
        Mat jw = wrap_jac(z);
        return jw * (jr * jl);
    }

    double nonsmooth_distance(const Vec& x) const {
        auto v = chart(x);
        double theta_seam = std::fabs(norm2(detail::sphere_log_e0(x)) - 3.0 * p.rho());
        if (!v) return theta_seam;
        Vec y = (1.0 / p.delta) * *v;
        double d = retraction.nonsmooth_distance(y) * p.delta;
        Vec z = p.delta * retraction.eval(y);
        d = std::min(d, std::fabs(norm2(z) - p.rho()));
        d = std::min(d, norm2(z));              // wrap axis
        d = std::min(d, norm2(*v));             // chart center
        return std::min(d, theta_seam);
    }
};

inline MapSpec squeeze_map(SqueezeParams params) {
    SqueezeMap s(params);
    MapSpec m;
    m.kind = "squeeze";
    m.params = {{"n", double(params.n)}, {"k", double(params.k)},
                {"delta", params.delta}, {"W", params.W}, {"r", params.r}};
    m.domain = ChartDesc::sphere_chart(params.n);
    m.target = ChartDesc::sphere_chart(params.n);
    m.eval = [s](const Vec& x) { return s.eval(x); };
    m.jac = [s](const Vec& x) { return s.jacobian(x); };
    m.nonsmooth_loci.push_back(
        {"squeeze seams", [s](const Vec& x) { return s.nonsmooth_distance(x); }});
    return m;
}

}  // namespace kdl

#endif  // KDL_SQUEEZE_HPP
