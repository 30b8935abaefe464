#ifndef KDL_RETRACTION_HPP
#define KDL_RETRACTION_HPP

#include <cmath>
#include <vector>

#include "mapspec.hpp"

namespace kdl {

/// Blended radial retraction of R^n, periodic under integer translations.
/// Let S be the (n-k)-skeleton of the unit lattice (>= k integer
/// coordinates) and D the dual (k-1)-skeleton (>= n-k+1 coordinates in
/// Z + 1/2).  Points within W/2 of S are fixed; points farther than W from S
/// are pushed onto D by a radial-projection cascade in the lattice cells
/// centered at integer points; a smoothstep blends in between.  The cascade
/// is singular only where the blend vanishes, so the map is continuous.
struct PeriodicRetraction {
    int n = 2, k = 2;
    double W = 0.1;

    PeriodicRetraction(int n_, int k_, double W_) : n(n_), k(k_), W(W_) {
        if (!(k_ >= 1 && k_ <= n_)) throw InvalidInput("PeriodicRetraction: need 1 <= k <= n");
        if (!(W_ > 0.0 && W_ < 0.5)) throw InvalidInput("PeriodicRetraction: need 0 < W < 1/2");
    }

    // u = y - 1/2; a coordinate is "snapped" when u is an integer, i.e. the
    // original coordinate sits exactly on the dual lattice Z + 1/2.
    static bool snapped(double u) { return u == std::round(u); }

    /// l2 norm of the k smallest coordinate distances to the integers.
    double skeleton_distance(const Vec& y) const {
        std::vector<double> f(n);
        for (int i = 0; i < n; ++i) f[i] = std::fabs(y[i] - std::round(y[i]));
        std::sort(f.begin(), f.end());
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += f[i] * f[i];
        return std::sqrt(s);
    }

    bool on_dual_skeleton(const Vec& y, double tol = 1e-9) const {
        int c = 0;
        for (int i = 0; i < n; ++i) {
            double u = y[i] - 0.5;
            if (std::fabs(u - std::round(u)) <= tol) ++c;
        }
        return c >= n - k + 1;
    }

    /// Radial-projection cascade: in u = y - 1/2 coordinates, repeatedly
    /// push the free coordinates of the current cell from its center to the
    /// boundary, snapping the extremal ones exactly, until at most k-1
    /// coordinates remain free.
    Vec project(const Vec& y, Mat* jac_out = nullptr) const {
        Vec u(n);
        for (int i = 0; i < n; ++i) u[i] = y[i] - 0.5;
        Mat acc;
        if (jac_out) acc = Mat::identity(n);
        for (int guard = 0; guard <= n; ++guard) {
            std::vector<int> free_ix;
            for (int i = 0; i < n; ++i)
                if (!snapped(u[i])) free_ix.push_back(i);
            if (static_cast<int>(free_ix.size()) <= k - 1) break;

            std::vector<double> c(free_ix.size()), w(free_ix.size());
            for (std::size_t a = 0; a < free_ix.size(); ++a) {
                c[a] = std::floor(u[free_ix[a]]) + 0.5;
                w[a] = u[free_ix[a]] - c[a];
            }
            double m = 0.0;
            std::size_t am = 0;
            for (std::size_t a = 0; a < w.size(); ++a)
                if (std::fabs(w[a]) > m) { m = std::fabs(w[a]); am = a; }
            if (m < 1e-12) {
                // dead center of a cell: nudge toward its smallest vertex
                for (double& wa : w) wa = -1e-9;
                m = 1e-9;
                am = 0;
            }
            if (jac_out) {
                Mat stage = Mat::identity(n);
                double s_am = w[am] >= 0.0 ? 1.0 : -1.0;
                for (std::size_t a = 0; a < free_ix.size(); ++a)
                    for (std::size_t b = 0; b < free_ix.size(); ++b) {
                        double d;
                        if (std::fabs(w[a]) == m) {
                            d = 0.0;  // snapped exactly: constant row
                        } else {
                            d = (a == b ? 1.0 / (2.0 * m) : 0.0);
                            if (b == am) d -= w[a] * s_am / (2.0 * m * m);
                        }
                        stage(free_ix[a], free_ix[b]) = d;
                    }
                acc = stage * acc;
            }
            for (std::size_t a = 0; a < free_ix.size(); ++a) {
                if (std::fabs(w[a]) == m)
                    u[free_ix[a]] = c[a] + (w[a] >= 0.0 ? 0.5 : -0.5);  // exact snap
                else
                    u[free_ix[a]] = c[a] + w[a] / (2.0 * m);
            }
        }
        Vec out(n);
        for (int i = 0; i < n; ++i) out[i] = u[i] + 0.5;
        if (jac_out) *jac_out = acc;
        return out;
    }

    static double smoothstep(double t) {
        t = std::clamp(t, 0.0, 1.0);
        return t * t * (3.0 - 2.0 * t);
    }

    double chi(double d) const { return smoothstep((d - W / 2.0) / (W / 2.0)); }

    Vec eval(const Vec& y) const {
        double x = chi(skeleton_distance(y));
        if (x == 0.0) return y;
        Vec p = project(y);
        Vec out(n);
        for (int i = 0; i < n; ++i) out[i] = y[i] + x * (p[i] - y[i]);
        return out;
    }

    Mat jacobian(const Vec& y) const {
        double d = skeleton_distance(y);
        double x = chi(d);
        if (x == 0.0) return Mat::identity(n);
        Mat jp;
        Vec p = project(y, &jp);

        // gradient of the skeleton distance: the k coordinates closest to
        // the integers contribute their signed fractional parts
        Vec grad(n, 0.0);
        if (d > 1e-300) {
            std::vector<std::pair<double, int>> f(n);
            for (int i = 0; i < n; ++i)
                f[i] = {std::fabs(y[i] - std::round(y[i])), i};
            std::sort(f.begin(), f.end());
            for (int a = 0; a < k; ++a) {
                int i = f[a].second;
                grad[i] = (y[i] - std::round(y[i])) / d;
            }
        }
        double t = (d - W / 2.0) / (W / 2.0);
        double dchi = 0.0;
        if (t > 0.0 && t < 1.0) dchi = 6.0 * t * (1.0 - t) * (2.0 / W);

        Mat j(n, n);
        for (int i = 0; i < n; ++i)
            for (int jx = 0; jx < n; ++jx) {
                double v = (i == jx ? 1.0 : 0.0);
                v += (p[i] - y[i]) * dchi * grad[jx];
                v += x * (jp(i, jx) - (i == jx ? 1.0 : 0.0));
                j(i, jx) = v;
            }
        return j;
    }

    /// Conservative distance to the nonsmooth set: argmax ties and
    /// near-center degeneracies along the cascade, plus the blend band edges
    /// and the sorting ties of the skeleton distance.
    double nonsmooth_distance(const Vec& y0) const {
        double d = skeleton_distance(y0);
        double best = std::min(std::fabs(d - W / 2.0), std::fabs(d - W));
        {
            std::vector<double> f(n);
            for (int i = 0; i < n; ++i) f[i] = std::fabs(y0[i] - std::round(y0[i]));
            std::sort(f.begin(), f.end());
            if (k < n) best = std::min(best, (f[k] - f[k - 1]) / 2.0);
        }
        Vec u(n);
        for (int i = 0; i < n; ++i) u[i] = y0[i] - 0.5;
        for (int guard = 0; guard <= n; ++guard) {
            std::vector<int> free_ix;
            for (int i = 0; i < n; ++i)
                if (!snapped(u[i])) free_ix.push_back(i);
            if (static_cast<int>(free_ix.size()) <= k - 1) break;
            std::vector<double> w(free_ix.size());
            double m = 0.0, second = 0.0;
            for (std::size_t a = 0; a < free_ix.size(); ++a) {
                double c = std::floor(u[free_ix[a]]) + 0.5;
                w[a] = u[free_ix[a]] - c;
                double aw = std::fabs(w[a]);
                if (aw > m) { second = m; m = aw; }
                else if (aw > second) second = aw;
            }
            best = std::min(best, m);
            if (free_ix.size() >= 2) best = std::min(best, (m - second) / 2.0);
            if (m < 1e-12) break;
            for (std::size_t a = 0; a < free_ix.size(); ++a) {
                double c = std::floor(u[free_ix[a]]) + 0.5;
                if (std::fabs(w[a]) == m)
                    u[free_ix[a]] = c + (w[a] >= 0.0 ? 0.5 : -0.5);
                else
                    u[free_ix[a]] = c + w[a] / (2.0 * m);
            }
        }
        return best;
    }
};

inline MapSpec periodic_retraction(int n, int k, double W) {
    PeriodicRetraction r(n, k, W);
    MapSpec m;
    m.kind = "periodic_retraction";
    m.params = {{"n", double(n)}, {"k", double(k)}, {"W", W}};
    m.domain = ChartDesc::euclidean_chart(std::vector<double>(n, 2.0));
    m.target = ChartDesc::euclidean_chart(std::vector<double>(n, 2.0));
    m.eval = [r](const Vec& y) { return r.eval(y); };
    m.jac = [r](const Vec& y) { return r.jacobian(y); };
    m.nonsmooth_loci.push_back(
        {"cascade seams", [r](const Vec& y) { return r.nonsmooth_distance(y); }});
    return m;
}

}  // namespace kdl

#endif  // KDL_RETRACTION_HPP
