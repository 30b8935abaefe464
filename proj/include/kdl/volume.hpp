#ifndef KDL_VOLUME_HPP
#define KDL_VOLUME_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "chain.hpp"
#include "intersect.hpp"

namespace kdl {

namespace detail {

inline void subsets_of_size(int n, int d, std::vector<std::vector<int>>& out) {
    out.clear();
    std::vector<int> idx(d);
    std::function<void(int, int)> rec = [&](int start, int k) {
        if (k == d) {
            out.push_back(idx);
            return;
        }
        for (int i = start; i < n; ++i) {
            idx[k] = i;
            rec(i + 1, k + 1);
        }
    };
    rec(0, 0);
}

/// det of the rows `rows` of the n×d matrix e (d = |rows|)
inline double row_minor(const Mat& e, const std::vector<int>& rows) {
    const int d = static_cast<int>(rows.size());
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = e(rows[i], j);
    // LU determinant
    double det = 1.0;
    for (int c = 0; c < d; ++c) {
        int piv = c;
        for (int r = c + 1; r < d; ++r)
            if (std::fabs(m(r, c)) > std::fabs(m(piv, c))) piv = r;
        if (m(piv, c) == 0.0) return 0.0;
        if (piv != c) {
            for (int k = 0; k < d; ++k) std::swap(m(piv, k), m(c, k));
            det = -det;
        }
        det *= m(c, c);
        for (int r = c + 1; r < d; ++r) {
            double f = m(r, c) / m(c, c);
            for (int k = c; k < d; ++k) m(r, k) -= f * m(c, k);
        }
    }
    return det;
}

inline Mat edge_matrix(const std::vector<Vec>& pts) {
    const int n = static_cast<int>(pts[0].size());
    const int d = static_cast<int>(pts.size()) - 1;
    Mat e(n, d);
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < n; ++r) e(r, c) = pts[c + 1][r] - pts[0][r];
    return e;
}

/// sup over unit alpha, beta, gamma of |Σ T[i][j][k] a_i b_j c_k|.  For a
/// fixed gamma the optimum over (alpha, beta) is the top singular pair of
/// the contracted matrix, so alternating that exact step with the gamma
/// update converges to machine precision; deterministic restarts cover the
/// tiny general cases.
inline double trilinear_spectral_norm(const std::vector<std::vector<std::vector<double>>>& t) {
    const int na = static_cast<int>(t.size());
    const int nb = na ? static_cast<int>(t[0].size()) : 0;
    const int nc = nb ? static_cast<int>(t[0][0].size()) : 0;
    if (na == 0 || nb == 0 || nc == 0) return 0.0;
    double best = 0.0;
    for (int restart = 0; restart <= nc; ++restart) {
        Vec c(nc, 0.0);
        if (restart == 0)
            c.assign(nc, 1.0 / std::sqrt(static_cast<double>(nc)));
        else
            c[restart - 1] = 1.0;
        double val = 0.0;
        for (int it = 0; it < 300; ++it) {
            Mat m(na, nb);
            for (int i = 0; i < na; ++i)
                for (int j = 0; j < nb; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < nc; ++k) s += t[i][j][k] * c[k];
                    m(i, j) = s;
                }
            Svd dec = svd(m);
            double sigma = dec.s.empty() ? 0.0 : dec.s[0];
            if (sigma == 0.0) {
                val = 0.0;
                break;
            }
            Vec a(na), b(nb);
            for (int i = 0; i < na; ++i) a[i] = dec.u(i, 0);
            for (int j = 0; j < nb; ++j) b[j] = dec.v(j, 0);
            double nv = 0.0;
            for (int k = 0; k < nc; ++k) {
                c[k] = 0.0;
                for (int i = 0; i < na; ++i)
                    for (int j = 0; j < nb; ++j) c[k] += t[i][j][k] * a[i] * b[j];
                nv += c[k] * c[k];
            }
            nv = std::sqrt(nv);
            if (nv > 0.0)
                for (double& x : c) x /= nv;
            if (std::fabs(nv - val) < 1e-16 * std::max(1.0, nv)) {
                val = nv;
                break;
            }
            val = nv;
        }
        best = std::max(best, val);
    }
    return best;
}

}  // namespace detail

/// Directed volume of a PL chain: Σ_σ |projection Jacobian| · vol(σ).  The
/// tuple form projects onto the coordinates J; the split form takes the sup
/// over unit covolumes in each declared factor, per simplex.
inline double directed_volume(const PLChain& t, const DirectionIndex& dir) {
    if (t.empty()) return 0.0;
    if (dir.degree() != t.dim)
        throw InvalidInput("directed_volume: direction degree must match chain dimension");
    const int d = t.dim;
    double fact = 1.0;
    for (int i = 2; i <= d; ++i) fact *= i;
    double total = 0.0;
    if (!dir.split) {
        for (const auto& [key, pts] : t.simplices)
            total += std::fabs(detail::row_minor(detail::edge_matrix(pts), dir.J)) / fact;
        return total;
    }
    const int na = dir.factor_dims[0], nb = dir.factor_dims[1], nc = dir.factor_dims[2];
    if (na + nb + nc != t.ambient())
        throw InvalidInput("directed_volume: factor dimensions must sum to the ambient");
    std::vector<std::vector<int>> sa, sb, sc;
    detail::subsets_of_size(na, dir.abc[0], sa);
    detail::subsets_of_size(nb, dir.abc[1], sb);
    detail::subsets_of_size(nc, dir.abc[2], sc);
    for (const auto& [key, pts] : t.simplices) {
        Mat e = detail::edge_matrix(pts);
        // blocks occupy consecutive coordinates, so the concatenated index
        // tuple is already sorted and every wedge sign is +1
        std::vector<std::vector<std::vector<double>>> ten(
            sa.size(), std::vector<std::vector<double>>(sb.size(), std::vector<double>(sc.size())));
        for (std::size_t i = 0; i < sa.size(); ++i)
            for (std::size_t j = 0; j < sb.size(); ++j)
                for (std::size_t k = 0; k < sc.size(); ++k) {
                    std::vector<int> rows = sa[i];
                    for (int r : sb[j]) rows.push_back(na + r);
                    for (int r : sc[k]) rows.push_back(na + nb + r);
                    ten[i][j][k] = detail::row_minor(e, rows);
                }
        total += detail::trilinear_spectral_norm(ten) / fact;
    }
    return total;
}

inline double directed_volume(const CubicalChain& t, const DirectionIndex& dir) {
    return directed_volume(as_pl(t), dir);
}

/// Plain d-volume (mass) of a PL chain.
inline double chain_volume(const PLChain& t) {
    double total = 0.0;
    for (const auto& [key, pts] : t.simplices) total += PLChain::simplex_volume(pts);
    return total;
}

/// Uniform point sample of a chain (vertices plus interior subdivisions).
inline std::vector<Vec> sample_chain(const PLChain& t, int per_simplex) {
    std::vector<Vec> out;
    for (const auto& [key, pts] : t.simplices) {
        if (t.dim == 0) {
            out.push_back(pts[0]);
        } else if (t.dim == 1) {
            for (int i = 0; i <= per_simplex; ++i) {
                double u = static_cast<double>(i) / per_simplex;
                out.push_back(pts[0] + u * (pts[1] - pts[0]));
            }
        } else if (t.dim == 2) {
            for (int i = 0; i <= per_simplex; ++i)
                for (int j = 0; i + j <= per_simplex; ++j) {
                    double u = static_cast<double>(i) / per_simplex;
                    double v = static_cast<double>(j) / per_simplex;
                    out.push_back(pts[0] + u * (pts[1] - pts[0]) + v * (pts[2] - pts[0]));
                }
        } else {
            throw InvalidInput("sample_chain: dimensions 0..2 only");
        }
    }
    return out;
}

struct CoverParams {
    int ladder_size = 14;  // radii diam·2^{-i}, i = 0..ladder_size-1
    int greedy_passes = 2; // 1: max-coverage; 2: also farthest-point sweep
};

struct CoverResult {
    double bound = 0.0;
    std::vector<Ball> balls;
};

/// Greedy upper bound on the d-dimensional Hausdorff content of a point
/// sample: Σ radius^d over a cover chosen from a fixed radius ladder.
inline CoverResult hausdorff_content(const std::vector<Vec>& pts, int d,
                                     const CoverParams& params = {}) {
    CoverResult out;
    if (pts.empty()) return out;
    double diam = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) diam = std::max(diam, dist2(pts[i], pts[j]));
    if (diam == 0.0) {
        out.balls.push_back({pts[0], 0.0});
        return out;  // a single point has zero content
    }
    out.bound = 1e300;
    // The max-coverage pass costs O(|pts|^2) per chosen ball; on large samples
    // only the linear farthest-point sweep is attempted.
    const int first_pass = pts.size() > 600 && params.greedy_passes > 1 ? 1 : 0;
    for (int lvl = 0; lvl < params.ladder_size; ++lvl) {
        double r = diam * std::pow(2.0, -lvl);
        std::size_t fewest = pts.size();
        for (int pass = first_pass; pass < std::max(1, params.greedy_passes); ++pass) {
            std::vector<bool> covered(pts.size(), false);
            std::vector<Ball> balls;
            std::size_t left = pts.size();
            std::size_t cursor = 0;
            while (left > 0) {
                std::size_t pick = 0;
                if (pass == 0) {
                    // max-coverage greedy
                    int best = -1;
                    for (std::size_t i = 0; i < pts.size(); ++i) {
                        int cnt = 0;
                        for (std::size_t j = 0; j < pts.size(); ++j)
                            if (!covered[j] && dist2(pts[i], pts[j]) <= r) ++cnt;
                        if (cnt > best) {
                            best = cnt;
                            pick = i;
                        }
                    }
                } else {
                    // farthest-point sweep: next uncovered point becomes a center
                    while (covered[cursor]) ++cursor;
                    pick = cursor;
                }
                balls.push_back({pts[pick], r});
                for (std::size_t j = 0; j < pts.size(); ++j)
                    if (!covered[j] && dist2(pts[pick], pts[j]) <= r) {
                        covered[j] = true;
                        --left;
                    }
            }
            double cost = static_cast<double>(balls.size()) * std::pow(r, d);
            fewest = std::min(fewest, balls.size());
            if (cost < out.bound) {
                out.bound = cost;
                out.balls = std::move(balls);
            }
        }
        // Once every ball covers a single sample point, finer radii say
        // nothing about the underlying set; stop descending the ladder.
        if (fewest >= pts.size()) break;
    }
    return out;
}

inline CoverResult hausdorff_content(const PLChain& t, int d, int sample_density = 8,
                                     const CoverParams& params = {}) {
    return hausdorff_content(sample_chain(t, sample_density), d, params);
}

namespace detail {

/// Signed area of disk(origin, r) ∩ triangle(origin, a, b) in the plane.
inline double disk_edge_area(double ax, double ay, double bx, double by, double r) {
    auto cross = [](double ux, double uy, double vx, double vy) { return ux * vy - uy * vx; };
    // split the segment a→b at its circle crossings
    double dx = bx - ax, dy = by - ay;
    double qa = dx * dx + dy * dy;
    std::vector<double> ts{0.0, 1.0};
    if (qa > 0.0) {
        double qb = 2.0 * (ax * dx + ay * dy);
        double qc = ax * ax + ay * ay - r * r;
        double disc = qb * qb - 4.0 * qa * qc;
        if (disc > 0.0) {
            double sq = std::sqrt(disc);
            for (double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)})
                if (t > 1e-12 && t < 1.0 - 1e-12) ts.push_back(t);
        }
    }
    std::sort(ts.begin(), ts.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        double t0 = ts[i], t1 = ts[i + 1];
        double ux = ax + t0 * dx, uy = ay + t0 * dy;
        double vx = ax + t1 * dx, vy = ay + t1 * dy;
        double mx = ax + 0.5 * (t0 + t1) * dx, my = ay + 0.5 * (t0 + t1) * dy;
        if (mx * mx + my * my <= r * r) {
            area += cross(ux, uy, vx, vy) / 2.0;  // straight piece inside
        } else {
            double ang = std::atan2(cross(ux, uy, vx, vy), ux * vx + uy * vy);
            area += r * r * ang / 2.0;  // replaced by the circular arc
        }
    }
    return area;
}

/// Exact volume of chain ∩ ball: segment clipping for 1-chains, planar
/// triangle–disk intersection for 2-chains.
inline double clipped_volume(const PLChain& y, const Ball& b) {
    double total = 0.0;
    for (const auto& [key, pts] : y.simplices) {
        if (y.dim == 1) {
            Vec d = pts[1] - pts[0];
            Vec w = pts[0] - b.center;
            double qa = dot(d, d);
            if (qa == 0.0) continue;
            double qb = 2.0 * dot(w, d);
            double qc = dot(w, w) - b.radius * b.radius;
            double disc = qb * qb - 4.0 * qa * qc;
            if (disc <= 0.0) continue;
            double sq = std::sqrt(disc);
            double t0 = std::clamp((-qb - sq) / (2.0 * qa), 0.0, 1.0);
            double t1 = std::clamp((-qb + sq) / (2.0 * qa), 0.0, 1.0);
            total += (t1 - t0) * std::sqrt(qa);
        } else if (y.dim == 2) {
            // orthonormal frame of the triangle plane
            Vec e1 = pts[1] - pts[0];
            Vec e2 = pts[2] - pts[0];
            double n1 = norm2(e1);
            if (n1 == 0.0) continue;
            Vec u = (1.0 / n1) * e1;
            Vec f2 = e2 - dot(e2, u) * u;
            double n2 = norm2(f2);
            if (n2 == 0.0) continue;
            Vec v = (1.0 / n2) * f2;
            Vec w = b.center - pts[0];
            double cx = dot(w, u), cy = dot(w, v);
            double h2 = dot(w, w) - cx * cx - cy * cy;  // squared distance to plane
            if (h2 >= b.radius * b.radius) continue;
            double rho = std::sqrt(b.radius * b.radius - h2);
            // triangle vertices in plane coordinates, re-centered on the disk
            double x0 = -cx, y0 = -cy;
            double x1 = dot(e1, u) - cx, y1 = -cy;
            double x2 = dot(e2, u) - cx, y2 = dot(e2, v) - cy;
            double a = disk_edge_area(x0, y0, x1, y1, rho) + disk_edge_area(x1, y1, x2, y2, rho) +
                       disk_edge_area(x2, y2, x0, y0, rho);
            total += std::fabs(a);
        } else {
            throw InvalidInput("thick_region: chain dimensions 1 and 2 only");
        }
    }
    return total;
}

}  // namespace detail

/// Is Vol(y ∩ B) ≥ α R^n, n = dim(y)?
inline bool thick_region(const PLChain& y, double alpha, const Ball& b) {
    if (alpha <= 0.0) throw InvalidInput("thick_region: alpha must be positive");
    return detail::clipped_volume(y, b) >= alpha * std::pow(b.radius, y.dim);
}

/// Vitali-style cover of the α-thick part: a maximal disjoint family of
/// thick balls, returned 5×-dilated.  Disjointness gives
/// Σ radiusⁿ ≤ 5ⁿ α⁻¹ Vol(y) automatically.
inline std::vector<Ball> thick_cover(const PLChain& y, double alpha, int ladder_size = 12,
                                     int sample_density = 6) {
    if (alpha <= 0.0) throw InvalidInput("thick_cover: alpha must be positive");
    std::vector<Ball> chosen;
    if (y.empty()) return chosen;
    std::vector<Vec> centers = sample_chain(y, sample_density);
    Vec lo, hi;
    y.bounding_box(lo, hi);
    double diam = 0.0;
    for (std::size_t i = 0; i < lo.size(); ++i) diam += (hi[i] - lo[i]) * (hi[i] - lo[i]);
    diam = std::max(std::sqrt(diam), 1e-12);
    for (int lvl = 0; lvl < ladder_size; ++lvl) {
        double r = diam * std::pow(2.0, -lvl);
        for (const Vec& c : centers) {
            bool disjoint = true;
            for (const Ball& b : chosen)
                if (dist2(c, b.center) < r + b.radius) {
                    disjoint = false;
                    break;
                }
            if (!disjoint) continue;
            Ball cand{c, r};
            if (thick_region(y, alpha, cand)) chosen.push_back(cand);
        }
    }
    for (Ball& b : chosen) b.radius *= 5.0;
    return chosen;
}

struct PerpendicularReport {
    bool ok = true;
    std::vector<int> witness;  // failing tuple J, if any
    double worst = 0.0;        // max over J of min(Vol_J(z), Vol_J(w))
};

/// z and w are perpendicular at tolerance τ if for every coordinate tuple J
/// at least one of them has negligible J-directed volume.
inline PerpendicularReport perpendicular_check(const PLChain& z, const PLChain& w, double tau) {
    if (z.dim != w.dim) throw InvalidInput("perpendicular_check: chains must share dimension");
    const int n = std::max(z.ambient(), w.ambient());
    std::vector<std::vector<int>> subs;
    detail::subsets_of_size(n, z.dim, subs);
    PerpendicularReport rep;
    for (const auto& j : subs) {
        DirectionIndex dir = DirectionIndex::tuple(j);
        double m = std::min(directed_volume(z, dir), directed_volume(w, dir));
        if (m > rep.worst) {
            rep.worst = m;
            if (m > tau) {
                rep.ok = false;
                rep.witness = j;
            }
        }
    }
    return rep;
}

}  // namespace kdl

#endif  // KDL_VOLUME_HPP
