#ifndef KDL_GRIDS_HPP
#define KDL_GRIDS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "chain.hpp"
#include "deform.hpp"
#include "problemma.hpp"
#include "volume.hpp"

namespace kdl {

/// A grid is a union of coordinate hyperplanes; we store, per axis, the
/// sorted hyperplane coordinates inside the working window.
struct Grid {
    std::vector<std::vector<double>> coords;

    double max_spacing() const {
        double worst = 0.0;
        for (const auto& c : coords)
            for (std::size_t k = 0; k + 1 < c.size(); ++k)
                worst = std::max(worst, c[k + 1] - c[k]);
        return worst;
    }
};

/// Perturbation lookup: key {scale index, vertex anchor..., axis j, line m}
/// -> p(j,m) in [-1/4, 1/4].
using PerturbLookup = std::function<double(const std::vector<long long>&)>;

/// Scale bookkeeping for the per-vertex grids G_i(v): hyperplanes
/// x_j = pitch_i * (m + p_{i,v}(j,m)) in a window around each dual vertex.
struct GridGeometry {
    int ambient = 3;
    std::vector<double> scales;       // s_i = 2^i * s_0
    double pitch_divisor = 4.0;       // pitch_i = s_i / pitch_divisor
    double window_factor = 1.5;       // coord window half-width, units of s_i
    double comb_radius_factor = 0.55; // combined-grid vertex radius, units of s_i
    int levels = 8;                   // discrete perturbation levels
    std::uint64_t salt = 0x517cc1b727220a95ULL;

    double pitch(int i) const { return scales[static_cast<std::size_t>(i)] / pitch_divisor; }
    double spacing_bound(int i) const { return 1.5 * pitch(i); }

    /// Discrete perturbation values: odd multiples of 1/(8*levels), chosen
    /// asymmetric around zero, so grid hyperplanes never coincide with the
    /// cubical lattice and no two hyperplanes sit exactly symmetric about a
    /// lattice plane (midpoints of grid coordinates miss the lattice too).
    double level_value(int k) const {
        return (4.0 * k - 2.0 * levels + 3.0) / (8.0 * static_cast<double>(levels));
    }

    static std::vector<long long> perturb_key(int i, const std::vector<long long>& anchor, int j,
                                              long long m) {
        std::vector<long long> key;
        key.reserve(anchor.size() + 3);
        key.push_back(i);
        for (long long a : anchor) key.push_back(a);
        key.push_back(j);
        key.push_back(m);
        return key;
    }

    int default_level(const std::vector<long long>& key) const {
        std::uint64_t h = salt;
        for (long long v : key)
            h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        Rng r(h);
        return static_cast<int>(r.below(static_cast<std::uint64_t>(levels)));
    }

    void line_range(int i, double vcoord, long long& m0, long long& m1) const {
        double g = pitch(i);
        double w = window_factor * scales[static_cast<std::size_t>(i)];
        m0 = static_cast<long long>(std::floor((vcoord - w) / g));
        m1 = static_cast<long long>(std::ceil((vcoord + w) / g));
    }
};

inline double dual_vertex_coord(double s, long long a) { return s * (static_cast<double>(a) + 0.5); }

/// Corner vertices (dual-lattice anchors) of a dual face.
inline std::vector<std::vector<long long>> dual_face_corners(const Face& f) {
    if (f.lattice != LatticeTag::dual) throw InvalidInput("dual_face_corners: expected dual face");
    const int d = f.dim();
    std::vector<std::vector<long long>> out;
    for (int mask = 0; mask < (1 << d); ++mask) {
        std::vector<long long> a = f.anchor;
        for (int t = 0; t < d; ++t) a[static_cast<std::size_t>(f.axes[static_cast<std::size_t>(t)])] +=
            static_cast<long long>((mask >> t) & 1) - 1;
        out.push_back(std::move(a));
    }
    return out;
}

/// Previous-scale dual vertices within the combined-grid radius of a vertex.
inline std::vector<std::vector<long long>> prev_vertices_near(const GridGeometry& geo, int i,
                                                              const std::vector<long long>& anchor) {
    std::vector<std::vector<long long>> out;
    if (i < 1) return out;
    const double s = geo.scales[static_cast<std::size_t>(i)];
    const double sp = geo.scales[static_cast<std::size_t>(i - 1)];
    const double r = geo.comb_radius_factor * s;
    const int n = geo.ambient;
    std::vector<long long> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n)),
        cur(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        double vj = dual_vertex_coord(s, anchor[static_cast<std::size_t>(j)]);
        lo[static_cast<std::size_t>(j)] =
            static_cast<long long>(std::ceil((vj - r) / sp - 0.5 - 1e-9));
        hi[static_cast<std::size_t>(j)] =
            static_cast<long long>(std::floor((vj + r) / sp - 0.5 + 1e-9));
        cur[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)];
    }
    while (true) {
        out.push_back(cur);
        int j = 0;
        for (; j < n; ++j) {
            if (cur[static_cast<std::size_t>(j)] < hi[static_cast<std::size_t>(j)]) {
                ++cur[static_cast<std::size_t>(j)];
                break;
            }
            cur[static_cast<std::size_t>(j)] = lo[static_cast<std::size_t>(j)];
        }
        if (j == n) break;
    }
    return out;
}

inline void append_axis_coords(const GridGeometry& geo, int i,
                               const std::vector<long long>& anchor, int j,
                               const PerturbLookup& p, std::vector<double>& out) {
    const double s = geo.scales[static_cast<std::size_t>(i)];
    const double g = geo.pitch(i);
    long long m0 = 0, m1 = 0;
    geo.line_range(i, dual_vertex_coord(s, anchor[static_cast<std::size_t>(j)]), m0, m1);
    for (long long m = m0; m <= m1; ++m)
        out.push_back(g * (static_cast<double>(m) + p(GridGeometry::perturb_key(i, anchor, j, m))));
}

/// Grid assigned to a dual face: union of its corner vertex grids; the
/// combined (two consecutive scales) version adds the previous-scale vertex
/// grids within the combined radius.
inline Grid face_grid(const GridGeometry& geo, int i, const Face& f, bool combined,
                      const PerturbLookup& p) {
    const int n = geo.ambient;
    Grid g;
    g.coords.resize(static_cast<std::size_t>(n));
    std::set<std::vector<long long>> verts;
    for (auto& c : dual_face_corners(f)) verts.insert(c);
    std::set<std::vector<long long>> prev;
    if (combined && i >= 1)
        for (const auto& v : verts)
            for (auto& w : prev_vertices_near(geo, i, v)) prev.insert(w);
    for (int j = 0; j < n; ++j) {
        auto& col = g.coords[static_cast<std::size_t>(j)];
        for (const auto& v : verts) append_axis_coords(geo, i, v, j, p, col);
        for (const auto& w : prev) append_axis_coords(geo, i - 1, w, j, p, col);
        std::sort(col.begin(), col.end());
        double tol = 1e-9 * geo.scales[static_cast<std::size_t>(i)];
        std::vector<double> dedup;
        for (double c : col)
            if (dedup.empty() || c - dedup.back() > tol) dedup.push_back(c);
        col = std::move(dedup);
    }
    return g;
}

/// Snapped image of a dual vertex: per axis, the nearest hyperplane of its
/// own grid G_i(v).
inline Vec snap_vertex(const GridGeometry& geo, int i, const std::vector<long long>& anchor,
                       const PerturbLookup& p) {
    const int n = geo.ambient;
    const double s = geo.scales[static_cast<std::size_t>(i)];
    Vec out(static_cast<std::size_t>(n));
    std::vector<double> col;
    for (int j = 0; j < n; ++j) {
        col.clear();
        append_axis_coords(geo, i, anchor, j, p, col);
        double vj = dual_vertex_coord(s, anchor[static_cast<std::size_t>(j)]);
        double best = col.front();
        for (double c : col)
            if (std::fabs(c - vj) < std::fabs(best - vj)) best = c;
        out[static_cast<std::size_t>(j)] = best;
    }
    return out;
}

/// Local grid family: one grid per dual vertex at every scale, stored as the
/// chosen perturbation levels (absent keys use a deterministic default).
struct LocalGridSet {
    GridGeometry geo;
    std::map<std::vector<long long>, int> table;
    std::vector<std::vector<Face>> relevant;  // per scale: dual (N-1)-faces near z
    double beta = 0.0;
    bool spacing_overridden = true;  // pitch s_i/4 instead of s_i/(200 N^2)

    PerturbLookup lookup() const {
        const GridGeometry* g = &geo;
        const std::map<std::vector<long long>, int>* t = &table;
        return [g, t](const std::vector<long long>& key) {
            auto it = t->find(key);
            return g->level_value(it != t->end() ? it->second : g->default_level(key));
        };
    }

    Grid grid_of(int i, const Face& f, bool combined) const {
        return face_grid(geo, i, f, combined, lookup());
    }
    Vec vertex_image(int i, const std::vector<long long>& anchor) const {
        return snap_vertex(geo, i, anchor, lookup());
    }
};

/// One way the key estimate can fail for a grid face R near a dual face.
struct KeyEstimateViolation {
    int scale_index = 0;
    Face face;              // the dual face whose grid is being checked
    bool combined = false;
    std::string kind;       // "transversality" or "thin"
    Vec center;             // center of the offending grid face R
    double measured = 0.0;  // volume found (thin) or clearance (transversality)
};

/// Certify the key estimate for one grid near one dual face: every
/// (N-n+1)-face R of the grid inside the window with [z ∩ R] != 0 must have
/// Vol_n(y ∩ Ball[R]) >= beta * s^n, with all crossings transverse.
inline std::vector<KeyEstimateViolation> key_estimate_violations(
    const Grid& g, int i, const Face& f, bool combined, double s, const PLChain& z,
    const PLChain& y, double beta, double window_half) {
    std::vector<KeyEstimateViolation> out;
    if (z.empty()) return out;
    const int n = z.ambient();
    const double tol = 1e-9 * s;
    Vec wlo, whi;
    f.bounds(wlo, whi);
    for (int j = 0; j < n; ++j) {
        wlo[static_cast<std::size_t>(j)] -= window_half;
        whi[static_cast<std::size_t>(j)] += window_half;
    }
    auto violation = [&](const std::string& kind, const Vec& center, double measured) {
        out.push_back({i, f, combined, kind, center, measured});
    };
    std::map<std::vector<long long>, std::pair<int, Vec>> cells;
    for (const auto& [key, pts] : z.simplices) {
        const Vec& p = pts[0];
        const Vec& q = pts[1];
        bool outside = false;
        for (int j = 0; j < n && !outside; ++j) {
            double lo = std::min(p[static_cast<std::size_t>(j)], q[static_cast<std::size_t>(j)]);
            double hi = std::max(p[static_cast<std::size_t>(j)], q[static_cast<std::size_t>(j)]);
            if (hi < wlo[static_cast<std::size_t>(j)] - tol || lo > whi[static_cast<std::size_t>(j)] + tol)
                outside = true;
        }
        if (outside) continue;
        for (int j = 0; j < n; ++j) {
            const auto& col = g.coords[static_cast<std::size_t>(j)];
            double pj = p[static_cast<std::size_t>(j)], qj = q[static_cast<std::size_t>(j)];
            double lo = std::min(pj, qj) - tol, hi = std::max(pj, qj) + tol;
            auto it0 = std::lower_bound(col.begin(), col.end(), lo);
            for (auto it = it0; it != col.end() && *it <= hi; ++it) {
                double c = *it;
                double d = qj - pj;
                if (std::fabs(d) <= tol) {
                    if (std::fabs(pj - c) <= tol)
                        violation("transversality", p, std::fabs(pj - c));
                    continue;
                }
                double t = (c - pj) / d;
                double tol_t = tol / std::fabs(d);
                if (t < -tol_t || t > 1.0 + tol_t) continue;
                if (t <= tol_t || t >= 1.0 - tol_t) {
                    violation("transversality", p + t * (q - p), 0.0);
                    continue;
                }
                Vec x = p + t * (q - p);
                bool inside = true;
                for (int k2 = 0; k2 < n && inside; ++k2)
                    if (x[static_cast<std::size_t>(k2)] < wlo[static_cast<std::size_t>(k2)] - tol ||
                        x[static_cast<std::size_t>(k2)] > whi[static_cast<std::size_t>(k2)] + tol)
                        inside = false;
                if (!inside) continue;
                std::vector<long long> cell{static_cast<long long>(j),
                                            static_cast<long long>(it - col.begin())};
                Vec center(static_cast<std::size_t>(n));
                center[static_cast<std::size_t>(j)] = c;
                bool grazing = false, covered = true;
                for (int k2 = 0; k2 < n; ++k2) {
                    if (k2 == j) continue;
                    const auto& ck = g.coords[static_cast<std::size_t>(k2)];
                    double xk = x[static_cast<std::size_t>(k2)];
                    auto up = std::upper_bound(ck.begin(), ck.end(), xk);
                    if (up == ck.begin() || up == ck.end()) {
                        covered = false;
                        break;
                    }
                    double hi_c = *up, lo_c = *(up - 1);
                    if (xk - lo_c <= tol || hi_c - xk <= tol) {
                        grazing = true;
                        break;
                    }
                    cell.push_back(static_cast<long long>(up - ck.begin()) - 1);
                    center[static_cast<std::size_t>(k2)] = (lo_c + hi_c) / 2.0;
                }
                if (!covered) continue;  // beyond the coord window; outside the certified zone
                if (grazing) {
                    violation("transversality", x, 0.0);
                    continue;
                }
                auto itc = cells.find(cell);
                if (itc == cells.end())
                    cells.emplace(std::move(cell), std::make_pair(1, center));
                else
                    itc->second.first ^= 1;
            }
        }
    }
    for (const auto& [cell, pc] : cells) {
        if (!pc.first) continue;
        Ball ball{pc.second, static_cast<double>(n) * s};
        double vol = detail::clipped_volume(y, ball);
        double need = beta;
        for (int t = 0; t < y.dim; ++t) need *= s;
        if (vol < need) violation("thin", pc.second, vol);
    }
    return out;
}

/// Dual (N-1)-faces whose inflated span meets the chain.
inline std::vector<Face> nearby_dual_faces(const PLChain& z, double s, double margin) {
    std::set<Face> out;
    if (z.empty()) return {};
    const int n = z.ambient();
    for (const auto& [key, pts] : z.simplices) {
        Vec lo(static_cast<std::size_t>(n), 1e300), hi(static_cast<std::size_t>(n), -1e300);
        for (const Vec& p : pts)
            for (int j = 0; j < n; ++j) {
                lo[static_cast<std::size_t>(j)] = std::min(lo[static_cast<std::size_t>(j)], p[static_cast<std::size_t>(j)]);
                hi[static_cast<std::size_t>(j)] = std::max(hi[static_cast<std::size_t>(j)], p[static_cast<std::size_t>(j)]);
            }
        for (int omit = 0; omit < n; ++omit) {
            std::vector<int> axes;
            for (int j = 0; j < n; ++j)
                if (j != omit) axes.push_back(j);
            std::vector<long long> amin(static_cast<std::size_t>(n)), amax(static_cast<std::size_t>(n)),
                a(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j) {
                amin[static_cast<std::size_t>(j)] = static_cast<long long>(
                    std::floor((lo[static_cast<std::size_t>(j)] - margin) / s - 0.5));
                amax[static_cast<std::size_t>(j)] = static_cast<long long>(
                    std::ceil((hi[static_cast<std::size_t>(j)] + margin) / s + 0.5));
                a[static_cast<std::size_t>(j)] = amin[static_cast<std::size_t>(j)];
            }
            while (true) {
                out.insert(Face{s, a, axes, LatticeTag::dual});
                int j = 0;
                for (; j < n; ++j) {
                    if (a[static_cast<std::size_t>(j)] < amax[static_cast<std::size_t>(j)]) {
                        ++a[static_cast<std::size_t>(j)];
                        break;
                    }
                    a[static_cast<std::size_t>(j)] = amin[static_cast<std::size_t>(j)];
                }
                if (j == n) break;
            }
        }
    }
    return {out.begin(), out.end()};
}

struct GridSearchOptions {
    int budget = 128;
    std::uint64_t seed = 1;
    double window_half_factor = 1.0;  // key-estimate window in units of s_i
    double epsilon = 1.0;             // declared per-set probability bound
    long long exact_limit = 4096;
};

struct GridSearchStats {
    int variables = 0;
    int bad_sets = 0;
    int resample_rounds = 0;
    int c1 = 0, c2 = 0;
    double beta = 0.0;
};

struct GridBuildError : std::runtime_error {
    std::vector<KeyEstimateViolation> violations;
    GridBuildError(const std::string& msg, std::vector<KeyEstimateViolation> v)
        : std::runtime_error(msg), violations(std::move(v)) {}
};

/// Choose all grid perturbations so that the key estimate holds near every
/// relevant dual face at every scale, via the constructive probability-lemma
/// search over the discrete perturbation levels.
inline LocalGridSet build_local_grids(const std::vector<double>& scales, const PLChain& z,
                                      const PLChain& y, double beta,
                                      const GridSearchOptions& opt = {},
                                      GridSearchStats* stats = nullptr) {
    LocalGridSet set;
    set.geo.ambient = z.empty() ? (y.empty() ? 3 : y.ambient()) : z.ambient();
    set.geo.scales = scales;
    set.geo.salt ^= opt.seed * 0x9e3779b97f4a7c15ULL;
    set.beta = beta;
    set.relevant.resize(scales.size());
    if (z.empty()) {
        if (stats) *stats = GridSearchStats{0, 0, 0, 1, 1, beta};
        return set;
    }
    const int n = set.geo.ambient;
    const GridGeometry& geo = set.geo;

    // Relevant dual faces and the vertex set whose grids get variables.
    std::set<std::vector<long long>> vkeys;  // {i, anchor...}
    for (std::size_t i = 0; i < scales.size(); ++i) {
        double s = scales[i];
        set.relevant[i] = nearby_dual_faces(z, s, (opt.window_half_factor + 0.1) * s);
        for (const Face& f : set.relevant[i]) {
            auto corners = dual_face_corners(f);
            for (const auto& c : corners) {
                std::vector<long long> vk{static_cast<long long>(i)};
                vk.insert(vk.end(), c.begin(), c.end());
                vkeys.insert(vk);
                if (i >= 1)
                    for (auto& w : prev_vertices_near(geo, static_cast<int>(i), c)) {
                        std::vector<long long> wk{static_cast<long long>(i) - 1};
                        wk.insert(wk.end(), w.begin(), w.end());
                        vkeys.insert(wk);
                    }
            }
        }
    }

    // Variables: one per (scale, vertex, axis, line).
    std::map<std::vector<long long>, int> vidx;
    std::vector<VarSpace> vars;
    VarSpace proto;
    for (int k = 0; k < geo.levels; ++k) proto.values.push_back(geo.level_value(k));
    for (const auto& vk : vkeys) {
        int i = static_cast<int>(vk[0]);
        std::vector<long long> anchor(vk.begin() + 1, vk.end());
        for (int j = 0; j < n; ++j) {
            long long m0 = 0, m1 = 0;
            geo.line_range(i, dual_vertex_coord(scales[static_cast<std::size_t>(i)],
                                                anchor[static_cast<std::size_t>(j)]),
                           m0, m1);
            for (long long m = m0; m <= m1; ++m) {
                auto key = GridGeometry::perturb_key(i, anchor, j, m);
                if (!vidx.count(key)) {
                    vidx.emplace(key, static_cast<int>(vars.size()));
                    vars.push_back(proto);
                }
            }
        }
    }

    auto make_lookup = [&geo, &vidx](const std::vector<double>* asg) {
        return PerturbLookup([&geo, &vidx, asg](const std::vector<long long>& key) {
            auto it = vidx.find(key);
            if (it != vidx.end()) return (*asg)[static_cast<std::size_t>(it->second)];
            return geo.level_value(geo.default_level(key));
        });
    };

    // Bad sets: per scale and relevant dual face, the plain grid G_i(f) and
    // (for i >= 1) the combined grid G_{i-1,i}(f).
    struct SetDescriptor {
        int i;
        Face f;
        bool combined;
    };
    std::vector<SetDescriptor> descs;
    std::vector<BadSet> bad_sets;
    for (std::size_t i = 0; i < scales.size(); ++i)
        for (const Face& f : set.relevant[i])
            for (int kind = 0; kind < (i >= 1 ? 2 : 1); ++kind) {
                SetDescriptor d{static_cast<int>(i), f, kind == 1};
                BadSet bs;
                bs.label = "scale " + std::to_string(i) + (d.combined ? " combined" : " grid") +
                           " face a=(";
                for (std::size_t t = 0; t < f.anchor.size(); ++t)
                    bs.label += (t ? "," : "") + std::to_string(f.anchor[t]);
                bs.label += ") axes=(";
                for (std::size_t t = 0; t < f.axes.size(); ++t)
                    bs.label += (t ? "," : "") + std::to_string(f.axes[t]);
                bs.label += ")";
                // dependencies: every variable of the constituent vertices
                std::set<int> deps;
                std::set<std::vector<long long>> vs;
                for (auto& c : dual_face_corners(f)) {
                    std::vector<long long> vk{static_cast<long long>(i)};
                    vk.insert(vk.end(), c.begin(), c.end());
                    vs.insert(vk);
                    if (d.combined)
                        for (auto& w : prev_vertices_near(geo, d.i, c)) {
                            std::vector<long long> wk{static_cast<long long>(i) - 1};
                            wk.insert(wk.end(), w.begin(), w.end());
                            vs.insert(wk);
                        }
                }
                for (const auto& vk : vs) {
                    int vi = static_cast<int>(vk[0]);
                    std::vector<long long> anchor(vk.begin() + 1, vk.end());
                    for (int j = 0; j < n; ++j) {
                        long long m0 = 0, m1 = 0;
                        geo.line_range(vi,
                                       dual_vertex_coord(scales[static_cast<std::size_t>(vi)],
                                                         anchor[static_cast<std::size_t>(j)]),
                                       m0, m1);
                        for (long long m = m0; m <= m1; ++m) {
                            auto it = vidx.find(GridGeometry::perturb_key(vi, anchor, j, m));
                            if (it != vidx.end()) deps.insert(it->second);
                        }
                    }
                }
                bs.deps.assign(deps.begin(), deps.end());
                double s = scales[i];
                double wh = opt.window_half_factor * s;
                const PLChain* zp = &z;
                const PLChain* yp = &y;
                bs.hit = [d, s, wh, zp, yp, beta, &geo, make_lookup](const std::vector<double>& asg) {
                    Grid g = face_grid(geo, d.i, d.f, d.combined, make_lookup(&asg));
                    return !key_estimate_violations(g, d.i, d.f, d.combined, s, *zp, *yp, beta, wh)
                                .empty();
                };
                descs.push_back(d);
                bad_sets.push_back(std::move(bs));
            }

    ProbLemmaOptions popt;
    popt.c1 = 1;
    popt.c2 = 1;
    for (const BadSet& bs : bad_sets) popt.c1 = std::max(popt.c1, static_cast<int>(bs.deps.size()) + 1);
    std::vector<int> relevance(vars.size(), 0);
    for (const BadSet& bs : bad_sets)
        for (int dvar : bs.deps) ++relevance[static_cast<std::size_t>(dvar)];
    for (int r : relevance) popt.c2 = std::max(popt.c2, r + 1);
    popt.epsilon = opt.epsilon;
    popt.budget = opt.budget;
    popt.seed = opt.seed;
    popt.exact_limit = opt.exact_limit;
    popt.exact_greedy = false;  // grid predicates are far too costly to enumerate

    if (stats) {
        stats->variables = static_cast<int>(vars.size());
        stats->bad_sets = static_cast<int>(bad_sets.size());
        stats->c1 = popt.c1;
        stats->c2 = popt.c2;
        stats->beta = beta;
    }

    try {
        ProbLemmaResult res = probability_lemma_solve(vars, bad_sets, popt);
        if (stats) stats->resample_rounds = res.resample_rounds;
        for (const auto& [key, idx] : vidx)
            set.table[key] = res.choice[static_cast<std::size_t>(idx)];
    } catch (const SearchFailure& e) {
        std::vector<KeyEstimateViolation> viols;
        auto lk = make_lookup(&e.assignment);
        std::size_t reported = 0;
        for (const std::string& label : e.surviving) {
            if (++reported > 5) break;  // diagnosing every survivor is costly
            for (std::size_t a = 0; a < bad_sets.size(); ++a)
                if (bad_sets[a].label == label) {
                    const SetDescriptor& d = descs[a];
                    double s = scales[static_cast<std::size_t>(d.i)];
                    Grid g = face_grid(geo, d.i, d.f, d.combined, lk);
                    auto v = key_estimate_violations(g, d.i, d.f, d.combined, s, z, y, beta,
                                                     opt.window_half_factor * s);
                    viols.insert(viols.end(), v.begin(), v.end());
                }
        }
        throw GridBuildError("local grid search failed (beta=" + std::to_string(beta) + ", " +
                                 std::to_string(e.surviving.size()) + " surviving faces)",
                             std::move(viols));
    }
    return set;
}

// ---------------------------------------------------------------------------
// Bending maps built on the local grids.

/// Axis-by-axis monotone path between two grid vertices; every segment lies
/// on a line of any grid containing both endpoint grids.
inline std::vector<Vec> staircase(const Vec& a, const Vec& b) {
    std::vector<Vec> pts{a};
    Vec cur = a;
    for (std::size_t j = 0; j < a.size(); ++j)
        if (cur[j] != b[j]) {
            cur[j] = b[j];
            pts.push_back(cur);
        }
    return pts;
}

/// Staircase with a canonical (endpoint-order independent) point set, so the
/// same pair of grid vertices always produces bitwise-identical segments and
/// shared boundaries of adjacent face images cancel exactly mod 2.
inline std::vector<Vec> path_between(const Vec& a, const Vec& b) {
    bool fwd = !std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
    std::vector<Vec> p = fwd ? staircase(a, b) : staircase(b, a);
    if (!fwd) std::reverse(p.begin(), p.end());
    return p;
}

/// Fill a closed axis-parallel loop inside a grid 2-skeleton by coning every
/// loop edge to the apex through axis-parallel rectangles.
inline PLChain fill_loop(const std::vector<Vec>& loop, const Vec& apex, double quantum_scale) {
    PLChain a = PLChain::make(2, quantum_scale);
    const int n = static_cast<int>(apex.size());
    auto proj = [&](Vec x, int j) {
        for (int t = 0; t < j; ++t) x[static_cast<std::size_t>(t)] = apex[static_cast<std::size_t>(t)];
        return x;
    };
    for (std::size_t e = 0; e < loop.size(); ++e) {
        const Vec& p = loop[e];
        const Vec& q = loop[(e + 1) % loop.size()];
        int k = -1;
        for (int t = 0; t < n; ++t)
            if (p[static_cast<std::size_t>(t)] != q[static_cast<std::size_t>(t)]) {
                if (k >= 0) throw InvalidInput("fill_loop: loop edge is not axis-parallel");
                k = t;
            }
        if (k < 0) continue;  // repeated corner
        for (int j = 0; j < n; ++j) {
            if (j == k) continue;
            Vec p0 = proj(p, j), p1 = proj(q, j), q1 = proj(q, j + 1), q0 = proj(p, j + 1);
            a.toggle({p0, p1, q1});
            a.toggle({p0, q1, q0});
        }
    }
    return a;
}

namespace detail {

inline std::vector<Vec> append_tail(std::vector<Vec> base, const std::vector<Vec>& path) {
    for (std::size_t k = 1; k < path.size(); ++k) base.push_back(path[k]);
    return base;
}

/// Image of a dual face of dimension <= 2 under the bending map at scale i.
inline PLChain dual_image(const LocalGridSet& g, int i, const Face& fd, double quantum_scale) {
    const int d = fd.dim();
    if (d == 0) {
        PLChain out = PLChain::make(0, quantum_scale);
        out.toggle({g.vertex_image(i, fd.anchor)});
        return out;
    }
    if (d == 1) {
        auto corners = dual_face_corners(fd);  // low, high along the single axis
        Vec a = g.vertex_image(i, corners[0]);
        Vec b = g.vertex_image(i, corners[1]);
        PLChain out = PLChain::make(1, quantum_scale);
        auto pts = path_between(a, b);
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) out.toggle({pts[k], pts[k + 1]});
        return out;
    }
    if (d == 2) {
        auto corners = dual_face_corners(fd);  // masks 0,1,2,3 -> cycle 0,1,3,2
        Vec c0 = g.vertex_image(i, corners[0]);
        Vec c1 = g.vertex_image(i, corners[1]);
        Vec c2 = g.vertex_image(i, corners[3]);
        Vec c3 = g.vertex_image(i, corners[2]);
        std::vector<Vec> loop{c0};
        loop = append_tail(std::move(loop), path_between(c0, c1));
        loop = append_tail(std::move(loop), path_between(c1, c2));
        loop = append_tail(std::move(loop), path_between(c2, c3));
        loop = append_tail(std::move(loop), path_between(c3, c0));
        loop.pop_back();  // cyclic: drop the repeated start
        return fill_loop(loop, c0, quantum_scale);
    }
    throw InvalidInput("bending images are implemented for dual faces of dimension <= 2");
}

/// Previous-scale decomposition of a dual face translated by
/// v = (s_{i-1}/2, ..., s_{i-1}/2): anchors double, +1 off-axis, two choices
/// per spanned axis.
inline std::vector<Face> shifted_subfaces(const Face& fd, double s_prev) {
    std::vector<Face> out;
    const int d = fd.dim();
    for (int mask = 0; mask < (1 << d); ++mask) {
        Face sub;
        sub.scale = s_prev;
        sub.axes = fd.axes;
        sub.lattice = LatticeTag::dual;
        sub.anchor.resize(fd.anchor.size());
        for (std::size_t t = 0; t < fd.anchor.size(); ++t)
            sub.anchor[t] = 2 * fd.anchor[t] + 1;
        for (int t = 0; t < d; ++t) {
            std::size_t ax = static_cast<std::size_t>(fd.axes[static_cast<std::size_t>(t)]);
            sub.anchor[ax] = 2 * fd.anchor[ax] + static_cast<long long>((mask >> t) & 1);
        }
        out.push_back(std::move(sub));
    }
    return out;
}

}  // namespace detail

/// Bending map at scale i: dual vertices snap to their grid, dual edges map
/// to staircase paths, dual 2-faces to cone fillings of their boundary loops.
inline BendingMapRep build_bending(const LocalGridSet& grids, int i, double quantum_scale) {
    auto g = std::make_shared<const LocalGridSet>(grids);
    BendingMapRep rep;
    rep.scale = g->geo.scales[static_cast<std::size_t>(i)];
    for (const Face& f : g->relevant[static_cast<std::size_t>(i)]) rep.support.push_back(dual_face(f));
    rep.image_of_dual = [g, i, quantum_scale](const Face& primal) {
        return detail::dual_image(*g, i, dual_face(primal), quantum_scale);
    };
    return rep;
}

/// Image of a dual vertex of scale i under the shifted previous-scale map
/// Φ_{i-1}^+(x) = Φ_{i-1}(x + v).
inline Vec shifted_vertex_image(const LocalGridSet& grids, int i,
                                const std::vector<long long>& anchor) {
    std::vector<long long> prev(anchor.size());
    for (std::size_t t = 0; t < anchor.size(); ++t) prev[t] = 2 * anchor[t] + 1;
    return grids.vertex_image(i - 1, prev);
}

/// The coarsened bending Φ_{i-1}^+ on the scale-i dual skeleton: each dual
/// face is mapped by translating it by v and applying Φ_{i-1} to the 2^d
/// previous-scale pieces.
inline BendingMapRep make_shifted_bending(const LocalGridSet& grids, int i, double quantum_scale) {
    auto g = std::make_shared<const LocalGridSet>(grids);
    BendingMapRep rep;
    rep.scale = g->geo.scales[static_cast<std::size_t>(i)];
    for (const Face& f : g->relevant[static_cast<std::size_t>(i)]) rep.support.push_back(dual_face(f));
    double s_prev = g->geo.scales[static_cast<std::size_t>(i - 1)];
    rep.image_of_dual = [g, i, s_prev, quantum_scale](const Face& primal) {
        Face fd = dual_face(primal);
        PLChain img = PLChain::make(std::max(fd.dim(), 0), quantum_scale);
        for (const Face& sub : detail::shifted_subfaces(fd, s_prev))
            img = img + detail::dual_image(*g, i - 1, sub, quantum_scale);
        return img;
    };
    return rep;
}

/// Homotopy tracks between Φ_{i-1}^+ and Φ_i over dual edges: the closed loop
/// (shifted path, connector, path, connector) filled in the combined grid.
inline BendingHomotopyRep make_scale_homotopy(const LocalGridSet& grids, int i,
                                              const std::vector<Face>& support_primal,
                                              double quantum_scale) {
    auto g = std::make_shared<const LocalGridSet>(grids);
    BendingHomotopyRep rep;
    rep.scale = g->geo.scales[static_cast<std::size_t>(i)];
    rep.support = support_primal;
    rep.track_of_dual = [g, i, quantum_scale](const Face& primal) {
        Face gd = dual_face(primal);
        if (gd.dim() != 1)
            throw InvalidInput("homotopy tracks are implemented for dual edges only");
        int a = gd.axes[0];
        auto corners = dual_face_corners(gd);  // low, high along axis a
        Vec fu = g->vertex_image(i, corners[0]);
        Vec fw = g->vertex_image(i, corners[1]);
        Vec pu = shifted_vertex_image(*g, i, corners[0]);
        Vec pw = shifted_vertex_image(*g, i, corners[1]);
        // midpoint vertex of the two previous-scale subedges of gd + v
        std::vector<long long> mid(gd.anchor.size());
        for (std::size_t t = 0; t < gd.anchor.size(); ++t) mid[t] = 2 * gd.anchor[t] + 1;
        mid[static_cast<std::size_t>(a)] = 2 * gd.anchor[static_cast<std::size_t>(a)];
        Vec pm = g->vertex_image(i - 1, mid);
        std::vector<Vec> loop{pu};
        loop = detail::append_tail(std::move(loop), path_between(pu, pm));
        loop = detail::append_tail(std::move(loop), path_between(pm, pw));
        loop = detail::append_tail(std::move(loop), path_between(pw, fw));
        loop = detail::append_tail(std::move(loop), path_between(fw, fu));
        loop = detail::append_tail(std::move(loop), path_between(fu, pu));
        loop.pop_back();
        return fill_loop(loop, pu, quantum_scale);
    };
    return rep;
}

}  // namespace kdl

#endif  // KDL_GRIDS_HPP
