#ifndef KDL_DEFORM_HPP
#define KDL_DEFORM_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "chain.hpp"
#include "intersect.hpp"
#include "rng.hpp"

namespace kdl {

struct DegeneracyError : std::runtime_error {
    Face face;
    explicit DegeneracyError(Face f)
        : std::runtime_error("persistent non-transversality"), face(std::move(f)) {}
};

namespace detail {

/// Fixed deterministic direction sequence used for transversality nudges.
inline Vec nudge_direction(int attempt, int n) {
    Rng rng(0xD1F07A5Eu + 977u * static_cast<std::uint64_t>(attempt));
    return rng.on_sphere(n);
}

inline std::vector<std::vector<int>> axis_subsets(int n, int d) {
    std::vector<std::vector<int>> out;
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
    return out;
}

}  // namespace detail

/// Primal d-faces whose translated duals could meet the chain.
inline std::set<Face> candidate_faces(const PLChain& t, int d, double s, double margin) {
    std::set<Face> out;
    if (t.empty()) return out;
    const int n = t.ambient();
    auto subsets = detail::axis_subsets(n, d);
    for (const auto& [key, pts] : t.simplices) {
        Vec lo(n, 1e300), hi(n, -1e300);
        for (const Vec& p : pts)
            for (int i = 0; i < n; ++i) {
                lo[i] = std::min(lo[i], p[i]);
                hi[i] = std::max(hi[i], p[i]);
            }
        for (const auto& axes : subsets) {
            // anchor ranges so that the face center lies in the inflated box
            std::vector<long long> amin(n), amax(n), a(n);
            for (int i = 0; i < n; ++i) {
                amin[i] = static_cast<long long>(std::floor((lo[i] - margin) / s)) - 1;
                amax[i] = static_cast<long long>(std::ceil((hi[i] + margin) / s)) + 1;
                a[i] = amin[i];
            }
            while (true) {
                out.insert(Face{s, a, axes, LatticeTag::primal});
                int i = 0;
                for (; i < n; ++i) {
                    if (a[i] < amax[i]) {
                        ++a[i];
                        break;
                    }
                    a[i] = amin[i];
                }
                if (i == n) break;
            }
        }
    }
    return out;
}

/// Deformation onto the d-skeleton: D_v(t) = Σ_F [dual(F)+v ∩ t]·F.
/// Retries with deterministic nudges of v when an intersection is
/// non-transverse; throws DegeneracyError after max_nudges attempts.
inline CubicalChain deform(const PLChain& t, Vec v, double s, int max_nudges = 20) {
    CubicalChain out;
    out.scale = s;
    if (t.empty()) return out;
    const int n = t.ambient();
    if (v.empty()) v.assign(n, 0.0);
    if (t.dim > n) throw InvalidInput("deform: chain dimension exceeds ambient");
    auto cands = candidate_faces(t, t.dim, s, norm2(v) + s + 2e-6 * s);
    Face bad;
    for (int attempt = 0; attempt <= max_nudges; ++attempt) {
        Vec vk = v;
        if (attempt > 0) vk = vk + (1e-6 * s) * detail::nudge_direction(attempt, n);
        CubicalChain res;
        res.scale = s;
        bool ok = true;
        for (const Face& f : cands) {
            IntersectResult r = intersect_count(dual_face(f), t, vk);
            if (!r.transverse) {
                bad = f;
                ok = false;
                break;
            }
            if (r.value) res.toggle(f);
        }
        if (ok) return res;
    }
    throw DegeneracyError(bad);
}

namespace detail {

using Segment = std::array<Vec, 2>;

/// Split segments at every lattice hyperplane x_i = s*m crossing them.
inline std::vector<Segment> split_at_lattice(const std::vector<Segment>& segs, double s) {
    std::vector<Segment> out;
    for (const Segment& seg : segs) {
        const Vec& a = seg[0];
        const Vec& b = seg[1];
        const int n = static_cast<int>(a.size());
        std::vector<double> ts{0.0, 1.0};
        for (int i = 0; i < n; ++i) {
            double d = b[i] - a[i];
            if (std::fabs(d) < 1e-300) continue;
            long long m0 = static_cast<long long>(std::floor(std::min(a[i], b[i]) / s));
            long long m1 = static_cast<long long>(std::ceil(std::max(a[i], b[i]) / s));
            for (long long m = m0; m <= m1; ++m) {
                double t = (s * static_cast<double>(m) - a[i]) / d;
                if (t > 1e-12 && t < 1.0 - 1e-12) ts.push_back(t);
            }
        }
        std::sort(ts.begin(), ts.end());
        Vec prev = a;
        double tprev = 0.0;
        for (double t : ts) {
            if (t - tprev < 1e-12) continue;
            Vec cur = t >= 1.0 - 1e-15 ? b : a + t * (b - a);
            out.push_back({prev, cur});
            prev = cur;
            tprev = t;
        }
    }
    return out;
}

struct CellFrame {
    std::vector<int> free;      // coordinates the projection acts on
    Vec q;                      // cell center (full ambient vector)
    double half = 0.5;          // s/2
};

/// Radial projection to the cell boundary (in the free coordinates), the
/// identity on points already at (or numerically past) the boundary, with
/// the dominating coordinate snapped exactly onto the lattice plane.
inline Vec cell_project(const Vec& x, const CellFrame& cf) {
    double tmax = 0.0;
    int arg = cf.free[0];
    for (int i : cf.free) {
        double m = std::fabs(x[i] - cf.q[i]);
        if (m > tmax) {
            tmax = m;
            arg = i;
        }
    }
    tmax /= cf.half;
    if (tmax >= 1.0 - 1e-12) return x;
    Vec y = x;
    for (int i : cf.free) y[i] = cf.q[i] + (x[i] - cf.q[i]) / tmax;
    y[arg] = cf.q[arg] + (x[arg] > cf.q[arg] ? cf.half : -cf.half);
    return y;
}

/// Distance (max-norm over free coordinates) from the segment to the cell
/// center; the minimum of a convex piecewise-linear function is attained at
/// a breakpoint, so it suffices to evaluate at all pairwise crossings.
inline std::vector<double> dominance_breakpoints(const Segment& seg, const CellFrame& cf) {
    const Vec& a = seg[0];
    const Vec& b = seg[1];
    std::vector<double> ts{0.0, 1.0};
    std::vector<double> u0, du;
    for (int i : cf.free) {
        u0.push_back(a[i] - cf.q[i]);
        du.push_back(b[i] - a[i]);
    }
    const int k = static_cast<int>(u0.size());
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            for (double si : {1.0, -1.0})
                for (double sj : {1.0, -1.0}) {
                    if (i == j && si == sj) continue;
                    double num = sj * u0[j] - si * u0[i];
                    double den = si * du[i] - sj * du[j];
                    if (std::fabs(den) < 1e-300) continue;
                    double t = num / den;
                    if (t > 1e-12 && t < 1.0 - 1e-12) ts.push_back(t);
                }
    std::sort(ts.begin(), ts.end());
    return ts;
}

inline double center_clearance(const Segment& seg, const CellFrame& cf,
                               const std::vector<double>& ts) {
    double best = 1e300;
    for (double t : ts) {
        Vec x = seg[0] + t * (seg[1] - seg[0]);
        double m = 0.0;
        for (int i : cf.free) m = std::max(m, std::fabs(x[i] - cf.q[i]));
        best = std::min(best, m);
    }
    return best;
}

}  // namespace detail

struct DeformHomology {
    PLChain chain;          // the (d+1)-chain A_v
    CubicalChain image;     // D_v(z), the cubical end of the homotopy
    double collar_constant = 0.0;  // max dist(A_v, z) / s
    Vec nudged_v;           // the perturbation actually used
};

/// Homotopy chain A_v with ∂A_v = z + D_v(z) mod 2: translation collar from
/// z to z−v followed by the radial-projection cascade pushing z−v into the
/// d-skeleton cell dimension by cell dimension.  1-cycles only.
inline DeformHomology deform_homology(const PLChain& z, Vec v, double s, int max_nudges = 20) {
    if (z.dim != 1) throw InvalidInput("deform_homology: only 1-cycles are supported");
    if (!boundary(z).empty()) throw InvalidInput("deform_homology: input is not a cycle");
    DeformHomology out;
    out.chain = PLChain::make(2, s);
    out.image.scale = s;
    if (z.empty()) {
        out.nudged_v = v;
        return out;
    }
    const int n = z.ambient();
    if (v.empty()) v.assign(n, 0.0);
    const double thin_tol = 1e-10 * s * s;   // quads thinner than this force a nudge
    const double tiny_len = 1e-6 * s;        // pieces shorter than this may be dropped
    Face bad_face;
    bool have_bad_face = false;
    for (int attempt = 0; attempt <= max_nudges; ++attempt) {
        Vec vk = v;
        if (attempt > 0) vk = vk + (1e-6 * s) * detail::nudge_direction(attempt, n);
        PLChain a = PLChain::make(2, s);
        bool ok = true;
        auto debris = [&](const Vec& p0, const Vec& p1, const Vec& q1, const Vec& q0) {
            // a collapsed track is tolerable only when everything is tiny
            return dist2(p0, p1) <= tiny_len && dist2(p0, q0) <= tiny_len &&
                   dist2(p1, q1) <= tiny_len;
        };
        auto collinear = [&](const Vec& p0, const Vec& p1, const Vec& q1, const Vec& q0) {
            // a track collapsed onto a line (e.g. a radial piece under the
            // next projection) is empty mod 2 and its boundary intervals
            // cancel pairwise, so it may be skipped outright
            const double ctol = 1e-9 * s;
            Vec dir = p1 - p0;
            if (norm2(dir) <= ctol) dir = q1 - q0;
            double dn = norm2(dir);
            if (dn <= ctol)
                return dist2(p0, q0) <= ctol && dist2(p0, q1) <= ctol;
            dir = (1.0 / dn) * dir;
            auto off = [&](const Vec& x) {
                Vec r = x - p0;
                return norm2(r - dot(r, dir) * dir);
            };
            return off(p1) <= ctol && off(q0) <= ctol && off(q1) <= ctol;
        };
        auto add_quad = [&](const Vec& p0, const Vec& p1, const Vec& q1, const Vec& q0) {
            // track of segment p0→p1 ending at q0→q1; true if healthy
            bool fix0 = p0 == q0, fix1 = p1 == q1;
            if (fix0 && fix1) return true;  // the segment did not move
            if (fix0 || fix1) {
                // one corner is fixed: the track is a triangle
                std::vector<Vec> tri =
                    fix1 ? std::vector<Vec>{p0, p1, q0} : std::vector<Vec>{p0, p1, q1};
                if (PLChain::simplex_volume(tri) <= thin_tol)
                    return debris(p0, p1, q1, q0) || collinear(p0, p1, q1, q0);
                a.toggle(tri);
                return true;
            }
            // pick the quad diagonal giving the fatter triangle pair
            double a1 = PLChain::simplex_volume({p0, p1, q1});
            double a2 = PLChain::simplex_volume({p0, q1, q0});
            double b1 = PLChain::simplex_volume({p0, p1, q0});
            double b2 = PLChain::simplex_volume({p1, q1, q0});
            if (std::min(a1, a2) >= std::min(b1, b2)) {
                if (std::min(a1, a2) <= thin_tol)
                    return debris(p0, p1, q1, q0) || collinear(p0, p1, q1, q0);
                a.toggle({p0, p1, q1});
                a.toggle({p0, q1, q0});
            } else {
                if (std::min(b1, b2) <= thin_tol)
                    return debris(p0, p1, q1, q0) || collinear(p0, p1, q1, q0);
                a.toggle({p0, p1, q0});
                a.toggle({p1, q1, q0});
            }
            return true;
        };
        // translation collar H': z → z − vk
        std::vector<detail::Segment> work;
        for (const auto& [key, pts] : z.simplices) {
            Vec p0 = pts[0], p1 = pts[1];
            Vec q0 = p0 - vk, q1 = p1 - vk;
            if (norm2(vk) > 0.0 && !add_quad(p0, p1, q1, q0)) {
                ok = false;
                break;
            }
            work.push_back({q0, q1});
        }
        // radial-projection cascade from the n-skeleton down to the 1-skeleton
        for (int stage = n; ok && stage >= 2; --stage) {
            work = detail::split_at_lattice(work, s);
            std::vector<detail::Segment> next;
            for (const detail::Segment& seg : work) {
                if (!ok) break;
                std::vector<int> free;
                for (int i = 0; i < n; ++i) {
                    bool equal = std::fabs(seg[0][i] - seg[1][i]) <= 1e-7 * s;
                    double lat = seg[0][i] / s;
                    bool on_lattice = std::fabs(lat - std::round(lat)) <= 1e-7;
                    if (!(equal && on_lattice)) free.push_back(i);
                }
                if (static_cast<int>(free.size()) <= stage - 1) {
                    next.push_back(seg);  // already in the (stage−1)-skeleton
                    continue;
                }
                detail::CellFrame cf;
                cf.free = free;
                cf.half = s / 2.0;
                cf.q = seg[0];
                for (int i : free) {
                    double mid = (seg[0][i] + seg[1][i]) / 2.0;
                    cf.q[i] = s * (std::floor(mid / s) + 0.5);
                }
                auto ts = detail::dominance_breakpoints(seg, cf);
                if (detail::center_clearance(seg, cf, ts) <= 1e-6 * s) {
                    ok = false;  // passes too close to the projection center
                    break;
                }
                Vec prev = seg[0];
                Vec prev_img = detail::cell_project(prev, cf);
                double tprev = 0.0;
                for (double t : ts) {
                    if (t <= tprev + 1e-12) continue;
                    Vec cur = t >= 1.0 - 1e-15 ? seg[1] : seg[0] + t * (seg[1] - seg[0]);
                    Vec cur_img = detail::cell_project(cur, cf);
                    if (!add_quad(prev, cur, cur_img, prev_img)) {
                        ok = false;
                        break;
                    }
                    if (dist2(cur_img, prev_img) > tiny_len) next.push_back({prev_img, cur_img});
                    prev = cur;
                    prev_img = cur_img;
                    tprev = t;
                }
            }
            work = next;
        }
        if (!ok) continue;
        // the cubical image, with the same perturbation (no further nudges)
        CubicalChain img;
        try {
            img = deform(z, vk, s, 0);
        } catch (const DegeneracyError& e) {
            bad_face = e.face;
            have_bad_face = true;
            continue;
        }
        // collar constant: how far the homotopy strays from z
        double worst = 0.0;
        auto dist_to_z = [&](const Vec& p) {
            double best = 1e300;
            for (const auto& [key, pts] : z.simplices) {
                Vec d = pts[1] - pts[0];
                double dd = dot(d, d);
                double t = dd > 0.0 ? std::clamp(dot(p - pts[0], d) / dd, 0.0, 1.0) : 0.0;
                best = std::min(best, dist2(p, pts[0] + t * d));
            }
            return best;
        };
        for (const auto& [key, pts] : a.simplices)
            for (const Vec& p : pts) worst = std::max(worst, dist_to_z(p));
        out.chain = std::move(a);
        out.image = std::move(img);
        out.collar_constant = worst / s;
        out.nudged_v = vk;
        return out;
    }
    if (have_bad_face) throw DegeneracyError(bad_face);
    throw DegeneracyError(Face{s, std::vector<long long>(n, 0), {}, LatticeTag::primal});
}

/// Admissible bending: for each lattice face, the image of its dual as a PL
/// chain of grid faces.  `support` lists the primal faces to consider.
struct BendingMapRep {
    double scale = 1.0;
    std::vector<Face> support;
    std::function<PLChain(const Face&)> image_of_dual;
};

/// Bent deformation D_Φ(t) = Σ_F [Φ(dual F) ∩ t]·F over primal faces of the
/// chain's dimension.  Non-transversality is resolved by nudging t.
inline CubicalChain deform_bent(const PLChain& t, const BendingMapRep& phi, double s,
                                int max_nudges = 20) {
    CubicalChain out;
    out.scale = s;
    if (t.empty()) return out;
    const int n = t.ambient();
    Face bad;
    for (int attempt = 0; attempt <= max_nudges; ++attempt) {
        PLChain tk = t;
        if (attempt > 0) {
            Vec shift = (1e-6 * s) * detail::nudge_direction(attempt, n);
            tk = PLChain::make(t.dim, t.scale());
            for (const auto& [key, pts] : t.simplices) {
                std::vector<Vec> moved = pts;
                for (Vec& p : moved) p = p + shift;
                tk.toggle(moved);
            }
        }
        CubicalChain res;
        res.scale = s;
        bool ok = true;
        for (const Face& f : phi.support) {
            if (f.dim() != t.dim) continue;
            PLChain img = phi.image_of_dual(f);
            if (img.empty()) continue;
            IntersectResult r = intersect_count(img, tk);
            if (!r.transverse) {
                bad = f;
                ok = false;
                break;
            }
            if (r.value) res.toggle(f);
        }
        if (ok) return res;
    }
    throw DegeneracyError(bad);
}

/// Homotopy between two bendings: for each primal (d+1)-face G, the track
/// swept by its dual under the homotopy, as a PL chain.
struct BendingHomotopyRep {
    double scale = 1.0;
    std::vector<Face> support;  // primal (d+1)-faces
    std::function<PLChain(const Face&)> track_of_dual;
};

/// D_{1,2}(z) = Σ_G [track(dual G) ∩ z]·G, a (d+1)-cubical chain with
/// ∂D_{1,2}(z) = D_{Φ1}(z) + D_{Φ2}(z) for cycles z.
inline CubicalChain homotopy_chain(const PLChain& z, const BendingHomotopyRep& h, double s,
                                   int max_nudges = 20) {
    CubicalChain out;
    out.scale = s;
    if (z.empty()) return out;
    const int n = z.ambient();
    Face bad;
    for (int attempt = 0; attempt <= max_nudges; ++attempt) {
        PLChain zk = z;
        if (attempt > 0) {
            Vec shift = (1e-6 * s) * detail::nudge_direction(attempt, n);
            zk = PLChain::make(z.dim, z.scale());
            for (const auto& [key, pts] : z.simplices) {
                std::vector<Vec> moved = pts;
                for (Vec& p : moved) p = p + shift;
                zk.toggle(moved);
            }
        }
        CubicalChain res;
        res.scale = s;
        bool ok = true;
        for (const Face& g : h.support) {
            if (g.dim() != z.dim + 1) continue;
            PLChain trk = h.track_of_dual(g);
            if (trk.empty()) continue;
            IntersectResult r = intersect_count(trk, zk);
            if (!r.transverse) {
                bad = g;
                ok = false;
                break;
            }
            if (r.value) res.toggle(g);
        }
        if (ok) return res;
    }
    throw DegeneracyError(bad);
}

/// Refinement-invariant mod-2 equality of 0- or 1-chains: chains are equal
/// iff after splitting all segments at all endpoints (clustered at `tol`)
/// every piece longer than `tol` appears an even number of times.
inline bool chains_equal_mod2(const PLChain& a, const PLChain& b, double tol) {
    if (a.dim != b.dim) return false;
    if (a.dim == 0) {
        std::vector<Vec> pts;
        for (const auto& [k, p] : a.simplices) pts.push_back(p[0]);
        for (const auto& [k, p] : b.simplices) pts.push_back(p[0]);
        std::vector<bool> used(pts.size(), false);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (used[i]) continue;
            bool matched = false;
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                if (!used[j] && dist2(pts[i], pts[j]) <= tol) {
                    used[i] = used[j] = true;
                    matched = true;
                    break;
                }
            if (!matched) return false;
        }
        return true;
    }
    if (a.dim != 1) throw InvalidInput("chains_equal_mod2: dimensions 0 and 1 only");
    std::vector<detail::Segment> segs;
    for (const auto& [k, p] : a.simplices) segs.push_back({p[0], p[1]});
    for (const auto& [k, p] : b.simplices) segs.push_back({p[0], p[1]});
    if (segs.empty()) return true;
    // cluster all endpoints
    std::vector<Vec> reps;
    auto rep_id = [&](const Vec& p) {
        for (std::size_t i = 0; i < reps.size(); ++i)
            if (dist2(reps[i], p) <= tol) return static_cast<int>(i);
        reps.push_back(p);
        return static_cast<int>(reps.size()) - 1;
    };
    for (const detail::Segment& s2 : segs) {
        rep_id(s2[0]);
        rep_id(s2[1]);
    }
    // split every segment at every representative lying on it, then count
    std::map<std::pair<int, int>, int> parity;
    for (const detail::Segment& s2 : segs) {
        Vec d = s2[1] - s2[0];
        double dd = dot(d, d);
        std::vector<std::pair<double, int>> cuts;
        for (std::size_t i = 0; i < reps.size(); ++i) {
            double t = dd > 0.0 ? dot(reps[i] - s2[0], d) / dd : 0.0;
            if (t < -0.5 || t > 1.5) continue;
            double tc = std::clamp(t, 0.0, 1.0);
            if (dist2(reps[i], s2[0] + tc * d) <= tol) cuts.emplace_back(tc, static_cast<int>(i));
        }
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            int u = cuts[i].second, w = cuts[i + 1].second;
            if (u == w) continue;
            if (dist2(reps[u], reps[w]) <= tol) continue;  // debris-length piece
            parity[{std::min(u, w), std::max(u, w)}] ^= 1;
        }
    }
    for (const auto& [key, p] : parity)
        if (p) return false;
    return true;
}

}  // namespace kdl

#endif  // KDL_DEFORM_HPP
