#ifndef KDL_PIPELINE_HPP
#define KDL_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "chain.hpp"
#include "deform.hpp"
#include "grids.hpp"
#include "volume.hpp"

namespace kdl {

struct PipelineError : std::runtime_error {
    int scale_index = 0;
    PipelineError(int i, const std::string& msg)
        : std::runtime_error("scale " + std::to_string(i) + ": " + msg), scale_index(i) {}
};

/// Re-express a chain on a common quantum so chains produced at different
/// scales can be summed mod 2.
inline PLChain requantize(const PLChain& t, double quantum_scale) {
    PLChain out = PLChain::make(t.dim, quantum_scale);
    for (const auto& [key, pts] : t.simplices) out.toggle(pts);
    return out;
}

inline PLChain translate_chain(const PLChain& t, const Vec& v) {
    PLChain out = PLChain::make(t.dim, t.scale());
    for (const auto& [key, pts] : t.simplices) {
        std::vector<Vec> moved = pts;
        for (Vec& p : moved) p = p + v;
        out.toggle(moved);
    }
    return out;
}

/// Result of pushing a perpendicular pair (z, w, y) onto the cubical lattice
/// by a random small deformation.
struct CubicalApproxResult {
    CubicalChain zc, wc, yc;  // cubical z̃, w̃, ỹ
    PLChain collar;           // homotopy A with ∂A = z + z̃
    Vec v_used;
    double vol_y = 0.0;
    double vol_yc = 0.0;
    double vol_ratio = 0.0;
    int tries = 0;
};

/// Cubical approximation of a perpendicular pair at scale s0: a random
/// displacement below s0/2 is retried until the deformed triple is cubical
/// with exact boundary, the zero-volume coordinate directions of z and w are
/// preserved at tolerance tau, and the volume inflation stays bounded.
inline CubicalApproxResult cubical_approximate(const PLChain& z, const PLChain& w,
                                               const PLChain& y, double s0, double tau,
                                               std::uint64_t seed, int max_tries = 50,
                                               double vol_factor_cap = 64.0) {
    if (z.dim != 1 || y.dim != 2) throw InvalidInput("cubical_approximate: need a 1-cycle and a 2-chain");
    const int n = y.ambient();
    PLChain zw = z + requantize(w, z.scale());
    if (!chains_equal_mod2(boundary(y), zw, 1e-6 * s0))
        throw InvalidInput("cubical_approximate: boundary of y must equal z + w");
    if (!z.empty() && !w.empty()) {
        PerpendicularReport pr = perpendicular_check(z, w, tau);
        if (!pr.ok)
            throw InvalidInput("cubical_approximate: the pair is not perpendicular at tau");
    }

    auto zero_dirs = [&](const PLChain& c) {
        std::vector<int> out;
        for (int j = 0; j < n; ++j)
            if (directed_volume(c, DirectionIndex::tuple({j})) <= tau) out.push_back(j);
        return out;
    };
    std::vector<int> zz = zero_dirs(z), wz = zero_dirs(w);

    CubicalApproxResult res;
    res.vol_y = chain_volume(y);
    Rng rng(seed ^ 0xc6a4a7935bd1e995ULL);
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        res.tries = attempt + 1;
        Vec v = rng.in_ball(n, 0.49 * s0);
        DeformHomology dh;
        CubicalChain wc, yc;
        try {
            dh = deform_homology(z, v, s0, 0);
            wc = deform(w, dh.nudged_v, s0, 0);
            yc = deform(y, dh.nudged_v, s0, 0);
        } catch (const DegeneracyError&) {
            last_failure = "degenerate position";
            continue;
        }
        CubicalChain bd = boundary(yc);
        if (!((bd + dh.image + wc).faces.empty())) {
            last_failure = "boundary of the cubical image differs from z̃ + w̃";
            continue;
        }
        bool dirs_ok = true;
        std::string bad_dir;
        for (int j : zz)
            if (directed_volume(dh.image, DirectionIndex::tuple({j})) > tau) {
                dirs_ok = false;
                bad_dir = "z direction " + std::to_string(j);
            }
        for (int j : wz)
            if (directed_volume(wc, DirectionIndex::tuple({j})) > tau) {
                dirs_ok = false;
                bad_dir = "w direction " + std::to_string(j);
            }
        if (!dirs_ok) {
            last_failure = "zero-volume direction not preserved (" + bad_dir + ")";
            continue;
        }
        double vol_yc = static_cast<double>(yc.faces.size()) * s0 * s0;
        double ratio = vol_yc / std::max(res.vol_y, 1e-300);
        if (res.vol_y > 0.0 && ratio > vol_factor_cap) {
            last_failure = "volume inflated beyond the cap";
            continue;
        }
        res.zc = dh.image;
        res.wc = wc;
        res.yc = yc;
        res.collar = dh.chain;
        res.v_used = dh.nudged_v;
        res.vol_yc = vol_yc;
        res.vol_ratio = ratio;
        return res;
    }
    throw PipelineError(0, "cubical approximation failed after " + std::to_string(max_tries) +
                               " tries: " + last_failure);
}

struct PipelineConfig {
    double s0 = 0.25;
    double beta = -1.0;  // <= 0: bisect over {2^-j}
    double tau = 1e-9;
    int budget = 128;  // resampling budget of the grid search
    std::uint64_t seed = 1;
    int max_scales = 6;
    int max_jitter_attempts = 8;
    int approx_tries = 50;
    double vol_factor_cap = 64.0;
    int beta_bisection_max = 12;
};

struct ScaleReport {
    int index = 0;
    double scale = 0.0;
    std::size_t cycle_faces = 0;  // |z_i|
    double thickness = 0.0;       // min_F Vol(y ∩ Ball(center F, 2 s_i)) / (2 s_i)^2
    double neighborhood = 0.0;    // max_F dist(center F, z)
};

struct PipelineReport {
    double beta = 0.0;
    double vol_y = 0.0;
    double vol_yc = 0.0;
    double vol_ratio = 0.0;
    double hc_bound = 0.0;         // Hausdorff-content bound on the filling
    double radius = 0.0;           // max dist from the filling to z
    double scale_constant = 0.0;   // s_{i_final} / Vol(y)^{1/2}
    int i_final = 0;
    bool boundary_exact = false;
    int jitter_attempts = 0;
    bool spacing_overridden = true;
    GridSearchStats grid_stats;
    std::vector<ScaleReport> scales;
};

struct PipelineResult {
    PLChain filling;   // y' with ∂y' = z
    CubicalChain z0;   // base-scale cubical cycle
    PipelineReport report;
};

namespace detail {

inline double dist_to_chain(const Vec& p, const PLChain& z) {
    double best = 1e300;
    for (const auto& [key, pts] : z.simplices) {
        Vec d = pts[1] - pts[0];
        double dd = dot(d, d);
        double t = dd > 0.0 ? std::clamp(dot(p - pts[0], d) / dd, 0.0, 1.0) : 0.0;
        best = std::min(best, dist2(p, pts[0] + t * d));
    }
    return best;
}

}  // namespace detail

/// Multiscale filling of a 1-cycle z bounding a thin surface y (with the
/// perpendicular partner w): cubical approximation, perturbed local grids
/// certified by the key estimate, then scale doubling with per-scale homology
/// chains until the coarsened cycle dies out.  The output filling satisfies
/// ∂y' = z exactly and stays in a controlled neighborhood of z.
inline PipelineResult multiscale_fill(const PLChain& z, const PLChain& w, const PLChain& y,
                                      const PipelineConfig& cfg = {}) {
    PipelineResult out;
    out.report.spacing_overridden = true;
    if (z.empty()) {
        out.filling = PLChain::make(2, cfg.s0);
        out.z0.scale = cfg.s0;
        out.report.boundary_exact = true;
        return out;
    }
    const int n = z.ambient();
    if (n != 3)
        throw InvalidInput("multiscale_fill: implemented for ambient dimension 3");
    const double s0 = cfg.s0;

    CubicalApproxResult ca = cubical_approximate(z, w, y, s0, cfg.tau, cfg.seed, cfg.approx_tries,
                                                 cfg.vol_factor_cap);
    out.z0 = ca.zc;
    out.report.vol_y = ca.vol_y;
    out.report.vol_yc = ca.vol_yc;
    out.report.vol_ratio = ca.vol_ratio;

    PLChain zt = as_pl(ca.zc);  // z̃ as a PL cycle
    PLChain filling = requantize(ca.collar, s0);

    if (!ca.zc.empty()) {
        // Scale ladder: bent dual faces stay within 0.19 s_i of the dual
        // 2-skeleton, whose nearest sheet is s_i/2 from the origin-centred
        // region, so the cycle provably misses every image once
        // 0.3 s_i exceeds its largest coordinate; the ladder stops there.
        Vec blo, bhi;
        zt.bounding_box(blo, bhi);
        double maxabs = 0.0;
        for (std::size_t j = 0; j < blo.size(); ++j)
            maxabs = std::max({maxabs, std::fabs(blo[j]), std::fabs(bhi[j])});
        int top = 1;
        while (top < cfg.max_scales && 0.3 * std::ldexp(s0, top) < maxabs) ++top;
        std::vector<double> scales;
        for (int i = 0; i <= top; ++i) scales.push_back(std::ldexp(s0, i));

        // Local grids, with the thickness constant bisected when unspecified.
        GridSearchOptions gopt;
        gopt.budget = cfg.budget;
        gopt.seed = cfg.seed;
        LocalGridSet grids;
        GridSearchStats gstats;
        if (cfg.beta > 0.0) {
            grids = build_local_grids(scales, zt, y, cfg.beta, gopt, &gstats);
        } else {
            // Any beta with beta * s_top^2 > Vol(y) fails the key estimate at
            // the top scale outright (no ball can hold more than Vol(y)), so
            // the bisection ladder starts at the first feasible rung.
            int jstart = 1;
            double stop2 = std::ldexp(s0, top);
            stop2 *= stop2;
            if (ca.vol_y > 0.0)
                jstart = std::max(1, static_cast<int>(std::ceil(std::log2(stop2 / ca.vol_y))));
            bool found = false;
            for (int j = jstart; j <= cfg.beta_bisection_max && !found; ++j) {
                try {
                    grids = build_local_grids(scales, zt, y, std::ldexp(1.0, -j), gopt, &gstats);
                    found = true;
                } catch (const GridBuildError&) {
                }
            }
            if (!found)
                throw PipelineError(0, "no thickness constant in the bisection ladder satisfies "
                                       "the key estimate");
        }
        out.report.beta = grids.beta;
        out.report.grid_stats = gstats;

        bool done = false;
        std::string failure = "not attempted";
        Rng jrng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
        for (int attempt = 0; attempt < cfg.max_jitter_attempts && !done; ++attempt) {
            ++out.report.jitter_attempts;
            PLChain z_work = zt;
            if (attempt > 0)
                z_work = translate_chain(zt, (1e-7 * s0 * attempt) * jrng.on_sphere(n));
            PLChain acc = filling;
            std::vector<ScaleReport> reports;
            try {
                BendingMapRep phi0 = build_bending(grids, 0, s0);
                CubicalChain zi = deform_bent(z_work, phi0, s0, 0);
                if (!((zi + ca.zc).faces.empty()))
                    throw PipelineError(0, "base-scale bending does not fix the cubical cycle");
                int i_final = top;
                bool died = false;
                for (int i = 1; i <= top; ++i) {
                    double si = scales[static_cast<std::size_t>(i)];
                    double sp = scales[static_cast<std::size_t>(i - 1)];
                    PLChain zprev = as_pl(zi);
                    Vec v(static_cast<std::size_t>(n), sp / 2.0);
                    DeformHomology dh;
                    try {
                        dh = deform_homology(zprev, v, si, 0);
                    } catch (const InvalidInput& e) {
                        throw PipelineError(i, std::string("coarsening homology: ") + e.what());
                    }
                    BendingMapRep phi = build_bending(grids, i, s0);
                    CubicalChain znext = deform_bent(z_work, phi, si, 0);
                    BendingMapRep phiplus = make_shifted_bending(grids, i, s0);
                    CubicalChain zplus = deform_bent(z_work, phiplus, si, 0);
                    if (!((zplus + dh.image).faces.empty()))
                        throw PipelineError(i, "coarsening identity failed: the shifted bending "
                                               "and the half-cell displacement disagree");
                    std::vector<Face> hsupport;
                    for (const Face& f : candidate_faces(z_work, 2, si, 2.0 * si))
                        hsupport.push_back(f);
                    BendingHomotopyRep hom = make_scale_homotopy(grids, i, hsupport, s0);
                    CubicalChain a2 = homotopy_chain(z_work, hom, si, 0);
                    if (!((boundary(a2) + zplus + znext).faces.empty()))
                        throw PipelineError(i, "homotopy track boundary mismatch");
                    acc = acc + requantize(dh.chain, s0);
                    if (!a2.empty()) acc = acc + requantize(as_pl(a2), s0);
                    ScaleReport sr;
                    sr.index = i;
                    sr.scale = si;
                    sr.cycle_faces = znext.faces.size();
                    sr.thickness = znext.faces.empty() ? 0.0 : 1e300;
                    for (const Face& f : znext.faces) {
                        Ball b{f.center(), 2.0 * si};
                        sr.thickness = std::min(
                            sr.thickness, kdl::detail::clipped_volume(y, b) / (4.0 * si * si));
                        sr.neighborhood =
                            std::max(sr.neighborhood, detail::dist_to_chain(f.center(), z));
                    }
                    reports.push_back(sr);
                    zi = znext;
                    if (zi.empty()) {
                        i_final = i;
                        died = true;
                        break;
                    }
                }
                if (!died)
                    throw PipelineError(top, "cycle did not die out within the scale budget");
                out.report.i_final = i_final;
                out.report.scales = std::move(reports);
                filling = std::move(acc);
                done = true;
            } catch (const DegeneracyError&) {
                failure = "degenerate position at jitter attempt " + std::to_string(attempt);
            }
        }
        if (!done) throw PipelineError(0, "all jitter attempts failed: " + failure);
    }

    out.filling = std::move(filling);
    out.report.boundary_exact = chains_equal_mod2(boundary(out.filling), z, 1e-6 * s0);
    out.report.hc_bound = hausdorff_content(out.filling, 2).bound;
    for (const Vec& p : sample_chain(out.filling, 4))
        out.report.radius = std::max(out.report.radius, detail::dist_to_chain(p, z));
    double sfin = std::ldexp(s0, out.report.i_final);
    out.report.scale_constant =
        ca.vol_y > 0.0 ? sfin / std::sqrt(ca.vol_y) : 0.0;
    return out;
}

}  // namespace kdl

#endif  // KDL_PIPELINE_HPP
