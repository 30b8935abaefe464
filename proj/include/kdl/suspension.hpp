#ifndef KDL_SUSPENSION_HPP
#define KDL_SUSPENSION_HPP

#include <cmath>
#include <memory>
#include <numbers>

#include "maps_basic.hpp"
#include "rect_embed.hpp"

namespace kdl {

namespace detail {

/// log chart of S^m at north pole e_{m+1}: x -> v in R^m with |v| = angle.
inline Vec sphere_log_north(const Vec& x) {
    const int m = static_cast<int>(x.size()) - 1;
    double c = std::clamp(x[m], -1.0, 1.0);
    Vec w(x.begin(), x.begin() + m);
    double s = norm2(w);
    double theta = std::atan2(s, c);
    if (s < 1e-14) {
        Vec v(m, 0.0);
        if (c < 0.0) v[0] = std::numbers::pi;  // antipode
        return v;
    }
    return (theta / s) * w;
}

inline Vec sphere_exp_north(const Vec& v) {
    const int m = static_cast<int>(v.size());
    double t = norm2(v);
    Vec x(m + 1, 0.0);
    x[m] = std::cos(t);
    if (t > 1e-14) {
        double s = std::sin(t) / t;
        for (int i = 0; i < m; ++i) x[i] = s * v[i];
    }
    return x;
}

}  // namespace detail

/// Boundary-to-basepoint map [0,1]^p -> S^q (q <= p): a rank-q cube quotient.
/// The first q-1 coordinates pass through; the q-th becomes
/// x_q * prod tent(x_i) over i >= q, so the whole cube boundary lands in the
/// quotient boundary before the sphere collapse.
inline MapSpec suspension_f1(int p, int q) {
    if (q > p || q < 1) throw InvalidInput("suspension_f1: need 1 <= q <= p");
    MapSpec cts = cube_to_sphere(q);
    if (p == q) return cts;
    MapSpec m;
    m.kind = "composite";
    m.params["p"] = p;
    m.params["q"] = q;
    m.domain = ChartDesc::rectangle_chart(std::vector<double>(p, 1.0));
    m.target = ChartDesc::sphere_chart(q);
    auto cts_eval = cts.eval;
    auto squash = [p, q](const Vec& x) {
        double t = 1.0;
        for (int i = q - 1; i < p; ++i) t *= std::min(2.0 * x[i], 2.0 - 2.0 * x[i]);
        Vec y(x.begin(), x.begin() + q);
        y[q - 1] = x[q - 1] * t;
        return y;
    };
    m.eval = [cts_eval, squash](const Vec& x) { return cts_eval(squash(x)); };
    m.lipschitz_bound = *cts.lipschitz_bound * 2.0 * p;
    auto cts_ns = cts.nonsmooth_loci;
    m.nonsmooth_loci.push_back({"collapse seams", [p, q, squash, cts_ns](const Vec& x) {
        double d = 1e300;
        for (int i = q - 1; i < p; ++i) d = std::min(d, std::fabs(x[i] - 0.5) / 2.0);
        Vec y = squash(x);
        for (const auto& l : cts_ns) d = std::min(d, l.distance(y) / (2.0 * p + 2.0));
        return d;
    }});
    return m;
}

/// The anisotropic-rectangle suspension representative: rescale f1 to
/// [0,eps]^p and f2 to the complementary long rectangle, embed the rectangle
/// in S^m by folding into a chart cube, apply f1 x f2 and a smash map; the
/// complement of the rectangle goes to the basepoint.
inline MapSpec suspension_family(int m, int p, int q, const MapSpec& f1, const MapSpec& f2,
                                 double eps) {
    if (!(p >= 1 && p < m)) throw InvalidInput("suspension_family: need 1 <= p < m");
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidInput("suspension_family: need 0 < eps < 1");
    const int mp = m - p;
    const double len = std::pow(eps, -static_cast<double>(p) / mp);
    std::vector<double> sides;
    for (int i = 0; i < p; ++i) sides.push_back(eps);
    for (int i = 0; i < mp; ++i) sides.push_back(len);
    const double c = 1.4 / std::sqrt(static_cast<double>(m));
    std::shared_ptr<RectEmbedding> emb;
    try {
        emb = std::make_shared<RectEmbedding>(build_rect_embedding(
            RectDims(sides), RectDims(std::vector<double>(m, 2.0 * c))));
    } catch (const InadmissibleRectangle& e) {
        throw ConfigError(std::string("suspension_family: ") + e.what());
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("suspension_family: ") + e.what());
    }

    MapSpec smash = smash_map(q, mp);
    auto smash_eval = smash.eval;
    auto f1_eval = f1.eval;
    auto f2_eval = f2.eval;
    const double margin = 0.05;  // collar near the rectangle boundary -> basepoint
    Vec basepoint(q + mp + 1, 0.0);
    basepoint[0] = -1.0;

    MapSpec out;
    out.kind = "suspension";
    out.params = {{"m", double(m)}, {"p", double(p)}, {"q", double(q)}, {"eps", eps}};
    out.domain = ChartDesc::sphere_chart(m);
    out.target = ChartDesc::sphere_chart(q + mp);
    if (f1.lipschitz_bound && f2.lipschitz_bound && smash.lipschitz_bound)
        out.lipschitz_bound = *smash.lipschitz_bound *
                              std::max(*f1.lipschitz_bound / eps, *f2.lipschitz_bound / len) /
                              (emb->min_sv_lower * (1.0 - 2.0 * margin));

    auto chart_of = [m, c, emb](const Vec& x) -> std::optional<Vec> {
        Vec v = detail::sphere_log_north(x);
        for (double vi : v)
            if (std::fabs(vi) > c) return std::nullopt;
        for (double& vi : v) vi += c;  // shift to [0, 2c]^m
        return emb->inverse(v);
    };
    auto declamp = [margin](double t) {
        return std::clamp((t - margin) / (1.0 - 2.0 * margin), 0.0, 1.0);
    };

    out.eval = [=](const Vec& x) -> Vec {
        auto u = chart_of(x);
        if (!u) return basepoint;
        Vec u1(p), u2(mp);
        for (int i = 0; i < p; ++i) u1[i] = declamp((*u)[i] / eps);
        for (int i = 0; i < mp; ++i) u2[i] = declamp((*u)[p + i] / len);
        Vec y1 = f1_eval(u1);
        Vec y2 = f2_eval(u2);
        y1.insert(y1.end(), y2.begin(), y2.end());
        return smash_eval(y1);
    };

    // seam distances, computed in rectangle coordinates and scaled
    // conservatively to sphere units
    double chart_min_stretch = std::sin(1.4) / 1.4;  // exp chart on the cube radius
    double to_sphere = 0.5 * chart_min_stretch * std::min(1.0, emb->min_sv_lower);
    auto f1_ns = f1.nonsmooth_loci;
    auto f2_ns = f2.nonsmooth_loci;
    out.nonsmooth_loci.push_back({"rectangle seams", [=](const Vec& x) -> double {
        auto u = chart_of(x);
        if (!u) return 1e300;  // constant (basepoint) region
        double d = emb->nonsmooth_distance(*u);
        for (int i = 0; i < p + mp; ++i) {
            double side = i < p ? eps : len;
            d = std::min(d, std::fabs((*u)[i] - margin * side));
            d = std::min(d, std::fabs((*u)[i] - (1.0 - margin) * side));
        }
        Vec u1(p), u2(mp);
        for (int i = 0; i < p; ++i) u1[i] = declamp((*u)[i] / eps);
        for (int i = 0; i < mp; ++i) u2[i] = declamp((*u)[p + i] / len);
        double inner = eps * (1.0 - 2.0 * margin);
        for (const auto& l : f1_ns) d = std::min(d, l.distance(u1) * inner);
        double inner2 = len * (1.0 - 2.0 * margin);
        for (const auto& l : f2_ns) d = std::min(d, l.distance(u2) * inner2);
        return d * to_sphere;
    }});
    return out;
}

/// Predicted log-log slope of Dil_k against eps for the suspension family.
inline double suspension_exponent(int m, int p, int q, int k) {
    if (p == m) throw InvalidInput("suspension_exponent: p = m division by zero");
    return (static_cast<double>(p) / (m - p)) * (k - static_cast<double>(q) * m / p);
}

}  // namespace kdl

#endif  // KDL_SUSPENSION_HPP
