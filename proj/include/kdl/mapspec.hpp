#ifndef KDL_MAPSPEC_HPP
#define KDL_MAPSPEC_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "linalg.hpp"
#include "rng.hpp"

namespace kdl {

struct BoundaryProximity : std::runtime_error {
    explicit BoundaryProximity(const std::string& what) : std::runtime_error(what) {}
};

/// Domain/target chart descriptors.  Points are always passed in ambient
/// coordinates (a sphere point is its unit vector in R^{d+1}).
struct ChartDesc {
    enum class Kind { rectangle, sphere, sphere_product, tube, euclidean, ball };
    Kind kind = Kind::rectangle;
    std::vector<double> sides;  // rectangle / euclidean sampling box
    int d1 = 0, d2 = 0;         // sphere dim; product dims (q, r); tube (p, m-p)
    double radius = 1.0;        // sphere scale, tube core radius delta, ball radius

    static ChartDesc rectangle_chart(std::vector<double> sides) {
        ChartDesc c;
        c.kind = Kind::rectangle;
        c.sides = std::move(sides);
        return c;
    }
    static ChartDesc sphere_chart(int d, double radius = 1.0) {
        ChartDesc c;
        c.kind = Kind::sphere;
        c.d1 = d;
        c.radius = radius;
        return c;
    }
    static ChartDesc sphere_product_chart(int q, int r) {
        ChartDesc c;
        c.kind = Kind::sphere_product;
        c.d1 = q;
        c.d2 = r;
        return c;
    }
    static ChartDesc tube_chart(int p, int ball_dim, double delta) {
        ChartDesc c;
        c.kind = Kind::tube;
        c.d1 = p;
        c.d2 = ball_dim;
        c.radius = delta;
        return c;
    }
    static ChartDesc euclidean_chart(std::vector<double> box) {
        ChartDesc c;
        c.kind = Kind::euclidean;
        c.sides = std::move(box);
        return c;
    }
    static ChartDesc ball_chart(int d, double radius) {
        ChartDesc c;
        c.kind = Kind::ball;
        c.d1 = d;
        c.radius = radius;
        return c;
    }

    int dim() const {
        switch (kind) {
            case Kind::rectangle:
            case Kind::euclidean: return static_cast<int>(sides.size());
            case Kind::sphere: return d1;
            case Kind::sphere_product: return d1 + d2;
            case Kind::tube: return d1 + d2;
            case Kind::ball: return d1;
        }
        return 0;
    }

    int ambient_dim() const {
        switch (kind) {
            case Kind::rectangle:
            case Kind::euclidean: return static_cast<int>(sides.size());
            case Kind::sphere: return d1 + 1;
            case Kind::sphere_product: return d1 + d2 + 2;
            case Kind::tube: return d1 + 1 + d2;
            case Kind::ball: return d1;
        }
        return 0;
    }

    Vec sample(Rng& rng) const {
        switch (kind) {
            case Kind::rectangle:
            case Kind::euclidean: {
                Vec x(sides.size());
                for (std::size_t i = 0; i < sides.size(); ++i) x[i] = rng.uniform(0.0, sides[i]);
                return x;
            }
            case Kind::sphere: return radius * rng.on_sphere(d1 + 1);
            case Kind::sphere_product: {
                Vec a = rng.on_sphere(d1 + 1), b = rng.on_sphere(d2 + 1);
                a.insert(a.end(), b.begin(), b.end());
                return a;
            }
            case Kind::tube: {
                Vec a = radius * rng.on_sphere(d1 + 1);
                Vec b = rng.in_ball(d2, 1.0);
                a.insert(a.end(), b.begin(), b.end());
                return a;
            }
            case Kind::ball: return rng.in_ball(d1, radius);
        }
        return {};
    }

    /// Distance from an interior point to the chart boundary (infinity when none).
    double boundary_distance(const Vec& x) const {
        double d = 1e300;
        switch (kind) {
            case Kind::rectangle:
                for (std::size_t i = 0; i < sides.size(); ++i)
                    d = std::min({d, x[i], sides[i] - x[i]});
                return d;
            case Kind::tube: {
                double r2 = 0.0;
                for (int i = d1 + 1; i < d1 + 1 + d2; ++i) r2 += x[i] * x[i];
                return 1.0 - std::sqrt(r2);
            }
            case Kind::ball: return radius - norm2(x);
            default: return d;
        }
    }
};

namespace detail {

/// Orthonormal tangent frame of S^d (radius r) at x: Gram–Schmidt of the
/// coordinate directions with the most-aligned axis dropped.
inline std::vector<Vec> sphere_frame(const Vec& x) {
    const int n = static_cast<int>(x.size());
    int drop = 0;
    for (int i = 1; i < n; ++i)
        if (std::fabs(x[i]) > std::fabs(x[drop])) drop = i;
    Vec u = normalized(x);
    std::vector<Vec> frame;
    for (int i = 0; i < n; ++i) {
        if (i == drop) continue;
        Vec e(n, 0.0);
        e[i] = 1.0;
        Vec t = e - dot(e, u) * u;
        for (const Vec& f : frame) t = t - dot(t, f) * f;
        double tn = norm2(t);
        if (tn < 1e-10) continue;
        frame.push_back((1.0 / tn) * t);
    }
    return frame;
}

}  // namespace detail

/// Orthonormal frame of intrinsic tangent directions, in ambient coordinates.
inline std::vector<Vec> tangent_frame(const ChartDesc& c, const Vec& x) {
    const int amb = c.ambient_dim();
    auto axis = [amb](int i) {
        Vec e(amb, 0.0);
        e[i] = 1.0;
        return e;
    };
    switch (c.kind) {
        case ChartDesc::Kind::rectangle:
        case ChartDesc::Kind::euclidean:
        case ChartDesc::Kind::ball: {
            std::vector<Vec> f;
            for (int i = 0; i < amb; ++i) f.push_back(axis(i));
            return f;
        }
        case ChartDesc::Kind::sphere: return detail::sphere_frame(x);
        case ChartDesc::Kind::sphere_product:
        case ChartDesc::Kind::tube: {
            const int a1 = c.d1 + 1;
            Vec xs(x.begin(), x.begin() + a1);
            std::vector<Vec> f;
            for (const Vec& t : detail::sphere_frame(xs)) {
                Vec e(amb, 0.0);
                for (int i = 0; i < a1; ++i) e[i] = t[i];
                f.push_back(e);
            }
            if (c.kind == ChartDesc::Kind::sphere_product) {
                Vec xr(x.begin() + a1, x.end());
                for (const Vec& t : detail::sphere_frame(xr)) {
                    Vec e(amb, 0.0);
                    for (std::size_t i = 0; i < xr.size(); ++i) e[a1 + i] = t[i];
                    f.push_back(e);
                }
            } else {
                for (int i = a1; i < amb; ++i) f.push_back(axis(i));
            }
            return f;
        }
    }
    return {};
}

/// Step along a tangent direction, staying on the chart (geodesic on spheres).
inline Vec chart_step(const ChartDesc& c, const Vec& x, const Vec& dir, double t) {
    switch (c.kind) {
        case ChartDesc::Kind::rectangle:
        case ChartDesc::Kind::euclidean:
        case ChartDesc::Kind::ball: return x + t * dir;
        case ChartDesc::Kind::sphere: {
            double r = norm2(x);
            Vec u = (1.0 / r) * x;
            double a = t / r;
            return r * (std::cos(a) * u + std::sin(a) * dir);
        }
        case ChartDesc::Kind::sphere_product:
        case ChartDesc::Kind::tube: {
            const int a1 = c.d1 + 1;
            Vec xs(x.begin(), x.begin() + a1), ds(dir.begin(), dir.begin() + a1);
            Vec out = x;
            double dsn = norm2(ds);
            if (dsn > 1e-14) {
                double r = norm2(xs);
                Vec u = (1.0 / r) * xs;
                Vec dhat = (1.0 / dsn) * ds;
                double a = t * dsn / r;
                Vec moved = r * (std::cos(a) * u + std::sin(a) * dhat);
                for (int i = 0; i < a1; ++i) out[i] = moved[i];
            }
            for (std::size_t i = a1; i < x.size(); ++i) out[i] = x[i] + t * dir[i];
            return out;
        }
    }
    return x;
}

struct NonsmoothLocus {
    std::string name;
    std::function<double(const Vec&)> distance;  // >= 0, in domain coordinates
};

/// An evaluatable map between charts, with optional analytic ambient Jacobian
/// and declared non-smooth loci.
struct MapSpec {
    std::string kind;
    std::map<std::string, double> params;
    ChartDesc domain, target;
    std::optional<double> lipschitz_bound;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jac;  // ambient: target_amb x domain_amb
    std::vector<NonsmoothLocus> nonsmooth_loci;

    bool has_jacobian() const { return static_cast<bool>(jac); }

    double nonsmooth_distance(const Vec& x) const {
        double d = 1e300;
        for (const auto& l : nonsmooth_loci) d = std::min(d, l.distance(x));
        return d;
    }

    Vec operator()(const Vec& x) const { return eval(x); }
};

/// Central-difference Jacobian in orthonormal tangent frames of domain and
/// target.  Errors when the stencil would straddle the chart boundary or a
/// declared non-smooth locus.
inline Mat finite_difference_jacobian(const MapSpec& map, const Vec& point, double h) {
    if (map.domain.boundary_distance(point) < h)
        throw BoundaryProximity("finite_difference_jacobian: point within h of chart boundary");
    if (map.nonsmooth_distance(point) < h)
        throw BoundaryProximity("finite_difference_jacobian: point within h of non-smooth locus");
    auto dframe = tangent_frame(map.domain, point);
    Vec fx = map.eval(point);
    std::vector<Vec> tframe;
    bool project = map.target.kind == ChartDesc::Kind::sphere ||
                   map.target.kind == ChartDesc::Kind::sphere_product ||
                   map.target.kind == ChartDesc::Kind::tube;
    if (project) tframe = tangent_frame(map.target, fx);
    const int rows = project ? static_cast<int>(tframe.size()) : map.target.ambient_dim();
    Mat out(rows, static_cast<int>(dframe.size()));
    for (std::size_t j = 0; j < dframe.size(); ++j) {
        Vec fp = map.eval(chart_step(map.domain, point, dframe[j], h));
        Vec fm = map.eval(chart_step(map.domain, point, dframe[j], -h));
        Vec col = (1.0 / (2.0 * h)) * (fp - fm);
        for (int i = 0; i < rows; ++i)
            out(i, static_cast<int>(j)) = project ? dot(tframe[i], col) : col[i];
    }
    return out;
}

/// Analytic Jacobian (when present) expressed in the same tangent frames as
/// finite_difference_jacobian; falls back to finite differences.
inline Mat jacobian_in_frames(const MapSpec& map, const Vec& point, double h = 1e-5) {
    if (!map.has_jacobian()) return finite_difference_jacobian(map, point, h);
    Mat ja = map.jac(point);
    auto dframe = tangent_frame(map.domain, point);
    Vec fx = map.eval(point);
    std::vector<Vec> tframe;
    bool project = map.target.kind == ChartDesc::Kind::sphere ||
                   map.target.kind == ChartDesc::Kind::sphere_product ||
                   map.target.kind == ChartDesc::Kind::tube;
    if (project) tframe = tangent_frame(map.target, fx);
    const int rows = project ? static_cast<int>(tframe.size()) : map.target.ambient_dim();
    Mat out(rows, static_cast<int>(dframe.size()));
    for (std::size_t j = 0; j < dframe.size(); ++j) {
        Vec col = ja * dframe[j];
        for (int i = 0; i < rows; ++i)
            out(i, static_cast<int>(j)) = project ? dot(tframe[i], col) : col[i];
    }
    return out;
}

struct SamplerSpec {
    long density = 500;
    std::uint64_t seed = 1;
    int refinement_rounds = 3;
    double h = 1e-5;
};

struct DilationEstimate {
    int k = 1;
    double value = 0.0;
    Vec argmax_point;
    long sample_count = 0;
    std::string method = "refined";
};

namespace detail {

inline bool lex_less(const Vec& a, const Vec& b) {
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return a.size() < b.size();
}

}  // namespace detail

/// Sampled sup of the pointwise k-dilation: quasi-random base pass plus
/// refinement rounds shrinking a box around the running argmax by 4x.
/// Deterministic given the seed; a lower bound on the true sup.
inline DilationEstimate sampled_k_dilation(const MapSpec& map, const SamplerSpec& sampler, int k) {
    const double band = 10.0 * sampler.h;
    DilationEstimate est;
    est.k = k;
    est.method = sampler.refinement_rounds > 0 ? "refined" : "grid";
    Rng rng(sampler.seed);

    auto consider = [&](const Vec& x) {
        if (map.domain.boundary_distance(x) < band) return;
        if (map.nonsmooth_distance(x) < band) return;
        Mat j = jacobian_in_frames(map, x, sampler.h);
        double v = local_k_dilation(JacobianSample::from(x, j), k);
        ++est.sample_count;
        if (est.argmax_point.empty() || v > est.value ||
            (v == est.value && detail::lex_less(x, est.argmax_point)))
            est.value = v, est.argmax_point = x;
    };

    // base pass
    if (map.domain.kind == ChartDesc::Kind::rectangle ||
        map.domain.kind == ChartDesc::Kind::euclidean) {
        for (long i = 0; i < sampler.density; ++i) {
            Vec u = halton_point(static_cast<std::uint64_t>(i) + sampler.seed % 1024,
                                 map.domain.dim());
            Vec x(u.size());
            for (std::size_t c = 0; c < u.size(); ++c) x[c] = u[c] * map.domain.sides[c];
            consider(x);
        }
    } else {
        for (long i = 0; i < sampler.density; ++i) consider(map.domain.sample(rng));
    }
    if (est.sample_count == 0)
        throw ConfigError("sampled_k_dilation: empty sample set after exclusions");

    // refinement around the argmax
    double radius;
    if (map.domain.kind == ChartDesc::Kind::rectangle ||
        map.domain.kind == ChartDesc::Kind::euclidean) {
        radius = 0.0;
        for (double s : map.domain.sides) radius = std::max(radius, s);
        radius /= 4.0;
    } else {
        radius = 0.4;
    }
    for (int r = 0; r < sampler.refinement_rounds; ++r) {
        Vec center = est.argmax_point;
        Rng rr = rng.fork(static_cast<std::uint64_t>(r) + 101);
        auto frame = tangent_frame(map.domain, center);
        for (long i = 0; i < sampler.density; ++i) {
            Vec d = rr.in_ball(static_cast<int>(frame.size()), radius);
            Vec x = center;
            for (std::size_t c = 0; c < frame.size(); ++c)
                x = chart_step(map.domain, x, frame[c], d[c]);
            if (map.domain.kind == ChartDesc::Kind::rectangle) {
                bool inside = true;
                for (std::size_t c = 0; c < x.size(); ++c)
                    inside = inside && x[c] > 0.0 && x[c] < map.domain.sides[c];
                if (!inside) continue;
            }
            consider(x);
        }
        radius /= 4.0;
    }
    return est;
}

/// Convenience: composition g . f as a MapSpec (charts must be compatible).
inline MapSpec compose(const MapSpec& g, const MapSpec& f) {
    MapSpec m;
    m.kind = "composite";
    m.domain = f.domain;
    m.target = g.target;
    if (f.lipschitz_bound && g.lipschitz_bound)
        m.lipschitz_bound = *f.lipschitz_bound * *g.lipschitz_bound;
    auto fe = f.eval, ge = g.eval;
    m.eval = [fe, ge](const Vec& x) { return ge(fe(x)); };
    if (f.jac && g.jac) {
        auto fj = f.jac, gj = g.jac;
        m.jac = [fe, fj, gj](const Vec& x) { return gj(fe(x)) * fj(x); };
    }
    m.nonsmooth_loci = f.nonsmooth_loci;
    for (const auto& l : g.nonsmooth_loci) {
        auto le = l.distance;
        // distance through f is not metric-exact; use it as a conservative proxy
        m.nonsmooth_loci.push_back({l.name + "(pulled back)",
                                    [fe, le](const Vec& x) { return le(fe(x)); }});
    }
    return m;
}

}  // namespace kdl

#endif  // KDL_MAPSPEC_HPP
