#ifndef KDL_RECT_EMBED_HPP
#define KDL_RECT_EMBED_HPP

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>

#include "mapspec.hpp"

namespace kdl {

struct RectDims {
    std::vector<double> sides;  // ascending, all > 0

    explicit RectDims(std::vector<double> s) : sides(std::move(s)) {
        for (std::size_t i = 0; i < sides.size(); ++i) {
            if (sides[i] <= 0.0) throw InvalidInput("RectDims: sides must be positive");
            if (i > 0 && sides[i] < sides[i - 1])
                throw InvalidInput("RectDims: sides must be ascending");
        }
    }
    int dim() const { return static_cast<int>(sides.size()); }
};

struct InadmissibleRectangle : std::runtime_error {
    int prefix;
    InadmissibleRectangle(int p, const std::string& what) : std::runtime_error(what), prefix(p) {}
};

/// Serpentine fold of [0,w]x[0,h] into a box: K vertical runs of width a
/// joined by half-circle turns of centerline radius a.
struct Fold2D {
    double lambda = 1.0, w = 0, h = 0;
    double a = 0, y0 = 0, y1 = 0, ell = 0, period = 0;
    int runs = 0;
    double used_width = 0, box_h = 0;

    static constexpr double pi = std::numbers::pi;

    double capacity() const { return runs * ell + (runs - 1) * pi * a; }

    // centerline x of run j
    double cx(int j) const { return a / 2.0 + 2.0 * a * j; }

    /// Try to fit entirely within (wbox, hbox).  Returns a fold with
    /// box_h = hbox on success (case 1); nullopt if more runs are needed
    /// than the width allows.
    static std::optional<Fold2D> fit(double w, double h, double wbox, double hbox,
                                     double lambda) {
        Fold2D f;
        f.lambda = lambda;
        f.w = w;
        f.h = h;
        f.a = lambda * w;
        if (3.0 * f.a >= hbox || 2.0 * f.a > wbox + f.a) return std::nullopt;
        f.ell = hbox - 3.0 * f.a;
        f.period = f.ell + pi * f.a;
        int kreq = static_cast<int>(std::ceil((lambda * h + pi * f.a) / f.period - 1e-12));
        kreq = std::max(kreq, 1);
        int kmax = static_cast<int>(std::floor((wbox + f.a) / (2.0 * f.a) + 1e-12));
        if (kreq > kmax) return std::nullopt;
        f.runs = kreq;
        f.y0 = 1.5 * f.a;
        f.y1 = hbox - 1.5 * f.a;
        f.used_width = 2.0 * f.a * f.runs - f.a;
        f.box_h = hbox;
        return f;
    }

    /// Fill the width budget and let the height overshoot (case 2 of the
    /// induction): uses as many runs as fit in wbox, computes the height.
    static std::optional<Fold2D> fill_width(double w, double h, double wbox, double lambda) {
        Fold2D f;
        f.lambda = lambda;
        f.w = w;
        f.h = h;
        f.a = lambda * w;
        int kmax = static_cast<int>(std::floor((wbox + f.a) / (2.0 * f.a) + 1e-12));
        if (kmax < 1) return std::nullopt;
        f.runs = kmax;
        f.box_h = (lambda * h - (kmax - 1) * pi * f.a) / kmax + 3.0 * f.a;
        if (f.box_h < 3.0 * f.a + 1e-15) f.box_h = 3.0 * f.a + 1e-15;
        f.ell = f.box_h - 3.0 * f.a;
        f.period = f.ell + pi * f.a;
        f.y0 = 1.5 * f.a;
        f.y1 = f.box_h - 1.5 * f.a;
        f.used_width = 2.0 * f.a * f.runs - f.a;
        return f;
    }

    /// (u_w, u_l) in [0,w]x[0,h] -> (x, y)
    std::pair<double, double> forward(double uw, double ul) const {
        double d = lambda * uw - a / 2.0;
        double sigma = lambda * ul;
        int j = std::min(static_cast<int>(std::floor(sigma / period)), runs - 1);
        if (j < 0) j = 0;
        double rem = sigma - j * period;
        bool up = (j % 2 == 0);
        if (rem <= ell) {
            double y = up ? y0 + rem : y1 - rem;
            double x = up ? cx(j) - d : cx(j) + d;
            return {x, y};
        }
        double u = rem - ell;
        double ox = cx(j) + a;
        if (up) {  // top arc
            double phi = pi - u / a;
            return {ox + (a + d) * std::cos(phi), y1 + (a + d) * std::sin(phi)};
        }
        double phi = pi + u / a;  // bottom arc
        return {ox + (a - d) * std::cos(phi), y0 + (a - d) * std::sin(phi)};
    }

    /// columns: d(output)/d(uw), d(output)/d(ul)
    void jacobian(double uw, double ul, double j2[2][2]) const {
        double d = lambda * uw - a / 2.0;
        double sigma = lambda * ul;
        int j = std::min(static_cast<int>(std::floor(sigma / period)), runs - 1);
        if (j < 0) j = 0;
        double rem = sigma - j * period;
        bool up = (j % 2 == 0);
        if (rem <= ell) {
            j2[0][0] = up ? -lambda : lambda;  // dx/duw
            j2[1][0] = 0.0;
            j2[0][1] = 0.0;
            j2[1][1] = up ? lambda : -lambda;  // dy/dul
            return;
        }
        double u = rem - ell;
        if (up) {
            double phi = pi - u / a;
            j2[0][0] = lambda * std::cos(phi);
            j2[1][0] = lambda * std::sin(phi);
            double sp = lambda * (a + d) / a;
            j2[0][1] = sp * std::sin(phi);
            j2[1][1] = -sp * std::cos(phi);
            return;
        }
        double phi = pi + u / a;
        j2[0][0] = -lambda * std::cos(phi);
        j2[1][0] = -lambda * std::sin(phi);
        double sp = lambda * (a - d) / a;
        j2[0][1] = -sp * std::sin(phi);
        j2[1][1] = sp * std::cos(phi);
    }

    std::optional<std::pair<double, double>> inverse(double x, double y) const {
        const double tol = 1e-9 * std::max(1.0, box_h);
        double d, sigma;
        if (y >= y0 - tol && y <= y1 + tol) {
            double jr = std::round((x - a / 2.0) / (2.0 * a));
            int j = static_cast<int>(jr);
            if (j < 0 || j >= runs) return std::nullopt;
            bool up = (j % 2 == 0);
            d = up ? cx(j) - x : x - cx(j);
            if (std::fabs(d) > a / 2.0 + tol) return std::nullopt;
            double rem = up ? y - y0 : y1 - y;
            if (rem < -tol || rem > ell + tol) return std::nullopt;
            sigma = j * period + std::clamp(rem, 0.0, ell);
        } else {
            bool top = y > y1;
            int jj = static_cast<int>(std::floor((x - a / 2.0) / (2.0 * a)));
            bool found = false;
            d = sigma = 0.0;
            for (int j = jj - 2; j <= jj + 2 && !found; ++j) {
                if (j < 0 || j + 1 >= runs) continue;
                bool up = (j % 2 == 0);
                if (up != top) continue;
                double ox = cx(j) + a;
                double oy = top ? y1 : y0;
                double r = std::hypot(x - ox, y - oy);
                if (r < a / 2.0 - tol || r > 1.5 * a + tol) continue;
                double phi = std::atan2(y - oy, x - ox);
                double u;
                if (top) {
                    if (phi < -tol) continue;
                    u = (pi - std::clamp(phi, 0.0, pi)) * a;
                    d = r - a;
                } else {
                    if (phi > tol) continue;
                    u = (phi + 2.0 * pi - pi) * a;
                    d = a - r;
                }
                sigma = j * period + ell + u;
                found = true;
            }
            if (!found) return std::nullopt;
        }
        double uw = (d + a / 2.0) / lambda;
        double ul = sigma / lambda;
        if (uw < -tol || uw > w + tol || ul < -tol || ul > h + tol) return std::nullopt;
        return std::make_pair(std::clamp(uw, 0.0, w), std::clamp(ul, 0.0, h));
    }

    /// distance in the length coordinate to the nearest run/arc junction
    double junction_distance(double ul) const {
        double sigma = lambda * ul;
        double dmin = 1e300;
        for (int j = 0; j < runs; ++j) {
            dmin = std::min(dmin, std::fabs(sigma - j * period));
            dmin = std::min(dmin, std::fabs(sigma - (j * period + ell)));
        }
        return dmin / lambda;
    }
};

struct FoldStage {
    int axis_w, axis_l;
    Fold2D fold;
};

/// Injective locally-bilipschitz embedding of one rectangle into another,
/// built as a composition of 2D serpentine folds (largest violating side
/// folded against the largest available lower side).
struct RectEmbedding {
    std::vector<double> s_sides, r_sides;
    std::vector<FoldStage> stages;
    double min_sv_lower = 1.0;  // certified lower bound on every stretch factor
    double max_sv_upper = 1.0;

    int dim() const { return static_cast<int>(s_sides.size()); }

    Vec eval(Vec x) const {
        for (const auto& st : stages) {
            auto [px, py] = st.fold.forward(x[st.axis_w], x[st.axis_l]);
            x[st.axis_w] = px;
            x[st.axis_l] = py;
        }
        return x;
    }

    std::optional<Vec> inverse(Vec y) const {
        for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
            auto pre = it->fold.inverse(y[it->axis_w], y[it->axis_l]);
            if (!pre) return std::nullopt;
            y[it->axis_w] = pre->first;
            y[it->axis_l] = pre->second;
        }
        for (int i = 0; i < dim(); ++i) {
            double tol = 1e-9 * std::max(1.0, s_sides[i]);
            if (y[i] < -tol || y[i] > s_sides[i] + tol) return std::nullopt;
            y[i] = std::clamp(y[i], 0.0, s_sides[i]);
        }
        return y;
    }

    Mat jacobian(Vec x) const {
        const int n = dim();
        Mat j = Mat::identity(n);
        for (const auto& st : stages) {
            double b[2][2];
            st.fold.jacobian(x[st.axis_w], x[st.axis_l], b);
            Mat block = Mat::identity(n);
            block(st.axis_w, st.axis_w) = b[0][0];
            block(st.axis_w, st.axis_l) = b[0][1];
            block(st.axis_l, st.axis_w) = b[1][0];
            block(st.axis_l, st.axis_l) = b[1][1];
            j = block * j;
            auto [px, py] = st.fold.forward(x[st.axis_w], x[st.axis_l]);
            x[st.axis_w] = px;
            x[st.axis_l] = py;
        }
        return j;
    }

    /// conservative distance (in domain coordinates) to fold seams
    double nonsmooth_distance(Vec x) const {
        double dmin = 1e300, stretch = 1.0;
        for (const auto& st : stages) {
            dmin = std::min(dmin, st.fold.junction_distance(x[st.axis_l]) / stretch);
            stretch *= 1.5 * st.fold.lambda;
            if (stretch < 1.0) stretch = 1.0;
            auto [px, py] = st.fold.forward(x[st.axis_w], x[st.axis_l]);
            x[st.axis_w] = px;
            x[st.axis_l] = py;
        }
        return dmin;
    }
};

inline void check_admissible(const RectDims& s, const RectDims& r) {
    if (s.dim() != r.dim()) throw InvalidInput("rect_embed: dimension mismatch");
    double ps = 1.0, pr = 1.0;
    for (int p = 0; p < s.dim(); ++p) {
        ps *= s.sides[p];
        pr *= r.sides[p];
        if (pr < ps * (1.0 - 1e-12))
            throw InadmissibleRectangle(
                p + 1, "rect_embed: prefix product violated at prefix " + std::to_string(p + 1));
    }
}

inline RectEmbedding build_rect_embedding(const RectDims& s, const RectDims& r) {
    check_admissible(s, r);
    RectEmbedding e;
    e.s_sides = s.sides;
    e.r_sides = r.sides;
    const int n = s.dim();
    std::vector<double> cur = s.sides;
    std::vector<bool> frozen(n, false);

    auto push = [&](int b, int a, const Fold2D& f, bool freeze_b) {
        e.stages.push_back({b, a, f});
        cur[b] = f.used_width;
        cur[a] = f.box_h;
        if (freeze_b) frozen[b] = true;
        e.min_sv_lower *= f.lambda / 2.0;
        e.max_sv_upper *= 1.5 * f.lambda;
    };

    for (int iter = 0; iter < 4 * n + 4; ++iter) {
        int a = -1;
        for (int i = n - 1; i >= 0; --i)
            if (cur[i] > r.sides[i] * (1.0 + 1e-12)) {
                a = i;
                break;
            }
        if (a < 0) return e;
        int b = -1;
        for (int i = a - 1; i >= 0; --i)
            if (!frozen[i]) {
                b = i;
                break;
            }
        if (b < 0)
            throw InvalidInput("rect_embed: no free coordinate left to fold against");
        bool placed = false;
        for (double lam : {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2}) {
            auto f = Fold2D::fit(cur[b], cur[a], r.sides[b], r.sides[a], lam);
            if (f) {
                push(b, a, *f, false);
                placed = true;
                break;
            }
        }
        if (placed) continue;
        for (double lam : {0.5, 0.4, 0.3, 0.2, 0.1, 0.05}) {
            if (3.0 * lam * cur[b] >= r.sides[a]) continue;
            auto f = Fold2D::fill_width(cur[b], cur[a], r.sides[b], lam);
            if (f && f->box_h < cur[a]) {
                push(b, a, *f, true);
                placed = true;
                break;
            }
        }
        if (!placed) throw InvalidInput("rect_embed: folding failed to make progress");
    }
    throw InvalidInput("rect_embed: stage budget exceeded");
}

/// MapSpec wrapper around the fold construction.
inline MapSpec rect_embed(const RectDims& s, const RectDims& r) {
    auto emb = std::make_shared<RectEmbedding>(build_rect_embedding(s, r));
    MapSpec m;
    m.kind = "rect_embed";
    m.domain = ChartDesc::rectangle_chart(s.sides);
    m.target = ChartDesc::rectangle_chart(r.sides);
    m.lipschitz_bound = emb->max_sv_upper;
    m.eval = [emb](const Vec& x) { return emb->eval(x); };
    m.jac = [emb](const Vec& x) { return emb->jacobian(x); };
    if (!emb->stages.empty())
        m.nonsmooth_loci.push_back(
            {"fold seams", [emb](const Vec& x) { return emb->nonsmooth_distance(x); }});
    return m;
}

/// Measured local bilipschitz constant max(s_max, 1/s_min) over samples.
inline double measure_bilipschitz(const RectEmbedding& e, long samples, std::uint64_t seed) {
    Rng rng(seed);
    double worst = 1.0;
    for (long i = 0; i < samples; ++i) {
        Vec x(e.dim());
        for (int c = 0; c < e.dim(); ++c) x[c] = rng.uniform(0.0, e.s_sides[c]);
        auto sv = singular_values(e.jacobian(x));
        worst = std::max({worst, sv.front(), 1.0 / sv.back()});
    }
    return worst;
}

}  // namespace kdl

#endif  // KDL_RECT_EMBED_HPP
