#ifndef KDL_CHAIN_HPP
#define KDL_CHAIN_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace kdl {

enum class LatticeTag { primal, dual };

/// Axis-parallel face of the scale-s cubical lattice (or of its dual, whose
/// vertices sit at cube centers).  A primal face spans [s a_i, s(a_i+1)] on
/// its axes and sits at s a_i elsewhere; a dual face spans
/// [s(a_i-1/2), s(a_i+1/2)] on its axes and sits at s(a_i+1/2) elsewhere.
struct Face {
    double scale = 1.0;
    std::vector<long long> anchor;
    std::vector<int> axes;  // sorted, 0-based
    LatticeTag lattice = LatticeTag::primal;

    int dim() const { return static_cast<int>(axes.size()); }
    int ambient() const { return static_cast<int>(anchor.size()); }

    bool on_axis(int i) const {
        for (int a : axes)
            if (a == i) return true;
        return false;
    }

    void bounds(Vec& lo, Vec& hi) const {
        const int n = ambient();
        lo.resize(n);
        hi.resize(n);
        for (int i = 0; i < n; ++i) {
            double a = static_cast<double>(anchor[i]);
            if (lattice == LatticeTag::primal) {
                lo[i] = scale * a;
                hi[i] = on_axis(i) ? scale * (a + 1.0) : lo[i];
            } else {
                if (on_axis(i)) {
                    lo[i] = scale * (a - 0.5);
                    hi[i] = scale * (a + 0.5);
                } else {
                    lo[i] = hi[i] = scale * (a + 0.5);
                }
            }
        }
    }

    Vec center() const {
        Vec lo, hi;
        bounds(lo, hi);
        for (std::size_t i = 0; i < lo.size(); ++i) lo[i] = (lo[i] + hi[i]) / 2.0;
        return lo;
    }

    auto key() const { return std::tie(anchor, axes, lattice); }
    bool operator<(const Face& o) const { return key() < o.key(); }
    bool operator==(const Face& o) const { return key() == o.key(); }
};

/// Dual face through the same center: complementary axes, same anchor.
inline Face dual_face(const Face& f) {
    Face d = f;
    d.lattice = f.lattice == LatticeTag::primal ? LatticeTag::dual : LatticeTag::primal;
    d.axes.clear();
    for (int i = 0; i < f.ambient(); ++i)
        if (!f.on_axis(i)) d.axes.push_back(i);
    return d;
}

/// Mod-2 cubical chain: presence of a face means coefficient 1.
struct CubicalChain {
    double scale = 1.0;
    std::set<Face> faces;

    bool empty() const { return faces.empty(); }
    int dim() const { return faces.empty() ? -1 : faces.begin()->dim(); }

    void toggle(const Face& f) {
        auto it = faces.find(f);
        if (it == faces.end())
            faces.insert(f);
        else
            faces.erase(it);
    }

    CubicalChain operator+(const CubicalChain& o) const {  // mod-2 sum
        CubicalChain r = *this;
        for (const Face& f : o.faces) r.toggle(f);
        return r;
    }
};

inline CubicalChain boundary(const CubicalChain& c) {
    CubicalChain b;
    b.scale = c.scale;
    for (const Face& f : c.faces)
        for (int j : f.axes) {
            Face g = f;
            g.axes.clear();
            for (int a : f.axes)
                if (a != j) g.axes.push_back(a);
            b.toggle(g);
            Face h = g;
            h.anchor[j] += f.lattice == LatticeTag::primal ? 1 : -1;
            b.toggle(h);
        }
    return b;
}

/// Mod-2 PL chain of d-simplices with coordinates snapped to a fixed
/// quantum, so simplex identity (up to vertex reordering) is exact.
struct PLChain {
    int dim = 1;
    double quantum = 1e-9;
    using Key = std::vector<std::vector<long long>>;
    std::map<Key, std::vector<Vec>> simplices;

    static PLChain make(int dim, double scale) {
        PLChain c;
        c.dim = dim;
        c.quantum = 1e-9 * scale;
        return c;
    }

    bool empty() const { return simplices.empty(); }
    std::size_t size() const { return simplices.size(); }
    double scale() const { return quantum * 1e9; }

    Vec snap(const Vec& p) const {
        Vec q(p.size());
        for (std::size_t i = 0; i < p.size(); ++i)
            q[i] = quantum * std::llround(p[i] / quantum);
        return q;
    }

    static double simplex_volume(const std::vector<Vec>& pts) {
        const int d = static_cast<int>(pts.size()) - 1;
        if (d == 0) return 1.0;
        const int n = static_cast<int>(pts[0].size());
        Mat e(n, d);
        for (int c = 0; c < d; ++c)
            for (int r = 0; r < n; ++r) e(r, c) = pts[c + 1][r] - pts[0][r];
        Mat g = transpose(e) * e;
        // Cholesky-free determinant via Gaussian elimination
        double det = 1.0;
        for (int c = 0; c < d; ++c) {
            int piv = c;
            for (int r = c + 1; r < d; ++r)
                if (std::fabs(g(r, c)) > std::fabs(g(piv, c))) piv = r;
            if (g(piv, c) == 0.0) return 0.0;
            if (piv != c) {
                for (int k = 0; k < d; ++k) std::swap(g(piv, k), g(c, k));
                det = -det;
            }
            det *= g(c, c);
            for (int r = c + 1; r < d; ++r) {
                double f = g(r, c) / g(c, c);
                for (int k = c; k < d; ++k) g(r, k) -= f * g(c, k);
            }
        }
        double fact = 1.0;
        for (int i = 2; i <= d; ++i) fact *= i;
        return std::sqrt(std::max(0.0, det)) / fact;
    }

    void toggle(std::vector<Vec> pts) {
        if (static_cast<int>(pts.size()) != dim + 1)
            throw InvalidInput("PLChain: wrong simplex arity");
        for (Vec& p : pts) p = snap(p);
        double tol = 1e-12;
        for (int i = 0; i < dim; ++i) tol *= scale();
        if (simplex_volume(pts) <= tol) return;  // degenerate: drop
        Key k;
        for (const Vec& p : pts) {
            std::vector<long long> v(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) v[i] = std::llround(p[i] / quantum);
            k.push_back(std::move(v));
        }
        std::sort(k.begin(), k.end());
        auto it = simplices.find(k);
        if (it == simplices.end())
            simplices.emplace(std::move(k), std::move(pts));
        else
            simplices.erase(it);
    }

    PLChain operator+(const PLChain& o) const {  // mod-2 sum
        if (dim != o.dim) throw InvalidInput("PLChain: dimension mismatch in sum");
        PLChain r = *this;
        for (const auto& [k, pts] : o.simplices) r.toggle(pts);
        return r;
    }

    int ambient() const {
        return simplices.empty() ? 0 : static_cast<int>(simplices.begin()->second[0].size());
    }

    void bounding_box(Vec& lo, Vec& hi) const {
        lo.assign(ambient(), 1e300);
        hi.assign(ambient(), -1e300);
        for (const auto& [k, pts] : simplices)
            for (const Vec& p : pts)
                for (std::size_t i = 0; i < p.size(); ++i) {
                    lo[i] = std::min(lo[i], p[i]);
                    hi[i] = std::max(hi[i], p[i]);
                }
    }
};

inline PLChain boundary(const PLChain& c) {
    PLChain b;
    b.dim = c.dim - 1;
    b.quantum = c.quantum;
    if (c.dim == 0) return b;
    for (const auto& [k, pts] : c.simplices)
        for (std::size_t drop = 0; drop < pts.size(); ++drop) {
            std::vector<Vec> facet;
            for (std::size_t i = 0; i < pts.size(); ++i)
                if (i != drop) facet.push_back(pts[i]);
            b.toggle(facet);
        }
    return b;
}

/// Cubical faces as PL simplices (d <= 2).
inline PLChain as_pl(const CubicalChain& c) {
    PLChain out = PLChain::make(std::max(c.dim(), 0), c.scale);
    for (const Face& f : c.faces) {
        Vec lo, hi;
        f.bounds(lo, hi);
        if (f.dim() == 0) {
            out.toggle({lo});
        } else if (f.dim() == 1) {
            out.toggle({lo, hi});
        } else if (f.dim() == 2) {
            int a0 = f.axes[0], a1 = f.axes[1];
            Vec p00 = lo, p10 = lo, p01 = lo, p11 = lo;
            p10[a0] = hi[a0];
            p01[a1] = hi[a1];
            p11[a0] = hi[a0];
            p11[a1] = hi[a1];
            out.toggle({p00, p10, p11});
            out.toggle({p00, p11, p01});
        } else {
            throw InvalidInput("as_pl: cubical faces of dimension > 2 unsupported");
        }
    }
    return out;
}

struct Ball {
    Vec center;
    double radius = 1.0;
};

/// Either a plain coordinate tuple J or a split (a,b,c) over declared
/// factor dimensions.
struct DirectionIndex {
    std::vector<int> J;  // sorted, 0-based
    bool split = false;
    std::array<int, 3> abc{0, 0, 0};
    std::array<int, 3> factor_dims{0, 0, 0};

    static DirectionIndex tuple(std::vector<int> j) {
        DirectionIndex d;
        std::sort(j.begin(), j.end());
        for (std::size_t i = 1; i < j.size(); ++i)
            if (j[i] == j[i - 1]) throw InvalidInput("DirectionIndex: repeated coordinate");
        d.J = std::move(j);
        return d;
    }
    static DirectionIndex split_abc(int a, int b, int c, int na, int nb, int nc) {
        DirectionIndex d;
        d.split = true;
        d.abc = {a, b, c};
        d.factor_dims = {na, nb, nc};
        if (a < 0 || b < 0 || c < 0 || a > na || b > nb || c > nc)
            throw InvalidInput("DirectionIndex: split degrees out of range");
        return d;
    }
    int degree() const { return split ? abc[0] + abc[1] + abc[2] : static_cast<int>(J.size()); }
};

}  // namespace kdl

#endif  // KDL_CHAIN_HPP
