#include <catch2/catch_amalgamated.hpp>

#include "kdl/deform.hpp"
#include "kdl/rng.hpp"
#include "kdl/volume.hpp"

using namespace kdl;

namespace {

/// closed star-shaped polygon in a random plane of R^n (n = 2 or 3)
PLChain random_cycle(Rng& rng, int n) {
    int k = 5 + static_cast<int>(rng.below(5));
    std::vector<double> ang;
    for (int i = 0; i < k; ++i) ang.push_back(rng.uniform(0.0, 6.2831853));
    std::sort(ang.begin(), ang.end());
    Vec u = rng.on_sphere(n);
    Vec v = rng.on_sphere(n);
    v = v - dot(v, u) * u;
    if (norm2(v) < 0.1) v = Vec(n, 0.0), v[(n + 1) % n] = 1.0, v = v - dot(v, u) * u;
    v = normalized(v);
    Vec c(n);
    for (int i = 0; i < n; ++i) c[i] = rng.uniform(-0.5, 0.5);
    std::vector<Vec> pts;
    for (int i = 0; i < k; ++i) {
        double r = rng.uniform(0.5, 1.4);
        Vec p = c;
        for (int j = 0; j < n; ++j)
            p[j] += r * (std::cos(ang[i]) * u[j] + std::sin(ang[i]) * v[j]);
        pts.push_back(p);
    }
    PLChain z = PLChain::make(1, 1.0);
    for (int i = 0; i < k; ++i) z.toggle({pts[i], pts[(i + 1) % k]});
    return z;
}

Vec small_vec(Rng& rng, int n, double maxnorm) {
    Vec v = rng.on_sphere(n);
    return rng.uniform(0.05, maxnorm) * v;
}

PLChain translated(const PLChain& t, const Vec& u) {
    PLChain r = PLChain::make(t.dim, t.scale());
    for (const auto& [key, pts] : t.simplices) {
        std::vector<Vec> moved = pts;
        for (Vec& p : moved) p = p + u;
        r.toggle(moved);
    }
    return r;
}

}  // namespace

TEST_CASE("deforming a single lattice face returns that face") {
    Rng rng(401);
    // edges in R^2 and R^3
    for (int n : {2, 3}) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<long long> a(n);
            for (auto& x : a) x = static_cast<long long>(rng.below(5)) - 2;
            std::vector<int> axes{static_cast<int>(rng.below(static_cast<std::uint64_t>(n)))};
            Face f{1.0, a, axes, LatticeTag::primal};
            CubicalChain one;
            one.scale = 1.0;
            one.toggle(f);
            Vec v = small_vec(rng, n, 0.45);
            CubicalChain d = deform(as_pl(one), v, 1.0);
            REQUIRE(d.faces.size() == 1);
            REQUIRE(*d.faces.begin() == f);
        }
    }
    // a 2-face in R^3
    Face sq{1.0, {0, 0, 0}, {0, 1}, LatticeTag::primal};
    CubicalChain onesq;
    onesq.scale = 1.0;
    onesq.toggle(sq);
    for (int trial = 0; trial < 10; ++trial) {
        Vec v = small_vec(rng, 3, 0.45);
        CubicalChain d = deform(as_pl(onesq), v, 1.0);
        REQUIRE(d.faces.size() == 1);
        REQUIRE(*d.faces.begin() == sq);
    }
    // empty input
    REQUIRE(deform(PLChain::make(1, 1.0), {0.1, 0.1}, 1.0).empty());
}

TEST_CASE("deformation commutes with the boundary on random cycles") {
    Rng rng(402);
    for (int n : {2, 3}) {
        for (int trial = 0; trial < 15; ++trial) {
            PLChain z = random_cycle(rng, n);
            Vec v = small_vec(rng, n, 0.45);
            CubicalChain d = deform(z, v, 1.0);
            REQUIRE(boundary(d).empty());          // ∂ D_v(z)
            REQUIRE(deform(boundary(z), v, 1.0).empty());  // D_v(∂z), ∂z = 0
        }
    }
}

TEST_CASE("deformation commutes with the boundary on open chains") {
    Rng rng(403);
    for (int trial = 0; trial < 15; ++trial) {
        // open polyline in R^2
        PLChain t = PLChain::make(1, 1.0);
        Vec p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (int s = 0; s < 4; ++s) {
            Vec q{rng.uniform(-2, 2), rng.uniform(-2, 2)};
            t.toggle({p, q});
            p = q;
        }
        Vec v = small_vec(rng, 2, 0.45);
        CubicalChain lhs = boundary(deform(t, v, 1.0));
        CubicalChain rhs = deform(boundary(t), v, 1.0);
        REQUIRE(lhs.faces == rhs.faces);
    }
}

TEST_CASE("cubical cycles at small shift are fixed by the deformation") {
    Rng rng(404);
    for (int trial = 0; trial < 10; ++trial) {
        // boundary of a random block of squares in R^2
        CubicalChain block;
        block.scale = 1.0;
        for (int i = 0; i < 3; ++i)
            block.toggle(Face{1.0,
                              {static_cast<long long>(rng.below(3)), static_cast<long long>(rng.below(3))},
                              {0, 1},
                              LatticeTag::primal});
        CubicalChain z = boundary(block);
        if (z.empty()) continue;
        Vec v = small_vec(rng, 2, 0.45);
        CubicalChain d = deform(as_pl(z), v, 1.0);
        REQUIRE(d.faces == z.faces);
    }
}

TEST_CASE("homotopy chain closes the deformation") {
    Rng rng(405);
    for (int n : {2, 3}) {
        for (int trial = 0; trial < 8; ++trial) {
            PLChain z = random_cycle(rng, n);
            Vec v = small_vec(rng, n, 0.45);
            DeformHomology h = deform_homology(z, v, 1.0);
            REQUIRE(h.chain.dim == 2);
            // ∂A_v = z + D_v(z), exactly mod 2 up to refinement
            PLChain target = z + as_pl(h.image);
            REQUIRE(chains_equal_mod2(boundary(h.chain), target, 1e-6));
            REQUIRE(h.collar_constant <= 10.0 * n);
        }
    }
}

TEST_CASE("homotopy chain of a cubical cycle has empty boundary") {
    Rng rng(406);
    CubicalChain sq;
    sq.scale = 1.0;
    sq.toggle(Face{1.0, {0, 0}, {0, 1}, LatticeTag::primal});
    PLChain z = as_pl(boundary(sq));
    for (int trial = 0; trial < 8; ++trial) {
        Vec v = small_vec(rng, 2, 0.45);
        DeformHomology h = deform_homology(z, v, 1.0);
        REQUIRE(h.image.faces == boundary(sq).faces);  // D_v(z) = z
        PLChain empty1 = PLChain::make(1, 1.0);
        REQUIRE(chains_equal_mod2(boundary(h.chain), empty1, 1e-6));
    }
    // non-cycles are rejected
    PLChain open1 = PLChain::make(1, 1.0);
    open1.toggle({Vec{0.0, 0.0}, Vec{1.0, 0.3}});
    REQUIRE_THROWS_AS(deform_homology(open1, {0.1, 0.1}, 1.0), InvalidInput);
    // empty input passes through
    REQUIRE(deform_homology(PLChain::make(1, 1.0), {0.1, 0.1}, 1.0).chain.empty());
}

TEST_CASE("identity bending reduces to the plain deformation") {
    Rng rng(407);
    for (int trial = 0; trial < 8; ++trial) {
        PLChain z = random_cycle(rng, 2);
        BendingMapRep rep;
        rep.scale = 1.0;
        auto cands = candidate_faces(z, 1, 1.0, 1.5);
        rep.support.assign(cands.begin(), cands.end());
        rep.image_of_dual = [](const Face& f) {
            CubicalChain c;
            c.scale = f.scale;
            c.toggle(dual_face(f));
            return as_pl(c);
        };
        CubicalChain bent = deform_bent(z, rep, 1.0);
        CubicalChain plain = deform(z, Vec{0.0, 0.0}, 1.0);
        REQUIRE(bent.faces == plain.faces);
        REQUIRE(boundary(bent).empty());
    }
    REQUIRE(deform_bent(PLChain::make(1, 1.0), BendingMapRep{}, 1.0).empty());
}

TEST_CASE("bent deformation commutes with the boundary") {
    Rng rng(408);
    for (int trial = 0; trial < 8; ++trial) {
        // open polyline and a translation bending
        PLChain t = PLChain::make(1, 1.0);
        Vec p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (int s = 0; s < 3; ++s) {
            Vec q{rng.uniform(-2, 2), rng.uniform(-2, 2)};
            t.toggle({p, q});
            p = q;
        }
        Vec u = small_vec(rng, 2, 0.4);
        BendingMapRep rep;
        rep.scale = 1.0;
        auto c1 = candidate_faces(t, 1, 1.0, 1.5);
        auto c0 = candidate_faces(t, 0, 1.0, 1.5);
        rep.support.assign(c1.begin(), c1.end());
        rep.support.insert(rep.support.end(), c0.begin(), c0.end());
        rep.image_of_dual = [u](const Face& f) {
            CubicalChain c;
            c.scale = f.scale;
            c.toggle(dual_face(f));
            PLChain img = as_pl(c);
            PLChain moved = PLChain::make(img.dim, img.scale());
            for (const auto& [key, pts] : img.simplices) {
                std::vector<Vec> m = pts;
                for (Vec& q : m) q = q + u;
                moved.toggle(m);
            }
            return moved;
        };
        CubicalChain lhs = boundary(deform_bent(t, rep, 1.0));
        CubicalChain rhs = deform_bent(boundary(t), rep, 1.0);
        REQUIRE(lhs.faces == rhs.faces);
        // the translation bending equals the translated deformation
        REQUIRE(deform_bent(t, rep, 1.0).faces == deform(t, u, 1.0).faces);
    }
}

TEST_CASE("homotopy chain between two translations") {
    Rng rng(409);
    for (int trial = 0; trial < 10; ++trial) {
        PLChain z = random_cycle(rng, 2);
        Vec v1 = small_vec(rng, 2, 0.45);
        Vec v2 = small_vec(rng, 2, 0.45);
        BendingHomotopyRep h;
        h.scale = 1.0;
        auto cands = candidate_faces(z, 2, 1.0, 2.0);
        h.support.assign(cands.begin(), cands.end());
        h.track_of_dual = [v1, v2](const Face& g) {
            Vec c = dual_face(g).center();
            PLChain trk = PLChain::make(1, g.scale);
            trk.toggle({c + v1, c + v2});
            return trk;
        };
        CubicalChain d12 = homotopy_chain(z, h, 1.0);
        CubicalChain sum = deform(z, v1, 1.0) + deform(z, v2, 1.0);
        REQUIRE(boundary(d12).faces == sum.faces);
    }
    // constant homotopy: empty tracks, empty chain, empty boundary sum
    PLChain z = random_cycle(rng, 2);
    BendingHomotopyRep h;
    h.scale = 1.0;
    auto cands = candidate_faces(z, 2, 1.0, 2.0);
    h.support.assign(cands.begin(), cands.end());
    h.track_of_dual = [](const Face& g) { return PLChain::make(1, g.scale); };
    REQUIRE(homotopy_chain(z, h, 1.0).empty());
    REQUIRE(homotopy_chain(PLChain::make(1, 1.0), h, 1.0).empty());
}

TEST_CASE("mod-2 chain comparison is refinement invariant") {
    PLChain a = PLChain::make(1, 1.0);
    a.toggle({Vec{0.0, 0.0}, Vec{2.0, 0.0}});
    a.toggle({Vec{2.0, 0.0}, Vec{2.0, 1.0}});
    PLChain b = PLChain::make(1, 1.0);
    b.toggle({Vec{0.0, 0.0}, Vec{0.7, 0.0}});
    b.toggle({Vec{0.7, 0.0}, Vec{2.0, 0.0}});
    b.toggle({Vec{2.0, 0.0}, Vec{2.0, 0.4}});
    b.toggle({Vec{2.0, 0.4}, Vec{2.0, 1.0}});
    REQUIRE(chains_equal_mod2(a, b, 1e-9));
    // overlapping double cover cancels
    PLChain c = b;
    c.toggle({Vec{0.0, 0.0}, Vec{2.0, 0.0}});
    PLChain tail = PLChain::make(1, 1.0);
    tail.toggle({Vec{2.0, 0.0}, Vec{2.0, 1.0}});
    REQUIRE(chains_equal_mod2(c, tail, 1e-9));
    // genuinely different chains are detected
    PLChain d = a;
    d.toggle({Vec{5.0, 5.0}, Vec{6.0, 5.0}});
    REQUIRE_FALSE(chains_equal_mod2(a, d, 1e-9));
    REQUIRE_FALSE(chains_equal_mod2(a, translated(a, {0.01, 0.0}), 1e-6));
    // 0-chains
    PLChain pa = PLChain::make(0, 1.0);
    pa.toggle({Vec{0.5, 0.5}});
    PLChain pb = PLChain::make(0, 1.0);
    pb.toggle({Vec{0.5, 0.5 + 1e-8}});
    REQUIRE(chains_equal_mod2(pa, pb, 1e-6));
    REQUIRE_FALSE(chains_equal_mod2(pa, PLChain::make(0, 1.0), 1e-6));
}

TEST_CASE("deformation volume expansion is bounded on average") {
    Rng rng(410);
    PLChain z = random_cycle(rng, 2);
    double base = chain_volume(z);
    double total = 0.0;
    int count = 0;
    for (int trial = 0; trial < 200; ++trial) {
        Vec v = small_vec(rng, 2, 0.49);
        CubicalChain d = deform(z, v, 1.0);
        total += chain_volume(as_pl(d));
        ++count;
    }
    double mean = total / count;
    INFO("mean deformed volume " << mean << " vs base " << base);
    REQUIRE(mean <= 20.0 * base);  // empirical constant, recorded by the suite
}
