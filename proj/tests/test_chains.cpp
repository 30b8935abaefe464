#include <catch2/catch_amalgamated.hpp>

#include "kdl/chain.hpp"
#include "kdl/intersect.hpp"
#include "kdl/rng.hpp"
#include "kdl/volume.hpp"

using namespace kdl;

namespace {

PLChain segment_chain(std::vector<std::array<Vec, 2>> segs, double scale = 1.0) {
    PLChain c = PLChain::make(1, scale);
    for (auto& s : segs) c.toggle({s[0], s[1]});
    return c;
}

/// closed star-shaped polygon around a given center
PLChain random_polygon(Rng& rng, const Vec& center, double rmin, double rmax) {
    int k = 5 + static_cast<int>(rng.below(6));
    std::vector<double> ang;
    for (int i = 0; i < k; ++i) ang.push_back(rng.uniform(0.0, 6.2831853));
    std::sort(ang.begin(), ang.end());
    std::vector<Vec> pts;
    for (int i = 0; i < k; ++i) {
        double r = rng.uniform(rmin, rmax);
        pts.push_back({center[0] + r * std::cos(ang[i]), center[1] + r * std::sin(ang[i])});
    }
    PLChain c = PLChain::make(1, 1.0);
    for (int i = 0; i < k; ++i) c.toggle({pts[i], pts[(i + 1) % k]});
    return c;
}

}  // namespace

TEST_CASE("simplicial boundary counts facets mod 2") {
    PLChain tri = PLChain::make(2, 1.0);
    tri.toggle({Vec{0, 0}, Vec{1, 0}, Vec{0, 1}});
    REQUIRE(boundary(tri).size() == 3);

    PLChain two = tri;
    two.toggle({Vec{1, 0}, Vec{0, 1}, Vec{1, 1}});
    REQUIRE(two.size() == 2);
    REQUIRE(boundary(two).size() == 4);  // the shared edge cancels

    // adding the same simplex twice cancels it
    PLChain z = two;
    z.toggle({Vec{1, 0}, Vec{0, 1}, Vec{1, 1}});
    REQUIRE(z.size() == 1);

    // degenerate simplices are dropped on insertion
    PLChain deg = PLChain::make(2, 1.0);
    deg.toggle({Vec{0, 0}, Vec{1, 1}, Vec{2, 2}});
    REQUIRE(deg.empty());
}

TEST_CASE("boundary of a boundary vanishes for random chains") {
    Rng rng(301);
    for (int dim : {2, 3}) {
        PLChain c = PLChain::make(dim, 1.0);
        int amb = dim + 1;
        for (int s = 0; s < 20; ++s) {
            std::vector<Vec> pts;
            for (int v = 0; v <= dim; ++v) {
                Vec p(amb);
                for (int i = 0; i < amb; ++i) p[i] = rng.uniform(-2.0, 2.0);
                pts.push_back(p);
            }
            c.toggle(pts);
        }
        REQUIRE(boundary(boundary(c)).empty());
    }
}

TEST_CASE("cubical boundary and its square") {
    CubicalChain sq;
    sq.scale = 1.0;
    sq.toggle(Face{1.0, {0, 0}, {0, 1}, LatticeTag::primal});
    CubicalChain b = boundary(sq);
    REQUIRE(b.faces.size() == 4);
    REQUIRE(boundary(b).empty());

    // random cubical 2-chains in R^3, primal and dual
    Rng rng(302);
    for (LatticeTag tag : {LatticeTag::primal, LatticeTag::dual}) {
        CubicalChain c;
        c.scale = 0.5;
        for (int t = 0; t < 30; ++t) {
            std::vector<long long> a{static_cast<long long>(rng.below(4)),
                                     static_cast<long long>(rng.below(4)),
                                     static_cast<long long>(rng.below(4))};
            int skip = static_cast<int>(rng.below(3));
            std::vector<int> axes;
            for (int i = 0; i < 3; ++i)
                if (i != skip) axes.push_back(i);
            c.toggle(Face{0.5, a, axes, tag});
        }
        REQUIRE(boundary(boundary(c)).empty());
    }
}

TEST_CASE("dual faces share the center and complement the axes") {
    // N=2: horizontal unit edge from (0,0) to (1,0)
    Face e{1.0, {0, 0}, {0}, LatticeTag::primal};
    Face d = dual_face(e);
    REQUIRE(d.axes == std::vector<int>{1});
    Vec lo, hi;
    d.bounds(lo, hi);
    REQUIRE(lo == Vec{0.5, -0.5});
    REQUIRE(hi == Vec{0.5, 0.5});

    // N=3 vertex face becomes the dual 3-cube centered at that vertex
    Face v{2.0, {1, -2, 3}, {}, LatticeTag::primal};
    Face dv = dual_face(v);
    REQUIRE(dv.dim() == 3);
    REQUIRE(dv.center() == v.center());
    REQUIRE(dv.center() == Vec{2.0, -4.0, 6.0});

    // centers agree and the involution returns the original axes
    Rng rng(303);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 2 + static_cast<int>(rng.below(3));
        std::vector<long long> a(n);
        for (auto& x : a) x = static_cast<long long>(rng.below(9)) - 4;
        std::vector<int> axes;
        for (int i = 0; i < n; ++i)
            if (rng.u01() < 0.5) axes.push_back(i);
        Face f{0.25 * (1.0 + static_cast<double>(rng.below(8))), a, axes, LatticeTag::primal};
        Face g = dual_face(f);
        Vec cf = f.center(), cg = g.center();
        for (int i = 0; i < n; ++i) REQUIRE(cf[i] == Catch::Approx(cg[i]).margin(1e-15));
        Face h = dual_face(g);
        REQUIRE(h.axes == f.axes);
        REQUIRE(h.anchor == f.anchor);
        REQUIRE(h.lattice == f.lattice);
    }
}

TEST_CASE("rectangle-chain intersection counts mod 2") {
    // vertical segment x=0.5, y in [-0.5, 0.5] meets a horizontal segment
    AxisRect r{{0.5, -0.5}, {0.5, 0.5}};
    PLChain t = segment_chain({{Vec{0.2, 0.2}, Vec{0.8, 0.2}}});
    auto res = intersect_count(r, t);
    REQUIRE(res.value == 1);
    REQUIRE(res.transverse);

    // far-apart pieces
    PLChain far = segment_chain({{Vec{5.0, 5.0}, Vec{6.0, 5.0}}});
    res = intersect_count(r, far);
    REQUIRE(res.value == 0);
    REQUIRE(res.transverse);

    // a rectangle spanning a closed loop is crossed an even number of times
    Rng rng(304);
    for (int trial = 0; trial < 25; ++trial) {
        PLChain loop = random_polygon(rng, {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)}, 0.4, 1.1);
        AxisRect line{{rng.uniform(-0.3, 0.3), -50.0}, {0.0, 50.0}};
        line.hi[0] = line.lo[0];
        auto c = intersect_count(line, loop);
        if (!c.transverse) continue;  // a vertex happened to sit on the line
        REQUIRE(c.value == 0);
    }

    // non-complementary dimensions rejected
    AxisRect square{{0.0, 0.0}, {1.0, 1.0}};
    REQUIRE_THROWS_AS(intersect_count(square, t), InvalidInput);

    // an intersection near the rectangle end flags non-transversality
    AxisRect shortr{{0.5, 0.2 - 1e-12}, {0.5, 1.0}};
    res = intersect_count(shortr, t, 1e-9);
    REQUIRE_FALSE(res.transverse);
}

TEST_CASE("chain-chain intersection counts mod 2") {
    PLChain a = segment_chain({{Vec{0.0, 0.0}, Vec{1.0, 1.0}}});
    PLChain b = segment_chain({{Vec{0.0, 1.0}, Vec{1.0, 0.0}}});
    auto res = intersect_count(a, b);
    REQUIRE(res.value == 1);
    REQUIRE(res.transverse);

    // segment through a triangle in R^3
    PLChain tri = PLChain::make(2, 1.0);
    tri.toggle({Vec{0, 0, 0}, Vec{1, 0, 0}, Vec{0, 1, 0}});
    PLChain seg = PLChain::make(1, 1.0);
    seg.toggle({Vec{0.2, 0.2, -1.0}, Vec{0.2, 0.2, 1.0}});
    res = intersect_count(tri, seg);
    REQUIRE(res.value == 1);
    REQUIRE(res.transverse);

    // missing the triangle
    PLChain seg2 = PLChain::make(1, 1.0);
    seg2.toggle({Vec{0.9, 0.9, -1.0}, Vec{0.9, 0.9, 1.0}});
    res = intersect_count(tri, seg2);
    REQUIRE(res.value == 0);

    // a generic loop meets a long chord an even number of times
    Rng rng(305);
    for (int trial = 0; trial < 25; ++trial) {
        PLChain loop = random_polygon(rng, {0.0, 0.0}, 0.4, 1.1);
        double ang = rng.uniform(0.0, 3.14);
        Vec dir{std::cos(ang), std::sin(ang)};
        PLChain chord = segment_chain({{Vec{-3.0 * dir[0], -3.0 * dir[1]}, Vec{3.0 * dir[0], 3.0 * dir[1]}}});
        auto c = intersect_count(chord, loop);
        if (!c.transverse) continue;
        REQUIRE(c.value == 0);
    }
}

TEST_CASE("directed volumes of axis-aligned and tilted chains") {
    // unit square in the (x,y)-plane inside R^3
    CubicalChain sq;
    sq.scale = 1.0;
    sq.toggle(Face{1.0, {0, 0, 0}, {0, 1}, LatticeTag::primal});
    PLChain sqp = as_pl(sq);
    REQUIRE(directed_volume(sqp, DirectionIndex::tuple({0, 1})) == Catch::Approx(1.0));
    REQUIRE(directed_volume(sqp, DirectionIndex::tuple({0, 2})) == Catch::Approx(0.0).margin(1e-12));

    // tilted segment
    PLChain diag = segment_chain({{Vec{0.0, 0.0}, Vec{1.0, 1.0}}});
    REQUIRE(directed_volume(diag, DirectionIndex::tuple({0})) == Catch::Approx(1.0));
    REQUIRE(directed_volume(diag, DirectionIndex::tuple({1})) == Catch::Approx(1.0));

    REQUIRE_THROWS_AS(directed_volume(diag, DirectionIndex::tuple({0, 1})), InvalidInput);
}

TEST_CASE("split-form directed volume agrees with tuple form in pure factors") {
    Rng rng(306);
    for (int trial = 0; trial < 30; ++trial) {
        PLChain c = PLChain::make(2, 1.0);
        for (int s = 0; s < 5; ++s) {
            std::vector<Vec> pts;
            for (int v = 0; v < 3; ++v)
                pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1)});
            c.toggle(pts);
        }
        // factors A = {0,1}, B = {2}, C = {3}; degree (2,0,0) only sees A
        double split = directed_volume(c, DirectionIndex::split_abc(2, 0, 0, 2, 1, 1));
        double tup = directed_volume(c, DirectionIndex::tuple({0, 1}));
        REQUIRE(split == Catch::Approx(tup).margin(1e-10));
        // degree (1,1,0): sup over unit covectors = sqrt of sum of squares
        double mixed = directed_volume(c, DirectionIndex::split_abc(1, 1, 0, 2, 1, 1));
        double lower = std::max(directed_volume(c, DirectionIndex::tuple({0, 2})),
                                directed_volume(c, DirectionIndex::tuple({1, 2})));
        REQUIRE(mixed >= lower - 1e-10);
    }
}

TEST_CASE("directed volumes bracket the mass") {
    Rng rng(307);
    for (int n : {2, 3}) {
        for (int d : {1, 2}) {
            if (d > n) continue;
            PLChain c = PLChain::make(d, 1.0);
            for (int s = 0; s < 8; ++s) {
                std::vector<Vec> pts;
                for (int v = 0; v <= d; ++v) {
                    Vec p(n);
                    for (int i = 0; i < n; ++i) p[i] = rng.uniform(-2, 2);
                    pts.push_back(p);
                }
                c.toggle(pts);
            }
            double mass = chain_volume(c);
            std::vector<std::vector<int>> subs;
            detail::subsets_of_size(n, d, subs);
            double sum = 0.0;
            for (const auto& j : subs) {
                double vj = directed_volume(c, DirectionIndex::tuple(j));
                REQUIRE(vj <= mass + 1e-9);  // projections contract
                sum += vj;
            }
            REQUIRE(mass <= sum + 1e-9);
            REQUIRE(sum <= static_cast<double>(subs.size()) * mass + 1e-9);
        }
    }
}

TEST_CASE("product linear maps obey the split dilation bound") {
    Rng rng(308);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 20; ++trial) {
        // block-diagonal map on R^4 = R^2 x R^1 x R^1
        Mat a(2, 2), b(1, 1), c(1, 1);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) a(i, j) = rng.uniform(-2, 2);
        b(0, 0) = rng.uniform(-2, 2);
        c(0, 0) = rng.uniform(-2, 2);
        // fine snapping quantum so vertex rounding stays far below the slack
        PLChain t = PLChain::make(2, 1e-3);
        for (int s = 0; s < 4; ++s) {
            std::vector<Vec> pts;
            for (int v = 0; v < 3; ++v)
                pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1)});
            t.toggle(pts);
        }
        PLChain ft = PLChain::make(2, 1e-3);
        for (const auto& [key, pts] : t.simplices) {
            std::vector<Vec> img;
            for (const Vec& p : pts) {
                Vec q(4);
                q[0] = a(0, 0) * p[0] + a(0, 1) * p[1];
                q[1] = a(1, 0) * p[0] + a(1, 1) * p[1];
                q[2] = b(0, 0) * p[2];
                q[3] = c(0, 0) * p[3];
                img.push_back(q);
            }
            ft.toggle(img);
        }
        if (ft.size() != t.size()) continue;  // an image simplex degenerated
        ++checked;
        auto dil = [](const Mat& m, int k) {
            auto sv = singular_values(m);
            double p = 1.0;
            for (int i = 0; i < k; ++i) p *= sv[i];
            return p;
        };
        for (auto [da, db, dc] : std::vector<std::array<int, 3>>{{1, 1, 0}, {1, 0, 1}, {2, 0, 0}, {0, 1, 1}}) {
            DirectionIndex dir = DirectionIndex::split_abc(da, db, dc, 2, 1, 1);
            double lhs = directed_volume(ft, dir);
            double rhs = dil(a, da) * dil(b, db) * dil(c, dc) * directed_volume(t, dir);
            REQUIRE(lhs <= rhs + 1e-9);
        }
    }
    REQUIRE(checked >= 15);
}

TEST_CASE("hausdorff content covers") {
    // single point
    auto single = hausdorff_content(std::vector<Vec>{{0.3, 0.7}}, 1);
    REQUIRE(single.bound == 0.0);

    // unit segment: one ball of radius 1/2 suffices
    std::vector<Vec> seg;
    for (int i = 0; i <= 100; ++i) seg.push_back({static_cast<double>(i) / 100.0, 0.0});
    auto segc = hausdorff_content(seg, 1);
    REQUIRE(segc.bound <= 0.5 + 1e-3);
    // the reported balls really cover the sample
    for (const Vec& p : seg) {
        bool inside = false;
        for (const Ball& b : segc.balls)
            if (dist2(p, b.center) <= b.radius + 1e-12) inside = true;
        REQUIRE(inside);
    }

    // 100-point circle sample
    std::vector<Vec> circ;
    for (int i = 0; i < 100; ++i) {
        double a = 6.2831853 * i / 100.0;
        circ.push_back({std::cos(a), std::sin(a)});
    }
    auto cc = hausdorff_content(circ, 1);
    REQUIRE(cc.bound <= 3.14159265 * 1.2);
    // exhaustive small-cover oracle on the sample: best 1- or 2-center cover
    double oracle = 1e300;
    for (std::size_t i = 0; i < circ.size(); ++i) {
        double r1 = 0.0;
        for (const Vec& p : circ) r1 = std::max(r1, dist2(circ[i], p));
        oracle = std::min(oracle, r1);
        for (std::size_t j = i + 1; j < circ.size(); ++j) {
            double r2 = 0.0;
            for (const Vec& p : circ) r2 = std::max(r2, std::min(dist2(circ[i], p), dist2(circ[j], p)));
            oracle = std::min(oracle, 2.0 * r2);
        }
    }
    // the ladder bound cannot beat the exhaustive optimum by construction,
    // and must come within the ladder's factor-2 granularity of it
    REQUIRE(cc.bound <= 2.0 * oracle + 1e-9);
}

TEST_CASE("thick regions via exact clipping") {
    // unit square, ball centered on it
    CubicalChain sqc;
    sqc.scale = 1.0;
    sqc.toggle(Face{1.0, {0, 0}, {0, 1}, LatticeTag::primal});
    PLChain sq = as_pl(sqc);
    REQUIRE(thick_region(sq, 0.5, Ball{{0.5, 0.5}, 1.0}));
    REQUIRE_FALSE(thick_region(sq, 0.5, Ball{{10.0, 10.0}, 1.0}));
    REQUIRE_THROWS_AS(thick_region(sq, 0.0, Ball{{0.5, 0.5}, 1.0}), InvalidInput);

    // disk fully inside the square: clipped area is exactly pi r^2
    double rho = 0.25;
    double inside = detail::clipped_volume(sq, Ball{{0.5, 0.5}, rho});
    REQUIRE(inside == Catch::Approx(3.14159265358979 * rho * rho).epsilon(1e-9));
    // square fully inside a big ball
    REQUIRE(detail::clipped_volume(sq, Ball{{0.5, 0.5}, 3.0}) == Catch::Approx(1.0));
    // Monte-Carlo cross-check of a partial overlap
    Ball half{{0.0, 0.5}, 0.6};
    double exact = detail::clipped_volume(sq, half);
    Rng rng(309);
    int in = 0, total = 200000;
    for (int i = 0; i < total; ++i) {
        Vec p{rng.u01(), rng.u01()};
        if (dist2(p, half.center) <= half.radius) ++in;
    }
    REQUIRE(exact == Catch::Approx(static_cast<double>(in) / total).margin(5e-3));

    // 1-chains: segment clipping
    PLChain segch = segment_chain({{Vec{-2.0, 0.0}, Vec{2.0, 0.0}}});
    REQUIRE(detail::clipped_volume(segch, Ball{{0.0, 0.0}, 1.0}) == Catch::Approx(2.0));
    REQUIRE(detail::clipped_volume(segch, Ball{{0.0, 0.8}, 1.0}) == Catch::Approx(1.2));
}

TEST_CASE("thick covers satisfy the Vitali bound") {
    Rng rng(310);
    for (int trial = 0; trial < 10; ++trial) {
        PLChain y = PLChain::make(2, 1.0);
        for (int s = 0; s < 6; ++s) {
            std::vector<Vec> pts;
            for (int v = 0; v < 3; ++v) pts.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
            y.toggle(pts);
        }
        if (y.empty()) continue;
        double alpha = rng.uniform(0.2, 0.8);
        auto cover = thick_cover(y, alpha);
        double sum = 0.0;
        for (const Ball& b : cover) sum += b.radius * b.radius;
        double vol = chain_volume(y);
        REQUIRE(sum <= 25.0 / alpha * vol + 1e-9);
        // the undilated balls were genuinely thick and disjoint
        for (std::size_t i = 0; i < cover.size(); ++i) {
            Ball raw{cover[i].center, cover[i].radius / 5.0};
            REQUIRE(thick_region(y, alpha, raw));
            for (std::size_t j = i + 1; j < cover.size(); ++j)
                REQUIRE(dist2(cover[i].center, cover[j].center) >=
                        (cover[i].radius + cover[j].radius) / 5.0 - 1e-12);
        }
    }
    REQUIRE_THROWS_AS(thick_cover(PLChain::make(2, 1.0), -1.0), InvalidInput);
}

TEST_CASE("perpendicularity check reports a witness") {
    PLChain zx = segment_chain({{Vec{0.0, 0.0}, Vec{1.0, 0.0}}});
    PLChain wy = segment_chain({{Vec{0.0, 0.0}, Vec{0.0, 1.0}}});
    auto rep = perpendicular_check(zx, wy, 1e-9);
    REQUIRE(rep.ok);

    PLChain d1 = segment_chain({{Vec{0.0, 0.0}, Vec{1.0, 1.0}}});
    PLChain d2 = segment_chain({{Vec{0.0, 1.0}, Vec{1.0, 0.0}}});
    rep = perpendicular_check(d1, d2, 1e-9);
    REQUIRE_FALSE(rep.ok);
    REQUIRE_FALSE(rep.witness.empty());
    REQUIRE(rep.worst == Catch::Approx(1.0));
}
