#include <catch2/catch_amalgamated.hpp>

#include "kdl/rect_embed.hpp"
#include "kdl/retraction.hpp"
#include "kdl/squeeze.hpp"
#include "kdl/suspension.hpp"
#include "kdl/tube.hpp"

using namespace kdl;

TEST_CASE("serpentine fold covers the strip reversibly") {
    auto f = Fold2D::fit(1.0, 4.0, 2.0, 2.0, 0.5);
    REQUIRE(f);
    REQUIRE(f->runs == 2);
    REQUIRE(f->used_width <= 2.0 + 1e-12);
    for (int i = 0; i <= 40; ++i)
        for (int j = 0; j <= 160; ++j) {
            double uw = i / 40.0, ul = 4.0 * j / 160.0;
            auto [x, y] = f->forward(uw, ul);
            REQUIRE(x >= -1e-9);
            REQUIRE(x <= 2.0 + 1e-9);
            REQUIRE(y >= -1e-9);
            REQUIRE(y <= 2.0 + 1e-9);
            auto back = f->inverse(x, y);
            REQUIRE(back);
            REQUIRE(std::fabs(back->first - uw) < 1e-7);
            REQUIRE(std::fabs(back->second - ul) < 1e-7);
        }
}

TEST_CASE("serpentine fold jacobian matches finite differences") {
    auto f = Fold2D::fit(1.0, 4.0, 2.0, 2.0, 0.5);
    REQUIRE(f);
    Rng rng(21);
    const double h = 1e-7;
    int done = 0;
    while (done < 200) {
        double uw = rng.uniform(0.01, 0.99), ul = rng.uniform(0.01, 3.99);
        if (f->junction_distance(ul) < 1e-3) continue;
        double j[2][2];
        f->jacobian(uw, ul, j);
        auto [xp, yp] = f->forward(uw + h, ul);
        auto [xm, ym] = f->forward(uw - h, ul);
        REQUIRE(std::fabs((xp - xm) / (2 * h) - j[0][0]) < 1e-6);
        REQUIRE(std::fabs((yp - ym) / (2 * h) - j[1][0]) < 1e-6);
        auto [xp2, yp2] = f->forward(uw, ul + h);
        auto [xm2, ym2] = f->forward(uw, ul - h);
        REQUIRE(std::fabs((xp2 - xm2) / (2 * h) - j[0][1]) < 1e-6);
        REQUIRE(std::fabs((yp2 - ym2) / (2 * h) - j[1][1]) < 1e-6);
        Mat m(2, 2);
        m(0, 0) = j[0][0];
        m(0, 1) = j[0][1];
        m(1, 0) = j[1][0];
        m(1, 1) = j[1][1];
        auto sv = singular_values(m);
        REQUIRE(sv[0] <= 0.75 + 1e-12);
        REQUIRE(sv[1] >= 0.25 - 1e-12);
        ++done;
    }
}

TEST_CASE("serpentine fold is continuous across junctions") {
    auto f = Fold2D::fit(1.0, 4.0, 2.0, 2.0, 0.5);
    REQUIRE(f);
    double junction = f->ell / f->lambda;  // end of the first straight run
    for (double uw : {0.1, 0.5, 0.9}) {
        auto [xa, ya] = f->forward(uw, junction - 1e-9);
        auto [xb, yb] = f->forward(uw, junction + 1e-9);
        REQUIRE(std::hypot(xa - xb, ya - yb) < 1e-7);
        double arc_end = (f->ell + Fold2D::pi * f->a) / f->lambda;
        auto [xc, yc] = f->forward(uw, arc_end - 1e-9);
        auto [xd, yd] = f->forward(uw, arc_end + 1e-9);
        REQUIRE(std::hypot(xc - xd, yc - yd) < 1e-7);
    }
}

TEST_CASE("rectangle embedding is the identity when the box already fits") {
    auto e = build_rect_embedding(RectDims({1.0, 2.0}), RectDims({2.0, 3.0}));
    REQUIRE(e.stages.empty());
    Vec x{0.3, 1.7};
    REQUIRE(e.eval(x) == x);
    REQUIRE(e.min_sv_lower == 1.0);
}

TEST_CASE("rectangle embedding folds a long strip with small distortion") {
    auto e = build_rect_embedding(RectDims({1.0, 4.0}), RectDims({2.0, 2.0}));
    REQUIRE(e.stages.size() == 1);
    for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 80; ++j) {
            Vec x{i / 20.0, 4.0 * j / 80.0};
            Vec y = e.eval(x);
            REQUIRE(y[0] >= -1e-9);
            REQUIRE(y[0] <= 2.0 + 1e-9);
            REQUIRE(y[1] >= -1e-9);
            REQUIRE(y[1] <= 2.0 + 1e-9);
            auto back = e.inverse(y);
            REQUIRE(back);
            REQUIRE(std::fabs((*back)[0] - x[0]) < 1e-7);
            REQUIRE(std::fabs((*back)[1] - x[1]) < 1e-7);
        }
    REQUIRE(measure_bilipschitz(e, 2000, 31) <= 10.0);
}

TEST_CASE("rectangle embedding handles three dimensions") {
    auto e = build_rect_embedding(RectDims({1.0, 1.0, 8.0}), RectDims({2.0, 2.0, 2.0}));
    Rng rng(22);
    for (int trial = 0; trial < 500; ++trial) {
        Vec x{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 8.0)};
        Vec y = e.eval(x);
        for (int c = 0; c < 3; ++c) {
            REQUIRE(y[c] >= -1e-9);
            REQUIRE(y[c] <= 2.0 + 1e-9);
        }
        auto back = e.inverse(y);
        REQUIRE(back);
        for (int c = 0; c < 3; ++c) REQUIRE(std::fabs((*back)[c] - x[c]) < 1e-6);
    }
}

TEST_CASE("inadmissible rectangles are rejected with the failing prefix") {
    try {
        build_rect_embedding(RectDims({3.0, 3.0}), RectDims({2.0, 100.0}));
        FAIL("expected rejection");
    } catch (const InadmissibleRectangle& e) {
        REQUIRE(e.prefix == 1);
    }
    try {
        build_rect_embedding(RectDims({1.0, 50.0}), RectDims({2.0, 3.0}));
        FAIL("expected rejection");
    } catch (const InadmissibleRectangle& e) {
        REQUIRE(e.prefix == 2);
    }
    REQUIRE_THROWS_AS(rect_embed(RectDims({3.0, 3.0}), RectDims({2.0, 100.0})),
                      InadmissibleRectangle);
}

TEST_CASE("tube scaling stage balances the k smallest stretches") {
    MapSpec s = tube_scaling_stage(5, 1, 3, 16.0);
    Rng rng(23);
    Vec x = s.domain.sample(rng);
    auto sv = singular_values(jacobian_in_frames(s, x));
    REQUIRE(smallest_k_product(sv, s.domain.dim(), 3) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("thick tube meets its expansion and radius budget") {
    TubeParams t = TubeParams::from_delta(3, 1, 2, 1e-6);
    REQUIRE(t.lambda == Catch::Approx(1000.0));
    MapSpec m = thick_tube(t);
    REQUIRE(m.params.at("radius_bound") == Catch::Approx(10.0));
    double worst_radius = 0.0;
    double prod = expansion_certificate(m, 2, 400, 41, &worst_radius);
    REQUIRE(prod >= 1.0 - 1e-9);
    REQUIRE(worst_radius <= 10.0);

    TubeParams t5 = TubeParams::from_lambda(5, 1, 3, 16.0);
    MapSpec m5 = thick_tube(t5);
    double worst5 = 0.0;
    double prod5 = expansion_certificate(m5, 3, 200, 42, &worst5);
    REQUIRE(prod5 >= 1.0 - 1e-9);
    REQUIRE(worst5 <= m5.params.at("radius_bound") + 1e-9);
}

TEST_CASE("thick tube rejects shallow codimension") {
    REQUIRE_THROWS_AS(TubeParams::from_lambda(4, 1, 2, 8.0), InvalidInput);
    REQUIRE_THROWS_AS(TubeParams::from_lambda(3, 1, 1, 8.0), InvalidInput);
}

TEST_CASE("thick tube jacobian matches finite differences") {
    TubeParams t = TubeParams::from_lambda(3, 1, 2, 4.0);
    MapSpec m = thick_tube(t);
    Rng rng(24);
    int done = 0;
    while (done < 25) {
        Vec x = m.domain.sample(rng);
        if (m.domain.boundary_distance(x) < 1e-3) continue;
        if (m.nonsmooth_distance(x) < 1e-3) continue;
        Mat ja = jacobian_in_frames(m, x);
        Mat jf = finite_difference_jacobian(m, x, 1e-7);
        double diff = 0.0, scale = 1.0;
        for (int i = 0; i < ja.rows; ++i)
            for (int j = 0; j < ja.cols; ++j) {
                diff = std::max(diff, std::fabs(ja(i, j) - jf(i, j)));
                scale = std::max(scale, std::fabs(ja(i, j)));
            }
        REQUIRE(diff < 1e-4 * scale);
        ++done;
    }
}

TEST_CASE("periodic retraction fixes the skeleton and hits the dual skeleton") {
    for (auto [n, k] : std::vector<std::pair<int, int>>{{2, 2}, {3, 2}, {3, 3}}) {
        PeriodicRetraction r(n, k, 0.1);
        Rng rng(25);
        int near_checked = 0, far_checked = 0;
        for (int trial = 0; trial < 400000 && (near_checked < 40 || far_checked < 300);
             ++trial) {
            Vec y(n);
            for (int i = 0; i < n; ++i) y[i] = rng.uniform(0.0, 2.0);
            double d = r.skeleton_distance(y);
            if (d < 0.05 - 1e-12) {
                REQUIRE(r.eval(y) == y);
                ++near_checked;
            } else if (d >= 0.1) {
                REQUIRE(r.on_dual_skeleton(r.eval(y), 1e-9));
                ++far_checked;
            }
        }
        REQUIRE(near_checked >= 40);
        REQUIRE(far_checked >= 100);
        // integer periodicity
        Vec y(n, 0.3);
        y[n - 1] = 0.77;
        Vec a = r.eval(y);
        for (int i = 0; i < n; ++i) y[i] += 1.0;
        Vec b = r.eval(y);
        for (int i = 0; i < n; ++i) REQUIRE(b[i] - 1.0 == Catch::Approx(a[i]).margin(1e-12));
    }
}

TEST_CASE("periodic retraction jacobian matches finite differences") {
    MapSpec m = periodic_retraction(3, 2, 0.12);
    PeriodicRetraction r(3, 2, 0.12);
    Rng rng(26);
    int done = 0;
    while (done < 60) {
        Vec y{rng.uniform(0.1, 1.9), rng.uniform(0.1, 1.9), rng.uniform(0.1, 1.9)};
        if (r.nonsmooth_distance(y) < 2e-3) continue;
        Mat ja = r.jacobian(y);
        Mat jf = finite_difference_jacobian(m, y, 1e-7);
        double diff = 0.0, scale = 1.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                diff = std::max(diff, std::fabs(ja(i, j) - jf(i, j)));
                scale = std::max(scale, std::fabs(ja(i, j)));
            }
        REQUIRE(diff < 1e-4 * scale);
        ++done;
    }
}

TEST_CASE("periodic retraction is continuous") {
    PeriodicRetraction r(2, 2, 0.1);
    Rng rng(27);
    for (int trial = 0; trial < 20000; ++trial) {
        Vec y{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
        Vec z = y;
        z[0] += rng.uniform(-1e-7, 1e-7);
        z[1] += rng.uniform(-1e-7, 1e-7);
        REQUIRE(dist2(r.eval(y), r.eval(z)) < 1e-4);
    }
}

TEST_CASE("squeeze map collapses rank off the thick part") {
    SqueezeParams p(2, 2, 1.0 / 64.0, 0.1, 0.1);
    SqueezeMap s(p);
    MapSpec spec = squeeze_map(p);
    Rng rng(28);
    Vec q{-1.0, 0.0, 0.0};
    // far from the chart center everything is the basepoint
    REQUIRE(s.eval({0.0, 1.0, 0.0}) == q);
    REQUIRE(s.eval({-1.0, 0.0, 0.0}) == q);
    int off_checked = 0, on_checked = 0;
    for (int trial = 0; trial < 40000 && (off_checked < 200 || on_checked < 50); ++trial) {
        // sample inside the chart cap where the action happens
        Vec v = rng.in_ball(2, 3.0 * p.rho());
        Vec x = detail::sphere_exp_north(Vec{v[0], v[1]});
        x = Vec{x[2], x[0], x[1]};  // chart center e_0
        REQUIRE(std::fabs(norm2(s.eval(x)) - 1.0) < 1e-12);
        if (s.nonsmooth_distance(x) < 1e-6) continue;
        auto sv = singular_values(jacobian_in_frames(spec, x));
        if (!s.in_thick_part(x)) {
            REQUIRE(sv[1] <= 1e-8);
            ++off_checked;
        } else {
            REQUIRE(sv[0] < 1e6);
            ++on_checked;
        }
    }
    REQUIRE(off_checked >= 200);
    REQUIRE(on_checked >= 50);
}

TEST_CASE("squeeze jacobian matches finite differences") {
    SqueezeParams p(2, 2, 1.0 / 64.0, 0.1, 0.1);
    MapSpec m = squeeze_map(p);
    SqueezeMap s(p);
    Rng rng(29);
    int done = 0;
    while (done < 40) {
        Vec v = rng.in_ball(2, 2.8 * p.rho());
        Vec xs = detail::sphere_exp_north(Vec{v[0], v[1]});
        Vec x{xs[2], xs[0], xs[1]};
        if (s.nonsmooth_distance(x) < 1e-3) continue;
        Mat ja = jacobian_in_frames(m, x);
        Mat jf = finite_difference_jacobian(m, x, 1e-6);
        double diff = 0.0, scale = 1.0;
        for (int i = 0; i < ja.rows; ++i)
            for (int j = 0; j < ja.cols; ++j) {
                diff = std::max(diff, std::fabs(ja(i, j) - jf(i, j)));
                scale = std::max(scale, std::fabs(ja(i, j)));
            }
        REQUIRE(diff < 1e-3 * scale);
        ++done;
    }
}

TEST_CASE("squeeze parameter validation") {
    REQUIRE_THROWS_AS(SqueezeParams(2, 2, 0.05, 0.1, 0.1), InvalidInput);   // delta too big
    REQUIRE_THROWS_AS(SqueezeParams(2, 2, 0.01, 0.6, 0.1), InvalidInput);   // W too big
    REQUIRE_THROWS_AS(SqueezeParams(2, 2, 0.01, 0.1, 0.5), InvalidInput);   // r too big
    REQUIRE_NOTHROW(SqueezeParams(3, 2, 1.0 / 128.0, 0.1, 0.1));
}
