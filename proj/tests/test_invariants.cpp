#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "kdl/exponents.hpp"
#include "kdl/fiber.hpp"
#include "kdl/maps_basic.hpp"

using namespace kdl;

namespace {

/// Circle of radius r around `center` in the plane spanned by e_{ax1}, e_{ax2}.
PolyCurve circle(const Vec& center, int ax1, int ax2, double r, int n = 48) {
    PolyCurve c;
    for (int i = 0; i < n; ++i) {
        double t = 2.0 * std::numbers::pi * i / n;
        Vec p = center;
        p[static_cast<std::size_t>(ax1)] += r * std::cos(t);
        p[static_cast<std::size_t>(ax2)] += r * std::sin(t);
        c.vertices.push_back(p);
    }
    return c;
}

PolyCurve refined(const PolyCurve& c, int pieces) {
    PolyCurve out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Vec& a = c.vertices[i];
        const Vec& b = c.vertices[(i + 1) % c.size()];
        for (int j = 0; j < pieces; ++j)
            out.vertices.push_back(a + (static_cast<double>(j) / pieces) * (b - a));
    }
    return out;
}

PolyCurve reflected_z(PolyCurve c) {
    for (auto& v : c.vertices) v[2] = -v[2];
    return c;
}

}  // namespace

TEST_CASE("linking number: split, Hopf link, symmetry, reflection, refinement") {
    PolyCurve a = circle({0, 0, 0}, 0, 1, 1.0);
    PolyCurve far = circle({5, 0, 0}, 0, 1, 1.0);
    REQUIRE(linking_number(a, far) == 0);
    // two circles through each other's centers form a Hopf link
    PolyCurve c = circle({1, 0, 0}, 0, 2, 1.0);
    long long lk = linking_number(a, c);
    REQUIRE(std::llabs(lk) == 1);
    REQUIRE(linking_number(c, a) == lk);
    REQUIRE(linking_number(reflected_z(a), reflected_z(c)) == -lk);
    // the value is a property of the curves, not the sampling
    REQUIRE(linking_number(refined(a, 3), refined(c, 2)) == lk);
    // reversing one component flips the sign
    PolyCurve crev = c;
    std::reverse(crev.vertices.begin(), crev.vertices.end());
    REQUIRE(linking_number(a, crev) == -lk);
}

TEST_CASE("linking number rejects touching curves and bad input") {
    PolyCurve a = circle({0, 0, 0}, 0, 1, 1.0);
    PolyCurve touching = circle({2, 0, 0}, 0, 1, 1.0);  // meets a at (1,0,0)
    REQUIRE_THROWS_AS(linking_number(a, touching, 1e-3), ProximityError);
    PolyCurve flat;
    flat.vertices = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    REQUIRE_THROWS_AS(linking_number(flat, flat), InvalidInput);
    PolyCurve degenerate;
    degenerate.vertices = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
    REQUIRE_THROWS_AS(linking_number(degenerate, a), InvalidInput);
}

TEST_CASE("fiber tracing recovers the great-circle fibers of the Hopf map") {
    MapSpec hopf = hopf_map();
    FiberTrace f1 = fiber_trace(hopf, {0.0, 0.0, 1.0});
    REQUIRE(f1.curves.size() == 1);
    REQUIRE(f1.total_length == Catch::Approx(2.0 * std::numbers::pi).margin(1e-3));
    FiberTrace f2 = fiber_trace(hopf, {1.0, 0.0, 0.0}, 1e-2, 5);
    REQUIRE(f2.curves.size() == 1);
    REQUIRE(f2.total_length == Catch::Approx(2.0 * std::numbers::pi).margin(1e-3));
    // fibers of distinct regular values are disjoint
    REQUIRE(curve_distance(f1.curves[0], f2.curves[0]) > 0.1);
    // every traced point actually lies on the fiber
    for (const Vec& x : f1.curves[0].vertices) {
        REQUIRE(std::fabs(norm2(x) - 1.0) < 1e-8);
        REQUIRE(dist2(hopf.eval(x), Vec{0.0, 0.0, 1.0}) < 1e-8);
    }
}

TEST_CASE("Hopf invariant: Hopf map, constant map, degree composites") {
    MapSpec hopf = hopf_map();
    long long h = hopf_invariant(hopf, 3);
    REQUIRE(std::llabs(h) == 1);
    REQUIRE(hopf_invariant(constant_map(ChartDesc::sphere_chart(3), {0.3, 0.4, 0.5}), 3) == 0);
    REQUIRE(hopf_invariant(compose(hopf, sphere3_degree_map(2)), 3) == 2 * h);
    REQUIRE(hopf_invariant(compose(hopf, sphere3_degree_map(3)), 3) == 3 * h);
}

TEST_CASE("linked tube pairs: certified radii and the linking-thickness product") {
    MapSpec t1 = torus_tube({0, 0, 0}, {0, 0, 1}, 1.0, 0.2);
    MapSpec t2 = torus_tube({1, 0, 0}, {0, 1, 0}, 1.0, 0.2);
    GehringResult g = gehring_experiment(t1, t2);
    REQUIRE(std::llabs(g.linking) == 1);
    REQUIRE(g.r1 == Catch::Approx(0.2).margin(1e-2));
    REQUIRE(g.r2 == Catch::Approx(0.2).margin(1e-2));
    REQUIRE(g.product == Catch::Approx(static_cast<double>(g.linking) * g.r1 * g.r1 * g.r2 *
                                       g.r2));
    REQUIRE(g.core_distance > g.outer1 + g.outer2);
    // unlinked tubes give a vanishing product
    MapSpec t3 = torus_tube({6, 0, 0}, {0, 1, 0}, 1.0, 0.2);
    GehringResult g0 = gehring_experiment(t1, t3);
    REQUIRE(g0.linking == 0);
    REQUIRE(g0.product == 0.0);
    // the product shrinks quadratically in each thickness
    MapSpec s2 = torus_tube({1, 0, 0}, {0, 1, 0}, 1.0, 0.1);
    GehringResult gs = gehring_experiment(t1, s2);
    REQUIRE(std::fabs(gs.product) ==
            Catch::Approx(std::fabs(g.product) / 4.0).epsilon(0.05));
    // overlapping tubes are refused rather than measured
    MapSpec t4 = torus_tube({0.1, 0, 0}, {0, 0, 1}, 1.0, 0.2);
    REQUIRE_THROWS_AS(gehring_experiment(t1, t4), ProximityError);
}

TEST_CASE("exponent report arithmetic and feasibility thresholds") {
    ExponentReport r = exponent_report(4, 3, 3, 2, 3);
    REQUIRE(r.suspension_threshold == Catch::Approx(8.0 / 3.0));
    REQUIRE(r.suspension_exponent == Catch::Approx(3.0 * (3.0 - 8.0 / 3.0)));
    REQUIRE(r.hprinciple_threshold == Catch::Approx(2.5));
    REQUIRE(r.volume_exponent == Catch::Approx(2.5));
    REQUIRE(r.suspension_feasible);
    REQUIRE(r.hprinciple_feasible);
    ExponentReport lo = exponent_report(4, 3, 3, 2, 2);
    REQUIRE(lo.suspension_exponent < 0.0);
    REQUIRE_FALSE(lo.suspension_feasible);
    REQUIRE_THROWS_AS(exponent_report(4, 3, 4, 2, 3), InvalidInput);   // p = m
    REQUIRE_THROWS_AS(exponent_report(3, 3, 1, 1, 1), InvalidInput);   // m = n
    REQUIRE_THROWS_AS(exponent_report(4, 3, 1, 4, 1), InvalidInput);   // q > n
}

TEST_CASE("direction classification: examples and exhaustive scan") {
    DirectionVerdict v = direction_classify(5, 4, 3, 0, 4, 4);
    REQUIRE(v.bad);
    REQUIRE(v.bound_holds);
    DirectionVerdict good = direction_classify(5, 4, 3, 2, 2, 4);
    REQUIRE_FALSE(good.bad);
    REQUIRE(good.bound_holds);
    REQUIRE_THROWS_AS(direction_classify(5, 4, 3, 3, 1, 4), InvalidInput);  // a > 2n-m-1
    REQUIRE_THROWS_AS(direction_classify(5, 4, 3, 0, 5, 3), InvalidInput);  // b > n
    // every admissible bad direction keeps both factors at least k
    long long checked = 0;
    for (int m = 2; m <= 12; ++m)
        for (int n = 1; n < m; ++n)
            for (int k = 1; 2 * k <= m + 1; ++k)
                for (int a = 0; a <= 2 * n - m - 1; ++a)
                    for (int b = 0; b <= n; ++b) {
                        int c = 2 * n - a - b;
                        if (c < 0 || c > n) continue;
                        REQUIRE(direction_classify(m, n, k, a, b, c).bound_holds);
                        ++checked;
                    }
    REQUIRE(checked > 100);
}
