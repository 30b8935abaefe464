#include <catch2/catch_amalgamated.hpp>

#include "kdl/maps_basic.hpp"
#include "kdl/suspension.hpp"

using namespace kdl;

namespace {

Vec basepoint(int dim_plus_one) {
    Vec b(dim_plus_one, 0.0);
    b[0] = -1.0;
    return b;
}

bool close(const Vec& a, const Vec& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::fabs(a[i] - b[i]) > tol) return false;
    return true;
}

}  // namespace

TEST_CASE("cube collapse sends the boundary to the basepoint") {
    Rng rng(11);
    for (int p : {1, 2, 3}) {
        MapSpec m = cube_to_sphere(p);
        for (int trial = 0; trial < 40; ++trial) {
            Vec x(p);
            for (int i = 0; i < p; ++i) x[i] = rng.u01();
            int face = static_cast<int>(rng.below(static_cast<std::uint64_t>(p)));
            x[face] = rng.u01() < 0.5 ? 0.0 : 1.0;
            REQUIRE(close(m.eval(x), basepoint(p + 1), 1e-12));
        }
        // center maps to the antipode of the basepoint
        Vec c(p, 0.5);
        Vec north(p + 1, 0.0);
        north[0] = 1.0;
        REQUIRE(close(m.eval(c), north, 1e-12));
        // outputs are unit vectors
        for (int trial = 0; trial < 100; ++trial) {
            Vec x(p);
            for (int i = 0; i < p; ++i) x[i] = rng.u01();
            REQUIRE(std::fabs(norm2(m.eval(x)) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("cube collapse inverse round-trips interior points") {
    Rng rng(12);
    for (int p : {1, 2, 3}) {
        MapSpec m = cube_to_sphere(p);
        int done = 0;
        while (done < 60) {
            Vec x(p);
            double tinf = 0.0;
            for (int i = 0; i < p; ++i) {
                x[i] = rng.u01();
                tinf = std::max(tinf, std::fabs(2.0 * x[i] - 1.0));
            }
            if (tinf < 0.05 || tinf > 0.95) continue;
            Vec back = cube_to_sphere_inverse(p, m.eval(x));
            REQUIRE(close(back, x, 1e-9));
            ++done;
        }
    }
}

TEST_CASE("cube collapse has odd mod-2 preimage counts") {
    for (int p : {1, 2}) {
        MapSpec m = cube_to_sphere(p);
        Vec x0(p, 0.3);
        if (p == 2) x0[1] = 0.45;
        Vec y = m.eval(x0);
        REQUIRE(preimage_count_mod2(m, y, 40, 5) == 1);
    }
}

TEST_CASE("hopf map lands on the sphere and is constant on fibers") {
    MapSpec h = hopf_map();
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        Vec x = rng.on_sphere(4);
        Vec y = h.eval(x);
        REQUIRE(std::fabs(norm2(y) - 1.0) < 1e-12);
        double th = rng.uniform(0.0, 6.28);
        double c = std::cos(th), s = std::sin(th);
        Vec xr{c * x[0] - s * x[1], s * x[0] + c * x[1],
               c * x[2] - s * x[3], s * x[2] + c * x[3]};
        REQUIRE(close(h.eval(xr), y, 1e-12));
    }
    REQUIRE(close(h.eval({1, 0, 0, 0}), {0, 0, 1}, 1e-15));
    REQUIRE(close(h.eval({0, 0, 1, 0}), {0, 0, -1}, 1e-15));
}

TEST_CASE("degree map wraps the first complex factor") {
    for (int d : {2, 3}) {
        MapSpec m = sphere3_degree_map(d);
        Rng rng(14);
        for (int trial = 0; trial < 50; ++trial) {
            double phi = rng.uniform(0.0, 6.28), psi = rng.uniform(0.0, 6.28);
            double r1 = std::sqrt(rng.uniform(0.05, 0.95));
            double r2 = std::sqrt(1.0 - r1 * r1);
            Vec x{r1 * std::cos(phi), r1 * std::sin(phi), r2 * std::cos(psi),
                  r2 * std::sin(psi)};
            Vec y = m.eval(x);
            REQUIRE(std::fabs(y[0] - r1 * std::cos(d * phi)) < 1e-12);
            REQUIRE(std::fabs(y[1] - r1 * std::sin(d * phi)) < 1e-12);
            REQUIRE(std::fabs(y[2] - x[2]) < 1e-15);
            REQUIRE(std::fabs(y[3] - x[3]) < 1e-15);
        }
    }
    // mod-2 degree: even for d=2, odd for d=3
    Vec target{0.6 * std::cos(0.4), 0.6 * std::sin(0.4), 0.8 * std::cos(1.1),
               0.8 * std::sin(1.1)};
    REQUIRE(preimage_count_mod2(sphere3_degree_map(2), target, 120, 7) == 0);
    REQUIRE(preimage_count_mod2(sphere3_degree_map(3), target, 120, 7) == 1);
}

TEST_CASE("smash map collapses the wedge") {
    for (auto [q, r] : std::vector<std::pair<int, int>>{{1, 1}, {2, 1}, {2, 2}}) {
        MapSpec m = smash_map(q, r);
        Rng rng(15);
        Vec bq = basepoint(q + 1), br = basepoint(r + 1), bt = basepoint(q + r + 1);
        for (int trial = 0; trial < 30; ++trial) {
            Vec yq = rng.on_sphere(q + 1), yr = rng.on_sphere(r + 1);
            Vec a = bq;
            a.insert(a.end(), yr.begin(), yr.end());
            REQUIRE(close(m.eval(a), bt, 1e-9));
            Vec b = yq;
            b.insert(b.end(), br.begin(), br.end());
            REQUIRE(close(m.eval(b), bt, 1e-9));
            Vec c = yq;
            c.insert(c.end(), yr.begin(), yr.end());
            REQUIRE(std::fabs(norm2(m.eval(c)) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("suspension source map collapses the cube boundary with rank q") {
    MapSpec f1 = suspension_f1(3, 2);
    Rng rng(16);
    Vec bp = basepoint(3);
    for (int trial = 0; trial < 60; ++trial) {
        Vec x{rng.u01(), rng.u01(), rng.u01()};
        int face = static_cast<int>(rng.below(3));
        x[face] = rng.u01() < 0.5 ? 0.0 : 1.0;
        REQUIRE(close(f1.eval(x), bp, 1e-12));
    }
    // rank <= 2 everywhere: the 3rd singular value of the raw ambient
    // Jacobian vanishes
    auto ambient_fd = [&](const Vec& x) {
        Mat j(3, 3);
        const double h = 1e-6;
        for (int c = 0; c < 3; ++c) {
            Vec xp = x, xm = x;
            xp[c] += h;
            xm[c] -= h;
            Vec fp = f1.eval(xp), fm = f1.eval(xm);
            for (int rr = 0; rr < 3; ++rr) j(rr, c) = (fp[rr] - fm[rr]) / (2 * h);
        }
        return j;
    };
    int checked = 0;
    while (checked < 40) {
        Vec x{rng.u01(), rng.u01(), rng.u01()};
        if (f1.domain.boundary_distance(x) < 1e-3) continue;
        if (f1.nonsmooth_distance(x) < 1e-3) continue;
        auto sv = singular_values(ambient_fd(x));
        REQUIRE(sv[2] < 1e-5);
        ++checked;
    }
    // ...but rank exactly 2 somewhere
    REQUIRE(singular_values(ambient_fd(Vec{0.4, 0.35, 0.52}))[1] > 0.1);
    // p == q reduces to the plain cube collapse
    MapSpec f = suspension_f1(2, 2);
    REQUIRE(close(f.eval({0.3, 0.7}), cube_to_sphere(2).eval({0.3, 0.7}), 0.0));
}

TEST_CASE("suspension family separates rectangle and basepoint regions") {
    MapSpec f1 = suspension_f1(3, 2);
    MapSpec f2 = cube_to_sphere(1);
    MapSpec fam = suspension_family(4, 3, 2, f1, f2, 0.25);
    REQUIRE(fam.domain.dim() == 4);
    REQUIRE(fam.target.dim() == 3);
    Vec bp = basepoint(4);
    // south pole is far outside the chart
    Vec south(5, 0.0);
    south[4] = -1.0;
    REQUIRE(close(fam.eval(south), bp, 1e-12));
    // everything lands on the unit sphere; random points mostly miss the
    // thin folded rectangle
    Rng rng(17);
    int hits = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        Vec x = rng.on_sphere(5);
        Vec y = fam.eval(x);
        REQUIRE(std::fabs(norm2(y) - 1.0) < 1e-12);
        if (!close(y, bp, 1e-9)) ++hits;
    }
    REQUIRE(hits < 1000);
    // sampling the polar chart cap does find the active region
    int cap_hits = 0;
    for (int trial = 0; trial < 4000; ++trial) {
        Vec v(4);
        for (int i = 0; i < 4; ++i) v[i] = rng.uniform(-0.7, 0.7);
        Vec x = detail::sphere_exp_north(v);
        Vec y = fam.eval(x);
        REQUIRE(std::fabs(norm2(y) - 1.0) < 1e-12);
        if (!close(y, bp, 1e-9)) ++cap_hits;
    }
    REQUIRE(cap_hits > 0);
    REQUIRE(cap_hits < 2000);
}

TEST_CASE("suspension exponent arithmetic") {
    REQUIRE(suspension_exponent(4, 3, 2, 3) == Catch::Approx(1.0));
    REQUIRE(suspension_exponent(4, 3, 2, 2) == Catch::Approx(-2.0));
    REQUIRE(suspension_exponent(6, 2, 1, 2) == Catch::Approx(-0.5));
    REQUIRE_THROWS_AS(suspension_family(4, 4, 2, suspension_f1(3, 2), cube_to_sphere(1), 0.25),
                      InvalidInput);
}

TEST_CASE("oversized chart dimension is rejected") {
    // m > 7 leaves no cube of half-side 1.4/sqrt(m) fitting the exp chart
    // of the construction; the builder must refuse rather than overlap
    MapSpec f1 = suspension_f1(7, 2);
    MapSpec f2 = cube_to_sphere(1);
    REQUIRE_THROWS_AS(suspension_family(8, 7, 2, f1, f2, 0.5), ConfigError);
}
