#include <catch2/catch_amalgamated.hpp>

#include "kamlab/torus.hpp"

using namespace kamlab;

TEST_CASE("build_grid basic shapes") {
    TorusGrid g1 = build_grid(1, 8);
    REQUIRE(g1.size() == 8);
    REQUIRE(g1.dx == Catch::Approx(0.125));
    for (int i = 0; i < 8; ++i) REQUIRE(g1.point(i)[0] == Catch::Approx(i / 8.0));

    TorusGrid g2 = build_grid(2, 16);
    REQUIRE(g2.size() == 256);
    REQUIRE(g2.dx == Catch::Approx(1.0 / 16.0));

    // node volumes sum to 1
    REQUIRE(g1.size() * g1.cell_volume() == Catch::Approx(1.0));
    REQUIRE(g2.size() * g2.cell_volume() == Catch::Approx(1.0));
}

TEST_CASE("build_grid rejects bad parameters") {
    REQUIRE_THROWS_AS(build_grid(1, 7), ConfigError);
    REQUIRE_THROWS_AS(build_grid(3, 16), ConfigError);
    REQUIRE_THROWS_AS(build_grid(0, 16), ConfigError);
}

TEST_CASE("cyclic index arithmetic") {
    TorusGrid g = build_grid(1, 8);
    REQUIRE(g.index_of(-1) == 7);
    REQUIRE(g.index_of(8) == 0);
    TorusGrid g2 = build_grid(2, 8);
    REQUIRE(g2.index_of(-1, 9) == g2.index_of(7, 1));
}

TEST_CASE("lifted_displacement goes through the seam") {
    TorusGrid g = build_grid(1, 10);
    auto lifts = lifted_displacement(g, 1 /*0.1*/, 9 /*0.9*/, 1);
    REQUIRE(lifts.front().delta[0] == Catch::Approx(-0.2));
}

TEST_CASE("lifted_displacement identity") {
    TorusGrid g = build_grid(1, 8);
    for (int kmax : {1, 2, 3}) {
        auto lifts = lifted_displacement(g, 3, 3, kmax);
        REQUIRE(lifts.front().delta[0] == 0.0);
    }
}

TEST_CASE("antipodal tie breaks positive first") {
    TorusGrid g = build_grid(1, 8);
    auto lifts = lifted_displacement(g, 0, 4 /*x=0.5*/, 1);
    REQUIRE(lifts[0].delta[0] == Catch::Approx(0.5));
    REQUIRE(lifts[1].delta[0] == Catch::Approx(-0.5));
}

TEST_CASE("torus distance symmetry over all node pairs") {
    for (int dim : {1, 2}) {
        TorusGrid g = build_grid(dim, 8);
        for (int y = 0; y < g.size(); ++y)
            for (int x = 0; x < g.size(); ++x)
                REQUIRE(torus_distance(g, y, x) == Catch::Approx(torus_distance(g, x, y)));
    }
}

TEST_CASE("lift integral depends only on endpoints, deck shift by <P,k>") {
    ClosedForm form;
    form.p = {1.5, -0.75};
    form.x0 = {0.25, 0.0};
    // two lifts of the same torus point differ by an integer translate k
    Vec2 x{0.3, 0.6};
    for (int k1 : {-2, -1, 0, 1, 2}) {
        for (int k2 : {-1, 0, 1}) {
            Vec2 shifted{x[0] + k1, x[1] + k2};
            double diff = form.lift_integral(shifted) - form.lift_integral(x);
            REQUIRE(diff == Catch::Approx(form.p[0] * k1 + form.p[1] * k2).margin(1e-14));
        }
    }
    // piecewise path: sum of segment integrals equals endpoint formula exactly
    Vec2 a{0.1, 0.2}, b{0.7, -0.4}, c{1.3, 0.9};
    double via = form.along({b[0] - a[0], b[1] - a[1]}) + form.along({c[0] - b[0], c[1] - b[1]});
    double direct = form.along({c[0] - a[0], c[1] - a[1]});
    REQUIRE(via == Catch::Approx(direct).margin(1e-14));
}

TEST_CASE("eval_potential trig samples") {
    TorusGrid g = build_grid(1, 16);
    Potential zero;
    GridField f0 = eval_potential(zero, g);
    for (double v : f0) REQUIRE(v == 0.0);

    Potential coswave;
    coswave.add_cos({1, 0}, 1.0);
    GridField f = eval_potential(coswave, g);
    REQUIRE(f[0] == Catch::Approx(1.0));
    REQUIRE(f[8] == Catch::Approx(-1.0));
}

TEST_CASE("potential periodicity and reproducibility") {
    Potential v;
    v.add_cos({2, 0}, 0.7);
    v.add_sin({1, 0}, -0.3);
    for (double x : {0.0, 0.13, 0.77}) {
        REQUIRE(v({x, 0.0}) == Catch::Approx(v({x + 1.0, 0.0})).margin(1e-12));
    }
    TorusGrid g = build_grid(1, 32);
    GridField a = eval_potential(v, g);
    GridField b = eval_potential(v, g);
    REQUIRE(a == b);   // bit-identical
}

TEST_CASE("2D lifted displacement sorted by norm") {
    TorusGrid g = build_grid(2, 8);
    auto lifts = lifted_displacement(g, g.index_of(0, 0), g.index_of(1, 7), 1);
    // nearest representative of (1/8, 7/8) is (1/8, -1/8)
    REQUIRE(lifts.front().delta[0] == Catch::Approx(0.125));
    REQUIRE(lifts.front().delta[1] == Catch::Approx(-0.125));
    for (std::size_t i = 1; i < lifts.size(); ++i)
        REQUIRE(lifts[i].norm_sq >= lifts[i - 1].norm_sq);
}

TEST_CASE("measure validation") {
    GridMeasure m;
    m.w = {0.5, 0.5};
    REQUIRE_NOTHROW(m.validate());
    m.w = {0.5, 0.6};
    REQUIRE_THROWS_AS(m.validate(), NumericalError);
    m.w = {-0.1, 1.1};
    REQUIRE_THROWS_AS(m.validate(), NumericalError);
}
