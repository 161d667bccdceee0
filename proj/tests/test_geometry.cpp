#include "doctest.h"

#include <cmath>

#include "jetflow/geometry.hpp"

using namespace jetflow;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("b_mu root of the wall equation") {
    auto nz = Nozzle::tangent(2.0);
    // N(y) = -tan(pi (y-1)/2): N(b)= -1 at b = 1 + (2/pi) atan(1) = 1.5.
    const double b = solve_b_mu(nz, 1.0);
    CHECK(b == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(std::abs(nz.N(b) + 1.0) <= 1e-12);
    // mu -> 0+ gives b -> 1; monotone in mu.
    CHECK(solve_b_mu(nz, 1e-8) == doctest::Approx(1.0).epsilon(1e-6));
    double prev = 1.0;
    for (double mu : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const double bm = solve_b_mu(nz, mu);
        CHECK(bm > prev);
        prev = bm;
    }
    CHECK_THROWS_AS(solve_b_mu(nz, 1e9), std::runtime_error);

    // Table-based nozzle reproduces the analytic wall.
    std::vector<double> ys, xs;
    for (int i = 0; i <= 400; ++i) {
        const double y = 1.0 + 0.95 * i / 400.0;
        ys.push_back(y);
        xs.push_back(-std::tan(M_PI * (y - 1.0) / 2.0));
    }
    auto tab = Nozzle::from_table(Table{ys, xs});
    CHECK(solve_b_mu(tab, 1.0) == doctest::Approx(1.5).epsilon(1e-7));
}

TEST_CASE("H_star case split and frozen roots") {
    CHECK(h_star(1.0, 1.0) == 1.0);
    CHECK(h_star(0.5, 1.0) == 1.0);
    // Bisection-oracle roots of Lambda H^2 e^{1-H} = Q.
    CHECK(h_star(2.0, 1.0) == doctest::Approx(0.570434968904424).epsilon(1e-10));
    CHECK(h_star(std::exp(1.0), 1.0) == doctest::Approx(0.463921905973069).epsilon(1e-10));
    // Scale invariance in (Lambda, Q).
    CHECK(h_star(0.2, 0.1) == doctest::Approx(h_star(2.0, 1.0)).epsilon(1e-12));
}

TEST_CASE("grid mask partition and connectivity") {
    auto nz = Nozzle::tangent(2.0);
    auto dom = build_grid(nz, 1.0, 2.0, 3.0 / 96.0, 2.0 / 96.0, 2.0);
    CHECK(dom.nx == 97);
    CHECK(dom.ny == 97);
    int interior = 0, boundary = 0, outside = 0;
    for (auto t : dom.tag) {
        if (t == NodeType::interior) ++interior;
        else if (t == NodeType::outside) ++outside;
        else ++boundary;
    }
    CHECK(interior + boundary + outside == dom.nx * dom.ny);
    CHECK(interior > 0);
    CHECK(interior_connected(dom));

    // Wall row snaps the lid exactly at y = 1 for x >= 0.
    const int j1 = static_cast<int>(std::lround(1.0 / dom.hy));
    for (int i = 0; i < dom.nx; ++i)
        if (dom.x(i) >= 0.0) {
            CHECK(dom.at(i, j1) == NodeType::wall);
            const auto below = dom.at(i, j1 - 1);
            CHECK((below == NodeType::interior || below == NodeType::outlet));
        }

    // Degenerate strip: full rectangle.
    auto st = strip_domain(0.0, 1.0, 1.0, 1.0 / 16.0, 1.0 / 16.0);
    for (int j = 0; j < st.ny; ++j)
        for (int i = 0; i < st.nx; ++i) CHECK(st.in_domain(i, j));

    CHECK_THROWS_AS(build_grid(nz, 1.0, 2.0, 0.25, 0.4, 2.0), std::runtime_error);
}

TEST_CASE("boundary data values") {
    auto nz = Nozzle::tangent(2.0);
    auto dom = build_grid(nz, 1.0, 2.0, 3.0 / 128.0, 2.0 / 128.0, 2.0);
    const double Q = 1.0;

    SUBCASE("ramp endpoint and lid") {
        auto bd = boundary_data(dom, Q, 2.0 * Q);
        // Ramp reaches Q at b_mu.
        CHECK(inlet_ramp(dom.b_mu, dom, Q) == doctest::Approx(Q).epsilon(1e-14));
        CHECK(inlet_ramp(dom.b_mu_prime, dom, Q) == 0.0);
        // psi-dagger at y=1 equals Q when Lambda > Q.
        CHECK(psi_dagger(1.0, 2.0 * Q, Q, bd.H_star) == doctest::Approx(Q).epsilon(1e-14));
        // Direct evaluation at y = 0.5 with Lambda = 2Q.
        CHECK(psi_dagger(0.5, 2.0 * Q, Q, bd.H_star) ==
              doctest::Approx(std::min(0.5 * std::exp(0.5), 1.0) * Q).epsilon(1e-14));
        // 0 <= psi# <= Q and the inlet/outlet profiles are nondecreasing in y.
        double prev_in = -1.0, prev_out = -1.0;
        for (int j = 0; j < dom.ny; ++j) {
            for (int i = 0; i < dom.nx; ++i) {
                const double v = bd.values[dom.idx(i, j)];
                CHECK(v >= 0.0);
                CHECK(v <= Q);
            }
            if (dom.at(0, j) == NodeType::inlet || dom.at(0, j) == NodeType::axis) {
                CHECK(bd.values[dom.idx(0, j)] >= prev_in);
                prev_in = bd.values[dom.idx(0, j)];
            }
            if ((dom.at(dom.nx - 1, j) == NodeType::outlet ||
                 dom.at(dom.nx - 1, j) == NodeType::axis) &&
                dom.y(j) <= bd.H_star) {
                CHECK(bd.values[dom.idx(dom.nx - 1, j)] >= prev_out);
                prev_out = bd.values[dom.idx(dom.nx - 1, j)];
            }
        }
    }

    SUBCASE("H_star = 1 branch uses the Q-scaled dagger") {
        auto bd = boundary_data(dom, Q, 0.5 * Q);
        CHECK(bd.H_star == 1.0);
        CHECK(bd.values[dom.idx(dom.nx - 1, 32)] ==
              doctest::Approx(Q * dom.y(32) * dom.y(32) * std::exp(1.0 - dom.y(32)))
                  .epsilon(1e-14));
    }
}

TEST_SUITE_END();
