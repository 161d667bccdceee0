#include "doctest.h"

#include <cmath>

#include "jetflow/fit.hpp"
#include "jetflow/postproc.hpp"

using namespace jetflow;

namespace {
struct JetSetup {
    UpstreamProfiles prof;
    UpstreamState st;
    GasClosure gas;
    ClosureCache cc;
    Nozzle nz;
    JetSetup()
        : prof(constant_profiles(1.0, 1.0, 2.0, 2.0, 0.018)),
          st(solve_upstream(prof, 0.018)),
          gas(build_stream_profiles(st)),
          cc(gas),
          nz(Nozzle::tangent(2.0, 0.25)) {}
};
}  // namespace

TEST_SUITE_BEGIN("fit");

TEST_CASE("bisection core on a linear stub") {
    int evals = 0;
    auto phi = [&](double L) {
        ++evals;
        return 3.0 * (0.07 - L);
    };
    auto [L, ok] = fit_bisection(phi, 0.07 / 8, 0.07 * 8, 1e-6, 1e-12, 6);
    CHECK(ok);
    CHECK(L == doctest::Approx(0.07).epsilon(1e-5));
    CHECK(evals <= 2 + 2 + static_cast<int>(std::ceil(std::log2(0.07 * 8 / 1e-7))));

    // +inf at the low end (no free boundary) counts as positive.
    auto phi_inf = [&](double L) {
        return L < 0.01 ? std::numeric_limits<double>::infinity() : 2.0 * (0.05 - L);
    };
    auto [L2, ok2] = fit_bisection(phi_inf, 0.004, 0.4, 1e-6, 1e-12, 6);
    CHECK(ok2);
    CHECK(L2 == doctest::Approx(0.05).epsilon(1e-5));

    // No sign change reports failure instead of guessing.
    auto [L3, ok3] = fit_bisection([](double) { return 1.0; }, 0.1, 1.0, 1e-6, 1e-9, 3);
    (void)L3;
    CHECK(!ok3);
}

TEST_CASE("flat free boundary on a downstream strip") {
    // Constant profiles: the downstream state at momentum Lambda has the
    // exact 1D profile psi = Lambda y^2 / 2 below H_low = sqrt(2Q/Lambda)
    // and a flat free boundary at H_low.
    JetSetup s;
    const double Q = s.gas.Q, Lambda = 0.06;
    const double Hlow = std::sqrt(2.0 * Q / Lambda);
    auto profile = [&](double y) { return std::min(0.5 * Lambda * y * y, Q); };

    double prev_dev = 0.0;
    for (int lev = 0; lev < 2; ++lev) {
        const int n = lev == 0 ? 32 : 64;
        auto dom = strip_domain(0.0, 2.0, 1.0, 2.0 / n, 1.0 / n);
        auto bd = boundary_data(dom, Q, Lambda);
        for (int j = 0; j < dom.ny; ++j)
            for (int i : {0, dom.nx - 1})
                if (dom.at(i, j) == NodeType::inlet || dom.at(i, j) == NodeType::outlet)
                    bd.values[dom.idx(i, j)] = profile(dom.y(j));
        SolverOptions so;
        so.tol = 1e-10;
        so.threads = 2;
        EnergySolver solver(dom, bd, s.cc, so);
        auto [f, rep] = solver.minimize();
        REQUIRE(rep.converged);
        auto fb = extract_free_boundary(f, dom, h_star(Lambda, Q));
        CHECK(std::abs(fb.H_lower - Hlow) <= 2.0 * dom.hy);
        // Interior flatness of the tail.
        for (std::size_t k = 0; k < fb.xs.size(); ++k)
            if (fb.xs[k] > 0.4 && fb.xs[k] < 1.6)
                CHECK(std::abs(fb.f[k] - Hlow) <= 2.0 * dom.hy);
        const double dev = check_free_boundary_condition(f, dom, fb, Lambda);
        CHECK(dev > 0.0);
        CHECK(dev <= 0.35 * Lambda);  // one-cell-inside sampling is O(h)
        if (lev == 1) CHECK(dev <= prev_dev);
        prev_dev = dev;
    }
}

TEST_CASE("continuous fit on a coarse jet") {
    JetSetup s;
    auto dom = build_grid(s.nz, 1.0, 2.0, 3.0 / 48.0, 2.0 / 48.0, 2.0);
    FitOptions fo;
    fo.threads = 2;
    fo.solve_tol = 1e-7;
    auto res = fit_lambda(dom, s.cc, s.gas.Q, fo);
    CHECK(res.bracketed);
    // Fitted momentum within the paper's bracket window [Q/8, 8Q].
    CHECK(res.Lambda_star >= s.gas.Q / 8.0);
    CHECK(res.Lambda_star <= s.gas.Q * 8.0);
    CHECK(std::abs(res.fit_residual) <= 2.0 * dom.hx);
    // Opposite endpoint signs in the trial history.
    double Lmin = 1e300, Lmax = 0.0, phi_min = 0.0, phi_max = 0.0;
    for (const auto& t : res.history) {
        if (t.Lambda < Lmin) {
            Lmin = t.Lambda;
            phi_min = t.phi;
        }
        if (t.Lambda > Lmax) {
            Lmax = t.Lambda;
            phi_max = t.phi;
        }
    }
    CHECK(phi_min > 0.0);
    CHECK(phi_max < 0.0);
    // Structure of the fitted solution.
    auto checks = validate_structure(res.field, dom, s.cc, res.H_star);
    CHECK(checks.monotone);
    CHECK(checks.subsonic_margin > 0.0);
    CHECK(res.boundary.H_lower >= res.H_star);
}

TEST_CASE("two-level continuation warm start") {
    JetSetup s;
    FitOptions fo;
    fo.threads = 2;
    fo.solve_tol = 1e-7;
    auto res = continuation(s.nz, {{1.0, 2.0}, {1.5, 3.0}}, s.cc, s.gas.Q, 3.0 / 48.0,
                            2.0 / 48.0, 2.0, fo);
    REQUIRE(res.levels.size() == 2);
    CHECK(res.levels[1].mu > res.levels[0].mu);
    CHECK(res.levels[1].R > res.levels[0].R);
    // Lambda stays within the seeded window of the previous level.
    CHECK(res.levels[1].Lambda >= 0.8 * res.levels[0].Lambda);
    CHECK(res.levels[1].Lambda <= 1.25 * res.levels[0].Lambda);
    CHECK_THROWS(continuation(s.nz, {{2.0, 4.0}, {1.0, 5.0}}, s.cc, s.gas.Q, 3.0 / 48.0,
                              2.0 / 48.0, 2.0, fo));
}

TEST_SUITE_END();
