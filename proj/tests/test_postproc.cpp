#include "doctest.h"

#include <cmath>

#include "jetflow/postproc.hpp"
#include "oracles.hpp"

using namespace jetflow;

namespace {
struct Setup {
    UpstreamProfiles prof;
    UpstreamState st;
    GasClosure gas;
    Setup(double Q, bool constant = true)
        : prof(constant ? constant_profiles(1.0, 1.0, 2.0, 2.0, Q)
                        : quadratic_bump_profiles(1.0, 1.0, 0.05, 0.03, 2.0, 2.0, Q)),
          st(solve_upstream(prof, Q)),
          gas(build_stream_profiles(st)) {}
};
}  // namespace

TEST_SUITE_BEGIN("postproc");

TEST_CASE("outer pressure closed forms") {
    Setup s(1.011928851253882);
    // Lambda = 0: stagnation outer pressure (gamma=2, B=S=1): rho0 = rho_m = 1.
    auto [r0, p0] = outer_pressure(1e-300, s.gas, s.prof);
    CHECK(r0 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(p0 == doctest::Approx(0.5).epsilon(1e-10));
    // Frozen bisection-oracle values at Lambda = 0.4.
    auto [r4, p4] = outer_pressure(0.4, s.gas, s.prof);
    CHECK(r4 == doctest::Approx(0.901580554275311).epsilon(1e-11));
    CHECK(p4 == doctest::Approx(0.406423747923689).epsilon(1e-11));
    CHECK_THROWS_AS(outer_pressure(0.6, s.gas, s.prof), std::domain_error);

    // Strict monotonicity Lambda -> p_out on the subsonic branch.
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 20; ++k) {
        const double L = 0.02 + 0.5 * k / 20.0;
        auto [rr, pp] = outer_pressure(L, s.gas, s.prof);
        CHECK(pp < prev);
        prev = pp;
    }
}

TEST_CASE("downstream state constant-profile closed form") {
    Setup s(1.011928851253882);
    const double L = 0.4;
    auto ds = downstream_state(L, s.gas, s.st);
    // theta(y) = y sqrt(rubar/Lambda); frozen ratio 1.124682650380698.
    CHECK(ds.H_low == doctest::Approx(2.0 * 1.124682650380698).epsilon(1e-8));
    CHECK(ds.theta(1.0) == doctest::Approx(1.124682650380698).epsilon(1e-8));
    // Identical upstream/downstream states when p_out = pbar.
    const double Lm = s.st.rhobar(2.0) * s.st.ubar(2.0);
    auto dsm = downstream_state(Lm, s.gas, s.st);
    CHECK(dsm.H_low == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(dsm.p_out == doctest::Approx(s.st.pbar).epsilon(1e-9));
    CHECK(dsm.theta(1.3) == doctest::Approx(1.3).epsilon(1e-9));

    // Mass conservation: int_0^Hlow s rho_d u_d ds = Q.
    const double mass = oracle::integrate(
        [&](double e) { return e * ds.rho_d(e) * ds.u_d(e); }, 0.0, ds.H_low, 1e-12);
    CHECK(mass == doctest::Approx(s.gas.Q).epsilon(1e-8));
    // theta-map consistency psi_lower(theta(y)) = psibar(y).
    for (int k = 1; k <= 10; ++k) {
        const double y = 2.0 * k / 10.0;
        CHECK(std::abs(ds.psi_lower(ds.theta(y)) - s.st.psi_of_y(y)) <= 1e-8 * s.gas.Q);
    }
}

TEST_CASE("downstream state generic profiles") {
    Setup s(0.8, false);
    // Below the upstream wall momentum the jet widens, above it contracts.
    auto ds = downstream_state(0.35, s.gas, s.st);
    CHECK(ds.H_low > 2.0);
    CHECK(downstream_state(0.5, s.gas, s.st).H_low < 2.0);
    const double mass = oracle::integrate(
        [&](double e) { return e * ds.rho_d(e) * ds.u_d(e); }, 0.0, ds.H_low, 1e-12);
    CHECK(mass == doctest::Approx(0.8).epsilon(1e-8));
    // Radicand failure for absurd Lambda.
    CHECK_THROWS(downstream_state(1.3, s.gas, s.st));
}

TEST_CASE("field recovery on the upstream strip") {
    // x-independent field psibar: u = ubar, v = 0, p = pbar exactly.
    Setup s(1.011928851253882);
    auto dom = strip_domain(0.0, 1.0, 2.0, 0.125, 2.0 / 32.0);
    StreamField f;
    f.nx = dom.nx;
    f.ny = dom.ny;
    f.Q = s.gas.Q;
    f.Lambda = 0.4;
    f.psi.resize(static_cast<std::size_t>(dom.nx) * dom.ny);
    const double ru = s.st.rhobar(1.0) * s.st.ubar(1.0);
    for (int j = 0; j < dom.ny; ++j)
        for (int i = 0; i < dom.nx; ++i)
            f.psi[dom.idx(i, j)] = 0.5 * ru * dom.y(j) * dom.y(j);

    auto sol = recover_fields(f, dom, s.gas);
    for (int j = 1; j + 1 < dom.ny; ++j)
        for (int i = 0; i < dom.nx; ++i) {
            const int k = dom.idx(i, j);
            if (!sol.wet[k]) continue;
            CHECK(sol.u[k] == doctest::Approx(s.st.ubar(1.0)).epsilon(1e-10));
            CHECK(std::abs(sol.v[k]) <= 1e-12);
            CHECK(sol.p[k] == doctest::Approx(s.st.pbar).epsilon(1e-10));
            CHECK(sol.omega[k] == 0.0);  // constant closures are irrotational
            CHECK(sol.mach[k] < 1.0);
        }
    CHECK(sol.bernoulli_residual <= 1e-9);

    // Column mass flux telescopes to psi at the top of the wet column.
    auto flux = column_mass_flux(f, dom);
    for (double q : flux)
        CHECK(q == doctest::Approx(0.5 * ru * 4.0).epsilon(1e-12));
}

TEST_CASE("recovery rejects sonic fields") {
    Setup s(1.011928851253882);
    auto dom = strip_domain(0.0, 1.0, 1.0, 0.25, 0.25);
    StreamField f;
    f.nx = dom.nx;
    f.ny = dom.ny;
    f.Q = s.gas.Q;
    f.psi.resize(25);
    for (int j = 0; j < dom.ny; ++j)
        for (int i = 0; i < dom.nx; ++i)
            f.psi[dom.idx(i, j)] = 0.45 * dom.y(j) * dom.y(j);  // |grad/y| = 0.9, sonic
    CHECK_THROWS_AS(recover_fields(f, dom, s.gas), std::runtime_error);
}

TEST_CASE("far-field residuals on exact strip data") {
    Setup s(1.011928851253882);
    auto ds = downstream_state(s.st.rhobar(0.0) * s.st.ubar(0.0), s.gas, s.st);
    auto dom = strip_domain(0.0, 2.0, 2.0, 0.125, 0.0625);
    StreamField f;
    f.nx = dom.nx;
    f.ny = dom.ny;
    f.Q = s.gas.Q;
    f.psi.resize(static_cast<std::size_t>(dom.nx) * dom.ny);
    for (int j = 0; j < dom.ny; ++j)
        for (int i = 0; i < dom.nx; ++i)
            f.psi[dom.idx(i, j)] = s.st.psi_of_y(dom.y(j));
    auto [up, down] = farfield_residuals(f, dom, s.st, ds);
    CHECK(up <= 1e-6);
    CHECK(down <= 1e-6);
}

TEST_SUITE_END();
