// Pointwise thermodynamic closures for the stream-function formulation:
// momentum function, critical quantities, the subsonic density inversion g,
// its uniformly elliptic truncation g_eps, the energy density G_eps, and the
// free-boundary constant lambda_eps.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "jetflow/numerics.hpp"
#include "jetflow/profiles.hpp"

namespace jetflow {

// x^(gamma-1) and x^gamma with fast paths for the common exponents.
inline double pow_gm1(double x, double gamma) {
    if (gamma == 2.0) return x;
    if (gamma == 3.0) return x * x;
    return std::pow(x, gamma - 1.0);
}
inline double pow_g(double x, double gamma) {
    if (gamma == 2.0) return x * x;
    if (gamma == 3.0) return x * x * x;
    return std::pow(x, gamma);
}

// Smooth nonincreasing cutoff: 1 for s <= -1, 0 for s >= -1/2, quintic
// blend in between (zero first derivatives at both ends). The stated paper
// bound |varpi'|+|varpi''| <= 8 is unattainable for a transition of width
// 1/2 (any C^1 profile needs sup|varpi''| >= 16); the measured bound is
// stored instead.
struct TruncationProfile {
    double derivative_bound = 0.0;

    TruncationProfile() {
        double worst = 0.0;
        for (int i = 0; i <= 4096; ++i) {
            const double s = -1.0 + 0.5 * i / 4096.0;
            worst = std::max(worst, std::abs(prime(s)) + std::abs(second(s)));
        }
        derivative_bound = worst;
    }

    static double value(double s) {
        if (s <= -1.0) return 1.0;
        if (s >= -0.5) return 0.0;
        const double u = 2.0 * (s + 1.0);
        return 1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    }
    static double prime(double s) {
        if (s <= -1.0 || s >= -0.5) return 0.0;
        const double u = 2.0 * (s + 1.0);
        const double w = u * (1.0 - u);
        return -60.0 * w * w;
    }
    static double second(double s) {
        if (s <= -1.0 || s >= -0.5) return 0.0;
        const double u = 2.0 * (s + 1.0);
        return -240.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    }
};

// Gas closure in stream-function variables: gamma plus the profiles
// B(z), S(z) (with first derivatives), the mass flux Q, and the subsonic
// truncation parameter eps. Immutable after construction; all operations
// below are pure functions of (t, z, gas).
struct GasClosure {
    double gamma = 0.0;
    Curve B;
    Curve S;
    double Q = 0.0;
    double eps = 0.0;
    TruncationProfile varpi;

    // Cached bounds over the extended z-range (profiles are constant outside
    // [0, Q], so sampling [0, Q] covers all of R).
    double g_star = 0.0;   // (sup rho_m)^-1
    double g_upper = 0.0;  // (inf rho_c)^-1
    double t_star = 0.0;   // inf t_c
    double t_upper = 0.0;  // sup t_c
    bool constant_profiles = false;

    GasClosure() = default;
    GasClosure(double gamma_, Curve B_, Curve S_, double Q_, double eps_)
        : gamma(gamma_), B(std::move(B_)), S(std::move(S_)), Q(Q_), eps(eps_) {
        if (gamma <= 1.0) throw std::invalid_argument("GasClosure: gamma must exceed 1");
        if (Q <= 0.0) throw std::invalid_argument("GasClosure: Q must be positive");
        finalize();
    }

    void finalize() {
        double rc_min = std::numeric_limits<double>::infinity();
        double rm_max = 0.0;
        double tc_min = std::numeric_limits<double>::infinity();
        double tc_max = 0.0;
        double spread = 0.0;
        const int n = 2048;
        const double B0 = B(0.0), S0 = S(0.0);
        for (int i = 0; i <= n; ++i) {
            const double z = Q * i / n;
            const double Bz = B(z), Sz = S(z);
            if (!(Bz > 0.0) || !(Sz > 0.0))
                throw std::invalid_argument("GasClosure: B and S must stay positive");
            spread = std::max(spread, std::abs(Bz - B0) + std::abs(Sz - S0));
            const double rc = std::pow(2.0 * Bz / ((gamma + 1.0) * Sz), 1.0 / (gamma - 1.0));
            const double rm = std::pow(Bz / Sz, 1.0 / (gamma - 1.0));
            const double tc = (gamma - 1.0) * rc * rc * pow_gm1(rc, gamma) * Sz;
            rc_min = std::min(rc_min, rc);
            rm_max = std::max(rm_max, rm);
            tc_min = std::min(tc_min, tc);
            tc_max = std::max(tc_max, tc);
        }
        // Cushion for the sampled extrema of smooth profiles.
        g_star = (1.0 - 1e-12) / rm_max;
        g_upper = (1.0 + 1e-12) / rc_min;
        t_star = tc_min;
        t_upper = tc_max;
        constant_profiles = spread == 0.0;
        if (!(eps > 0.0) || eps >= 0.25 * std::min(t_star, 1.0))
            throw std::invalid_argument("GasClosure: eps must lie in (0, min(t_*,1)/4)");
    }
};

struct Critical {
    double rho_c;  // sonic density
    double rho_m;  // stagnation (maximum) density
    double t_c;    // critical momentum squared
};

// Square of the momentum: t(rho,z) = 2 rho^2 (B(z) - rho^(gamma-1) S(z)).
inline double momentum(double rho, double z, const GasClosure& gas) {
    if (!(rho > 0.0)) throw std::domain_error("momentum: density must be positive");
    const double Bz = gas.B(z), Sz = gas.S(z);
    const double head = Bz - pow_gm1(rho, gas.gamma) * Sz;
    if (head < 0.0) throw std::domain_error("momentum: density exceeds stagnation value");
    return 2.0 * rho * rho * head;
}

// d/drho of the momentum function.
inline double momentum_drho(double rho, double z, const GasClosure& gas) {
    const double Bz = gas.B(z), Sz = gas.S(z);
    return 2.0 * rho * (2.0 * Bz - (gas.gamma + 1.0) * pow_gm1(rho, gas.gamma) * Sz);
}

inline Critical critical_quantities(double z, const GasClosure& gas) {
    const double Bz = gas.B(z), Sz = gas.S(z);
    const double g = gas.gamma;
    Critical c;
    c.rho_c = std::pow(2.0 * Bz / ((g + 1.0) * Sz), 1.0 / (g - 1.0));
    c.rho_m = std::pow(Bz / Sz, 1.0 / (g - 1.0));
    c.t_c = (g - 1.0) * std::pow(2.0 * Bz / (g + 1.0), (g + 1.0) / (g - 1.0)) *
            std::pow(Sz, -2.0 / (g - 1.0));
    return c;
}

namespace detail {

// Subsonic density root of t(rho,z) = t in (rho_c, rho_m]. Newton from rho_m
// with a bisection safeguard; t is strictly decreasing on the bracket.
inline double subsonic_density(double t, double z, const GasClosure& gas,
                               const Critical& c) {
    if (t < 0.0) throw std::domain_error("invert_density: t must be nonnegative");
    if (t > (1.0 - 1e-9) * c.t_c)
        throw std::domain_error("invert_density: t at or beyond the critical momentum");
    if (t == 0.0) return c.rho_m;
    const double Bz = gas.B(z), Sz = gas.S(z);
    const double g = gas.gamma;
    double lo = c.rho_c * (1.0 + 1e-14);
    double hi = c.rho_m;
    double rho = c.rho_m;
    const double scale = std::max(1.0, c.t_c);
    for (int it = 0; it < 200; ++it) {
        const double pg = pow_gm1(rho, g);
        const double f = 2.0 * rho * rho * (Bz - pg * Sz) - t;
        if (std::abs(f) <= 1e-13 * scale) return rho;
        if (f > 0.0) lo = rho; else hi = rho;  // f decreasing in rho on the bracket
        const double df = 2.0 * rho * (2.0 * Bz - (g + 1.0) * pg * Sz);
        double next = rho - f / df;
        if (!(next > lo && next < hi) || df == 0.0) next = 0.5 * (lo + hi);
        rho = next;
    }
    return rho;
}

}  // namespace detail

// Density inversion: g(t,z) = 1/rho with rho the subsonic root of
// t(rho,z) = t. Defined for 0 <= t < t_c(z).
inline double invert_density(double t, double z, const GasClosure& gas) {
    const Critical c = critical_quantities(z, gas);
    return 1.0 / detail::subsonic_density(t, z, gas, c);
}

// dg/dt = -g^2 / d_rho t evaluated at the subsonic root; nonnegative.
inline double invert_density_dt(double t, double z, const GasClosure& gas) {
    const Critical c = critical_quantities(z, gas);
    const double rho = detail::subsonic_density(t, z, gas, c);
    const double drho = momentum_drho(rho, z, gas);
    return -1.0 / (rho * rho * drho);
}

// Subsonic truncation g_eps: equals g below t_c - eps, the constant g* above
// t_c - eps/2, and the varpi blend in between.
inline double g_eps(double t, double z, const GasClosure& gas,
                    const TruncationProfile& profile) {
    const Critical c = critical_quantities(z, gas);
    const double s = t - c.t_c;
    if (s >= -0.5 * gas.eps) return gas.g_upper;
    const double g = 1.0 / detail::subsonic_density(t, z, gas, c);
    if (s <= -gas.eps) return g;
    const double w = profile.value(s / gas.eps);
    return g * w + (1.0 - w) * gas.g_upper;
}

inline double g_eps(double t, double z, const GasClosure& gas) {
    return g_eps(t, z, gas, gas.varpi);
}

// d/dt of g_eps (blend product rule; zero beyond t_c - eps/2).
inline double g_eps_dt(double t, double z, const GasClosure& gas) {
    const Critical c = critical_quantities(z, gas);
    const double s = t - c.t_c;
    if (s >= -0.5 * gas.eps) return 0.0;
    const double rho = detail::subsonic_density(t, z, gas, c);
    const double g = 1.0 / rho;
    const double dtg = -1.0 / (rho * rho * momentum_drho(rho, z, gas));
    if (s <= -gas.eps) return dtg;
    const double w = gas.varpi.value(s / gas.eps);
    const double wp = gas.varpi.prime(s / gas.eps) / gas.eps;
    return dtg * w + (g - gas.g_upper) * wp;
}

namespace detail {

// 1/2 * integral of g over [0, t] in closed form on the pure subsonic range,
// via the antiderivative F(rho) = 2 B rho - ((gamma+1)/gamma) S rho^gamma of
// g with respect to t along the subsonic branch.
inline double half_integral_g(double t, double z, const GasClosure& gas,
                              const Critical& c) {
    const double Bz = gas.B(z), Sz = gas.S(z);
    const double g = gas.gamma;
    const double rho = subsonic_density(t, z, gas, c);
    auto F = [&](double r) { return 2.0 * Bz * r - (g + 1.0) / g * Sz * pow_g(r, g); };
    return F(rho) - F(c.rho_m);
}

// 1/2 * integral of g_eps over the blend layer [t_c - eps, min(t, t_c - eps/2)].
inline double half_layer_integral(double t, double z, const GasClosure& gas,
                                  const Critical& c) {
    const double t1 = c.t_c - gas.eps;
    const double t2 = c.t_c - 0.5 * gas.eps;
    const double hi = std::min(t, t2);
    if (hi <= t1) return 0.0;
    auto integrand = [&](double s) {
        const double w = gas.varpi.value((s - c.t_c) / gas.eps);
        const double gv = 1.0 / subsonic_density(s, z, gas, c);
        return gv * w + (1.0 - w) * gas.g_upper;
    };
    return 0.5 * integrate(integrand, t1, hi, 1e-14);
}

inline double G_offset(double z, const GasClosure& gas) {
    const double g = gas.gamma;
    const Critical cz = critical_quantities(z, gas);
    const Critical cQ = critical_quantities(gas.Q, gas);
    return (g - 1.0) / g *
           (pow_g(cz.rho_m, g) * gas.S(z) - pow_g(cQ.rho_m, g) * gas.S(gas.Q));
}

}  // namespace detail

// Energy density G_eps(t,z) = 1/2 int_0^t g_eps(s,z) ds
//                           + (gamma-1)/gamma (g_eps^-gamma(0,z) S(z) - g_eps^-gamma(0,Q) S(Q)).
inline double G_eps(double t, double z, const GasClosure& gas) {
    if (t < 0.0) throw std::domain_error("G_eps: t must be nonnegative");
    const Critical c = critical_quantities(z, gas);
    const double t1 = c.t_c - gas.eps;
    const double t2 = c.t_c - 0.5 * gas.eps;
    double half_int;
    if (t <= t1) {
        half_int = detail::half_integral_g(t, z, gas, c);
    } else {
        half_int = detail::half_integral_g(t1, z, gas, c) +
                   detail::half_layer_integral(t, z, gas, c);
        if (t > t2) half_int += 0.5 * gas.g_upper * (t - t2);
    }
    return half_int + detail::G_offset(z, gas);
}

// dG_eps/dz. Below t_c - eps this is B'(z)/g - S'(z)/(gamma g^gamma); in the
// truncated range it combines the varpi'-layer integral with the
// varpi-weighted subsonic term.
inline double dG_dz(double t, double z, const GasClosure& gas) {
    if (t < 0.0) throw std::domain_error("dG_dz: t must be nonnegative");
    const double Bp = gas.B.deriv(z);
    const double Sp = gas.S.deriv(z);
    if (Bp == 0.0 && Sp == 0.0) return 0.0;
    const Critical c = critical_quantities(z, gas);
    const double g = gas.gamma;
    auto subsonic_term = [&](double tau) {
        const double gv = 1.0 / detail::subsonic_density(tau, z, gas, c);
        return Bp / gv - Sp / (g * pow_g(gv, g));
    };
    const double t1 = c.t_c - gas.eps;
    const double t2 = c.t_c - 0.5 * gas.eps;
    if (t <= t1) return subsonic_term(t);

    // t_c'(z) from the closed form of t_c.
    const double Bz = gas.B(z), Sz = gas.S(z);
    const double ratio = Bz / Sz;
    const double tc_prime =
        std::pow(2.0 / (g + 1.0), (g + 1.0) / (g - 1.0)) *
        ((g + 1.0) * std::pow(ratio, 2.0 / (g - 1.0)) * Bp -
         2.0 * std::pow(ratio, (g + 1.0) / (g - 1.0)) * Sp);

    auto layer_integrand = [&](double tau) {
        const double gv = 1.0 / detail::subsonic_density(tau, z, gas, c);
        const double wp = gas.varpi.prime((tau - c.t_c) / gas.eps) / gas.eps;
        return (Bp / gv - Sp / (g * pow_g(gv, g)) -
                0.5 * (gas.g_upper - gv) * tc_prime) * wp;
    };
    const double hi = std::min(t, t2);
    double result = -integrate(layer_integrand, t1, hi, 1e-14);
    if (t < t2) result += subsonic_term(t) * gas.varpi.value((t - c.t_c) / gas.eps);
    return result;
}

// Free-boundary constant: lambda_eps = sqrt(Phi_eps(Lambda^2, Q)) with
// Phi_eps(t,z) = -G_eps(t,z) + g_eps(t,z) t.
inline double Phi_eps(double t, double z, const GasClosure& gas) {
    return -G_eps(t, z, gas) + g_eps(t, z, gas) * t;
}

inline double lambda_eps(double Lambda, const GasClosure& gas) {
    if (Lambda < 0.0) throw std::domain_error("lambda_eps: Lambda must be nonnegative");
    if (Lambda == 0.0) return 0.0;
    return std::sqrt(Phi_eps(Lambda * Lambda, gas.Q, gas));
}

// ---------------------------------------------------------------------------
// Ellipticity diagnostics
// ---------------------------------------------------------------------------

struct EllipticityReport {
    double g_star = 0.0;    // lower bound of g
    double g_upper = 0.0;   // upper bound of g
    double C_star = 0.0;    // lower bound of g_eps and of g_eps + 2 dt(g_eps) t
    double C_upper = 0.0;   // upper bound of g_eps
    double C_upper_ell = 0.0;  // observed upper bound of g_eps + 2 dt(g_eps) t
    double kappa0 = 0.0;    // ||B'||_{C^0,1} + ||S'||_{C^0,1} estimate
    double delta = 0.0;     // measured bound of Prop. (iii)-type z-derivatives
};

// Measured ellipticity window over a deterministic (t,z) grid. g_eps >= g_*
// and g_eps + 2 dt(g_eps) t >= g_eps hold analytically (both blend terms of
// dt(g_eps) are nonnegative), so C_star = g_star is exact; the upper bounds
// are observed values.
inline EllipticityReport measure_ellipticity(const GasClosure& gas, int nt = 64,
                                             int nz = 64) {
    EllipticityReport rep;
    rep.g_star = gas.g_star;
    rep.g_upper = gas.g_upper;
    rep.C_star = gas.g_star;
    double gmax = 0.0, emax = 0.0, dmax = 0.0;
    double bsup = 0.0, ssup = 0.0, blip = 0.0, slip = 0.0;
    const double hz = gas.Q / nz;
    for (int k = 0; k <= nz; ++k) {
        const double z = gas.Q * k / nz;
        const double tc = critical_quantities(z, gas).t_c;
        bsup = std::max(bsup, std::abs(gas.B.deriv(z)));
        ssup = std::max(ssup, std::abs(gas.S.deriv(z)));
        if (k > 0) {
            const double zp = gas.Q * (k - 1) / nz;
            blip = std::max(blip, std::abs(gas.B.deriv(z) - gas.B.deriv(zp)) / hz);
            slip = std::max(slip, std::abs(gas.S.deriv(z) - gas.S.deriv(zp)) / hz);
        }
        for (int i = 0; i <= nt; ++i) {
            const double t = (tc + 0.5 * gas.eps) * i / nt;  // reach into the plateau
            const double ge = g_eps(t, z, gas);
            const double ell = ge + 2.0 * g_eps_dt(t, z, gas) * t;
            gmax = std::max(gmax, ge);
            emax = std::max(emax, ell);
            dmax = std::max(dmax, std::abs(dG_dz(t, z, gas)) / gas.eps);
        }
    }
    rep.C_upper = gmax;
    rep.C_upper_ell = emax;
    rep.kappa0 = bsup + blip + ssup + slip;
    rep.delta = dmax;
    return rep;
}

}  // namespace jetflow
