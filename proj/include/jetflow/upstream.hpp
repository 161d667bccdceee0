// Upstream state determination: the incoming (pbar, rhobar, ubar) from
// (Bbar, Sbar, Q, gamma), the cumulative stream profile psibar with its
// monotone inverse (the streamline-position map h), and the composed
// stream-function closures B(z) = Bbar(h(z)), S(z) = Sbar(h(z)).

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "jetflow/numerics.hpp"
#include "jetflow/profiles.hpp"
#include "jetflow/thermo.hpp"

namespace jetflow {

// Admissible upstream pressure window (p_c(D^*), p^*(D_*)).
inline std::pair<double, double> admissible_pressure_window(const UpstreamProfiles& prof) {
    const double g = prof.gamma;
    const double Ds = prof.D_star();
    const double Du = prof.D_upper();
    auto p_c = [g](double d) {
        return (g - 1.0) / g * std::pow(2.0 * d / (g + 1.0), g / (g - 1.0));
    };
    auto p_star = [g](double d) { return (g - 1.0) / g * std::pow(d, g / (g - 1.0)); };
    const double lo = p_c(Du);
    const double hi = p_star(Ds);
    if (!(lo < hi))
        throw std::runtime_error(
            "admissible_pressure_window: window empty (profiles too non-uniform, "
            "D^* > (gamma+1)/2 D_*)");
    return {lo, hi};
}

inline double upstream_density(double y, double pbar, const UpstreamProfiles& prof) {
    return std::pow(prof.gamma * pbar / ((prof.gamma - 1.0) * prof.Sbar(y)),
                    1.0 / prof.gamma);
}

inline double upstream_speed(double y, double pbar, const UpstreamProfiles& prof) {
    const double g = prof.gamma;
    const double head = prof.Dbar(y) - std::pow(g * pbar / (g - 1.0), (g - 1.0) / g);
    if (head < -1e-14 * std::max(1.0, prof.Dbar(y)))
        throw std::runtime_error("upstream_speed: negative radicand, pbar out of window");
    return std::sqrt(2.0 * std::pow(prof.Sbar(y), 1.0 / g) * std::max(head, 0.0));
}

// Mass flux Q(pbar) = int_0^H y rho(y) u(y) dy, adaptive quadrature.
inline double mass_flux_of_pressure(double pbar, const UpstreamProfiles& prof) {
    auto integrand = [&](double y) {
        return y * upstream_density(y, pbar, prof) * upstream_speed(y, pbar, prof);
    };
    const double rough = std::abs(gk15(integrand, 0.0, prof.Hbar).first);
    return integrate(integrand, 0.0, prof.Hbar, std::max(1e-300, 1e-11 * rough));
}

struct UpstreamState {
    UpstreamProfiles profiles;
    double pbar = 0.0;
    double Q = 0.0;
    double p_low = 0.0, p_high = 0.0;   // admissible pressure window
    double Q_star = 0.0, Q_upper = 0.0; // soft admissible flux window
    double kappa = 0.0;                 // sup |y^-2 B''| + sup |y^-2 S''|
    double kappa0 = 0.0;                // filled by build_stream_profiles
    Curve rhobar, ubar;
    PiecewiseCubic psibar;              // cumulative stream function on [0, Hbar]
    std::vector<std::string> warnings;

    double psi_of_y(double y) const { return psibar(std::clamp(y, 0.0, profiles.Hbar)); }

    // Streamline position map h(z): inverse of psibar by monotone root lookup.
    double h_of_z(double z) const {
        const auto& x = psibar.knots();
        const auto& v = psibar.values();
        if (z <= 0.0) return 0.0;
        if (z >= v.back()) return x.back();
        auto it = std::upper_bound(v.begin(), v.end(), z);
        const std::size_t i = static_cast<std::size_t>(it - v.begin()) - 1;
        double lo = x[i], hi = x[i + 1];
        double y = 0.5 * (lo + hi);
        for (int k = 0; k < 60; ++k) {
            const double f = psibar(y) - z;
            if (f > 0.0) hi = y; else lo = y;
            const double d = psibar.deriv(y);
            double next = d > 0.0 ? y - f / d : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - y) < 1e-16 * profiles.Hbar) return next;
            y = next;
        }
        return y;
    }
};

// Determine the upstream state from (profiles, Q) by bisection on the
// strictly decreasing map pbar -> Q(pbar).
inline UpstreamState solve_upstream(const UpstreamProfiles& prof, double Q,
                                    int n_grid = 4096) {
    UpstreamState st;
    st.profiles = prof;
    st.Q = Q;
    std::tie(st.p_low, st.p_high) = admissible_pressure_window(prof);
    st.kappa = prof.kappa();
    const double Qmax = mass_flux_of_pressure(st.p_low, prof);
    st.Q_upper = Qmax;
    st.Q_star = std::pow(st.kappa, 1.0 / (4.0 * prof.gamma));
    if (!(Q > 0.0) || !(Q < Qmax))
        throw std::runtime_error("solve_upstream: no admissible subsonic upstream state "
                                 "(Q outside (0, Q(p_low)))");
    if (Q <= st.Q_star && st.kappa > 0.0)
        st.warnings.push_back("Q below the soft lower bound Q_* = kappa^(1/4gamma)");

    // Bisection to |Q(p) - Q| <= 1e-12 Q. Q(p) is decreasing in p.
    double lo = st.p_low, hi = st.p_high;
    double p = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        p = 0.5 * (lo + hi);
        const double q = mass_flux_of_pressure(p, prof);
        if (std::abs(q - Q) <= 1e-12 * Q) break;
        if (q > Q) lo = p; else hi = p;
    }
    st.pbar = p;

    const double pb = st.pbar;
    const double g = prof.gamma;
    const UpstreamProfiles pr = prof;
    st.rhobar = Curve::analytic(
        [pr, pb](double y) { return upstream_density(y, pb, pr); },
        [pr, pb](double y) {
            return -upstream_density(y, pb, pr) * pr.Sbar.deriv(y) / (pr.gamma * pr.Sbar(y));
        },
        [pr, pb](double y) {
            const double h = 1e-6 * pr.Hbar;
            return (upstream_density(y + h, pb, pr) - 2.0 * upstream_density(y, pb, pr) +
                    upstream_density(y - h, pb, pr)) / (h * h);
        });
    st.ubar = Curve::analytic(
        [pr, pb](double y) { return upstream_speed(y, pb, pr); },
        [pr, pb, g](double y) {
            const double u = upstream_speed(y, pb, pr);
            const double r = upstream_density(y, pb, pr);
            return (pr.Bbar.deriv(y) - pow_gm1(r, g) * pr.Sbar.deriv(y) / g) / u;
        },
        [pr, pb](double y) {
            const double h = 1e-6 * pr.Hbar;
            return (upstream_speed(y + h, pb, pr) - 2.0 * upstream_speed(y, pb, pr) +
                    upstream_speed(y - h, pb, pr)) / (h * h);
        });

    // Cumulative stream function on a refined grid; per-interval Gauss
    // panels keep psibar(H) consistent with the adaptive Q to near machine
    // precision, which the trapezoid rule cannot do at this grid size. The
    // interpolant carries the exact nodal slopes y (rho u)(y).
    std::vector<double> ys(n_grid + 1), ps(n_grid + 1), ds(n_grid + 1);
    auto integrand = [&](double y) { return y * st.rhobar(y) * st.ubar(y); };
    ps[0] = 0.0;
    ys[0] = 0.0;
    ds[0] = 0.0;
    for (int i = 1; i <= n_grid; ++i) {
        ys[i] = prof.Hbar * i / n_grid;
        ps[i] = ps[i - 1] + gk15(integrand, ys[i - 1], ys[i]).first;
        ds[i] = integrand(ys[i]);
    }
    st.psibar = PiecewiseCubic(ys, ps, ds);
    return st;
}

// Compose the stream-function closures B(z) = Bbar(h(z)), S(z) = Sbar(h(z))
// with constant extension outside [0, Q]; derivatives follow the chain rule
// B'(z) = Bbar'(h) / (h (rho u)(h)). Returns the gas closure for the solver.
inline GasClosure build_stream_profiles(UpstreamState& st, double eps = 0.0) {
    const UpstreamProfiles& prof = st.profiles;
    const double Q = st.psibar.values().back();

    Curve Bz, Sz;
    if (prof.kappa(64) == 0.0 && std::abs(prof.Bbar(0.0) - prof.Bbar(prof.Hbar)) == 0.0 &&
        std::abs(prof.Sbar(0.0) - prof.Sbar(prof.Hbar)) == 0.0) {
        Bz = Curve::constant(prof.Bbar(0.0));
        Sz = Curve::constant(prof.Sbar(0.0));
        st.kappa0 = 0.0;
    } else {
        // Knots at the streamline values of the psibar grid (naturally
        // clustered near z=0 where h ~ sqrt(z)).
        const auto& ys = st.psibar.knots();
        const auto& zs = st.psibar.values();
        const std::size_t n = ys.size();
        std::vector<double> bv(n), bs(n), sv(n), ss(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double y = ys[k];
            bv[k] = prof.Bbar(y);
            sv[k] = prof.Sbar(y);
            if (k == 0) {
                bs[k] = 0.0;  // forced by Bbar'(0)=0 with y^-2 Bbar'' bounded
                ss[k] = 0.0;
            } else {
                const double ru = st.rhobar(y) * st.ubar(y);
                bs[k] = prof.Bbar.deriv(y) / (y * ru);
                ss[k] = prof.Sbar.deriv(y) / (y * ru);
            }
        }
        auto flat_wrap = [Q](PiecewiseCubic pc) {
            auto p = std::make_shared<PiecewiseCubic>(std::move(pc));
            return Curve::analytic(
                [p, Q](double z) { return (*p)(std::clamp(z, 0.0, Q)); },
                [p, Q](double z) { return (z < 0.0 || z > Q) ? 0.0 : p->deriv(z); },
                [p, Q](double z) { return (z < 0.0 || z > Q) ? 0.0 : p->deriv2(z); });
        };
        Bz = flat_wrap(PiecewiseCubic(zs, bv, bs));
        Sz = flat_wrap(PiecewiseCubic(zs, sv, ss));
        double bsup = 0.0, ssup = 0.0, blip = 0.0, slip = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            bsup = std::max(bsup, std::abs(bs[k]));
            ssup = std::max(ssup, std::abs(ss[k]));
            if (k > 0) {
                const double dz = zs[k] - zs[k - 1];
                blip = std::max(blip, std::abs(bs[k] - bs[k - 1]) / dz);
                slip = std::max(slip, std::abs(ss[k] - ss[k - 1]) / dz);
            }
        }
        st.kappa0 = bsup + blip + ssup + slip;
    }

    if (eps <= 0.0) {
        // Auto eps: half of the admissible ceiling min(t_*, 1)/4.
        GasClosure probe(prof.gamma, Bz, Sz, Q, 1e-12);
        eps = 0.125 * std::min(probe.t_star, 1.0);
    }
    return GasClosure(prof.gamma, Bz, Sz, Q, eps);
}

// One-dimensional far-field stream profile y -> psibar(y); the upstream
// oracle for the PDE solver. The derivative is the defining integrand
// y (rho u)(y) rather than a differentiated interpolant.
inline Curve upstream_strip_profile(const UpstreamState& st) {
    auto p = std::make_shared<PiecewiseCubic>(st.psibar);
    const double H = st.profiles.Hbar;
    const Curve r = st.rhobar, u = st.ubar;
    return Curve::analytic(
        [p, H](double y) { return (*p)(std::clamp(y, 0.0, H)); },
        [r, u, H](double y) {
            y = std::clamp(y, 0.0, H);
            return y * r(y) * u(y);
        },
        [r, u, H](double y) {
            y = std::clamp(y, 0.0, H);
            return r(y) * u(y) + y * (r.deriv(y) * u(y) + r(y) * u.deriv(y));
        });
}

// Max upstream Mach number for the solved state (subsonic check).
inline double upstream_mach_max(const UpstreamState& st, int n = 512) {
    double m = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double y = st.profiles.Hbar * i / n;
        const double r = st.rhobar(y);
        const double c =
            std::sqrt((st.profiles.gamma - 1.0) * pow_gm1(r, st.profiles.gamma) *
                      st.profiles.Sbar(y));
        m = std::max(m, st.ubar(y) / c);
    }
    return m;
}

}  // namespace jetflow
