// Test-side 1D oracle for the strip reduction of the stream-function
// equation: (g_eps(|psi'/y|^2, psi) psi'/y)' = y dGdz(...). Shooting on the
// axis momentum density with RK4; closures evaluated through the bisection
// oracle, not the library's Newton/table paths.
//
// State u = (psi, F) with F(y) := g_eps(w^2, psi) w and w := psi'/y:
//   psi' = y w(F, psi),  F' = y dGdz(w^2, psi),  psi(0) = 0, F(0) = m.
// The system is regular at the axis (w(0) finite, psi ~ w0 y^2 / 2).

#pragma once

#include <cmath>
#include <vector>

#include "jetflow/thermo.hpp"
#include "oracles.hpp"

namespace oracle {

// The 1D flux variable F = g(w^2, psi) w is the axial velocity u, and the
// subsonic density follows from the Bernoulli relation in closed form:
// rho = ((B - u^2/2)/S)^(1/(gamma-1)), w = rho u. The oracle asserts the
// solution stays strictly inside the pure subsonic range (no blend branch).
struct StripOde {
    const jetflow::GasClosure& gas;

    double rho_of_u(double u, double z) const {
        const double head = gas.B(z) - 0.5 * u * u;
        if (!(head > 0.0)) throw std::domain_error("strip oracle: vacuum velocity");
        return std::pow(head / gas.S(z), 1.0 / (gas.gamma - 1.0));
    }

    double w_of_flux(double u, double z) const {
        if (u <= 0.0) return 0.0;
        const double rho = rho_of_u(u, z);
        const double w = rho * u;
        const auto c = jetflow::critical_quantities(z, gas);
        if (w * w > c.t_c - gas.eps)
            throw std::domain_error("strip oracle: solution not purely subsonic");
        return w;
    }

    double dGdz(double t, double z, double rho) const {
        (void)t;
        if (gas.B.deriv(z) == 0.0 && gas.S.deriv(z) == 0.0) return 0.0;
        return gas.B.deriv(z) * rho -
               gas.S.deriv(z) * std::pow(rho, gas.gamma) / gas.gamma;
    }
};

// psi on the uniform RK4 grid {k y_top / n} for shooting parameter m = F(0).
inline std::vector<double> strip_rk4(const StripOde& ode, double y_top, int n,
                                     double m) {
    std::vector<double> out(n + 1, 0.0);
    const double h = y_top / n;
    double p = 0.0, F = m;
    auto fp = [&](double y, double pv, double Fv) {
        return y * ode.w_of_flux(Fv, pv);
    };
    auto fF = [&](double y, double pv, double Fv) {
        if (Fv <= 0.0) return 0.0;
        const double w = ode.w_of_flux(Fv, pv);
        return y * ode.dGdz(w * w, pv, ode.rho_of_u(Fv, pv));
    };
    for (int k = 0; k < n; ++k) {
        const double y = k * h;
        const double k1p = fp(y, p, F), k1F = fF(y, p, F);
        const double k2p = fp(y + 0.5 * h, p + 0.5 * h * k1p, F + 0.5 * h * k1F);
        const double k2F = fF(y + 0.5 * h, p + 0.5 * h * k1p, F + 0.5 * h * k1F);
        const double k3p = fp(y + 0.5 * h, p + 0.5 * h * k2p, F + 0.5 * h * k2F);
        const double k3F = fF(y + 0.5 * h, p + 0.5 * h * k2p, F + 0.5 * h * k2F);
        const double k4p = fp(y + h, p + h * k3p, F + h * k3F);
        const double k4F = fF(y + h, p + h * k3p, F + h * k3F);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        F += h / 6.0 * (k1F + 2.0 * k2F + 2.0 * k3F + k4F);
        out[static_cast<std::size_t>(k) + 1] = p;
    }
    return out;
}

// Shooting: choose m so that psi(y_top) = psi_top. Returns the psi grid.
inline std::vector<double> strip_solution(const jetflow::GasClosure& gas, double y_top,
                                          double psi_top, int n = 4096) {
    StripOde ode{gas};
    double lo = 0.0, hi = 2.0 * psi_top / (y_top * y_top);
    while (strip_rk4(ode, y_top, n, hi).back() < psi_top) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
        const double m = 0.5 * (lo + hi);
        if (strip_rk4(ode, y_top, n, m).back() < psi_top) lo = m; else hi = m;
        if (hi - lo < 1e-15 * (1.0 + hi)) break;
    }
    return strip_rk4(ode, y_top, n, 0.5 * (lo + hi));
}

}  // namespace oracle
