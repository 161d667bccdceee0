// Test-side oracles, deliberately independent of the library's solution
// paths: plain bisection for the density inversion, adaptive Simpson for
// quadrature, and centered finite differences.

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "jetflow/thermo.hpp"

namespace oracle {

// Subsonic density root of 2 rho^2 (B - rho^(gamma-1) S) = t by bisection
// only (no Newton), bracketed on (rho_c, rho_m].
inline double subsonic_density(double t, double B, double S, double gamma) {
    const double rho_c = std::pow(2.0 * B / ((gamma + 1.0) * S), 1.0 / (gamma - 1.0));
    const double rho_m = std::pow(B / S, 1.0 / (gamma - 1.0));
    auto f = [&](double rho) {
        return 2.0 * rho * rho * (B - std::pow(rho, gamma - 1.0) * S) - t;
    };
    double lo = rho_c * (1.0 + 1e-15), hi = rho_m;
    if (f(lo) < 0.0) throw std::domain_error("oracle: t beyond critical momentum");
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (lo + hi);
        if (f(m) > 0.0) lo = m; else hi = m;
    }
    return 0.5 * (lo + hi);
}

inline double g_of_t(double t, double B, double S, double gamma) {
    return 1.0 / subsonic_density(t, B, S, gamma);
}

// Adaptive Simpson quadrature.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b,
                          double fa, double fm, double fb, double whole, double tol,
                          int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Centered finite differences.
template <class F>
double diff(F&& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

template <class F>
double diff2(F&& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

}  // namespace oracle
