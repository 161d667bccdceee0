// Physical-field recovery from the stream function, the downstream state
// behind the free boundary (theta map), far-field residuals, conservation
// diagnostics, and the column mass flux.

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "jetflow/fit.hpp"
#include "jetflow/solver.hpp"
#include "jetflow/upstream.hpp"

namespace jetflow {

struct DownstreamState {
    double Lambda = 0.0;
    double rho0 = 0.0;   // boundary density 1/g(Lambda^2, Q)
    double p_out = 0.0;  // outer pressure
    double H_low = 0.0;  // downstream height theta(Hbar)
    PiecewiseCubic theta;        // upstream y -> downstream position
    PiecewiseCubic theta_inv;    // downstream eta -> upstream y
    UpstreamState upstream;      // copy for closures

    double rho_d(double eta) const {
        const double y = theta_inv(std::clamp(eta, 0.0, H_low));
        const auto& pr = upstream.profiles;
        return std::pow(pr.gamma * p_out / ((pr.gamma - 1.0) * pr.Sbar(y)),
                        1.0 / pr.gamma);
    }
    double u_d(double eta) const {
        const double y = theta_inv(std::clamp(eta, 0.0, H_low));
        const auto& pr = upstream.profiles;
        const double head =
            pr.Bbar(y) - std::pow(pr.gamma * p_out / (pr.gamma - 1.0),
                                  (pr.gamma - 1.0) / pr.gamma) *
                             std::pow(pr.Sbar(y), 1.0 / pr.gamma);
        return std::sqrt(2.0 * std::max(head, 0.0));
    }
    // Downstream stream profile psi_under(eta) = psibar(theta^-1(eta)).
    double psi_lower(double eta) const {
        return upstream.psi_of_y(theta_inv(std::clamp(eta, 0.0, H_low)));
    }
};

// Outer pressure from the free-boundary momentum (Eq. Ld inverted):
// rho0 = 1/g(Lambda^2, Q), p_out = (gamma-1) Sbar(Hbar) rho0^gamma / gamma.
inline std::pair<double, double> outer_pressure(double Lambda, const GasClosure& gas,
                                                const UpstreamProfiles& prof) {
    const double tc = critical_quantities(gas.Q, gas).t_c;
    if (!(Lambda * Lambda < tc))
        throw std::domain_error("outer_pressure: Lambda at or above the critical momentum");
    const double rho0 = 1.0 / invert_density(Lambda * Lambda, gas.Q, gas);
    const double SH = prof.Sbar(prof.Hbar);
    const double p_out = (prof.gamma - 1.0) * SH * pow_g(rho0, prof.gamma) / prof.gamma;
    // Forward relation check.
    const double BH = prof.Bbar(prof.Hbar);
    const double fwd = rho0 * std::sqrt(2.0 * BH - 2.0 * pow_gm1(rho0, prof.gamma) * SH);
    if (std::abs(fwd - Lambda) > 1e-10 * std::max(1.0, Lambda))
        throw std::runtime_error("outer_pressure: forward momentum relation violated");
    return {rho0, p_out};
}

// Downstream state by integrating the regularized theta equation
//   d(theta^2)/dy = 2 y (rhobar ubar)(y) / (rho_d u_d)(theta(y)),
// where (rho_d u_d)(theta(y)) has the closed form in terms of y. RK4.
inline DownstreamState downstream_state(double Lambda, const GasClosure& gas,
                                        const UpstreamState& st, int n_steps = 4096) {
    DownstreamState ds;
    ds.Lambda = Lambda;
    ds.upstream = st;
    const auto& pr = st.profiles;
    std::tie(ds.rho0, ds.p_out) = outer_pressure(Lambda, gas, pr);

    auto ru_down = [&](double y) {
        const double g = pr.gamma;
        const double rho = std::pow(g * ds.p_out / ((g - 1.0) * pr.Sbar(y)), 1.0 / g);
        const double head = pr.Bbar(y) - std::pow(g * ds.p_out / (g - 1.0), (g - 1.0) / g) *
                                             std::pow(pr.Sbar(y), 1.0 / g);
        if (!(head > 0.0))
            throw std::runtime_error(
                "downstream_state: nonpositive downstream speed (Lambda too large)");
        return rho * std::sqrt(2.0 * head);
    };
    auto rhs = [&](double y) {  // d(theta^2)/dy; independent of theta
        return 2.0 * y * st.rhobar(y) * st.ubar(y) / ru_down(y);
    };

    // RK4 on the y-only right side collapses to Simpson per step.
    const double h = pr.Hbar / n_steps;
    std::vector<double> ys(n_steps + 1), th(n_steps + 1), dth(n_steps + 1);
    double t2 = 0.0;
    ys[0] = 0.0;
    th[0] = 0.0;
    for (int k = 0; k < n_steps; ++k) {
        const double y = k * h;
        t2 += h / 6.0 * (rhs(y) + 4.0 * rhs(y + 0.5 * h) + rhs(y + h));
        ys[k + 1] = (k + 1) * h;
        th[k + 1] = std::sqrt(t2);
    }
    // theta ~ sqrt(r(0)) y near the axis with r = (rhobar ubar)/ru_down.
    dth[0] = std::sqrt(st.rhobar(0.0) * st.ubar(0.0) / ru_down(0.0));
    for (int k = 1; k <= n_steps; ++k) dth[k] = 0.5 * rhs(ys[k]) / th[k];
    ds.theta = PiecewiseCubic(ys, th, dth);
    ds.H_low = th[n_steps];
    std::vector<double> inv_d(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) inv_d[k] = 1.0 / dth[k];
    ds.theta_inv = PiecewiseCubic(th, ys, inv_d);
    return ds;
}

struct FlowSolution {
    int nx = 0, ny = 0;
    std::vector<double> psi, rho, u, v, p, mach, omega;
    std::vector<std::uint8_t> wet;  // node touches a wet cell
    double mach_max = 0.0;
    double v_max_interior = 0.0;    // max v away from the inlet ramp
    double bernoulli_residual = 0.0;
    FreeBoundary boundary;
    double upstream_residual = 0.0;
    double downstream_residual = 0.0;
};

// Recover (rho, u, v, p, M, omega) from the stream function: the same
// bilinear cell gradients as the energy averaged to nodes over wet cells.
inline FlowSolution recover_fields(const StreamField& fl, const TruncatedDomain& dom,
                                   const GasClosure& gas) {
    FlowSolution out;
    out.nx = dom.nx;
    out.ny = dom.ny;
    const std::size_t n = fl.psi.size();
    out.psi = fl.psi;
    out.rho.assign(n, 0.0);
    out.u.assign(n, 0.0);
    out.v.assign(n, 0.0);
    out.p.assign(n, 0.0);
    out.mach.assign(n, 0.0);
    out.omega.assign(n, 0.0);
    out.wet.assign(n, 0);
    const double qm = fl.Q * (1.0 - 1e-12);

    std::vector<double> gx(n, 0.0), gy(n, 0.0);
    std::vector<int> cnt(n, 0);
    for (int cj = 0; cj + 1 < dom.ny; ++cj)
        for (int ci = 0; ci + 1 < dom.nx; ++ci) {
            if (!dom.in_domain(ci, cj) || !dom.in_domain(ci + 1, cj) ||
                !dom.in_domain(ci, cj + 1) || !dom.in_domain(ci + 1, cj + 1))
                continue;
            const double sw = fl.at(ci, cj), se = fl.at(ci + 1, cj);
            const double nw = fl.at(ci, cj + 1), ne = fl.at(ci + 1, cj + 1);
            const double zc = 0.25 * (sw + se + nw + ne);
            if (zc >= qm) continue;
            const double yc = (cj + 0.5) * dom.hy;
            const double dx = (se + ne - sw - nw) / (2.0 * dom.hx) / yc;
            const double dy = (nw + ne - sw - se) / (2.0 * dom.hy) / yc;
            for (int b = 0; b <= 1; ++b)
                for (int a = 0; a <= 1; ++a) {
                    const int k = dom.idx(ci + a, cj + b);
                    gx[k] += dx;
                    gy[k] += dy;
                    ++cnt[k];
                }
        }

    for (int j = 0; j < dom.ny; ++j)
        for (int i = 0; i < dom.nx; ++i) {
            const int k = dom.idx(i, j);
            if (cnt[k] == 0 || !dom.in_domain(i, j)) continue;
            out.wet[k] = 1;
            const double px = gx[k] / cnt[k], py = gy[k] / cnt[k];
            const double t = px * px + py * py;
            const double z = fl.psi[k];
            const auto c = critical_quantities(z, gas);
            if (t >= c.t_c - gas.eps)
                throw std::runtime_error("recover_fields: sonic/supersonic node at (" +
                                         std::to_string(dom.x(i)) + ", " +
                                         std::to_string(dom.y(j)) + ")");
            const double g = invert_density(t, z, gas);
            const double rho = 1.0 / g;
            out.rho[k] = rho;
            out.u[k] = g * py;
            out.v[k] = -g * px;
            const double Sz = gas.S(z);
            out.p[k] = (gas.gamma - 1.0) * Sz * pow_g(rho, gas.gamma) / gas.gamma;
            const double c2 = (gas.gamma - 1.0) * pow_gm1(rho, gas.gamma) * Sz;
            out.mach[k] = std::sqrt((out.u[k] * out.u[k] + out.v[k] * out.v[k]) / c2);
            out.mach_max = std::max(out.mach_max, out.mach[k]);
            const double y = dom.y(j);
            out.omega[k] = -y * rho * gas.B.deriv(z) +
                           y * pow_g(rho, gas.gamma) * gas.S.deriv(z) / gas.gamma;
            const double bern =
                0.5 * (out.u[k] * out.u[k] + out.v[k] * out.v[k]) +
                pow_gm1(rho, gas.gamma) * Sz - gas.B(z);
            out.bernoulli_residual = std::max(out.bernoulli_residual, std::abs(bern));
            if (dom.x(i) > -dom.mu + 0.25 * (dom.mu + dom.R))
                out.v_max_interior = std::max(out.v_max_interior, out.v[k]);
        }
    return out;
}

// Column-wise mass flux by the discrete quadrature consistent with the
// gradient stencil: sum of cell-averaged d(psi)/dy over the wet part of
// each cell column (telescopes to psi at the top of the wet region).
inline std::vector<double> column_mass_flux(const StreamField& fl,
                                            const TruncatedDomain& dom) {
    std::vector<double> flux;
    const double qm = fl.Q * (1.0 - 1e-12);
    for (int ci = 0; ci + 1 < dom.nx; ++ci) {
        double acc = 0.0;
        bool any = false;
        for (int cj = 0; cj + 1 < dom.ny; ++cj) {
            if (!dom.in_domain(ci, cj) || !dom.in_domain(ci + 1, cj) ||
                !dom.in_domain(ci, cj + 1) || !dom.in_domain(ci + 1, cj + 1))
                break;
            const double sw = fl.at(ci, cj), se = fl.at(ci + 1, cj);
            const double nw = fl.at(ci, cj + 1), ne = fl.at(ci + 1, cj + 1);
            if (0.25 * (sw + se + nw + ne) >= qm) break;
            acc += 0.5 * (nw + ne - sw - se);  // cell d(psi)/dy * hy
            any = true;
        }
        if (any) flux.push_back(acc);
    }
    return flux;
}

// Far-field residuals: sup over the leftmost (rightmost) 10% of columns of
// |psi - psibar| (|psi - psi_under| below H_low), both relative to Q.
inline std::pair<double, double> farfield_residuals(const StreamField& fl,
                                                    const TruncatedDomain& dom,
                                                    const UpstreamState& st,
                                                    const DownstreamState& ds) {
    const int nwin = std::max(1, dom.nx / 10);
    double up = 0.0, down = 0.0;
    for (int j = 0; j < dom.ny; ++j) {
        for (int i = 1; i <= nwin; ++i) {
            if (!dom.in_domain(i, j)) continue;
            up = std::max(up, std::abs(fl.at(i, j) - st.psi_of_y(dom.y(j))));
        }
        const double y = dom.y(j);
        if (y < ds.H_low)
            for (int i = dom.nx - 1 - nwin; i + 1 < dom.nx; ++i) {
                if (!dom.in_domain(i, j)) continue;
                down = std::max(down, std::abs(fl.at(i, j) - ds.psi_lower(y)));
            }
    }
    return {up / fl.Q, down / fl.Q};
}

}  // namespace jetflow
