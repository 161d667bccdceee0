// Free-boundary extraction, the continuous-fit selection of Lambda
// (Upsilon_Lambda(1) = 0), and removal of the domain truncation by
// continuation in (mu, R).

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "jetflow/solver.hpp"

namespace jetflow {

inline constexpr double kNoBoundary = std::numeric_limits<double>::infinity();

struct FreeBoundary {
    std::vector<double> ys;       // rows in (H_*, 1)
    std::vector<double> upsilon;  // x-crossing per row, +inf if none interior
    std::vector<double> xs;       // tail columns
    std::vector<double> f;        // y-crossing per tail column
    double H_star = 0.0;
    double H_lower = 0.0;         // tail estimate of the downstream height
    double upsilon_top = kNoBoundary;  // at the top interior row (fit residual)
    bool empty = true;
};

// Locate psi = Q - theta crossings: row-wise (x = Upsilon(y)) for
// y in (H_*, 1), and column-wise (y = f(x)) for the tail. The outlet data
// column is excluded from the row scan (it is plugged above H_* by data).
inline FreeBoundary extract_free_boundary(const StreamField& fl,
                                          const TruncatedDomain& dom, double H_star,
                                          bool strict = true) {
    FreeBoundary fb;
    fb.H_star = H_star;
    const double qm = fl.Q * (1.0 - 1e-12);

    for (int j = 1; j + 1 < dom.ny; ++j) {
        const double y = dom.y(j);
        if (y <= H_star || y >= 1.0) continue;
        double ux = kNoBoundary;
        for (int i = 0; i + 2 < dom.nx; ++i) {
            if (!dom.in_domain(i, j) || !dom.in_domain(i + 1, j)) continue;
            const double a = fl.at(i, j), b = fl.at(i + 1, j);
            if (a < qm && b >= qm) {
                ux = dom.x(i) + dom.hx * (qm - a) / (b - a);
                break;
            }
        }
        fb.ys.push_back(y);
        fb.upsilon.push_back(ux);
        if (ux < kNoBoundary) fb.empty = false;
    }
    if (!fb.ys.empty()) {
        // Top interior row below the lid.
        fb.upsilon_top = fb.upsilon.back();
    }

    // Transpose tail: first upward crossing per column, where the boundary
    // is flatter than 45 degrees.
    for (int i = 1; i + 1 < dom.nx; ++i) {
        if (dom.x(i) <= 0.0) continue;
        double fy = kNoBoundary;
        for (int j = 0; j + 1 < dom.ny; ++j) {
            if (!dom.in_domain(i, j) || !dom.in_domain(i, j + 1)) continue;
            const double a = fl.at(i, j), b = fl.at(i, j + 1);
            if (a < qm && b >= qm) {
                fy = dom.y(j) + dom.hy * (qm - a) / (b - a);
                break;
            }
        }
        if (fy < kNoBoundary) {
            fb.xs.push_back(dom.x(i));
            fb.f.push_back(fy);
        }
    }
    // Keep only the flat part of the tail (|df/dx| <= 1).
    while (fb.f.size() > 1 &&
           std::abs(fb.f[1] - fb.f[0]) > std::abs(fb.xs[1] - fb.xs[0])) {
        fb.xs.erase(fb.xs.begin());
        fb.f.erase(fb.f.begin());
    }

    // Downstream-height estimate: median of f over a window that excludes
    // the outlet-data boundary layer.
    if (!fb.f.empty()) {
        const double xa = dom.R - 1.4, xb = dom.R - 0.5;
        std::vector<double> win;
        for (std::size_t k = 0; k < fb.xs.size(); ++k)
            if (fb.xs[k] >= xa && fb.xs[k] <= xb) win.push_back(fb.f[k]);
        if (win.empty()) win = fb.f;
        std::sort(win.begin(), win.end());
        fb.H_lower = win[win.size() / 2];
    } else {
        fb.H_lower = 1.0;
    }

    // R-too-small guard: the plug trace on the last interior column must be
    // a single contiguous top band. Single-row crumbs pinned against the
    // outlet Dirichlet data are ignored (they carry no interior boundary).
    if (strict) {
        const int i = dom.nx - 2;
        int bands = 0, run = 0;
        for (int j = dom.ny - 1; j >= 1; --j) {
            if (!dom.in_domain(i, j)) continue;
            if (fl.at(i, j) >= qm) {
                if (++run == 2) ++bands;
            } else {
                run = 0;
            }
        }
        if (bands > 1)
            throw std::runtime_error(
                "extract_free_boundary: free boundary re-enters the outlet column "
                "(truncation R too small)");
    }
    return fb;
}

// Max deviation | |grad psi / y| - Lambda | sampled one cell inside the wet
// region along the free boundary: rows of the Upsilon graph away from the
// lid, and columns of the flat tail away from the outlet bend.
inline double check_free_boundary_condition(const StreamField& fl,
                                            const TruncatedDomain& dom,
                                            const FreeBoundary& fb, double Lambda) {
    if (fb.empty || Lambda <= 0.0) return 0.0;
    const double qm = fl.Q * (1.0 - 1e-12);
    double dev = 0.0;
    auto cell_grad = [&](int ci, int cj) {
        const double sw = fl.at(ci, cj), se = fl.at(ci + 1, cj);
        const double nw = fl.at(ci, cj + 1), ne = fl.at(ci + 1, cj + 1);
        const double yc = (cj + 0.5) * dom.hy;
        const double dx = (se + ne - sw - nw) / (2.0 * dom.hx);
        const double dy = (nw + ne - sw - se) / (2.0 * dom.hy);
        return std::sqrt(dx * dx + dy * dy) / yc;
    };
    for (std::size_t k = 0; k < fb.ys.size(); ++k) {
        const double y = fb.ys[k];
        if (!(fb.upsilon[k] < kNoBoundary)) continue;
        if (y < fb.H_lower + 2.0 * dom.hy || y > 1.0 - 2.0 * dom.hy) continue;
        const int j = static_cast<int>(std::lround(y / dom.hy));
        int icross = -1;
        for (int i = 0; i + 2 < dom.nx; ++i)
            if (dom.in_domain(i, j) && fl.at(i, j) < qm && fl.at(i + 1, j) >= qm) {
                icross = i;
                break;
            }
        if (icross < 2 || j < 2) continue;
        dev = std::max(dev, std::abs(cell_grad(icross - 1, j - 1) - Lambda));
    }
    for (std::size_t k = 0; k < fb.xs.size(); ++k) {
        if (fb.xs[k] > dom.R - 0.5 || fb.xs[k] < 0.5) continue;
        const int i = static_cast<int>(std::lround((fb.xs[k] + dom.mu) / dom.hx));
        int jcross = -1;
        for (int j = 0; j + 2 < dom.ny; ++j)
            if (dom.in_domain(i, j) && fl.at(i, j) < qm && fl.at(i, j + 1) >= qm) {
                jcross = j;
                break;
            }
        if (jcross < 2 || i < 1) continue;
        dev = std::max(dev, std::abs(cell_grad(i - 1, jcross - 1) - Lambda));
    }
    return dev;
}

struct FitTrial {
    double Lambda = 0.0;
    double phi = 0.0;  // Upsilon_Lambda(1-)
    double energy = 0.0;
    long sweeps = 0;
};

struct FitResult {
    double Lambda_star = 0.0;
    double fit_residual = 0.0;  // Upsilon(1-) at Lambda_star
    bool bracketed = false;
    std::vector<FitTrial> history;
    StreamField field;
    SolveReport report;
    FreeBoundary boundary;
    double H_star = 1.0;
    // Continuation table (one row per truncation level).
    struct Level {
        double mu, R, Lambda, H_lower;
        long sweeps;
    };
    std::vector<Level> levels;
    bool continuation_converged = false;
};

struct FitOptions {
    double bracket_c0 = 8.0;      // initial bracket [Q/c0, c0 Q]
    int max_expand = 6;
    double width_tol = 1e-3;      // bracket width tolerance, relative to Q
    double solve_tol = 1e-6;      // per-sweep tolerance during bracketing
    double final_tol = 1e-10;     // tolerance of the final solve
    int threads = 1;
    long max_sweeps = 0;          // 0: budget_factor (nx + ny)
    long budget_factor = 200;
    double margin_window = 0.1;
};

namespace detail {

struct PhiEval {
    double phi;
    StreamField field;
    SolveReport report;
};

inline PhiEval eval_phi(const TruncatedDomain& dom, const ClosureCache& cc, double Q,
                        double Lambda, const FitOptions& fo, double tol,
                        const StreamField* warm) {
    auto bd = boundary_data(dom, Q, Lambda);
    SolverOptions so;
    so.tol = tol;
    so.threads = fo.threads;
    so.max_sweeps =
        fo.max_sweeps > 0 ? fo.max_sweeps : fo.budget_factor * (dom.nx + dom.ny);
    EnergySolver solver(dom, bd, cc, so);
    // Coordinate descent retreats a plug freely but can only grow it along
    // an existing front. Moving to a larger Lambda therefore seeds with the
    // pointwise max of the warm field and the fresh wedge guess (over-plugged
    // starts relax downhill); a retreat direction keeps the warm field as is.
    StreamField seed;
    if (!warm) {
        seed = solver.initial_guess();
    } else if (Lambda > warm->Lambda * (1.0 + 1e-12)) {
        seed = solver.initial_guess();
        for (std::size_t k = 0; k < seed.psi.size(); ++k)
            seed.psi[k] = std::max(seed.psi[k], warm->psi[k]);
    } else {
        seed = *warm;
    }
    auto [field, report] = solver.minimize(&seed);
    auto fb = extract_free_boundary(field, dom, bd.H_star, /*strict=*/false);
    return {fb.upsilon_top, std::move(field), std::move(report)};
}

}  // namespace detail

// Bracket-expand and bisect a monotone-decreasing residual phi(Lambda):
// positive at small Lambda (+inf allowed, no free boundary), negative at
// large Lambda. Exits when |phi| <= phi_tol or the bracket is narrower than
// width_tol. Shared by fit_lambda and directly testable on stubs.
template <class Phi>
std::pair<double, bool> fit_bisection(Phi&& phi, double lo, double hi, double phi_tol,
                                      double width_tol, int max_expand) {
    double phi_hi = phi(hi);
    for (int e = 0; phi_hi >= 0.0 && e < max_expand; ++e) {
        hi *= 2.0;
        phi_hi = phi(hi);
    }
    double phi_lo = phi(lo);
    for (int e = 0; phi_lo <= 0.0 && e < max_expand; ++e) {
        lo *= 0.5;
        phi_lo = phi(lo);
    }
    if (phi_hi >= 0.0 || phi_lo <= 0.0) return {0.5 * (lo + hi), false};
    while (true) {
        const double mid = 0.5 * (lo + hi);
        const double phi_mid = phi(mid);
        if (std::isfinite(phi_mid) && std::abs(phi_mid) <= phi_tol) return {mid, true};
        if (phi_mid > 0.0) lo = mid; else hi = mid;
        if (hi - lo <= width_tol) return {0.5 * (lo + hi), true};
    }
}

// Continuous fit on a fixed truncation: bisection in Lambda on the monotone
// discrete residual phi(Lambda) = Upsilon_Lambda(1-), warm-starting each
// solve from the nearest previous field.
inline FitResult fit_lambda(const TruncatedDomain& dom, const ClosureCache& cc,
                            double Q, FitOptions fo = {},
                            std::optional<std::pair<double, double>> seed_bracket = {},
                            const StreamField* warm = nullptr) {
    FitResult out;
    const double lo0 = seed_bracket ? seed_bracket->first : Q / fo.bracket_c0;
    const double hi0 = seed_bracket ? seed_bracket->second : Q * fo.bracket_c0;

    StreamField last;
    bool have_last = false;
    if (warm) {
        last = *warm;
        have_last = true;
    }
    auto phi_at = [&](double L) {
        auto ev = detail::eval_phi(dom, cc, Q, L, fo, fo.solve_tol,
                                   have_last ? &last : nullptr);
        last = ev.field;
        have_last = true;
        out.history.push_back({L, ev.phi, ev.report.energy, ev.report.sweeps});
        return ev.phi;
    };

    auto [mid, bracketed] =
        fit_bisection(phi_at, lo0, hi0, 2.0 * dom.hx, fo.width_tol * Q, fo.max_expand);
    if (!bracketed)
        throw std::runtime_error("fit_lambda: no sign change of Upsilon(1) after "
                                 "bracket expansion (model/grid inconsistency)");
    out.bracketed = true;
    out.Lambda_star = mid;
    out.H_star = h_star(mid, Q);
    auto ev = detail::eval_phi(dom, cc, Q, mid, fo, fo.final_tol,
                               have_last ? &last : nullptr);
    out.history.push_back({mid, ev.phi, ev.report.energy, ev.report.sweeps});
    out.fit_residual = ev.phi;
    out.field = std::move(ev.field);
    out.report = std::move(ev.report);
    out.boundary = extract_free_boundary(out.field, dom, out.H_star);
    out.levels.push_back({dom.mu, dom.R, out.Lambda_star, out.boundary.H_lower,
                          out.report.sweeps});
    return out;
}

// Resample a solved field onto a new (larger) truncation: bilinear inside
// the old extent, psi-dagger data in the new outlet slab, the inlet
// extension in the new inlet slab.
inline StreamField transfer_field(const StreamField& oldf, const TruncatedDomain& olddom,
                                  const TruncatedDomain& newdom, double Q,
                                  double Lambda) {
    const double Hs = h_star(Lambda, Q);
    StreamField f;
    f.nx = newdom.nx;
    f.ny = newdom.ny;
    f.Q = Q;
    f.Lambda = Lambda;
    f.psi.assign(static_cast<std::size_t>(newdom.nx) * newdom.ny, Q);
    auto sample_old = [&](double x, double y) {
        const double fx =
            std::clamp((x + olddom.mu) / olddom.hx, 0.0, olddom.nx - 1.0);
        const double fy = std::clamp(y / olddom.hy, 0.0, olddom.ny - 1.0);
        const int i0 = std::min(static_cast<int>(fx), olddom.nx - 2);
        const int j0 = std::min(static_cast<int>(fy), olddom.ny - 2);
        const double ax = fx - i0, ay = fy - j0;
        return (1 - ax) * (1 - ay) * oldf.at(i0, j0) + ax * (1 - ay) * oldf.at(i0 + 1, j0) +
               (1 - ax) * ay * oldf.at(i0, j0 + 1) + ax * ay * oldf.at(i0 + 1, j0 + 1);
    };
    for (int j = 0; j < newdom.ny; ++j)
        for (int i = 0; i < newdom.nx; ++i) {
            const double x = newdom.x(i), y = newdom.y(j);
            double v;
            if (x > olddom.R) v = psi_dagger(std::min(y, 1.0), Lambda, Q, Hs);
            else if (x < -olddom.mu)
                v = y >= newdom.b_mu ? Q : inlet_ramp(y, newdom, Q);
            else v = sample_old(x, y);
            f.psi[newdom.idx(i, j)] = std::clamp(v, 0.0, Q);
        }
    return f;
}

// First-level fit with a grid cascade: bracket the fit on 2x-coarsened
// grids first (cheap), then polish on the target grid with the transferred
// field and a tight bracket.
inline FitResult fit_lambda_cascade(const Nozzle& nz, double mu, double R,
                                    const ClosureCache& cc, double Q, double hx,
                                    double hy, double y_top, const FitOptions& fo) {
    TruncatedDomain dom = build_grid(nz, mu, R, hx, hy, y_top);
    if (std::min(dom.nx, dom.ny) < 80) return fit_lambda(dom, cc, Q, fo);
    FitResult coarse =
        fit_lambda_cascade(nz, mu, R, cc, Q, 2.0 * hx, 2.0 * hy, y_top, fo);
    TruncatedDomain cdom = build_grid(nz, mu, R, 2.0 * hx, 2.0 * hy, y_top);
    StreamField seed = transfer_field(coarse.field, cdom, dom, Q, coarse.Lambda_star);
    const double L = coarse.Lambda_star;
    return fit_lambda(dom, cc, Q, fo, std::pair{0.8 * L, 1.25 * L}, &seed);
}

// Continuation over a strictly increasing truncation schedule: fit Lambda on
// each level, warm-starting the field and the bracket from the previous one.
inline FitResult continuation(const Nozzle& nz,
                              const std::vector<std::pair<double, double>>& schedule,
                              const ClosureCache& cc, double Q, double hx, double hy,
                              double y_top, FitOptions fo = {}) {
    if (schedule.empty()) throw std::invalid_argument("continuation: empty schedule");
    FitResult result;
    std::optional<TruncatedDomain> prev_dom;
    std::vector<FreeBoundary> boundaries;
    for (std::size_t lev = 0; lev < schedule.size(); ++lev) {
        const auto [mu, R] = schedule[lev];
        if (lev > 0 && !(mu > schedule[lev - 1].first && R > schedule[lev - 1].second))
            throw std::invalid_argument("continuation: schedule must increase in mu and R");
        TruncatedDomain dom = build_grid(nz, mu, R, hx, hy, y_top);
        FitResult r;
        if (lev == 0) {
            r = fit_lambda_cascade(nz, mu, R, cc, Q, hx, hy, y_top, fo);
        } else {
            StreamField seed =
                transfer_field(result.field, *prev_dom, dom, Q, result.Lambda_star);
            const double L = result.Lambda_star;
            r = fit_lambda(dom, cc, Q, fo, std::pair{0.8 * L, 1.25 * L}, &seed);
        }
        r.levels.insert(r.levels.begin(), result.levels.begin(), result.levels.end());
        boundaries.push_back(r.boundary);
        if (lev > 0) {
            const double dL = std::abs(r.Lambda_star - result.Lambda_star);
            // Free-boundary movement on the common subdomain.
            double move = 0.0;
            const auto& fa = boundaries[lev - 1];
            const auto& fbd = boundaries[lev];
            for (std::size_t a = 0; a < fa.ys.size(); ++a)
                for (std::size_t b = 0; b < fbd.ys.size(); ++b)
                    if (std::abs(fa.ys[a] - fbd.ys[b]) < 1e-12 &&
                        fa.upsilon[a] < kNoBoundary && fbd.upsilon[b] < kNoBoundary)
                        move = std::max(move, std::abs(fa.upsilon[a] - fbd.upsilon[b]));
            r.continuation_converged =
                dL <= 1e-3 * std::abs(r.Lambda_star) && move <= 2.0 * hx;
        }
        result = std::move(r);
        prev_dom = dom;
    }
    return result;
}

}  // namespace jetflow
