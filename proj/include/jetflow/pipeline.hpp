// Command pipeline shared by the CLI and the tests: upstream solve, full jet
// solve with continuation, Lambda sweep, output writing, and the run
// manifest.

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "jetflow/config.hpp"
#include "jetflow/fit.hpp"
#include "jetflow/postproc.hpp"

namespace jetflow {

struct PipelineParts {
    UpstreamProfiles profiles;
    UpstreamState upstream;
    GasClosure gas;
    Nozzle nozzle;
};

inline UpstreamProfiles make_profiles(const RunConfig& c) {
    if (c.profile_preset == "constant")
        return constant_profiles(c.B0, c.S0, c.Hbar, c.gamma, c.Q);
    if (c.profile_preset == "quadratic-bump")
        return quadratic_bump_profiles(c.B0, c.S0, c.bump_b, c.bump_s, c.Hbar, c.gamma, c.Q);
    if (c.profile_preset == "tables") {
        auto bt = read_table_file(c.bbar_file);
        auto st = read_table_file(c.sbar_file);
        return profiles_from_tables(bt, st, c.gamma, c.Q);
    }
    throw std::runtime_error("unknown profile preset: " + c.profile_preset);
}

inline Nozzle make_nozzle(const RunConfig& c) {
    if (c.nozzle_preset == "tangent") return Nozzle::tangent(c.Hbar, c.nozzle_scale);
    if (c.nozzle_preset == "table") return Nozzle::from_table(read_table_file(c.nozzle_file));
    throw std::runtime_error("unknown nozzle preset: " + c.nozzle_preset);
}

inline PipelineParts build_parts(const RunConfig& c) {
    PipelineParts p;
    p.profiles = make_profiles(c);
    p.upstream = solve_upstream(p.profiles, c.Q);
    p.gas = build_stream_profiles(p.upstream, c.eps);
    p.nozzle = make_nozzle(c);
    return p;
}

// ---------------------------------------------------------------------------
// Output writers: CSV with '.' decimal separator, LF line endings,
// 17-significant-digit floats; summary as flat key=value lines.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& body) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << body;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

struct SolveArtifacts {
    RunConfig config;
    PipelineParts parts;
    TruncatedDomain domain;   // final level
    FitResult fit;
    FlowSolution solution;
    DownstreamState downstream;
    std::vector<double> flux;
    double flux_spread = 0.0;  // max relative column-flux deviation
    StructureChecks structure;
    std::map<std::string, double> timings;
};

inline const std::vector<std::string>& summary_keys() {
    static const std::vector<std::string> keys = {
        "Q", "Lambda", "lambda_eps", "pbar", "p_out", "H_low", "H_low_levelset",
        "H_star", "kappa", "kappa0", "eps", "gamma", "subsonic_margin",
        "subsonic_margin_global", "upstream_residual", "downstream_residual",
        "energy", "sweeps", "converged", "fit_residual", "mach_max",
        "monotonicity_violation", "flux_spread", "bernoulli_residual"};
    return keys;
}

inline std::string render_summary(const SolveArtifacts& a) {
    using detail::g17;
    std::map<std::string, std::string> kv;
    kv["Q"] = g17(a.parts.gas.Q);
    kv["Lambda"] = g17(a.fit.Lambda_star);
    kv["lambda_eps"] = g17(a.fit.field.lambda_eps);
    kv["pbar"] = g17(a.parts.upstream.pbar);
    kv["p_out"] = g17(a.downstream.p_out);
    kv["H_low"] = g17(a.downstream.H_low);
    kv["H_low_levelset"] = g17(a.fit.boundary.H_lower);
    kv["H_star"] = g17(a.fit.H_star);
    kv["kappa"] = g17(a.parts.upstream.kappa);
    kv["kappa0"] = g17(a.parts.upstream.kappa0);
    kv["eps"] = g17(a.parts.gas.eps);
    kv["gamma"] = g17(a.parts.gas.gamma);
    kv["subsonic_margin"] = g17(a.structure.subsonic_margin);
    kv["subsonic_margin_global"] = g17(a.structure.subsonic_margin_global);
    kv["upstream_residual"] = g17(a.solution.upstream_residual);
    kv["downstream_residual"] = g17(a.solution.downstream_residual);
    kv["energy"] = g17(a.fit.report.energy);
    kv["sweeps"] = std::to_string(a.fit.report.sweeps);
    kv["converged"] = a.fit.report.converged ? "1" : "0";
    kv["fit_residual"] = g17(a.fit.fit_residual);
    kv["mach_max"] = g17(a.solution.mach_max);
    kv["monotonicity_violation"] = g17(a.fit.report.monotonicity_violation);
    kv["flux_spread"] = g17(a.flux_spread);
    kv["bernoulli_residual"] = g17(a.solution.bernoulli_residual);
    std::string out;
    for (const auto& key : summary_keys()) out += key + " = " + kv.at(key) + "\n";
    return out;
}

inline void write_outputs(const SolveArtifacts& a, const std::filesystem::path& dir) {
    using detail::g17;
    std::filesystem::create_directories(dir);
    const auto& dom = a.domain;
    const auto& sol = a.solution;

    {  // fields.csv: one row per wet node
        std::string s = "x,y,psi,rho,u,v,p,mach,omega\n";
        for (int j = 0; j < dom.ny; ++j)
            for (int i = 0; i < dom.nx; ++i) {
                const int k = dom.idx(i, j);
                if (!sol.wet[k]) continue;
                s += g17(dom.x(i)) + "," + g17(dom.y(j)) + "," + g17(sol.psi[k]) + "," +
                     g17(sol.rho[k]) + "," + g17(sol.u[k]) + "," + g17(sol.v[k]) + "," +
                     g17(sol.p[k]) + "," + g17(sol.mach[k]) + "," + g17(sol.omega[k]) + "\n";
            }
        detail::write_atomic(dir / "fields.csv", s);
    }
    {  // boundary.csv
        std::string s = "kind,coordinate,value\n";
        const auto& fb = a.fit.boundary;
        for (std::size_t k = 0; k < fb.ys.size(); ++k)
            if (fb.upsilon[k] < kNoBoundary)
                s += "upsilon," + g17(fb.ys[k]) + "," + g17(fb.upsilon[k]) + "\n";
        for (std::size_t k = 0; k < fb.xs.size(); ++k)
            s += "f," + g17(fb.xs[k]) + "," + g17(fb.f[k]) + "\n";
        detail::write_atomic(dir / "boundary.csv", s);
    }
    detail::write_atomic(dir / "summary.txt", render_summary(a));
    {  // fit log
        std::string s = "Lambda,Upsilon1,energy,sweeps\n";
        for (const auto& t : a.fit.history)
            s += g17(t.Lambda) + "," + g17(t.phi) + "," + g17(t.energy) + "," +
                 std::to_string(t.sweeps) + "\n";
        detail::write_atomic(dir / "fit_log.csv", s);
    }
    {  // continuation table
        std::string s = "mu,R,Lambda,H_low,sweeps\n";
        for (const auto& L : a.fit.levels)
            s += g17(L.mu) + "," + g17(L.R) + "," + g17(L.Lambda) + "," + g17(L.H_lower) +
                 "," + std::to_string(L.sweeps) + "\n";
        detail::write_atomic(dir / "continuation.csv", s);
    }
    {  // plot data: psi contours (blocked columnar) and the boundary graph
        std::string s;
        for (int j = 0; j < dom.ny; ++j) {
            for (int i = 0; i < dom.nx; ++i)
                if (dom.in_domain(i, j))
                    s += g17(dom.x(i)) + " " + g17(dom.y(j)) + " " +
                         g17(a.fit.field.at(i, j)) + "\n";
            s += "\n";
        }
        detail::write_atomic(dir / "psi_contours.dat", s);
        std::string u;
        const auto& fb = a.fit.boundary;
        for (std::size_t k = 0; k < fb.ys.size(); ++k)
            if (fb.upsilon[k] < kNoBoundary)
                u += g17(fb.ys[k]) + " " + g17(fb.upsilon[k]) + "\n";
        detail::write_atomic(dir / "upsilon.dat", u);
    }
    detail::write_atomic(dir / "config_resolved.txt", serialize_config(a.config));
    {  // manifest: reproducibility metadata (timings vary run to run)
        std::string s;
        char hash[32];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(config_hash(a.config)));
        s += std::string("config_hash = ") + hash + "\n";
        s += std::string("version = ") + kVersion + "\n";
        for (const auto& [k, v] : a.timings) s += "time_" + k + " = " + g17(v) + "\n";
        s += std::string("converged = ") + (a.fit.report.converged ? "1" : "0") + "\n";
        s += std::string("continuation_converged = ") +
             (a.fit.continuation_converged ? "1" : "0") + "\n";
        detail::write_atomic(dir / "manifest.txt", s);
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_upstream(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    cfg.validate();
    try {
        auto parts = build_parts(cfg);
        const auto rep = measure_ellipticity(parts.gas);
        out << "pbar     = " << detail::g17(parts.upstream.pbar) << "\n";
        out << "Q        = " << detail::g17(parts.upstream.Q) << "\n";
        out << "Q_star   = " << detail::g17(parts.upstream.Q_star) << "\n";
        out << "Q_upper  = " << detail::g17(parts.upstream.Q_upper) << "\n";
        out << "kappa    = " << detail::g17(parts.upstream.kappa) << "\n";
        out << "kappa0   = " << detail::g17(parts.upstream.kappa0) << "\n";
        out << "mach_max = " << detail::g17(upstream_mach_max(parts.upstream)) << "\n";
        out << "C_star   = " << detail::g17(rep.C_star) << "\n";
        out << "C_upper  = " << detail::g17(rep.C_upper) << "\n";
        for (const auto& w : parts.upstream.warnings) out << "warning: " << w << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "upstream: " << e.what() << "\n";
        return 2;
    }
}

inline SolveArtifacts run_solve(const RunConfig& cfg, int level_cap = 0) {
    cfg.validate();
    SolveArtifacts a;
    a.config = cfg;
    auto timer = [&](const char* stage, auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        a.timings[stage] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    timer("upstream", [&] { a.parts = build_parts(cfg); });

    std::vector<std::pair<double, double>> schedule = cfg.schedule;
    if (level_cap > 0 && static_cast<std::size_t>(level_cap) < schedule.size())
        schedule.resize(level_cap);

    ClosureCache cc(a.parts.gas);
    FitOptions fo;
    fo.solve_tol = cfg.fit_solve_tol;
    fo.final_tol = cfg.solver_tol;
    fo.width_tol = cfg.fit_width_tol;
    fo.threads = cfg.threads;
    fo.budget_factor = cfg.sweep_budget_factor;

    timer("fit", [&] {
        a.fit = continuation(a.parts.nozzle, schedule, cc, a.parts.gas.Q, cfg.hx, cfg.hy,
                             cfg.Hbar, fo);
    });
    const auto [mu, R] = schedule.back();
    a.domain = build_grid(a.parts.nozzle, mu, R, cfg.hx, cfg.hy, cfg.Hbar);

    timer("postproc", [&] {
        a.solution = recover_fields(a.fit.field, a.domain, a.parts.gas);
        a.downstream = downstream_state(a.fit.Lambda_star, a.parts.gas, a.parts.upstream);
        std::tie(a.solution.upstream_residual, a.solution.downstream_residual) =
            farfield_residuals(a.fit.field, a.domain, a.parts.upstream, a.downstream);
        a.solution.boundary = a.fit.boundary;
        a.flux = column_mass_flux(a.fit.field, a.domain);
        double lo = 1e300, hi = -1e300;
        for (double f : a.flux) {
            lo = std::min(lo, f);
            hi = std::max(hi, f);
        }
        a.flux_spread = a.flux.empty() ? 0.0 : (hi - lo) / a.parts.gas.Q;
        a.structure = validate_structure(a.fit.field, a.domain, cc, a.fit.H_star);
    });
    return a;
}

inline int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err,
                     int level_cap = 0) {
    try {
        auto t0 = std::chrono::steady_clock::now();
        auto a = run_solve(cfg, level_cap);
        a.timings["total"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_outputs(a, cfg.out_dir);
        out << "Lambda = " << detail::g17(a.fit.Lambda_star)
            << "  p_out = " << detail::g17(a.downstream.p_out)
            << "  H_low = " << detail::g17(a.downstream.H_low) << "\n";
        out << "outputs written to " << cfg.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "solve: " << e.what() << "\n";
        return 2;
    }
}

// One minimize per Lambda on the first truncation level; CSV of
// (Lambda, Upsilon1, H_low_est, energy), sorted ascending in Lambda.
inline int cmd_sweep(const RunConfig& cfg, std::vector<double> lambdas, std::ostream& out,
                     std::ostream& err) {
    try {
        cfg.validate();
        if (lambdas.empty()) throw std::runtime_error("sweep: need at least one Lambda");
        std::sort(lambdas.begin(), lambdas.end());
        auto parts = build_parts(cfg);
        ClosureCache cc(parts.gas);
        const auto [mu, R] = cfg.schedule.front();
        auto dom = build_grid(parts.nozzle, mu, R, cfg.hx, cfg.hy, cfg.Hbar);

        std::string csv = "Lambda,Upsilon1,H_low_est,energy\n";
        for (double L : lambdas) {
            try {
                auto bd = boundary_data(dom, parts.gas.Q, L);
                SolverOptions so;
                so.tol = cfg.fit_solve_tol;
                so.threads = cfg.threads;
                EnergySolver solver(dom, bd, cc, so);
                auto [field, report] = solver.minimize();
                auto fb = extract_free_boundary(field, dom, bd.H_star, false);
                csv += detail::g17(L) + "," + detail::g17(fb.upsilon_top) + "," +
                       detail::g17(fb.H_lower) + "," + detail::g17(report.energy) + "\n";
            } catch (const std::exception& e) {
                err << "sweep: Lambda = " << L << " failed: " << e.what() << "\n";
            }
        }
        std::filesystem::create_directories(cfg.out_dir);
        detail::write_atomic(std::filesystem::path(cfg.out_dir) / "sweep.csv", csv);
        out << csv;
        return 0;
    } catch (const std::exception& e) {
        err << "sweep: " << e.what() << "\n";
        return 2;
    }
}

// Rebuild plot data from an existing output directory (fields.csv and
// boundary.csv), without re-solving.
inline int cmd_export(const std::string& dir, std::ostream& out, std::ostream& err) {
    try {
        std::ifstream fin(std::filesystem::path(dir) / "fields.csv");
        if (!fin) throw std::runtime_error("missing fields.csv in " + dir);
        std::string line;
        std::getline(fin, line);  // header
        std::string contours;
        double last_y = std::numeric_limits<double>::quiet_NaN();
        while (std::getline(fin, line)) {
            std::istringstream ls(line);
            std::string fx, fy, fpsi;
            std::getline(ls, fx, ',');
            std::getline(ls, fy, ',');
            std::getline(ls, fpsi, ',');
            const double y = std::stod(fy);
            if (y != last_y && !std::isnan(last_y)) contours += "\n";
            last_y = y;
            contours += fx + " " + fy + " " + fpsi + "\n";
        }
        detail::write_atomic(std::filesystem::path(dir) / "psi_contours.dat", contours);

        std::ifstream bin(std::filesystem::path(dir) / "boundary.csv");
        if (bin) {
            std::getline(bin, line);
            std::string ups;
            while (std::getline(bin, line)) {
                std::istringstream ls(line);
                std::string kind, coord, val;
                std::getline(ls, kind, ',');
                std::getline(ls, coord, ',');
                std::getline(ls, val, ',');
                if (kind == "upsilon") ups += coord + " " + val + "\n";
            }
            detail::write_atomic(std::filesystem::path(dir) / "upsilon.dat", ups);
        }
        out << "plot data regenerated in " << dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "export: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace jetflow
