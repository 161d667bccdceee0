// Run configuration: flat typed key/value text with section headers,
// canonical serialization, and an FNV-1a content hash for the manifest.

#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace jetflow {

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    // [gas]
    double gamma = 2.0;
    double eps = 0.0;  // 0: auto, min(t_*, 1)/8

    // [profiles]
    std::string profile_preset = "constant";  // constant | quadratic-bump | tables
    double B0 = 1.0, S0 = 1.0;
    double bump_b = 0.0, bump_s = 0.0;
    double Hbar = 2.0;
    std::string bbar_file, sbar_file;

    // [nozzle]
    std::string nozzle_preset = "tangent";  // tangent | table
    double nozzle_scale = 0.25;
    std::string nozzle_file;

    // [flux]
    double Q = 0.018;

    // [grid]
    double hx = 3.0 / 128.0;
    double hy = 2.0 / 128.0;

    // [truncation]
    std::vector<std::pair<double, double>> schedule = {{1.0, 2.0}, {2.0, 4.0}};

    // [tolerances]
    double solver_tol = 1e-10;
    double fit_solve_tol = 1e-6;
    double fit_width_tol = 1e-3;
    double continuation_tol = 1e-3;

    // [output]
    std::string out_dir = "out";

    // [run]
    int threads = 1;
    long sweep_budget_factor = 200;

    void validate() const {
        if (gamma <= 1.0) throw std::runtime_error("config: gamma must exceed 1");
        if (!(Q > 0.0)) throw std::runtime_error("config: Q must be positive");
        if (!(hx > 0.0) || !(hy > 0.0)) throw std::runtime_error("config: grid spacings must be positive");
        for (double t : {solver_tol, fit_solve_tol, fit_width_tol, continuation_tol})
            if (!(t > 0.0)) throw std::runtime_error("config: tolerances must be positive");
        if (schedule.empty()) throw std::runtime_error("config: empty truncation schedule");
        for (std::size_t k = 0; k < schedule.size(); ++k) {
            if (!(schedule[k].first > 0.0) || !(schedule[k].second > 0.0))
                throw std::runtime_error("config: truncation abscissae must be positive");
            if (k > 0 && !(schedule[k].first > schedule[k - 1].first &&
                           schedule[k].second > schedule[k - 1].second))
                throw std::runtime_error("config: schedule must increase in both mu and R");
        }
        if (threads < 1) throw std::runtime_error("config: threads must be at least 1");
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_schedule(const std::vector<std::pair<double, double>>& s) {
    std::string out;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k) out += ", ";
        out += fmt_double(s[k].first) + ":" + fmt_double(s[k].second);
    }
    return out;
}

inline std::vector<std::pair<double, double>> parse_schedule(const std::string& s) {
    std::vector<std::pair<double, double>> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error("config: schedule entries must be mu:R");
        out.emplace_back(std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    }
    return out;
}

}  // namespace detail

inline std::string serialize_config(const RunConfig& c) {
    using detail::fmt_double;
    std::ostringstream o;
    o << "[gas]\n";
    o << "gamma = " << fmt_double(c.gamma) << "\n";
    o << "eps = " << fmt_double(c.eps) << "\n";
    o << "[profiles]\n";
    o << "preset = " << c.profile_preset << "\n";
    o << "B0 = " << fmt_double(c.B0) << "\n";
    o << "S0 = " << fmt_double(c.S0) << "\n";
    o << "bump_b = " << fmt_double(c.bump_b) << "\n";
    o << "bump_s = " << fmt_double(c.bump_s) << "\n";
    o << "Hbar = " << fmt_double(c.Hbar) << "\n";
    o << "bbar_file = " << c.bbar_file << "\n";
    o << "sbar_file = " << c.sbar_file << "\n";
    o << "[nozzle]\n";
    o << "preset = " << c.nozzle_preset << "\n";
    o << "scale = " << fmt_double(c.nozzle_scale) << "\n";
    o << "file = " << c.nozzle_file << "\n";
    o << "[flux]\n";
    o << "Q = " << fmt_double(c.Q) << "\n";
    o << "[grid]\n";
    o << "hx = " << fmt_double(c.hx) << "\n";
    o << "hy = " << fmt_double(c.hy) << "\n";
    o << "[truncation]\n";
    o << "schedule = " << detail::fmt_schedule(c.schedule) << "\n";
    o << "[tolerances]\n";
    o << "solver_tol = " << fmt_double(c.solver_tol) << "\n";
    o << "fit_solve_tol = " << fmt_double(c.fit_solve_tol) << "\n";
    o << "fit_width_tol = " << fmt_double(c.fit_width_tol) << "\n";
    o << "continuation_tol = " << fmt_double(c.continuation_tol) << "\n";
    o << "[output]\n";
    o << "dir = " << c.out_dir << "\n";
    o << "[run]\n";
    o << "threads = " << c.threads << "\n";
    o << "sweep_budget_factor = " << c.sweep_budget_factor << "\n";
    return o.str();
}

inline RunConfig parse_config(std::istream& in) {
    RunConfig c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": malformed section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string full = section + "." + key;

        if (full == "gas.gamma") c.gamma = std::stod(val);
        else if (full == "gas.eps") c.eps = std::stod(val);
        else if (full == "profiles.preset") c.profile_preset = val;
        else if (full == "profiles.B0") c.B0 = std::stod(val);
        else if (full == "profiles.S0") c.S0 = std::stod(val);
        else if (full == "profiles.bump_b") c.bump_b = std::stod(val);
        else if (full == "profiles.bump_s") c.bump_s = std::stod(val);
        else if (full == "profiles.Hbar") c.Hbar = std::stod(val);
        else if (full == "profiles.bbar_file") c.bbar_file = val;
        else if (full == "profiles.sbar_file") c.sbar_file = val;
        else if (full == "nozzle.preset") c.nozzle_preset = val;
        else if (full == "nozzle.scale") c.nozzle_scale = std::stod(val);
        else if (full == "nozzle.file") c.nozzle_file = val;
        else if (full == "flux.Q") c.Q = std::stod(val);
        else if (full == "grid.hx") c.hx = std::stod(val);
        else if (full == "grid.hy") c.hy = std::stod(val);
        else if (full == "truncation.schedule") c.schedule = detail::parse_schedule(val);
        else if (full == "tolerances.solver_tol") c.solver_tol = std::stod(val);
        else if (full == "tolerances.fit_solve_tol") c.fit_solve_tol = std::stod(val);
        else if (full == "tolerances.fit_width_tol") c.fit_width_tol = std::stod(val);
        else if (full == "tolerances.continuation_tol") c.continuation_tol = std::stod(val);
        else if (full == "output.dir") c.out_dir = val;
        else if (full == "run.threads") c.threads = std::stoi(val);
        else if (full == "run.sweep_budget_factor") c.sweep_budget_factor = std::stol(val);
        else
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": unknown key '" + full + "'");
    }
    return c;
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

// FNV-1a over the canonical serialization.
inline std::uint64_t config_hash(const RunConfig& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : serialize_config(c)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace jetflow
