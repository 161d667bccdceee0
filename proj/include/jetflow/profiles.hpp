// Scalar profile curves (Bernoulli / entropy / nozzle data): analytic
// closures, clamped-spline interpolants of sampled tables, and the built-in
// presets used by the CLI.

#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jetflow/numerics.hpp"

namespace jetflow {

// A twice-differentiable scalar function on an interval. Analytic curves
// carry exact derivatives; sampled curves use a clamped cubic spline.
class Curve {
  public:
    using Fn = std::function<double(double)>;

    Curve() = default;

    static Curve constant(double v) {
        Curve c;
        c.f_ = [v](double) { return v; };
        c.df_ = [](double) { return 0.0; };
        c.ddf_ = [](double) { return 0.0; };
        return c;
    }

    static Curve analytic(Fn f, Fn df, Fn ddf) {
        Curve c;
        c.f_ = std::move(f);
        c.df_ = std::move(df);
        c.ddf_ = std::move(ddf);
        return c;
    }

    // Clamped cubic spline through (x_k, y_k). NaN end slopes mean natural.
    static Curve spline(const std::vector<double>& x, const std::vector<double>& y,
                        double slope_a = std::numeric_limits<double>::quiet_NaN(),
                        double slope_b = std::numeric_limits<double>::quiet_NaN()) {
        auto s = std::make_shared<PiecewiseCubic>(cubic_spline(x, y, slope_a, slope_b));
        Curve c;
        c.f_ = [s](double t) { return (*s)(clamp_arg(*s, t)); };
        c.df_ = [s](double t) { return s->deriv(clamp_arg(*s, t)); };
        c.ddf_ = [s](double t) { return s->deriv2(clamp_arg(*s, t)); };
        return c;
    }

    double operator()(double x) const { return f_(x); }
    double deriv(double x) const { return df_(x); }
    double deriv2(double x) const { return ddf_(x); }
    bool valid() const { return static_cast<bool>(f_); }

  private:
    static double clamp_arg(const PiecewiseCubic& s, double t) {
        return std::clamp(t, s.xmin(), s.xmax());
    }

    Fn f_, df_, ddf_;
};

// Two-column numeric table: strictly increasing abscissae.
struct Table {
    std::vector<double> x;
    std::vector<double> y;
};

inline Table read_table(std::istream& in, const std::string& what) {
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double a, b;
        if (ls >> a >> b) {
            t.x.push_back(a);
            t.y.push_back(b);
        }
    }
    if (t.x.size() < 2) throw std::runtime_error(what + ": need at least two rows");
    for (std::size_t i = 1; i < t.x.size(); ++i)
        if (!(t.x[i] > t.x[i - 1]))
            throw std::runtime_error(what + ": abscissae must be strictly increasing");
    return t;
}

inline Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open table file: " + path);
    return read_table(in, path);
}

// ---------------------------------------------------------------------------
// Upstream profile pair (Bernoulli bar-B, entropy bar-S) on [0, Hbar].
// ---------------------------------------------------------------------------

struct UpstreamProfiles {
    Curve Bbar;
    Curve Sbar;
    double Hbar = 0.0;
    double gamma = 0.0;
    double Q = 0.0;

    double B_star() const { return min_on_grid(Bbar); }
    double B_upper() const { return max_on_grid(Bbar); }
    double S_star() const { return min_on_grid(Sbar); }
    double S_upper() const { return max_on_grid(Sbar); }
    double D_star() const {
        return extremum([this](double y) { return Dbar(y); }, true);
    }
    double D_upper() const {
        return extremum([this](double y) { return Dbar(y); }, false);
    }
    double Dbar(double y) const { return Bbar(y) * std::pow(Sbar(y), -1.0 / gamma); }

    // kappa of the structural hypothesis: sup |y^-2 B''| + sup |y^-2 S''|.
    double kappa(int n = 2001) const {
        double kb = 0.0, ks = 0.0;
        for (int i = 1; i <= n; ++i) {
            const double y = Hbar * i / n;
            kb = std::max(kb, std::abs(Bbar.deriv2(y)) / (y * y));
            ks = std::max(ks, std::abs(Sbar.deriv2(y)) / (y * y));
        }
        return kb + ks;
    }

  private:
    template <class F>
    double extremum(F&& f, bool want_min, int n = 4001) const {
        double best = f(0.0);
        for (int i = 1; i <= n; ++i) {
            const double v = f(Hbar * i / n);
            best = want_min ? std::min(best, v) : std::max(best, v);
        }
        return best;
    }
    double min_on_grid(const Curve& c) const {
        return extremum([&](double y) { return c(y); }, true);
    }
    double max_on_grid(const Curve& c) const {
        return extremum([&](double y) { return c(y); }, false);
    }
};

// Preset "constant": uniform Bernoulli and entropy (irrotational closure).
inline UpstreamProfiles constant_profiles(double B0, double S0, double Hbar,
                                          double gamma, double Q) {
    UpstreamProfiles p;
    p.Bbar = Curve::constant(B0);
    p.Sbar = Curve::constant(S0);
    p.Hbar = Hbar;
    p.gamma = gamma;
    p.Q = Q;
    return p;
}

// Preset "quadratic-bump": quartic perturbations satisfying the structural
// end conditions B'(0)=0, B'(H)>=0, S'(0)=S'(H)=0 with y^-2 second
// derivatives bounded:
//   B(y) = B0 + b*(y/H)^4
//   S(y) = S0 + s*((y/H)^4 - (4/5)(y/H)^5)
inline UpstreamProfiles quadratic_bump_profiles(double B0, double S0, double b,
                                                double s, double Hbar, double gamma,
                                                double Q) {
    UpstreamProfiles p;
    const double H = Hbar;
    p.Bbar = Curve::analytic(
        [=](double y) { const double u = y / H; return B0 + b * u * u * u * u; },
        [=](double y) { const double u = y / H; return 4.0 * b * u * u * u / H; },
        [=](double y) { const double u = y / H; return 12.0 * b * u * u / (H * H); });
    p.Sbar = Curve::analytic(
        [=](double y) {
            const double u = y / H;
            return S0 + s * (u * u * u * u - 0.8 * u * u * u * u * u);
        },
        [=](double y) {
            const double u = y / H;
            return 4.0 * s * u * u * u * (1.0 - u) / H;
        },
        [=](double y) {
            const double u = y / H;
            return 4.0 * s * u * u * (3.0 - 4.0 * u) / (H * H);
        });
    p.Hbar = Hbar;
    p.gamma = gamma;
    p.Q = Q;
    return p;
}

// Profiles from sampled tables; clamped ends per the structural hypothesis
// (B'(0)=0, S'(0)=S'(H)=0; the Bernoulli end slope at H is left natural and
// only validated to be nonnegative downstream).
inline UpstreamProfiles profiles_from_tables(const Table& btab, const Table& stab,
                                             double gamma, double Q) {
    if (btab.x.front() != 0.0 || stab.x.front() != 0.0)
        throw std::runtime_error("profile tables must start at y=0");
    if (std::abs(btab.x.back() - stab.x.back()) > 1e-12)
        throw std::runtime_error("profile tables must share the upstream height");
    UpstreamProfiles p;
    p.Bbar = Curve::spline(btab.x, btab.y, 0.0);
    p.Sbar = Curve::spline(stab.x, stab.y, 0.0, 0.0);
    p.Hbar = btab.x.back();
    p.gamma = gamma;
    p.Q = Q;
    return p;
}

}  // namespace jetflow
