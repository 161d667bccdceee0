// Small numerical kernels shared across the library: root bracketing and
// safeguarded Newton, golden-section minimization, fixed and adaptive
// quadrature, tridiagonal solves, cubic interpolation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace jetflow {

inline constexpr double kGoldenRatio = 1.6180339887498948482;

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

// Bisection on [a,b] assuming f(a) and f(b) have opposite signs.
template <class F>
double bisect(F&& f, double a, double b, double xtol, int max_iter = 200) {
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0))
        throw std::invalid_argument("bisect: endpoints do not bracket a root");
    for (int it = 0; it < max_iter; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0 || (b - a) < xtol) return m;
        if ((fm > 0.0) == (fa > 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

// Newton iteration on [lo,hi] falling back to bisection whenever the Newton
// step leaves the bracket. f must return {value, derivative}; the bracket is
// maintained from the sign of the value.
template <class F>
double newton_bisect(F&& f, double x0, double lo, double hi, double xtol,
                     int max_iter = 100) {
    auto [flo, dlo] = f(lo);
    (void)dlo;
    auto [fhi, dhi] = f(hi);
    (void)dhi;
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("newton_bisect: endpoints do not bracket a root");
    double x = std::clamp(x0, lo, hi);
    for (int it = 0; it < max_iter; ++it) {
        auto [fx, dfx] = f(x);
        if (fx == 0.0) return x;
        if ((fx > 0.0) == (flo > 0.0)) lo = x; else hi = x;
        double xn = x - fx / dfx;
        if (!(xn > lo && xn < hi) || dfx == 0.0) xn = 0.5 * (lo + hi);
        if (std::abs(xn - x) < xtol) return xn;
        x = xn;
    }
    return x;
}

// ---------------------------------------------------------------------------
// 1D minimization
// ---------------------------------------------------------------------------

// Golden-section search for the minimum of f on [a,b]; returns the abscissa.
template <class F>
double golden_section(F&& f, double a, double b, double xtol) {
    const double invphi = 1.0 / kGoldenRatio;
    const double invphi2 = invphi * invphi;
    double h = b - a;
    if (h <= xtol) return 0.5 * (a + b);
    double x1 = a + invphi2 * h;
    double x2 = a + invphi * h;
    double f1 = f(x1);
    double f2 = f(x2);
    while (h > xtol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            h = b - a;
            x1 = a + invphi2 * h;
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            h = b - a;
            x2 = a + invphi * h;
            f2 = f(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

namespace detail {
// 15-point Gauss-Kronrod pair on [-1,1] (7-point Gauss embedded).
inline constexpr std::array<double, 15> kKronrodX = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,                0.207784955007898,
    0.405845151377397,  0.586087235467691,  0.741531185599394,
    0.864864423359769,  0.949107912342759,  0.991455371120813};
inline constexpr std::array<double, 15> kKronrodW = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728, 0.204432940075298,
    0.190350578064785, 0.169004726639267, 0.140653259715525,
    0.104790010322250, 0.063092092629979, 0.022935322010529};
inline constexpr std::array<double, 7> kGaussW = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870};
}  // namespace detail

// One Gauss-Kronrod panel; returns {integral, error estimate}.
template <class F>
std::pair<double, double> gk15(F&& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double k = 0.0, g = 0.0;
    for (int i = 0; i < 15; ++i) {
        const double v = f(c + h * detail::kKronrodX[i]);
        k += detail::kKronrodW[i] * v;
        if (i % 2 == 1) g += detail::kGaussW[i / 2] * v;
    }
    k *= h;
    g *= h;
    return {k, std::abs(k - g)};
}

// Adaptive Gauss-Kronrod with absolute tolerance.
template <class F>
double integrate(F&& f, double a, double b, double abstol = 1e-12,
                 int max_depth = 40) {
    if (a == b) return 0.0;
    struct Panel {
        double a, b, abstol;
        int depth;
    };
    double total = 0.0;
    std::vector<Panel> stack{{a, b, abstol, 0}};
    while (!stack.empty()) {
        Panel p = stack.back();
        stack.pop_back();
        auto [val, err] = gk15(f, p.a, p.b);
        if (err <= p.abstol || p.depth >= max_depth) {
            total += val;
        } else {
            const double m = 0.5 * (p.a + p.b);
            stack.push_back({p.a, m, 0.5 * p.abstol, p.depth + 1});
            stack.push_back({m, p.b, 0.5 * p.abstol, p.depth + 1});
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Piecewise-cubic interpolation
// ---------------------------------------------------------------------------

// Solve a tridiagonal system in place (Thomas algorithm).
inline void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag,
                              std::vector<double>& upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

// Cubic Hermite segment evaluation helpers.
inline double hermite_value(double x0, double x1, double y0, double y1, double d0,
                            double d1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    return y0 * (2 * t3 - 3 * t2 + 1) + h * d0 * (t3 - 2 * t2 + t) +
           y1 * (-2 * t3 + 3 * t2) + h * d1 * (t3 - t2);
}

inline double hermite_deriv(double x0, double x1, double y0, double y1, double d0,
                            double d1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t;
    return (y0 * (6 * t2 - 6 * t) + h * d0 * (3 * t2 - 4 * t + 1) +
            y1 * (-6 * t2 + 6 * t) + h * d1 * (3 * t2 - 2 * t)) / h;
}

inline double hermite_deriv2(double x0, double x1, double y0, double y1, double d0,
                             double d1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    return (y0 * (12 * t - 6) + h * d0 * (6 * t - 4) + y1 * (-12 * t + 6) +
            h * d1 * (6 * t - 2)) / (h * h);
}

// Piecewise cubic with prescribed nodal values and slopes. Construction
// chooses the slopes; see CubicSpline / MonotoneCubic below.
class PiecewiseCubic {
  public:
    PiecewiseCubic() = default;
    PiecewiseCubic(std::vector<double> x, std::vector<double> y, std::vector<double> d)
        : x_(std::move(x)), y_(std::move(y)), d_(std::move(d)) {
        if (x_.size() < 2 || x_.size() != y_.size() || x_.size() != d_.size())
            throw std::invalid_argument("PiecewiseCubic: bad sizes");
    }

    double xmin() const { return x_.front(); }
    double xmax() const { return x_.back(); }

    double operator()(double x) const {
        const std::size_t i = segment(x);
        return hermite_value(x_[i], x_[i + 1], y_[i], y_[i + 1], d_[i], d_[i + 1], x);
    }
    double deriv(double x) const {
        const std::size_t i = segment(x);
        return hermite_deriv(x_[i], x_[i + 1], y_[i], y_[i + 1], d_[i], d_[i + 1], x);
    }
    double deriv2(double x) const {
        const std::size_t i = segment(x);
        return hermite_deriv2(x_[i], x_[i + 1], y_[i], y_[i + 1], d_[i], d_[i + 1], x);
    }

    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& values() const { return y_; }
    const std::vector<double>& slopes() const { return d_; }

  private:
    std::size_t segment(double x) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - x_.begin());
        if (i == 0) return 0;
        if (i >= x_.size()) return x_.size() - 2;
        return i - 1;
    }

    std::vector<double> x_, y_, d_;
};

// C2 cubic spline with clamped or natural ends.
// end_slope_* = NaN requests a natural (zero second derivative) end.
inline PiecewiseCubic cubic_spline(const std::vector<double>& x,
                                   const std::vector<double>& y,
                                   double end_slope_a = std::numeric_limits<double>::quiet_NaN(),
                                   double end_slope_b = std::numeric_limits<double>::quiet_NaN()) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("cubic_spline: bad sizes");
    std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    const bool clamp_a = !std::isnan(end_slope_a);
    const bool clamp_b = !std::isnan(end_slope_b);
    if (clamp_a) {
        diag[0] = 1.0;
        rhs[0] = end_slope_a;
    } else {
        const double h0 = x[1] - x[0];
        diag[0] = 2.0;
        upper[0] = 1.0;
        rhs[0] = 3.0 * (y[1] - y[0]) / h0;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hl = x[i] - x[i - 1];
        const double hr = x[i + 1] - x[i];
        lower[i] = 1.0 / hl;
        diag[i] = 2.0 * (1.0 / hl + 1.0 / hr);
        upper[i] = 1.0 / hr;
        rhs[i] = 3.0 * ((y[i] - y[i - 1]) / (hl * hl) + (y[i + 1] - y[i]) / (hr * hr));
    }
    if (clamp_b) {
        diag[n - 1] = 1.0;
        rhs[n - 1] = end_slope_b;
    } else {
        const double h1 = x[n - 1] - x[n - 2];
        lower[n - 1] = 1.0;
        diag[n - 1] = 2.0;
        rhs[n - 1] = 3.0 * (y[n - 1] - y[n - 2]) / h1;
    }
    solve_tridiagonal(lower, diag, upper, rhs);
    return PiecewiseCubic(x, y, rhs);
}

// Monotonicity-preserving cubic (Fritsch-Carlson). Used wherever an
// interpolant must stay invertible (psi-bar, h-map, nozzle wall).
inline PiecewiseCubic monotone_cubic(const std::vector<double>& x,
                                     const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("monotone_cubic: bad sizes");
    std::vector<double> d(n, 0.0), delta(n - 1, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            d[i] = 0.0;
        } else {
            const double w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
            const double w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    // Clamp end slopes to preserve monotonicity on the first/last segment.
    for (std::size_t i : {std::size_t{0}, n - 1}) {
        const double del = delta[i == 0 ? 0 : n - 2];
        if (d[i] * del <= 0.0) d[i] = 0.0;
        else if (std::abs(d[i]) > 3.0 * std::abs(del)) d[i] = 3.0 * del;
    }
    return PiecewiseCubic(x, y, d);
}

}  // namespace jetflow
