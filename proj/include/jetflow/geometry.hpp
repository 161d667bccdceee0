// Nozzle representation, the truncated computational domain Omega_{mu,R},
// the masked Cartesian grid, and the truncated boundary data psi#.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "jetflow/numerics.hpp"
#include "jetflow/profiles.hpp"

namespace jetflow {

// Nozzle wall graph x = N(y) on [1, ymax], N(1) = 0, strictly decreasing,
// N(y) -> -inf as y -> Hbar. Carries the inverse height map T(x) = N^-1(x).
struct Nozzle {
    Curve N;
    std::function<double(double)> inverse;  // T(x) on [N(ymax), 0]
    double ymax = 0.0;
    double N_min = 0.0;  // N(ymax), the most negative sampled abscissa

    // Analytic contracting wall: N(y) = -scale * tan(pi (y-1) / (2 (Hbar-1))).
    static Nozzle tangent(double Hbar, double scale = 1.0) {
        if (Hbar <= 1.0) throw std::invalid_argument("Nozzle: Hbar must exceed 1");
        const double k = M_PI / (2.0 * (Hbar - 1.0));
        Nozzle nz;
        nz.N = Curve::analytic(
            [k, scale](double y) { return -scale * std::tan(k * (y - 1.0)); },
            [k, scale](double y) {
                const double c = std::cos(k * (y - 1.0));
                return -scale * k / (c * c);
            },
            [k, scale](double y) {
                const double c = std::cos(k * (y - 1.0));
                return -2.0 * scale * k * k * std::tan(k * (y - 1.0)) / (c * c);
            });
        nz.inverse = [k, scale](double x) {
            return 1.0 + std::atan(-x / scale) / k;
        };
        nz.ymax = Hbar - 1e-3 * (Hbar - 1.0);
        nz.N_min = nz.N(nz.ymax);
        return nz;
    }

    // Wall from a two-column table (y, N(y)), strictly increasing y from 1,
    // strictly decreasing N from 0.
    static Nozzle from_table(const Table& tab) {
        if (std::abs(tab.x.front() - 1.0) > 1e-12 || std::abs(tab.y.front()) > 1e-12)
            throw std::runtime_error("nozzle table must start at (1, 0)");
        for (std::size_t i = 1; i < tab.y.size(); ++i)
            if (!(tab.y[i] < tab.y[i - 1]))
                throw std::runtime_error("nozzle table: N must be strictly decreasing");
        auto fwd = std::make_shared<PiecewiseCubic>(monotone_cubic(tab.x, tab.y));
        // Monotone interpolation of the reflected pairs gives the inverse.
        std::vector<double> xs(tab.y.rbegin(), tab.y.rend());
        std::vector<double> ys(tab.x.rbegin(), tab.x.rend());
        auto inv = std::make_shared<PiecewiseCubic>(monotone_cubic(xs, ys));
        Nozzle nz;
        nz.N = Curve::analytic([fwd](double y) { return (*fwd)(y); },
                               [fwd](double y) { return fwd->deriv(y); },
                               [fwd](double y) { return fwd->deriv2(y); });
        nz.inverse = [inv](double x) { return (*inv)(x); };
        nz.ymax = tab.x.back();
        nz.N_min = tab.y.back();
        return nz;
    }
};

// b_mu in (1, ymax) with N(b_mu) = -mu.
inline double solve_b_mu(const Nozzle& nz, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("solve_b_mu: mu must be positive");
    if (-mu < nz.N_min)
        throw std::runtime_error("solve_b_mu: mu beyond the sampled nozzle extent");
    double b = newton_bisect(
        [&](double y) { return std::pair{nz.N(y) + mu, nz.N.deriv(y)}; },
        nz.inverse(-mu), 1.0, nz.ymax, 1e-15);
    // Polish to the stated residual tolerance.
    for (int it = 0; it < 8 && std::abs(nz.N(b) + mu) > 1e-12; ++it)
        b -= (nz.N(b) + mu) / nz.N.deriv(b);
    return b;
}

// H_* = H_*(Lambda): 1 if Lambda <= Q, else the root of Lambda H^2 e^(1-H) = Q
// in (0,1) (the left side is increasing there).
inline double h_star(double Lambda, double Q) {
    if (!(Lambda > 0.0) || !(Q > 0.0))
        throw std::invalid_argument("h_star: Lambda and Q must be positive");
    if (Lambda <= Q) return 1.0;
    return bisect([&](double H) { return Lambda * H * H * std::exp(1.0 - H) - Q; },
                  0.0, 1.0, 1e-15);
}

// Outlet profile psi-dagger.
inline double psi_dagger(double y, double Lambda, double Q, double Hstar) {
    if (Hstar == 1.0) return Q * y * y * std::exp(1.0 - y);
    return std::min(Lambda * y * y * std::exp(1.0 - y), Q);
}

enum class NodeType : std::uint8_t { interior, axis, inlet, outlet, wall, outside };

struct TruncatedDomain {
    double mu = 0.0, R = 0.0;
    double hx = 0.0, hy = 0.0;
    int nx = 0, ny = 0;
    double b_mu = 0.0, b_mu_prime = 0.0;
    double s_exponent = 1.75;
    double y_top = 0.0;  // grid cover height
    std::vector<NodeType> tag;      // nx * ny, row-major in j
    std::vector<double> wall_height;  // continuum T(x_i) per column
    bool spacing_warning = false;

    int idx(int i, int j) const { return j * nx + i; }
    double x(int i) const { return -mu + i * hx; }
    double y(int j) const { return j * hy; }
    NodeType at(int i, int j) const { return tag[idx(i, j)]; }
    bool in_domain(int i, int j) const { return at(i, j) != NodeType::outside; }
    bool is_interior(int i, int j) const { return at(i, j) == NodeType::interior; }

    int interior_count() const {
        int n = 0;
        for (auto t : tag) n += (t == NodeType::interior);
        return n;
    }
};

namespace detail {

// Nearest-row snap with the tie at exactly half a spacing going to the
// boundary node above (the node below stays interior).
inline int snap_row(double yc, double hy) {
    return static_cast<int>(std::floor(yc / hy + 0.5));
}

inline void tag_columns(TruncatedDomain& dom,
                        const std::function<double(double)>& height) {
    dom.tag.assign(static_cast<std::size_t>(dom.nx) * dom.ny, NodeType::outside);
    dom.wall_height.resize(dom.nx);
    for (int i = 0; i < dom.nx; ++i) {
        const double T = height(dom.x(i));
        dom.wall_height[i] = T;
        int jw = snap_row(T, dom.hy);
        jw = std::min(jw, dom.ny - 1);
        for (int j = 0; j <= jw; ++j) {
            NodeType t;
            if (j == jw) t = NodeType::wall;
            else if (j == 0) t = NodeType::axis;
            else if (i == 0) t = NodeType::inlet;
            else if (i == dom.nx - 1) t = NodeType::outlet;
            else t = NodeType::interior;
            dom.tag[dom.idx(i, j)] = t;
        }
    }
}

}  // namespace detail

// Masked uniform grid on [-mu, R] x [0, y_top]. The wall is realized by
// nearest-node snapping of the graph y = T(x).
inline TruncatedDomain build_grid(const Nozzle& nz, double mu, double R, double hx,
                                  double hy, double y_top = 0.0) {
    if (!(hx > 0.0) || !(hy > 0.0) || !(mu > 0.0) || !(R > 0.0))
        throw std::invalid_argument("build_grid: mu, R, hx, hy must be positive");
    TruncatedDomain dom;
    dom.mu = mu;
    dom.R = R;
    dom.b_mu = solve_b_mu(nz, mu);
    dom.b_mu_prime = dom.b_mu - (dom.b_mu - 1.0) / 8.0;
    dom.y_top = y_top > 0.0 ? y_top : dom.b_mu + 2.0 * hy;
    dom.nx = static_cast<int>(std::lround((mu + R) / hx)) + 1;
    dom.ny = static_cast<int>(std::lround(dom.y_top / hy)) + 1;
    dom.hx = (mu + R) / (dom.nx - 1);
    dom.hy = dom.y_top / (dom.ny - 1);

    auto height = [&](double x) { return x >= 0.0 ? 1.0 : nz.inverse(x); };
    detail::tag_columns(dom, height);

    // Local refinement warning where the wall crosses more than one column
    // per row of height (|N'| hy > hx).
    for (int i = 0; i < dom.nx; ++i) {
        if (dom.x(i) < 0.0 && std::abs(nz.N.deriv(dom.wall_height[i])) * dom.hy > dom.hx)
            dom.spacing_warning = true;
    }

    int min_rows = dom.ny;
    for (int i = 0; i < dom.nx; ++i)
        min_rows = std::min(min_rows, detail::snap_row(dom.wall_height[i], dom.hy) - 1);
    if (min_rows < 8)
        throw std::runtime_error("build_grid: grid too coarse to separate wall from axis");
    return dom;
}

// Degenerate rectangular strip [x0, x1] x [0, Ytop] (test and far-field use):
// the mask is a full rectangle with the lid tagged wall.
inline TruncatedDomain strip_domain(double x0, double x1, double y_top, double hx,
                                    double hy) {
    TruncatedDomain dom;
    dom.mu = -x0;
    dom.R = x1;
    dom.b_mu = y_top;
    dom.b_mu_prime = y_top;
    dom.y_top = y_top;
    dom.nx = static_cast<int>(std::lround((x1 - x0) / hx)) + 1;
    dom.ny = static_cast<int>(std::lround(y_top / hy)) + 1;
    dom.hx = (x1 - x0) / (dom.nx - 1);
    dom.hy = y_top / (dom.ny - 1);
    detail::tag_columns(dom, [&](double) { return y_top; });
    return dom;
}

// Truncated boundary data psi#, exactly as prescribed: zero on the axis and
// the lower inlet, the power ramp on [b'_mu, b_mu], Q on walls, psi-dagger
// on the outlet.
struct BoundaryData {
    std::vector<double> values;  // per node; Q on outside nodes
    double H_star = 1.0;
    double Lambda = 0.0;
    double Q = 0.0;
};

inline double inlet_ramp(double y, const TruncatedDomain& dom, double Q) {
    const double u =
        std::clamp((y - dom.b_mu_prime) / (dom.b_mu - dom.b_mu_prime), 0.0, 1.0);
    return Q * std::pow(u, dom.s_exponent);
}

inline BoundaryData boundary_data(const TruncatedDomain& dom, double Q, double Lambda) {
    if (!(Lambda > 0.0)) throw std::invalid_argument("boundary_data: Lambda must be positive");
    BoundaryData bd;
    bd.Q = Q;
    bd.Lambda = Lambda;
    bd.H_star = h_star(Lambda, Q);
    bd.values.assign(dom.tag.size(), Q);
    for (int j = 0; j < dom.ny; ++j) {
        for (int i = 0; i < dom.nx; ++i) {
            switch (dom.at(i, j)) {
                case NodeType::axis: bd.values[dom.idx(i, j)] = 0.0; break;
                case NodeType::wall: bd.values[dom.idx(i, j)] = Q; break;
                case NodeType::inlet:
                    bd.values[dom.idx(i, j)] = inlet_ramp(dom.y(j), dom, Q);
                    break;
                case NodeType::outlet:
                    bd.values[dom.idx(i, j)] = psi_dagger(dom.y(j), Lambda, Q, bd.H_star);
                    break;
                default: break;
            }
        }
    }
    return bd;
}

// Edge-connectivity of the interior node set (mask sanity).
inline bool interior_connected(const TruncatedDomain& dom) {
    const int n = dom.nx * dom.ny;
    std::vector<char> seen(n, 0);
    int first = -1, total = 0;
    for (int k = 0; k < n; ++k)
        if (dom.tag[k] == NodeType::interior) {
            ++total;
            if (first < 0) first = k;
        }
    if (total == 0) return true;
    std::queue<int> q;
    q.push(first);
    seen[first] = 1;
    int reached = 0;
    while (!q.empty()) {
        const int k = q.front();
        q.pop();
        ++reached;
        const int i = k % dom.nx, j = k / dom.nx;
        const int di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
            const int ii = i + di[d], jj = j + dj[d];
            if (ii < 0 || ii >= dom.nx || jj < 0 || jj >= dom.ny) continue;
            const int kk = dom.idx(ii, jj);
            if (!seen[kk] && dom.tag[kk] == NodeType::interior) {
                seen[kk] = 1;
                q.push(kk);
            }
        }
    }
    return reached == total;
}

}  // namespace jetflow
