// Variational solver: coordinate-descent (colored Gauss-Seidel) minimization
// of the discrete truncated energy
//   sum over cells  y_c [ G_eps(|grad psi / y_c|^2 + q^2, psi_c) + lambda^2 chi_{psi_c < Q} ] hx hy
// with bilinear cell gradients, exact per-node 1D minimization, and the
// plug competition against psi = Q realizing the free-boundary condition.
//
// q is the hourglass mode (psi_sw + psi_ne - psi_se - psi_nw) / (2 h y_c):
// the four-node cell gradient annihilates the checkerboard, so without this
// term the discrete energy has a near-kernel that coordinate descent cannot
// remove near stair-cased walls. q = O(h) on smooth fields (identically zero
// on x-independent ones), keeping the scheme second order.

#pragma once

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "jetflow/closure_cache.hpp"
#include "jetflow/geometry.hpp"

namespace jetflow {

struct SolverOptions {
    double tol = 1e-10;        // per-sweep max nodal change, relative to Q
    long max_sweeps = 0;       // 0: 200 (nx + ny)
    int threads = 1;
    int energy_every = 0;      // record energy every k sweeps (0: final only)
    bool use_golden = false;   // force golden-section nodal minimization
    double theta_plug = 1e-12; // exact-plug threshold, relative to Q
    bool front_track_init = true;  // precondition the plug set before descent
};

struct StreamField {
    int nx = 0, ny = 0;
    std::vector<double> psi;
    double Q = 0.0, Lambda = 0.0, lambda_eps = 0.0;
    long sweeps = 0;
    bool converged = false;

    double at(int i, int j) const { return psi[static_cast<std::size_t>(j) * nx + i]; }
};

struct SolveReport {
    double energy = 0.0;
    double max_node_change = 0.0;          // final verification pass
    double max_node_energy_decrease = 0.0; // final verification pass
    double subsonic_margin = 0.0;
    double monotonicity_violation = 0.0;   // max of -(dx psi), scaled by 1/hx
    long wet_cells = 0;
    long sweeps = 0;
    bool converged = false;
    std::vector<std::pair<long, double>> energy_history;
    std::vector<double> residual_history;
};

namespace detail {

// Fixed-size thread pool with a fork-join run(); deterministic by chunking.
class SweepPool {
  public:
    explicit SweepPool(int n) : n_(n) {
        if (n_ < 2) return;
        workers_.reserve(n_ - 1);
        for (int t = 1; t < n_; ++t)
            workers_.emplace_back([this, t] { worker(t); });
    }
    ~SweepPool() {
        if (n_ < 2) return;
        {
            std::unique_lock lk(m_);
            stop_ = true;
            ++epoch_;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }
    int size() const { return n_; }

    void run(const std::function<void(int)>& work) {
        if (n_ < 2) {
            work(0);
            return;
        }
        {
            std::unique_lock lk(m_);
            work_ = &work;
            done_ = 0;
            ++epoch_;
        }
        cv_.notify_all();
        work(0);
        std::unique_lock lk(m_);
        cv_done_.wait(lk, [this] { return done_ == n_ - 1; });
        work_ = nullptr;
    }

  private:
    void worker(int tid) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* job = nullptr;
            {
                std::unique_lock lk(m_);
                cv_.wait(lk, [&] { return epoch_ != seen; });
                seen = epoch_;
                if (stop_) return;
                job = work_;
            }
            if (job) (*job)(tid);
            {
                std::unique_lock lk(m_);
                ++done_;
            }
            cv_done_.notify_one();
        }
    }

    int n_;
    std::vector<std::thread> workers_;
    std::mutex m_;
    std::condition_variable cv_, cv_done_;
    const std::function<void(int)>* work_ = nullptr;
    std::uint64_t epoch_ = 0;
    int done_ = 0;
    bool stop_ = false;
};

}  // namespace detail

class EnergySolver {
  public:
    EnergySolver(const TruncatedDomain& dom, const BoundaryData& bd,
                 const ClosureCache& cc, SolverOptions opt = {})
        : dom_(dom), bd_(bd), cc_(cc), opt_(opt) {
        Q_ = bd.Q;
        lambda_sq_ = cc_.lambda_sq(bd.Lambda);
        qm_ = Q_ * (1.0 - opt_.theta_plug);
        rtol_ = 1e-13 * Q_;
        hbar_ = std::sqrt(dom.hx * dom.hy);
        build_topology();
    }

    double lambda_sq() const { return lambda_sq_; }
    const TruncatedDomain& domain() const { return dom_; }

    // Default initial field: x-blend between the inlet data extension and
    // the outlet profile, overlaid with a plug wedge from the orifice lip to
    // the outlet plug corner (R, H_*). Coordinate descent can freely retreat
    // or locally advance an existing plug front, but it cannot nucleate a
    // plug in open flow (a node toggles to Q only when three corners of a
    // cell already sit at Q), so the wedge seeds the free-boundary search.
    StreamField initial_guess() const {
        StreamField f = empty_field();
        for (int j = 0; j < dom_.ny; ++j) {
            for (int i = 0; i < dom_.nx; ++i) {
                const int k = dom_.idx(i, j);
                if (dom_.tag[k] != NodeType::interior) continue;
                const double w = (dom_.x(i) + dom_.mu) / (dom_.mu + dom_.R);
                const double yv = dom_.y(j);
                const double vin = yv >= dom_.b_mu ? Q_ : inlet_ramp(yv, dom_, Q_);
                const double vout = psi_dagger(std::min(yv, 1.0), bd_.Lambda, Q_, bd_.H_star);
                double v = std::clamp((1.0 - w) * vin + w * vout, 0.0, Q_);
                if (bd_.H_star < 1.0) {
                    // Plug seed: a wedge from the lip toward the mass-balance
                    // tail height sqrt(2Q/Lambda) (clamped to [H_*, 1]), and
                    // the full over-plug at that height inside the nozzle.
                    // Over-plugging is safe (descent retreats freely) whereas
                    // under-plugging is sticky.
                    const double tail = std::clamp(std::sqrt(2.0 * Q_ / bd_.Lambda),
                                                   bd_.H_star, 1.0);
                    const double x = dom_.x(i);
                    const double ramp = x >= 0.0 ? std::min(1.0, x / (0.5 * dom_.R)) : 1.0;
                    const double ypad = x >= 0.0 ? 1.0 - (1.0 - tail) * ramp : tail;
                    if (yv >= ypad) v = Q_;
                }
                f.psi[k] = v;
            }
        }
        return f;
    }

    // Exact 1D minimization of the local energy in the single nodal value.
    double nodal_relax(const std::vector<double>& psi, int i, int j) const {
        Local loc;
        gather(psi, i, j, loc);
        return relax_value(loc, psi[dom_.idx(i, j)]);
    }

    std::pair<StreamField, SolveReport> minimize(const StreamField* warm = nullptr) const {
        StreamField f = warm ? *warm : initial_guess();
        enforce_boundary(f);
        if (opt_.front_track_init && bd_.H_star < 1.0) front_track(f);
        SolveReport rep;
        const long budget =
            opt_.max_sweeps > 0 ? opt_.max_sweeps : 200L * (dom_.nx + dom_.ny);
        const double stop = opt_.tol * Q_;

        detail::SweepPool pool(std::max(1, opt_.threads));
        std::vector<double> thread_max(static_cast<std::size_t>(pool.size()), 0.0);

        // Active-set acceleration: between full sweeps, relax only nodes
        // whose neighborhood moved appreciably in the last full sweep. The
        // stopping rule is evaluated on full sweeps only, so the convergence
        // guarantee (max nodal change per full sweep <= tol Q) is unchanged.
        const int full_every = opt_.use_golden ? 1 : 8;
        std::vector<std::uint8_t> active(f.psi.size(), 1);
        std::vector<double> node_change(f.psi.size(), 0.0);

        long sweep = 0;
        for (; sweep < budget; ++sweep) {
            const bool full = (sweep % full_every == 0);
            double change = 0.0;
            for (int color = 0; color < 4; ++color) {
                const auto& nodes = color_nodes_[color];
                const std::size_t n = nodes.size();
                const std::size_t chunk = (n + pool.size() - 1) / pool.size();
                std::fill(thread_max.begin(), thread_max.end(), 0.0);
                pool.run([&](int tid) {
                    const std::size_t lo = tid * chunk;
                    const std::size_t hi = std::min(n, lo + chunk);
                    double local = 0.0;
                    Local loc;
                    for (std::size_t a = lo; a < hi; ++a) {
                        const int k = nodes[a];
                        if (!full && !active[k]) continue;
                        const int i = k % dom_.nx, j = k / dom_.nx;
                        gather(f.psi, i, j, loc);
                        const double old = f.psi[k];
                        const double v = relax_value(loc, old);
                        f.psi[k] = v;
                        node_change[k] = std::abs(v - old);
                        local = std::max(local, node_change[k]);
                    }
                    thread_max[tid] = local;
                });
                for (double m : thread_max) change = std::max(change, m);
            }
            if (full) {
                rep.residual_history.push_back(change);
                // Facet moves: whole row-segment plug toggles. A flat plug
                // front is lattice-pinned against single-node moves (each
                // pays an O(1) corrugation penalty in x-gradients), so the
                // front is translated a row at a time when that lowers the
                // energy. Convergence requires facet stability as well.
                bool moved = facet_moves(f.psi);
                // The global breathing move is dearer (full-field energies):
                // run it sparsely and always before accepting convergence.
                if (change <= stop || sweep % (8 * full_every) == 0)
                    moved = scale_move(f.psi) || moved;
                if (change <= stop && !moved) {
                    f.converged = true;
                    ++sweep;
                    break;
                }
                if (moved) {
                    std::fill(active.begin(), active.end(), 1);
                } else {
                    // Freeze regions an order of magnitude quieter than the
                    // front; the periodic full sweeps re-examine them.
                    refresh_active(node_change, std::max(0.25 * stop, 0.02 * change),
                                   active);
                }
            }
            if (opt_.energy_every > 0 && sweep % opt_.energy_every == 0)
                rep.energy_history.emplace_back(sweep, discrete_energy(f.psi));
        }
        f.sweeps = sweep;
        f.Q = Q_;
        f.Lambda = bd_.Lambda;
        f.lambda_eps = std::sqrt(lambda_sq_);

        rep.sweeps = sweep;
        rep.converged = f.converged;
        rep.energy = discrete_energy(f.psi);
        rep.energy_history.emplace_back(sweep, rep.energy);
        verification_pass(f, rep);
        fill_diagnostics(f, rep);
        return {f, rep};
    }

    // Plug-front preconditioner. Coordinate descent on the indicator energy
    // converges only to the nearest of many front equilibria, so the plug
    // set is first iterated explicitly: solve the smooth problem with the
    // current plug pinned at Q, then move interface nodes by the discrete
    // free-boundary balance Phi_eps(|grad psi/y|^2, Q) vs lambda_eps^2, one
    // cell per pass. The result seeds the unconstrained sweeps; it is an
    // initialization only and the minimized functional is unchanged.
    void front_track(StreamField& f) const {
        const int n = dom_.nx * dom_.ny;
        std::vector<std::uint8_t> pin(n, 0);
        for (int k = 0; k < n; ++k)
            if (dom_.tag[k] == NodeType::interior && f.psi[k] >= qm_) pin[k] = 1;

        const auto zsQ = cc_.eval_z(Q_);
        auto phi_of = [&](double t) { return cc_.g(t, zsQ) * t - cc_.G(t, zsQ); };

        detail::SweepPool pool(std::max(1, opt_.threads));
        std::vector<double> thread_max(static_cast<std::size_t>(pool.size()), 0.0);
        for (int outer = 0; outer < 64; ++outer) {
            // Smooth pinned solve at loose tolerance (no indicator term:
            // within a fixed plug set it only shifts the energy).
            for (long sw = 0; sw < 4000; ++sw) {
                double change = 0.0;
                for (int color = 0; color < 4; ++color) {
                    const auto& nodes = color_nodes_[color];
                    const std::size_t nn = nodes.size();
                    const std::size_t chunk = (nn + pool.size() - 1) / pool.size();
                    std::fill(thread_max.begin(), thread_max.end(), 0.0);
                    pool.run([&](int tid) {
                        const std::size_t lo = tid * chunk;
                        const std::size_t hi = std::min(nn, lo + chunk);
                        double local = 0.0;
                        Local loc;
                        for (std::size_t a2 = lo; a2 < hi; ++a2) {
                            const int k = nodes[a2];
                            if (pin[k]) {
                                f.psi[k] = Q_;
                                continue;
                            }
                            const int i = k % dom_.nx, j = k / dom_.nx;
                            gather(f.psi, i, j, loc);
                            const double old = f.psi[k];
                            const double v = smooth_argmin_nochi(loc, old);
                            f.psi[k] = v;
                            local = std::max(local, std::abs(v - old));
                        }
                        thread_max[tid] = local;
                    });
                    for (double m : thread_max) change = std::max(change, m);
                }
                if (change <= 1e-6 * Q_) break;
            }

            // Move the front by the free-boundary balance.
            int changed = 0;
            auto interface_t = [&](int i, int j) {
                // Gradient of the wet cell just below-left of the node.
                double best = -1.0;
                for (int cj = j - 1; cj <= j; ++cj)
                    for (int ci = i - 1; ci <= i; ++ci) {
                        if (ci < 0 || cj < 0 || ci + 1 >= dom_.nx || cj + 1 >= dom_.ny)
                            continue;
                        if (!cell_active_[cell_idx(ci, cj)]) continue;
                        const double sw = f.psi[dom_.idx(ci, cj)],
                                     se = f.psi[dom_.idx(ci + 1, cj)];
                        const double nw = f.psi[dom_.idx(ci, cj + 1)],
                                     ne = f.psi[dom_.idx(ci + 1, cj + 1)];
                        const double zc = 0.25 * (sw + se + nw + ne);
                        if (zc >= qm_) continue;  // want the wet side
                        const double yc = (cj + 0.5) * dom_.hy;
                        const double dx = (se + ne - sw - nw) / (2.0 * dom_.hx);
                        const double dy = (nw + ne - sw - se) / (2.0 * dom_.hy);
                        best = std::max(best, (dx * dx + dy * dy) / (yc * yc));
                    }
                return best;
            };
            std::vector<std::uint8_t> next = pin;
            for (int j = 1; j + 1 < dom_.ny; ++j)
                for (int i = 1; i + 1 < dom_.nx; ++i) {
                    const int k = dom_.idx(i, j);
                    if (dom_.tag[k] != NodeType::interior) continue;
                    const bool below_wet =
                        dom_.in_domain(i, j - 1) && f.psi[dom_.idx(i, j - 1)] < qm_ &&
                        !(j - 1 > 0 && pin[dom_.idx(i, j - 1)]);
                    if (pin[k]) {
                        if (!below_wet) continue;  // interior of the plug
                        const double t = interface_t(i, j);
                        if (t >= 0.0 && phi_of(t) > lambda_sq_) {
                            next[k] = 0;  // retreat
                            ++changed;
                        }
                    } else {
                        // Grow downward, but only connected to the existing
                        // plug: from pinned nodes, from the lid (x >= 0) or
                        // the outlet data plug, or along the nozzle wall when
                        // a lateral neighbor is already pinned. Without the
                        // connectivity gate the plug would glue to the whole
                        // wetted nozzle wall.
                        const int ka = dom_.idx(i, j + 1);
                        const bool lateral_pin =
                            (i > 0 && pin[dom_.idx(i - 1, j)]) ||
                            (i + 1 < dom_.nx && pin[dom_.idx(i + 1, j)]);
                        bool above_plug = dom_.tag[ka] == NodeType::interior && pin[ka];
                        if (dom_.tag[ka] == NodeType::wall)
                            above_plug = dom_.x(i) >= 0.0 || lateral_pin;
                        if (dom_.tag[ka] == NodeType::outlet && bd_.values[ka] >= qm_)
                            above_plug = true;
                        if (!above_plug) continue;
                        const double t = interface_t(i, j);
                        if (t >= 0.0 && phi_of(t) < lambda_sq_) {
                            next[k] = 1;  // grow
                            ++changed;
                        }
                    }
                }
            // Hygiene: drop pinned danglers (three or more wet sides) and
            // fill one-node wet pockets enclosed by the plug.
            for (int j = 1; j + 1 < dom_.ny; ++j)
                for (int i = 1; i + 1 < dom_.nx; ++i) {
                    const int k = dom_.idx(i, j);
                    if (dom_.tag[k] != NodeType::interior) continue;
                    int solid = 0;
                    for (const auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                        const int kk = dom_.idx(i + di, j + dj);
                        if (dom_.tag[kk] == NodeType::outside ||
                            (dom_.tag[kk] == NodeType::interior ? next[kk] != 0
                                                                : bd_.values[kk] >= qm_))
                            ++solid;
                    }
                    if (next[k] && solid <= 1) {
                        next[k] = 0;
                        ++changed;
                    } else if (!next[k] && solid == 4) {
                        next[k] = 1;
                        ++changed;
                    }
                }
            pin.swap(next);
            for (int k = 0; k < n; ++k)
                if (dom_.tag[k] == NodeType::interior && pin[k]) f.psi[k] = Q_;
            if (changed == 0) break;
        }
    }

    // Wet volume fraction of a cell: the indicator integral quadratured by
    // the fraction of the cell below the psi = Q level, estimated from the
    // cell average and the psi-variation across the cell. Reduces to the
    // sharp indicator away from the free boundary and is exact to O(h) on
    // interface cells; unlike the sharp per-cell indicator it is continuous
    // in each nodal value, so the discrete front is not lattice-pinned.
    // The band width is the a-priori interface scale Lambda y_c h (the
    // free-boundary condition fixes |grad psi| = Lambda y there); using the
    // cell's own gradient instead would let interface cells discount their
    // lambda^2 charge by inflating gradient noise.
    double chi_wet(double zc, double yc) const {
        const double r = std::max(bd_.Lambda * yc * hbar_, 2e-12 * Q_);
        return std::clamp(0.5 + (qm_ - zc) / r, 0.0, 1.0);
    }

    // Cell-based discrete energy (deterministic summation order).
    double discrete_energy(const std::vector<double>& psi) const {
        double acc = 0.0;
        const double hxy = dom_.hx * dom_.hy;
        const double hq = 2.0 * std::sqrt(dom_.hx * dom_.hy);
        ClosureCache::ZState scratch;
        for (int cj = 0; cj + 1 < dom_.ny; ++cj) {
            for (int ci = 0; ci + 1 < dom_.nx; ++ci) {
                if (!cell_active_[cell_idx(ci, cj)]) continue;
                const double sw = psi[dom_.idx(ci, cj)], se = psi[dom_.idx(ci + 1, cj)];
                const double nw = psi[dom_.idx(ci, cj + 1)], ne = psi[dom_.idx(ci + 1, cj + 1)];
                const double yc = (cj + 0.5) * dom_.hy;
                const double dx = (se + ne - sw - nw) / (2.0 * dom_.hx);
                const double dy = (nw + ne - sw - se) / (2.0 * dom_.hy);
                const double q = (sw + ne - se - nw) / (hq * yc);
                const double t = (dx * dx + dy * dy) / (yc * yc) + q * q;
                const double zc = 0.25 * (sw + se + nw + ne);
                const auto& zs = cc_.eval_z_fast(zc, scratch);
                const double e = cc_.G(t, zs) + lambda_sq_ * chi_wet(zc, yc);
                acc += yc * e * hxy;
            }
        }
        return acc;
    }

    // Subsonic margin min(t_c(psi_c) - eps - |grad psi / y_c|^2) over wet
    // cells, physically (no stabilization term). The truncated boundary data
    // (inlet ramp, outlet psi-dagger near the axis) are steeper than the
    // subsonic bound by construction, so an interior window that skips a
    // fraction of columns at both ends measures the flow-region statement.
    double subsonic_margin(const std::vector<double>& psi,
                           double window_skip = 0.0) const {
        const int skip = static_cast<int>(window_skip * dom_.nx);
        double margin = std::numeric_limits<double>::infinity();
        ClosureCache::ZState scratch;
        for (int cj = 0; cj + 1 < dom_.ny; ++cj)
            for (int ci = skip; ci + 1 < dom_.nx - skip; ++ci) {
                if (!cell_active_[cell_idx(ci, cj)]) continue;
                const double sw = psi[dom_.idx(ci, cj)], se = psi[dom_.idx(ci + 1, cj)];
                const double nw = psi[dom_.idx(ci, cj + 1)], ne = psi[dom_.idx(ci + 1, cj + 1)];
                const double zc = 0.25 * (sw + se + nw + ne);
                if (zc >= qm_) continue;  // plug cells carry no flow
                const double yc = (cj + 0.5) * dom_.hy;
                const double dx = (se + ne - sw - nw) / (2.0 * dom_.hx);
                const double dy = (nw + ne - sw - se) / (2.0 * dom_.hy);
                const double t = (dx * dx + dy * dy) / (yc * yc);
                const auto& zs = cc_.eval_z_fast(zc, scratch);
                margin = std::min(margin, zs.t_c - cc_.eps() - t);
            }
        return margin;
    }

  private:
    struct CellRef {
        double base_dx, base_dy, base_q, base_sum;  // fixed-corner parts
        double ax, ay, aq;                          // d/dv of dx, dy, q
        double yc, inv_yc2;
        double cnt = 1.0;  // corners taking the moving value (tied proposals)
    };
    struct Local {
        CellRef cell[4];
        int ncell = 0;
    };

    StreamField empty_field() const {
        StreamField f;
        f.nx = dom_.nx;
        f.ny = dom_.ny;
        f.Q = Q_;
        f.Lambda = bd_.Lambda;
        f.lambda_eps = std::sqrt(lambda_sq_);
        f.psi = bd_.values;  // boundary exact, outside Q
        return f;
    }

    void enforce_boundary(StreamField& f) const {
        f.nx = dom_.nx;
        f.ny = dom_.ny;
        if (f.psi.size() != bd_.values.size())
            throw std::invalid_argument("minimize: warm-start field has wrong shape");
        for (std::size_t k = 0; k < f.psi.size(); ++k)
            if (dom_.tag[k] != NodeType::interior) f.psi[k] = bd_.values[k];
            else f.psi[k] = std::clamp(f.psi[k], 0.0, Q_);
    }

    void build_topology() {
        cell_active_.assign(static_cast<std::size_t>(dom_.nx - 1) * (dom_.ny - 1), 0);
        for (int cj = 0; cj + 1 < dom_.ny; ++cj)
            for (int ci = 0; ci + 1 < dom_.nx; ++ci)
                cell_active_[cell_idx(ci, cj)] =
                    dom_.in_domain(ci, cj) && dom_.in_domain(ci + 1, cj) &&
                    dom_.in_domain(ci, cj + 1) && dom_.in_domain(ci + 1, cj + 1);
        // 2x2 block coloring: same-color nodes never share a cell, so each
        // color phase is safe to run in parallel and results are identical
        // for any thread count.
        for (auto& v : color_nodes_) v.clear();
        for (int j = 0; j < dom_.ny; ++j)
            for (int i = 0; i < dom_.nx; ++i)
                if (dom_.is_interior(i, j))
                    color_nodes_[(i & 1) | ((j & 1) << 1)].push_back(dom_.idx(i, j));
    }

    std::size_t cell_idx(int ci, int cj) const {
        return static_cast<std::size_t>(cj) * (dom_.nx - 1) + ci;
    }

    // Energy (without the constant hx hy factor) of the cell block
    // ci in [c0, c1], cj in [r0, r1], intersected with the active cells.
    double block_energy(const std::vector<double>& psi, int c0, int c1, int r0,
                        int r1) const {
        double acc = 0.0;
        const double hq = 2.0 * std::sqrt(dom_.hx * dom_.hy);
        ClosureCache::ZState scratch;
        for (int cj = std::max(0, r0); cj <= std::min(dom_.ny - 2, r1); ++cj)
            for (int ci = std::max(0, c0); ci <= std::min(dom_.nx - 2, c1); ++ci) {
                if (!cell_active_[cell_idx(ci, cj)]) continue;
                const double sw = psi[dom_.idx(ci, cj)], se = psi[dom_.idx(ci + 1, cj)];
                const double nw = psi[dom_.idx(ci, cj + 1)],
                             ne = psi[dom_.idx(ci + 1, cj + 1)];
                const double yc = (cj + 0.5) * dom_.hy;
                const double dx = (se + ne - sw - nw) / (2.0 * dom_.hx);
                const double dy = (nw + ne - sw - se) / (2.0 * dom_.hy);
                const double q = (sw + ne - se - nw) / (hq * yc);
                const double t = (dx * dx + dy * dy) / (yc * yc) + q * q;
                const double zc = 0.25 * (sw + se + nw + ne);
                const double e =
                    cc_.G(t, cc_.eval_z_fast(zc, scratch)) + lambda_sq_ * chi_wet(zc, yc);
                acc += yc * e;
            }
        return acc;
    }

    // Nodal optimum with the in-run lateral neighbors tied to the moving
    // value (rigid segment proposal): along = 0 ties (i +- 1, j), along = 1
    // ties (i, j +- 1). The corrugation terms that pin rigid front motion
    // drop out of the tied energy.
    double tied_relax(const std::vector<double>& psi, int i, int j, int along) const {
        Local loc;
        loc.ncell = 0;
        const double hq = 2.0 * std::sqrt(dom_.hx * dom_.hy);
        for (int cj = j - 1; cj <= j; ++cj) {
            if (cj < 0 || cj + 1 >= dom_.ny) continue;
            for (int ci = i - 1; ci <= i; ++ci) {
                if (ci < 0 || ci + 1 >= dom_.nx) continue;
                if (!cell_active_[cell_idx(ci, cj)]) continue;
                CellRef& c = loc.cell[loc.ncell++];
                c.yc = (cj + 0.5) * dom_.hy;
                c.inv_yc2 = 1.0 / (c.yc * c.yc);
                double dx = 0.0, dy = 0.0, qq = 0.0, sum = 0.0;
                double adx = 0.0, ady = 0.0, aqq = 0.0, cnt = 0.0;
                for (int b = 0; b <= 1; ++b)
                    for (int a = 0; a <= 1; ++a) {
                        const int ii = ci + a, jj = cj + b;
                        const double sx = a == 1 ? 1.0 : -1.0;
                        const double sy = b == 1 ? 1.0 : -1.0;
                        const bool moving =
                            (ii == i && jj == j) ||
                            (along == 0 && jj == j && (ii == i - 1 || ii == i + 1)) ||
                            (along == 1 && ii == i && (jj == j - 1 || jj == j + 1));
                        if (moving) {
                            adx += sx;
                            ady += sy;
                            aqq += sx * sy;
                            cnt += 1.0;
                        } else {
                            const double v = psi[dom_.idx(ii, jj)];
                            sum += v;
                            dx += sx * v;
                            dy += sy * v;
                            qq += sx * sy * v;
                        }
                    }
                c.base_dx = dx / (2.0 * dom_.hx);
                c.base_dy = dy / (2.0 * dom_.hy);
                c.base_q = qq / (hq * c.yc);
                c.base_sum = sum;
                c.ax = adx / (2.0 * dom_.hx);
                c.ay = ady / (2.0 * dom_.hy);
                c.aq = aqq / (hq * c.yc);
                c.cnt = cnt;
            }
        }
        return relax_value(loc, psi[dom_.idx(i, j)]);
    }

    // Rigid front moves with bulk adaptation. A flat plug front is
    // lattice-pinned for single-node toggles (each pays an O(1) corrugation
    // penalty), and even a rigid row toggle is blocked because the wet bulk
    // must re-equilibrate with the moved front. The proposal therefore moves
    // an interface segment to its tied optimum and rescales the wet profile
    // behind it; acceptance is by exact energy comparison, so the sweep
    // remains a strict descent on the same functional.
    bool facet_moves(std::vector<double>& psi) const {
        bool any = facet_pass(psi, /*horizontal=*/true);
        any = facet_pass(psi, /*horizontal=*/false) || any;
        return any;
    }

    bool facet_pass(std::vector<double>& psi, bool horizontal) const {
        const int outer_n = horizontal ? dom_.ny - 1 : dom_.nx - 1;
        bool any = false;
        std::vector<double> save, prop;
        for (int o = 1; o < outer_n; ++o) {
            auto node = [&](int s, int& i, int& j) {
                if (horizontal) {
                    i = s;
                    j = o;
                } else {
                    i = o;
                    j = s;
                }
            };
            auto interface_node = [&](int s) {
                int i, j;
                node(s, i, j);
                if (!dom_.is_interior(i, j)) return false;
                const int ib = horizontal ? i : i - 1, jb = horizontal ? j - 1 : j;
                const int ia = horizontal ? i : i + 1, ja = horizontal ? j + 1 : j;
                if (ib < 0 || ia >= dom_.nx || jb < 0 || ja >= dom_.ny) return false;
                if (!dom_.in_domain(ib, jb) || !dom_.in_domain(ia, ja)) return false;
                const double v = psi[dom_.idx(i, j)];
                return (v >= qm_ && psi[dom_.idx(ib, jb)] < qm_) ||
                       (v < qm_ && psi[dom_.idx(ia, ja)] >= qm_);
            };
            const int inner_n = horizontal ? dom_.nx - 1 : dom_.ny - 1;
            int s = 1;
            while (s < inner_n) {
                if (!interface_node(s)) {
                    ++s;
                    continue;
                }
                const int a = s;
                while (s < inner_n && interface_node(s)) ++s;
                const int b = s - 1;
                if (b - a + 1 < 2) continue;  // single nodes relax normally
                const int len = b - a + 1;
                save.assign(psi.begin(), psi.end());
                prop.resize(len);
                for (int r = a; r <= b; ++r) {
                    int i, j;
                    node(r, i, j);
                    prop[r - a] = tied_relax(psi, i, j, horizontal ? 0 : 1);
                }
                // Apply the front move and rescale the wet profile behind it
                // (towards the axis for rows, towards the inlet for columns).
                for (int r = a; r <= b; ++r) {
                    int i, j;
                    node(r, i, j);
                    const double old = psi[dom_.idx(i, j)];
                    const double neu = prop[r - a];
                    psi[dom_.idx(i, j)] = neu;
                    if (old > 0.0 && neu != old) {
                        const double scale = std::min(neu, Q_) / old;
                        if (scale > 0.0 && std::isfinite(scale)) {
                            if (horizontal) {
                                for (int jj = 1; jj < j; ++jj)
                                    if (dom_.is_interior(i, jj))
                                        psi[dom_.idx(i, jj)] = std::clamp(
                                            psi[dom_.idx(i, jj)] * scale, 0.0, Q_);
                            }
                        }
                    }
                }
                // Exact energy comparison over the affected band.
                double before, after;
                if (horizontal) {
                    int i0, j0;
                    node(a, i0, j0);
                    after = block_energy(psi, a - 1, b, 0, j0);
                    std::swap(psi, save);
                    before = block_energy(psi, a - 1, b, 0, j0);
                    if (after < before) {
                        std::swap(psi, save);
                        any = true;
                    }
                } else {
                    const int i0 = o;
                    after = block_energy(psi, i0 - 1, i0, a - 1, b);
                    std::swap(psi, save);
                    before = block_energy(psi, i0 - 1, i0, a - 1, b);
                    if (after < before) {
                        std::swap(psi, save);
                        any = true;
                    }
                }
            }
        }
        return any;
    }

    // Global breathing move: psi -> min(Q, c psi) on the interior, line
    // searched in c. The one-parameter family moves the bulk and the plug
    // front together (for stratified states it passes through the
    // one-dimensional equilibria), so it is immune to the lattice pinning
    // that blocks nodewise front motion. Exact energy acceptance.
    bool scale_move(std::vector<double>& psi) const {
        std::vector<double> trial = psi;
        auto apply = [&](double c) {
            for (int color = 0; color < 4; ++color)
                for (int k : color_nodes_[color])
                    trial[k] = std::min(Q_, c * psi[k]);
        };
        auto energy_at = [&](double c) {
            apply(c);
            return discrete_energy(trial);
        };
        const double e0 = discrete_energy(psi);
        const double c = golden_section(energy_at, 0.8, 1.25, 1e-10);
        if (energy_at(c) < e0) {
            psi.swap(trial);
            return true;
        }
        return false;
    }

    // Mark nodes within one cell of any node that moved more than threshold.
    void refresh_active(const std::vector<double>& node_change, double threshold,
                        std::vector<std::uint8_t>& active) const {
        std::fill(active.begin(), active.end(), 0);
        for (int j = 0; j < dom_.ny; ++j)
            for (int i = 0; i < dom_.nx; ++i) {
                const int k = dom_.idx(i, j);
                if (node_change[k] <= threshold) continue;
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        const int ii = i + di, jj = j + dj;
                        if (ii >= 0 && ii < dom_.nx && jj >= 0 && jj < dom_.ny)
                            active[dom_.idx(ii, jj)] = 1;
                    }
            }
    }

    void gather(const std::vector<double>& psi, int i, int j, Local& loc) const {
        loc.ncell = 0;
        const double hq = 2.0 * std::sqrt(dom_.hx * dom_.hy);
        for (int cj = j - 1; cj <= j; ++cj) {
            if (cj < 0 || cj + 1 >= dom_.ny) continue;
            for (int ci = i - 1; ci <= i; ++ci) {
                if (ci < 0 || ci + 1 >= dom_.nx) continue;
                if (!cell_active_[cell_idx(ci, cj)]) continue;
                CellRef& c = loc.cell[loc.ncell++];
                const double sgx = (i == ci + 1) ? 1.0 : -1.0;
                const double sgy = (j == cj + 1) ? 1.0 : -1.0;
                double dx = 0.0, dy = 0.0, qq = 0.0, sum = 0.0;
                for (int b = 0; b <= 1; ++b)
                    for (int a = 0; a <= 1; ++a) {
                        const int ii = ci + a, jj = cj + b;
                        if (ii == i && jj == j) continue;
                        const double v = psi[dom_.idx(ii, jj)];
                        sum += v;
                        dx += (a == 1 ? v : -v);
                        dy += (b == 1 ? v : -v);
                        qq += (a == b ? v : -v);
                    }
                c.yc = (cj + 0.5) * dom_.hy;
                c.inv_yc2 = 1.0 / (c.yc * c.yc);
                c.base_dx = dx / (2.0 * dom_.hx);
                c.base_dy = dy / (2.0 * dom_.hy);
                c.base_q = qq / (hq * c.yc);
                c.base_sum = sum;
                c.ax = sgx / (2.0 * dom_.hx);
                c.ay = sgy / (2.0 * dom_.hy);
                c.aq = sgx * sgy / (hq * c.yc);
            }
        }
    }

    // Local energy in the single moving value (chi included; it is
    // continuous under the volume-fraction quadrature).
    double local_energy(const Local& loc, double v) const {
        double e = 0.0;
        ClosureCache::ZState scratch;
        for (int c = 0; c < loc.ncell; ++c) {
            const CellRef& cr = loc.cell[c];
            const double dx = cr.base_dx + cr.ax * v;
            const double dy = cr.base_dy + cr.ay * v;
            const double q = cr.base_q + cr.aq * v;
            const double t = (dx * dx + dy * dy) * cr.inv_yc2 + q * q;
            const double zc = 0.25 * (cr.base_sum + cr.cnt * v);
            e += cr.yc * (cc_.G(t, cc_.eval_z_fast(zc, scratch)) +
                          lambda_sq_ * chi_wet(zc, cr.yc));
        }
        return e;
    }

    void local_derivs(const Local& loc, double v, double& d1, double& d2) const {
        d1 = 0.0;
        d2 = 0.0;
        ClosureCache::ZState scratch;
        for (int c = 0; c < loc.ncell; ++c) {
            const CellRef& cr = loc.cell[c];
            const double dx = cr.base_dx + cr.ax * v;
            const double dy = cr.base_dy + cr.ay * v;
            const double q = cr.base_q + cr.aq * v;
            const double t = (dx * dx + dy * dy) * cr.inv_yc2 + q * q;
            const double tp = 2.0 * ((dx * cr.ax + dy * cr.ay) * cr.inv_yc2 + q * cr.aq);
            const double tpp =
                2.0 * ((cr.ax * cr.ax + cr.ay * cr.ay) * cr.inv_yc2 + cr.aq * cr.aq);
            const double zc = 0.25 * (cr.base_sum + cr.cnt * v);
            const auto& zs = cc_.eval_z_fast(zc, scratch);
            double g, dg;
            cc_.g_pair(t, zs, g, dg);
            d1 += cr.yc * (0.5 * g * tp + 0.25 * cr.cnt * cc_.dGdz(t, zs));
            d2 += cr.yc * (0.5 * dg * tp * tp + 0.5 * g * tpp);
            const double r = std::max(bd_.Lambda * cr.yc * hbar_, 2e-12 * Q_);
            const double chi_arg = 0.5 + (qm_ - zc) / r;
            if (chi_arg > 0.0 && chi_arg < 1.0)
                d1 -= cr.yc * lambda_sq_ * 0.25 * cr.cnt / r;
        }
    }

    // Pinned-phase relax: gradient energy only (chi constant for a fixed
    // plug set); used by the front tracker.
    double smooth_argmin_nochi(const Local& loc, double v0) const {
        if (loc.ncell == 0) return v0;
        ClosureCache::ZState scratch;
        auto energy = [&](double v) {
            double e = 0.0;
            for (int c = 0; c < loc.ncell; ++c) {
                const CellRef& cr = loc.cell[c];
                const double dx = cr.base_dx + cr.ax * v;
                const double dy = cr.base_dy + cr.ay * v;
                const double q = cr.base_q + cr.aq * v;
                const double t = (dx * dx + dy * dy) * cr.inv_yc2 + q * q;
                const double zc = 0.25 * (cr.base_sum + cr.cnt * v);
                e += cr.yc * cc_.G(t, cc_.eval_z_fast(zc, scratch));
            }
            return e;
        };
        double lo = 0.0, hi = Q_;
        double v = std::clamp(v0, lo, hi);
        for (int it = 0; it < 60; ++it) {
            double d1 = 0.0, d2 = 0.0;
            ClosureCache::ZState sc2;
            for (int c = 0; c < loc.ncell; ++c) {
                const CellRef& cr = loc.cell[c];
                const double dx = cr.base_dx + cr.ax * v;
                const double dy = cr.base_dy + cr.ay * v;
                const double q = cr.base_q + cr.aq * v;
                const double t = (dx * dx + dy * dy) * cr.inv_yc2 + q * q;
                const double tp =
                    2.0 * ((dx * cr.ax + dy * cr.ay) * cr.inv_yc2 + q * cr.aq);
                const double tpp =
                    2.0 * ((cr.ax * cr.ax + cr.ay * cr.ay) * cr.inv_yc2 + cr.aq * cr.aq);
                const double zc = 0.25 * (cr.base_sum + cr.cnt * v);
                const auto& zs = cc_.eval_z_fast(zc, sc2);
                double g, dg;
                cc_.g_pair(t, zs, g, dg);
                d1 += cr.yc * (0.5 * g * tp + 0.25 * cr.cnt * cc_.dGdz(t, zs));
                d2 += cr.yc * (0.5 * dg * tp * tp + 0.5 * g * tpp);
            }
            if (d1 == 0.0) return v;
            if (d1 > 0.0) hi = v; else lo = v;
            double next;
            if (d2 > 0.0) {
                next = v - d1 / d2;
                if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            } else {
                next = 0.5 * (lo + hi);
            }
            if (std::abs(next - v) <= rtol_) return next;
            v = next;
        }
        return golden_section(energy, lo, hi, rtol_);
    }

    double smooth_argmin(const Local& loc, double v0) const {
        if (opt_.use_golden)
            return golden_section([&](double v) { return local_energy(loc, v); }, 0.0,
                                  Q_, rtol_);
        double lo = 0.0, hi = Q_;
        double v = std::clamp(v0, lo, hi);
        for (int it = 0; it < 60; ++it) {
            double d1, d2;
            local_derivs(loc, v, d1, d2);
            if (d1 == 0.0) return v;
            if (d1 > 0.0) hi = v; else lo = v;
            double next;
            if (d2 > 0.0) {
                next = v - d1 / d2;
                if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            } else {
                next = 0.5 * (lo + hi);
            }
            if (std::abs(next - v) <= rtol_) return next;
            v = next;
        }
        // Slow convergence (kinked energy): golden-section fallback.
        return golden_section([&](double v2) { return local_energy(loc, v2); }, lo, hi,
                              rtol_);
    }

    double relax_value(const Local& loc, double current) const {
        if (loc.ncell == 0) return current;
        const double vstar = smooth_argmin(loc, current);
        // Plug competition: compare the endpoint v = Q explicitly whenever
        // the neighborhood is already part plug (a wet notch between plugged
        // neighbors is a local minimum of the interior energy alone).
        bool near_plug = vstar >= Q_ * (1.0 - 1e-9);
        for (int c = 0; !near_plug && c < loc.ncell; ++c)
            near_plug = loc.cell[c].base_sum >= 2.0 * qm_;
        if (near_plug)
            return local_energy(loc, Q_) <= local_energy(loc, vstar) ? Q_ : vstar;
        return vstar;
    }

    void verification_pass(const StreamField& f, SolveReport& rep) const {
        double dmax = 0.0, emax = 0.0;
        Local loc;
        for (int color = 0; color < 4; ++color)
            for (int k : color_nodes_[color]) {
                const int i = k % dom_.nx, j = k / dom_.nx;
                gather(f.psi, i, j, loc);
                const double old = f.psi[k];
                const double v = relax_value(loc, old);
                dmax = std::max(dmax, std::abs(v - old));
                if (v != old)
                    emax = std::max(emax, local_energy(loc, old) - local_energy(loc, v));
            }
        rep.max_node_change = dmax;
        rep.max_node_energy_decrease = emax * dom_.hx * dom_.hy;
    }

    void fill_diagnostics(const StreamField& f, SolveReport& rep) const {
        rep.subsonic_margin = subsonic_margin(f.psi);
        long wet = 0;
        for (int cj = 0; cj + 1 < dom_.ny; ++cj)
            for (int ci = 0; ci + 1 < dom_.nx; ++ci) {
                if (!cell_active_[cell_idx(ci, cj)]) continue;
                const double zc = 0.25 * (f.psi[dom_.idx(ci, cj)] + f.psi[dom_.idx(ci + 1, cj)] +
                                          f.psi[dom_.idx(ci, cj + 1)] + f.psi[dom_.idx(ci + 1, cj + 1)]);
                wet += zc < qm_;
            }
        rep.wet_cells = wet;
        double viol = 0.0;
        for (int j = 1; j + 1 < dom_.ny; ++j)
            for (int i = 0; i + 1 < dom_.nx; ++i) {
                if (!dom_.in_domain(i, j) || !dom_.in_domain(i + 1, j)) continue;
                viol = std::max(viol, f.psi[dom_.idx(i, j)] - f.psi[dom_.idx(i + 1, j)]);
            }
        rep.monotonicity_violation = viol / dom_.hx;
    }

    const TruncatedDomain& dom_;
    BoundaryData bd_;
    const ClosureCache& cc_;
    SolverOptions opt_;
    double Q_ = 0.0, lambda_sq_ = 0.0, qm_ = 0.0, rtol_ = 0.0, hbar_ = 0.0;
    std::vector<std::uint8_t> cell_active_;
    std::array<std::vector<int>, 4> color_nodes_;
};

// Qualitative structure checks on a converged field.
struct StructureChecks {
    bool monotone = false;
    double worst_dx = 0.0;  // most negative forward difference, scaled by 1/hx
    bool plug_suffix = false;
    bool no_plug_below_hstar = false;
    double subsonic_margin = 0.0;         // interior window (truncation data excluded)
    double subsonic_margin_global = 0.0;  // including the data boundary layers
    bool all_pass() const {
        return monotone && plug_suffix && no_plug_below_hstar && subsonic_margin >= 0.0;
    }
};

inline StructureChecks validate_structure(const StreamField& f, const TruncatedDomain& dom,
                                          const ClosureCache& cc, double H_star,
                                          double margin_window = 0.1) {
    StructureChecks out;
    const double qm = f.Q * (1.0 - 1e-12);

    double worst = 0.0;
    for (int j = 1; j + 1 < dom.ny; ++j)
        for (int i = 0; i + 1 < dom.nx; ++i) {
            if (!dom.in_domain(i, j) || !dom.in_domain(i + 1, j)) continue;
            worst = std::max(worst, f.at(i, j) - f.at(i + 1, j));
        }
    out.worst_dx = worst / dom.hx;
    out.monotone = worst <= 1e-8 * f.Q;

    out.plug_suffix = true;
    for (int j = 1; j + 1 < dom.ny; ++j) {
        bool plugged = false;
        for (int i = 0; i < dom.nx; ++i) {
            if (!dom.in_domain(i, j)) continue;
            const bool p = f.at(i, j) >= qm;
            if (plugged && !p) {
                out.plug_suffix = false;
                break;
            }
            plugged = p;
        }
        if (!out.plug_suffix) break;
    }

    out.no_plug_below_hstar = true;
    for (int j = 1; j < dom.ny && dom.y(j) < H_star; ++j)
        for (int i = 0; i < dom.nx; ++i)
            if (dom.in_domain(i, j) && dom.at(i, j) != NodeType::wall &&
                f.at(i, j) >= qm)
                out.no_plug_below_hstar = false;

    EnergySolver tmp(dom, boundary_data(dom, f.Q, f.Lambda > 0 ? f.Lambda : f.Q), cc);
    out.subsonic_margin = tmp.subsonic_margin(f.psi, margin_window);
    out.subsonic_margin_global = tmp.subsonic_margin(f.psi);
    return out;
}

}  // namespace jetflow
