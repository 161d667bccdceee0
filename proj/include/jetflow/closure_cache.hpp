// Fast closure evaluator for the solver inner loop.
//
// The momentum function factorizes as t(rho, z) = rho_m(z)^2 B(z) * that(rho/rho_m)
// with that(r) = 2 r^2 (1 - r^(gamma-1)), so a single normalized inverse
// rhat(that) per gamma serves every z. The inverse is tabulated against
// sigma = sqrt(that_c - that) (smooth through the sonic square-root) as a
// cubic Hermite on a uniform sigma grid built from exact Newton solves.
// Energies use the closed-form antiderivative of g on the pure subsonic
// range and a fixed Gauss panel across the blend layer.

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "jetflow/thermo.hpp"

namespace jetflow {

class ClosureCache {
  public:
    explicit ClosureCache(const GasClosure& gas, int n_sigma = 4096)
        : gas_(gas), gamma_(gas.gamma), eps_(gas.eps), Q_(gas.Q), gstar_(gas.g_upper) {
        const double g = gamma_;
        rhohat_c_ = std::pow(2.0 / (g + 1.0), 1.0 / (g - 1.0));
        that_c_ = (g - 1.0) * rhohat_c_ * rhohat_c_ * pow_gm1(rhohat_c_, g);
        sig_max_ = std::sqrt(that_c_);
        dsig_ = sig_max_ / n_sigma;
        rh_.resize(n_sigma + 1);
        drh_.resize(n_sigma + 1);
        rh_[0] = rhohat_c_;
        drh_[0] = 1.0 / std::sqrt(2.0 * (g - 1.0));
        double rho = rhohat_c_;
        for (int k = 1; k <= n_sigma; ++k) {
            const double sig = k * dsig_;
            const double t = that_c_ - sig * sig;
            double lo = rho, hi = 1.0;
            for (int it = 0; it < 100; ++it) {
                const double pg = pow_gm1(rho, g);
                const double f = 2.0 * rho * rho * (1.0 - pg) - t;
                if (f > 0.0) lo = rho; else hi = rho;
                const double df = 2.0 * rho * (2.0 - (g + 1.0) * pg);
                double next = rho - f / df;
                if (!(next > lo && next < hi) || df == 0.0) next = 0.5 * (lo + hi);
                if (std::abs(next - rho) < 1e-17) { rho = next; break; }
                rho = next;
            }
            rh_[k] = rho;
            const double dtdr = 2.0 * rho * (2.0 - (g + 1.0) * pow_gm1(rho, g));
            drh_[k] = -2.0 * sig / dtdr;  // drho/dsigma > 0
        }

        if (gas.constant_profiles) {
            zconst_ = eval_z(0.0);
            zconst_ready_ = true;
        }
        finalize_offsets();
    }

    // Exact free-boundary constant squared, Phi_eps(Lambda^2, Q).
    double lambda_sq(double Lambda) const { return Phi_eps(Lambda * Lambda, Q_, gas_); }

    const GasClosure& gas() const { return gas_; }
    double eps() const { return eps_; }
    double Q() const { return Q_; }
    double g_upper() const { return gstar_; }

    struct ZState {
        double B, S, Bp, Sp;
        double rho_m;      // stagnation density
        double scale;      // rho_m^2 B
        double t_c;        // scale * that_c
        double rho_m_g;    // rho_m^gamma
        double offset;     // z-offset of G_eps
    };

    // Reference-returning variant for hot loops: constant profiles return the
    // cached state without copying; otherwise the scratch slot is filled.
    const ZState& eval_z_fast(double z, ZState& scratch) const {
        if (zconst_ready_) return zconst_;
        scratch = eval_z(z);
        return scratch;
    }

    ZState eval_z(double z) const {
        if (zconst_ready_) return zconst_;
        ZState s;
        s.B = gas_.B(z);
        s.S = gas_.S(z);
        s.Bp = gas_.B.deriv(z);
        s.Sp = gas_.S.deriv(z);
        s.rho_m = std::pow(s.B / s.S, 1.0 / (gamma_ - 1.0));
        s.scale = s.rho_m * s.rho_m * s.B;
        s.t_c = s.scale * that_c_;
        s.rho_m_g = pow_g(s.rho_m, gamma_);
        if (offsetQ_ready_) {
            s.offset = (gamma_ - 1.0) / gamma_ * (s.rho_m_g * s.S - offsetQ_);
        } else {
            s.offset = 0.0;  // patched by the constructor path below
        }
        return s;
    }

    void finalize_offsets() {
        const ZState q = eval_z(Q_);
        offsetQ_ = q.rho_m_g * q.S;
        offsetQ_ready_ = true;
        if (zconst_ready_) zconst_ = eval_z(0.0);
    }

    // Normalized subsonic density rhat(that) with derivative d rhat / d that.
    void rho_hat(double that, double& r, double& drdt) const {
        double sig2 = that_c_ - that;
        if (sig2 < 0.0) sig2 = 0.0;
        const double sig = std::sqrt(sig2);
        double u = sig / dsig_;
        int k = static_cast<int>(u);
        if (k >= static_cast<int>(rh_.size()) - 1) k = static_cast<int>(rh_.size()) - 2;
        u -= k;
        const double h = dsig_;
        const double y0 = rh_[k], y1 = rh_[k + 1], d0 = drh_[k], d1 = drh_[k + 1];
        const double u2 = u * u, u3 = u2 * u;
        r = y0 * (2 * u3 - 3 * u2 + 1) + h * d0 * (u3 - 2 * u2 + u) +
            y1 * (-2 * u3 + 3 * u2) + h * d1 * (u3 - u2);
        const double drdsig =
            (y0 * (6 * u2 - 6 * u) + h * d0 * (3 * u2 - 4 * u + 1) +
             y1 * (-6 * u2 + 6 * u) + h * d1 * (3 * u2 - 2 * u)) / h;
        drdt = sig > 0.0 ? -drdsig / (2.0 * sig) : -1e300;
    }

    // g_eps and its t-derivative.
    void g_pair(double t, const ZState& zs, double& g, double& dgdt) const {
        const double t2 = zs.t_c - 0.5 * eps_;
        if (t >= t2) {
            g = gstar_;
            dgdt = 0.0;
            return;
        }
        double r, drdt;
        rho_hat(t / zs.scale, r, drdt);
        const double rho = zs.rho_m * r;
        const double gsub = 1.0 / rho;
        const double drho_dt = zs.rho_m * drdt / zs.scale;
        const double dg_sub = -gsub * gsub * drho_dt;
        const double t1 = zs.t_c - eps_;
        if (t <= t1) {
            g = gsub;
            dgdt = dg_sub;
            return;
        }
        const double s = (t - zs.t_c) / eps_;
        const double w = TruncationProfile::value(s);
        const double wp = TruncationProfile::prime(s) / eps_;
        g = gsub * w + (1.0 - w) * gstar_;
        dgdt = dg_sub * w + (gsub - gstar_) * wp;
    }

    double g(double t, const ZState& zs) const {
        double gv, dg;
        g_pair(t, zs, gv, dg);
        return gv;
    }

    // G_eps(t, z): closed form below the layer, Gauss panel across it,
    // linear tail beyond.
    double G(double t, const ZState& zs) const {
        const double t1 = zs.t_c - eps_;
        double half_int;
        if (t <= t1) {
            half_int = half_integral(t, zs);
        } else {
            const double t2 = zs.t_c - 0.5 * eps_;
            half_int = half_integral(t1, zs) + layer_half_integral(std::min(t, t2), zs);
            if (t > t2) half_int += 0.5 * gstar_ * (t - t2);
        }
        return half_int + zs.offset;
    }

    // dG_eps/dz at (t, z) (zero for constant profiles).
    double dGdz(double t, const ZState& zs) const {
        if (zs.Bp == 0.0 && zs.Sp == 0.0) return 0.0;
        const double g = gamma_;
        const double t1 = zs.t_c - eps_;
        auto subsonic = [&](double tau) {
            double r, drdt;
            rho_hat(tau / zs.scale, r, drdt);
            const double rho = zs.rho_m * r;
            return zs.Bp * rho - zs.Sp * pow_g(rho, g) / g;
        };
        if (t <= t1) return subsonic(t);
        const double ratio = zs.B / zs.S;
        const double tc_prime =
            std::pow(2.0 / (g + 1.0), (g + 1.0) / (g - 1.0)) *
            ((g + 1.0) * std::pow(ratio, 2.0 / (g - 1.0)) * zs.Bp -
             2.0 * std::pow(ratio, (g + 1.0) / (g - 1.0)) * zs.Sp);
        const double t2 = zs.t_c - 0.5 * eps_;
        const double hi = std::min(t, t2);
        double acc = 0.0;
        for (int q = 0; q < kGL; ++q) {
            const double tau = 0.5 * (t1 + hi) + 0.5 * (hi - t1) * kGLx[q];
            double r, drdt;
            rho_hat(tau / zs.scale, r, drdt);
            const double rho = zs.rho_m * r;
            const double gv = 1.0 / rho;
            const double wp = TruncationProfile::prime((tau - zs.t_c) / eps_) / eps_;
            acc += kGLw[q] *
                   (zs.Bp / gv - zs.Sp / (g * pow_g(gv, g)) -
                    0.5 * (gstar_ - gv) * tc_prime) * wp;
        }
        double result = -0.5 * (hi - t1) * acc;
        if (t < t2)
            result += subsonic(t) * TruncationProfile::value((t - zs.t_c) / eps_);
        return result;
    }

  private:
    double half_integral(double t, const ZState& zs) const {
        double r, drdt;
        rho_hat(t / zs.scale, r, drdt);
        const double rho = zs.rho_m * r;
        const double g = gamma_;
        const double c = (g + 1.0) / g * zs.S;
        return 2.0 * zs.B * (rho - zs.rho_m) - c * (pow_g(rho, g) - zs.rho_m_g);
    }

    double layer_half_integral(double hi, const ZState& zs) const {
        const double t1 = zs.t_c - eps_;
        if (hi <= t1) return 0.0;
        double acc = 0.0;
        for (int q = 0; q < kGL; ++q) {
            const double tau = 0.5 * (t1 + hi) + 0.5 * (hi - t1) * kGLx[q];
            double r, drdt;
            rho_hat(tau / zs.scale, r, drdt);
            const double gv = 1.0 / (zs.rho_m * r);
            const double w = TruncationProfile::value((tau - zs.t_c) / eps_);
            acc += kGLw[q] * (gv * w + (1.0 - w) * gstar_);
        }
        return 0.5 * 0.5 * (hi - t1) * acc;
    }

    static constexpr int kGL = 20;
    static constexpr std::array<double, 20> kGLx = {
        -0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
        -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
        -0.5108670019508271, -0.3737060887154196, -0.2277858511416451,
        -0.0765265211334973, 0.0765265211334973,  0.2277858511416451,
        0.3737060887154196,  0.5108670019508271,  0.6360536807265150,
        0.7463319064601508,  0.8391169718222188,  0.9122344282513259,
        0.9639719272779138,  0.9931285991850949};
    static constexpr std::array<double, 20> kGLw = {
        0.0176140071391521, 0.0406014298003869, 0.0626720483341091,
        0.0832767415767048, 0.1019301198172404, 0.1181945319615184,
        0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
        0.1527533871307259, 0.1527533871307259, 0.1491729864726037,
        0.1420961093183821, 0.1316886384491766, 0.1181945319615184,
        0.1019301198172404, 0.0832767415767048, 0.0626720483341091,
        0.0406014298003869, 0.0176140071391521};

    GasClosure gas_;
    double gamma_, eps_, Q_, gstar_;
    double rhohat_c_ = 0.0, that_c_ = 0.0, sig_max_ = 0.0, dsig_ = 0.0;
    std::vector<double> rh_, drh_;
    ZState zconst_{};
    bool zconst_ready_ = false;
    double offsetQ_ = 0.0;
    bool offsetQ_ready_ = false;
};

}  // namespace jetflow
