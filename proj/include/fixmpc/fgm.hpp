#pragma once

/**
 * @file
 * @brief Fast gradient method (constant step scheme II) on the normalized
 * condensed QP, in double precision and in bit-accurate fixed point.
 *
 *   t_i     = (I - H_n) y_i - Phi_n p
 *   z_{i+1} = clamp(t_i, z_min, z_max)
 *   y_{i+1} = (1 + beta) z_{i+1} - beta z_i
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "condense.hpp"
#include "errors.hpp"
#include "fxp.hpp"

namespace fixmpc::fgm {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using transform::FgmOffline;

inline VectorXd project_box(const VectorXd& t, const VectorXd& lo, const VectorXd& hi) {
    if (t.size() != lo.size() || t.size() != hi.size())
        throw DimensionError("box projection dimension mismatch");
    return t.cwiseMax(lo).cwiseMin(hi);
}

/// Shifts a stacked sequence of blocks forward by one, repeating the last block.
inline VectorXd shift_blocks(const VectorXd& v, int block) {
    if (block <= 0 || v.size() % block != 0)
        throw LayoutError("vector length is not a multiple of the block size");
    VectorXd out(v.size());
    const auto n = v.size();
    out.head(n - block) = v.tail(n - block);
    out.tail(block) = v.tail(block);
    return out;
}

/// Normalized objective 1/2 z'H_n z + z'(Phi_n p).
inline double objective(const FgmOffline& off, const VectorXd& z, const VectorXd& h) {
    return 0.5 * z.dot(off.H_n * z) + z.dot(h);
}

struct FgmResult {
    VectorXd z;
    std::vector<VectorXd> iterates; ///< z_0 .. z_{I_max}
    std::vector<double> objective;  ///< normalized objective of each iterate
};

/// Runs exactly I_max iterations in double precision with linear term h = Phi_n p.
inline FgmResult fgm_iterate(const FgmOffline& off, const VectorXd& h, int I_max, const VectorXd& z0) {
    const auto n = off.H_n.rows();
    if (h.size() != n || z0.size() != n)
        throw DimensionError("FGM vector dimension mismatch");
    if (I_max < 0)
        throw ConfigError("iteration count must be nonnegative");
    const MatrixXd G = off.iteration_matrix();
    FgmResult r;
    VectorXd z = z0;
    VectorXd y = z0;
    r.iterates.push_back(z);
    r.objective.push_back(objective(off, z, h));
    for (int i = 0; i < I_max; ++i) {
        const VectorXd t = G * y - h;
        const VectorXd zn = project_box(t, off.z_min, off.z_max);
        y = (1.0 + off.beta) * zn - off.beta * z;
        z = zn;
        r.iterates.push_back(z);
        r.objective.push_back(objective(off, z, h));
    }
    r.z = z;
    return r;
}

/// Double-precision solve for parameter p = stack_parameter(x, ref).
inline FgmResult fgm_solve(const FgmOffline& off, const VectorXd& p, int I_max, const VectorXd& z0) {
    if (p.size() != off.Phi_n.cols())
        throw DimensionError("parameter dimension mismatch");
    return fgm_iterate(off, off.Phi_n * p, I_max, z0);
}

/// Convergence factor of the objective residual after i iterations.
inline double convergence_factor(double kappa_n, int i) {
    const double lin = std::pow(1.0 - std::sqrt(1.0 / kappa_n), i);
    const double s = 2.0 * std::sqrt(kappa_n) + i;
    return std::min(lin, 4.0 * kappa_n / (s * s));
}

/// Residual bound f(z_i) - f* <= factor * 2 (f(z_0) - f*).
inline double residual_bound(double kappa_n, int i, double delta0) { return convergence_factor(kappa_n, i) * 2.0 * delta0; }

/// Smallest i with factor(i) * 2 delta0 <= eps.
inline int iteration_bound(double kappa_n, double delta0, double eps) {
    if (!(kappa_n >= 1.0) || !(delta0 > 0.0) || !(eps > 0.0))
        throw ConfigError("iteration bound needs kappa >= 1, delta0 > 0, eps > 0");
    for (int i = 0;; ++i) {
        if (residual_bound(kappa_n, i, delta0) <= eps)
            return i;
        if (i > 100000000)
            throw PrecisionError("iteration bound exceeds search range");
    }
}

/// Per-signal formats of the fixed-point datapath; all share the fraction bits.
struct FgmFormats {
    fxp::FxFormat z;       ///< iterates and box bounds
    fxp::FxFormat y;       ///< extrapolated iterate
    fxp::FxFormat inter;   ///< (I - H_n) y and its partial sums
    fxp::FxFormat h;       ///< Phi_n p and its partial sums
    fxp::FxFormat t;       ///< gradient step output
    fxp::FxFormat product; ///< (1 + beta) z
    fxp::FxFormat param;   ///< online parameter p

    [[nodiscard]] int fraction_bits() const { return z.fraction_bits(); }
};

/// Largest magnitudes observed per signal during a fixed-point run.
struct SignalMaxima {
    double z = 0.0;
    double y = 0.0;
    double inter = 0.0;
    double h = 0.0;
    double t = 0.0;
    double product = 0.0;
};

/// Optional certified magnitude bounds; exceeding one raises OverflowError.
struct SignalBounds {
    double z = 0.0;
    double y = 0.0;
    double inter = 0.0;
    double h = 0.0;
    double t = 0.0;
};

struct FgmFxResult {
    fxp::FxVector z;
    fxp::FxVector h;                 ///< cached Phi_n p as computed in fixed point
    std::vector<VectorXd> iterates;  ///< z_0 .. z_{I_max} (when recorded)
    SignalMaxima maxima;
};

/// Offline data in fixed point; built once per (offline, formats).
struct FgmFxData {
    FgmFormats formats;
    fxp::FxMatrix G;    ///< I - H_n
    fxp::FxMatrix Phi;  ///< Phi_n
    fxp::raw_t beta = 0;
    fxp::raw_t one_plus_beta = 0;
    fxp::RawVector lo;
    fxp::RawVector hi;

    FgmFxData(const FgmOffline& off, const FgmFormats& f) : formats(f), G(make(off.iteration_matrix(), f)),
                                                            Phi(make(off.Phi_n, f)) {
        const int b = f.fraction_bits();
        for (const auto* fmt : {&f.y, &f.inter, &f.h, &f.t, &f.product, &f.param})
            fxp::detail::require_same_fraction(f.z, *fmt);
        const fxp::FxFormat scal(2, b);
        beta = fxp::quantize_raw(off.beta, scal, fxp::Rounding::nearest);
        one_plus_beta = fxp::quantize_raw(1.0 + off.beta, scal, fxp::Rounding::nearest);
        if (std::ldexp(static_cast<double>(beta), -b) != off.beta)
            throw PrecisionError("momentum is not on the fixed-point grid");
        lo = fxp::FxVector::quantize(off.z_min, f.z, fxp::Rounding::truncate).raw;
        hi = fxp::FxVector::quantize(off.z_max, f.z, fxp::Rounding::truncate).raw;
        const VectorXd lo_back = lo.cast<double>() * std::ldexp(1.0, -b);
        const VectorXd hi_back = hi.cast<double>() * std::ldexp(1.0, -b);
        if (lo_back != off.z_min || hi_back != off.z_max)
            throw PrecisionError("box bounds are not on the fixed-point grid");
    }

private:
    static fxp::FxMatrix make(const MatrixXd& m, const FgmFormats& f) {
        return fxp::FxMatrix::quantize_fit(m, f.fraction_bits(), fxp::Rounding::nearest);
    }
};

struct FgmFxOptions {
    fxp::OverflowPolicy policy = fxp::OverflowPolicy::checked;
    bool record_iterates = false;
    std::optional<SignalBounds> bounds;
};

namespace detail {

inline double max_abs(const fxp::RawVector& v, int b) {
    return v.size() ? std::ldexp(static_cast<double>(v.cwiseAbs().maxCoeff()), -b) : 0.0;
}

inline void check_bound(double observed, double bound, const char* what) {
    if (observed > bound)
        throw OverflowError(std::string("signal ") + what + " exceeds its certified bound");
}

} // namespace detail

/// Fixed-point solve. p_hat is the already-quantized parameter (truncated).
inline FgmFxResult fgm_solve_fx(const FgmFxData& d, const fxp::FxVector& p_hat, int I_max, const fxp::FxVector& z0,
                                const FgmFxOptions& opt = {}) {
    const auto& f = d.formats;
    const int b = f.fraction_bits();
    const auto n = d.G.rows();
    if (p_hat.size() != d.Phi.cols() || z0.size() != n)
        throw DimensionError("fixed-point FGM dimension mismatch");
    fxp::detail::require_same_fraction(p_hat.format, f.z);
    fxp::detail::require_same_fraction(z0.format, f.z);
    for (Eigen::Index j = 0; j < n; ++j)
        if (z0.raw[j] < d.lo[j] || z0.raw[j] > d.hi[j])
            throw ValidationError("initial iterate outside the quantized box");

    FgmFxResult r{fxp::FxVector{f.z, z0.raw}, fxp::matvec(d.Phi, p_hat, f.h, opt.policy), {}, {}};
    auto& mx = r.maxima;
    mx.h = detail::max_abs(r.h.raw, b);
    auto to_double = [b](const fxp::RawVector& v) { return VectorXd(v.cast<double>() * std::ldexp(1.0, -b)); };

    fxp::RawVector z = z0.raw;
    fxp::RawVector y = z0.raw;
    for (Eigen::Index j = 0; j < n; ++j)
        y[j] = fxp::detail::settle(y[j], f.y, opt.policy, "y");
    fxp::RawVector zn(n);
    fxp::RawVector inter(n);
    fxp::RawVector t(n);
    if (opt.record_iterates)
        r.iterates.push_back(to_double(z));
    for (int i = 0; i < I_max; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            inter[j] = fxp::detail::dot_raw(d.G.raw.row(j).data(), y.data(), static_cast<std::size_t>(n), b, f.inter,
                                            opt.policy);
            t[j] = fxp::detail::settle(static_cast<fxp::wide_t>(inter[j]) - r.h.raw[j], f.t, opt.policy, "t");
            zn[j] = std::clamp(t[j], d.lo[j], d.hi[j]);
        }
        double pmax = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto a = fxp::detail::settle(fxp::detail::mul_trunc_raw(d.one_plus_beta, zn[j], b), f.product,
                                               opt.policy, "(1+beta) z");
            const auto c = fxp::detail::settle(fxp::detail::mul_trunc_raw(d.beta, z[j], b), f.product, opt.policy,
                                               "beta z");
            y[j] = fxp::detail::settle(static_cast<fxp::wide_t>(a) - c, f.y, opt.policy, "y");
            pmax = std::max(pmax, std::ldexp(static_cast<double>(std::max(std::abs(a), std::abs(c))), -b));
        }
        z = zn;
        mx.z = std::max(mx.z, detail::max_abs(z, b));
        mx.y = std::max(mx.y, detail::max_abs(y, b));
        mx.inter = std::max(mx.inter, detail::max_abs(inter, b));
        mx.t = std::max(mx.t, detail::max_abs(t, b));
        mx.product = std::max(mx.product, pmax);
        if (opt.bounds) {
            detail::check_bound(mx.z, opt.bounds->z, "z");
            detail::check_bound(mx.y, opt.bounds->y, "y");
            detail::check_bound(mx.t, opt.bounds->t, "t");
            detail::check_bound(mx.h, opt.bounds->h, "Phi_n p");
        }
        if (opt.record_iterates)
            r.iterates.push_back(to_double(z));
    }
    r.z = fxp::FxVector{f.z, z};
    return r;
}

/// Exact-arithmetic twin of a fixed-point run: same quantized data, same
/// cached linear term, double-precision arithmetic.
inline FgmResult fgm_twin(const FgmOffline& off, const FgmFxResult& fx, int I_max, const VectorXd& z0) {
    return fgm_iterate(off, fx.h.to_double(), I_max, z0);
}

} // namespace fixmpc::fgm
