#pragma once

/**
 * @file
 * @brief ADMM with an offline KKT inverse, in double precision and in
 * bit-accurate fixed point.
 *
 *   y_{i+1}  = M11 (-h + rho z_i - nu_i) + M12 b(x)
 *   z_{i+1}  = Pi_K(y_{i+1} + nu_i / rho)
 *   nu_{i+1} = nu_i + rho (y_{i+1} - z_{i+1})
 *
 * Internally the multiplier is kept as w = nu / rho, which turns every
 * multiplication by rho into a shift:
 *   y = M11 (-h + rho (z - w)) + M12 b,  z = Pi(y + w),  w = w + y - z.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fxp.hpp"
#include "sparse.hpp"

namespace fixmpc::admm {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using transform::AdmmOffline;
using transform::Bound;
using transform::KSet;
using transform::SparseQp;

/// Euclidean projection of (x0, d0) onto {|x - c| <= r + d, d >= 0}.
inline std::pair<double, double> project_cone(double x0, double d0, double c, double r) {
    const double a = std::abs(x0 - c);
    const double s = x0 >= c ? 1.0 : -1.0;
    if (d0 >= 0.0 && a <= r + d0)
        return {x0, d0};
    if (a <= r)
        return {x0, 0.0};
    if (a + d0 >= r)
        return {c + s * 0.5 * (a + d0 + r), 0.5 * (a + d0 - r)};
    return {c + s * r, 0.0};
}

/// Same case analysis on raw integers; halving is an arithmetic shift. Both
/// halved sums have equal parity, so |x - c| - d = r holds exactly.
inline std::pair<fxp::raw_t, fxp::raw_t> project_cone_raw(fxp::raw_t x0, fxp::raw_t d0, fxp::raw_t c,
                                                          fxp::raw_t r) {
    const fxp::wide_t diff = static_cast<fxp::wide_t>(x0) - c;
    const fxp::wide_t a = diff < 0 ? -diff : diff;
    const fxp::wide_t s = diff < 0 ? -1 : 1;
    if (d0 >= 0 && a <= static_cast<fxp::wide_t>(r) + d0)
        return {x0, d0};
    if (a <= r)
        return {x0, 0};
    if (a + d0 >= r) {
        const fxp::wide_t ap = (a + d0 + r) >> 1;
        const fxp::wide_t dp = (a + d0 - r) >> 1;
        return {static_cast<fxp::raw_t>(c + s * ap), static_cast<fxp::raw_t>(dp)};
    }
    return {static_cast<fxp::raw_t>(c + s * r), 0};
}

inline VectorXd project_K(const VectorXd& v, const KSet& K) {
    if (v.size() != K.n())
        throw LayoutError("vector does not match the constraint layout");
    VectorXd out = v;
    for (int i = 0; i < K.n(); ++i)
        if (K.kind[static_cast<std::size_t>(i)] == Bound::box)
            out[i] = std::clamp(v[i], K.lo[i], K.hi[i]);
    for (const auto& c : K.cones) {
        const auto [x, d] = project_cone(v[c.ix], v[c.id], c.c, c.r);
        out[c.ix] = x;
        out[c.id] = d;
    }
    return out;
}

/// K on the raw grid of one fixed-point format.
struct RawKSet {
    std::vector<Bound> kind;
    fxp::RawVector lo;
    fxp::RawVector hi;
    struct RawCone {
        int ix;
        int id;
        fxp::raw_t c;
        fxp::raw_t r;
    };
    std::vector<RawCone> cones;

    /// K must already lie on the grid (see transform::quantize_inward).
    RawKSet(const KSet& K, const fxp::FxFormat& fmt) : kind(K.kind), lo(K.n()), hi(K.n()) {
        auto exact = [&](double v) {
            const auto r = fxp::quantize_raw(v, fmt, fxp::Rounding::nearest);
            if (std::ldexp(static_cast<double>(r), -fmt.fraction_bits()) != v)
                throw PrecisionError("constraint data is not on the fixed-point grid");
            return r;
        };
        for (int i = 0; i < K.n(); ++i) {
            const bool box = K.kind[static_cast<std::size_t>(i)] == Bound::box;
            lo[i] = box && std::isfinite(K.lo[i]) ? exact(K.lo[i]) : fmt.raw_min();
            hi[i] = box && std::isfinite(K.hi[i]) ? exact(K.hi[i]) : fmt.raw_max();
        }
        for (const auto& c : K.cones)
            cones.push_back({c.ix, c.id, exact(c.c), exact(c.r)});
    }

    void project(fxp::RawVector& v) const {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (kind[static_cast<std::size_t>(i)] == Bound::box)
                v[i] = std::clamp(v[i], lo[i], hi[i]);
        for (const auto& c : cones) {
            const auto [x, d] = project_cone_raw(v[c.ix], v[c.id], c.c, c.r);
            v[c.ix] = x;
            v[c.id] = d;
        }
    }
};

struct AdmmResult {
    VectorXd z;
    VectorXd y;
    VectorXd nu;
    std::vector<double> primal_residual; ///< ||y_i - z_i||_inf, i = 1..I_max
    std::vector<double> objective;       ///< at z_i, i = 1..I_max
    std::vector<VectorXd> iterates;      ///< z_0 .. z_{I_max} (when recorded)
};

/// Core recursion in the (z, w = nu / rho) form with a cached c = M12 b.
inline AdmmResult admm_iterate(const MatrixXd& M11, double rho, const KSet& K, const MatrixXd& H, const VectorXd& h,
                               const VectorXd& c, int I_max, const VectorXd& z0, const VectorXd& w0,
                               bool record = false) {
    const auto n = M11.rows();
    if (h.size() != n || c.size() != n || z0.size() != n || w0.size() != n)
        throw DimensionError("ADMM vector dimension mismatch");
    AdmmResult r;
    VectorXd z = z0;
    VectorXd w = w0;
    VectorXd y = z0;
    if (record)
        r.iterates.push_back(z);
    for (int i = 0; i < I_max; ++i) {
        y = M11 * (rho * (z - w) - h) + c;
        z = project_K(y + w, K);
        w += y - z;
        r.primal_residual.push_back((y - z).cwiseAbs().maxCoeff());
        r.objective.push_back(0.5 * z.dot(H * z) + h.dot(z));
        if (record)
            r.iterates.push_back(z);
    }
    r.z = z;
    r.y = y;
    r.nu = rho * w;
    return r;
}

/// Double-precision solve of the problem in the coordinates of s.
inline AdmmResult admm_solve(const AdmmOffline& off, const SparseQp& s, const VectorXd& x, const VectorXd& h,
                             int I_max, const VectorXd& z0, const VectorXd& nu0, bool record = false) {
    if (I_max < 0)
        throw ConfigError("iteration count must be nonnegative");
    const VectorXd c = off.M12 * s.b(x);
    return admm_iterate(off.M11, off.rho, s.K, s.H, h, c, I_max, z0, nu0 / off.rho, record);
}

/// Shifts stage blocks forward by one and pads the last stage.
enum class Padding { repeat, zero };

inline std::pair<VectorXd, VectorXd> warm_start_shift(const VectorXd& z_prev, const VectorXd& nu_prev,
                                                      const transform::StageLayout& L,
                                                      Padding nu_padding = Padding::repeat) {
    if (z_prev.size() != L.n() || nu_prev.size() != L.n())
        throw LayoutError("warm-start vectors do not match the stage layout");
    auto shift = [&](const VectorXd& v, Padding pad) {
        VectorXd out = v;
        const int nu = L.nu;
        const int st = L.nx + L.ns;
        for (int k = 0; k + 1 < L.N; ++k)
            out.segment(L.u(k), nu) = v.segment(L.u(k + 1), nu);
        for (int k = 0; k < L.N; ++k)
            out.segment(L.x(k), st) = v.segment(L.x(k + 1), st);
        if (pad == Padding::zero) {
            out.segment(L.u(L.N - 1), nu).setZero();
            out.segment(L.x(L.N), st).setZero();
        }
        return out;
    };
    return {shift(z_prev, Padding::repeat), shift(nu_prev, nu_padding)};
}

/// Per-signal formats of the fixed-point datapath; all share the fraction bits.
struct AdmmFormats {
    fxp::FxFormat z;     ///< z, y + w before projection
    fxp::FxFormat y;
    fxp::FxFormat w;     ///< scaled multiplier nu / rho
    fxp::FxFormat v;     ///< -h + rho (z - w)
    fxp::FxFormat acc;   ///< M11 v, M12 b and their partial sums
    fxp::FxFormat h;
    fxp::FxFormat param; ///< b(x)

    [[nodiscard]] int fraction_bits() const { return z.fraction_bits(); }
};

struct AdmmMaxima {
    double z = 0.0;
    double y = 0.0;
    double w = 0.0;
    double v = 0.0;
    double acc = 0.0;
    double h = 0.0;
    double param = 0.0;
};

/// Fixed-point offline data; s must carry the quantized K (on the grid).
struct AdmmFxData {
    AdmmFormats formats;
    fxp::FxMatrix M11;
    fxp::FxMatrix M12;
    int rho_shift = 0; ///< rho = 2^rho_shift
    RawKSet K;

    AdmmFxData(const AdmmOffline& off, const KSet& K_hat, const AdmmFormats& f)
        : formats(f), M11(fxp::FxMatrix::quantize_fit(off.M11, f.fraction_bits(), fxp::Rounding::nearest)),
          M12(fxp::FxMatrix::quantize_fit(off.M12, f.fraction_bits(), fxp::Rounding::nearest)), K(K_hat, f.z) {
        for (const auto* fmt : {&f.y, &f.w, &f.v, &f.acc, &f.h, &f.param})
            fxp::detail::require_same_fraction(f.z, *fmt);
        if (!transform::is_power_of_two(off.rho))
            throw ConfigError("rho must be a power of two");
        int e = 0;
        std::frexp(off.rho, &e);
        rho_shift = e - 1;
        if (M11.to_double() != off.M11 || M12.to_double() != off.M12)
            throw PrecisionError("KKT inverse is not on the fixed-point grid");
    }
};

struct AdmmFxOptions {
    fxp::OverflowPolicy policy = fxp::OverflowPolicy::checked;
    bool record_iterates = false;
};

struct AdmmFxResult {
    fxp::FxVector z;
    fxp::FxVector y;
    fxp::FxVector w;
    fxp::FxVector c; ///< cached M12 b(x)
    std::vector<VectorXd> iterates;
    AdmmMaxima maxima;
    /// Range of the multiplier-update error observed (always zero with exact shifts).
    double nu_error_min = 0.0;
    double nu_error_max = 0.0;
    std::vector<double> primal_residual; ///< ||y_i - z_i||_inf when recorded
};

namespace detail {

inline double max_abs(const fxp::RawVector& v, int b) {
    return v.size() ? std::ldexp(static_cast<double>(v.cwiseAbs().maxCoeff()), -b) : 0.0;
}

inline fxp::wide_t shift(fxp::wide_t v, int s) { return s >= 0 ? v * (fxp::wide_t{1} << s) : v >> (-s); }

} // namespace detail

/// Fixed-point solve; h_hat and b_hat are already quantized, w0 = nu0 / rho.
inline AdmmFxResult admm_solve_fx(const AdmmFxData& d, const fxp::FxVector& h_hat, const fxp::FxVector& b_hat,
                                  int I_max, const fxp::FxVector& z0, const fxp::FxVector& w0,
                                  const AdmmFxOptions& opt = {}) {
    const auto& f = d.formats;
    const int b = f.fraction_bits();
    const auto n = d.M11.rows();
    if (h_hat.size() != n || b_hat.size() != d.M12.cols() || z0.size() != n || w0.size() != n)
        throw DimensionError("fixed-point ADMM dimension mismatch");
    for (const auto* v : {&h_hat, &b_hat, &z0, &w0})
        fxp::detail::require_same_fraction(v->format, f.z);

    AdmmFxResult r{fxp::FxVector{f.z, z0.raw}, fxp::FxVector{f.y, z0.raw}, fxp::FxVector{f.w, w0.raw},
                   fxp::matvec(d.M12, b_hat, f.acc, opt.policy), {}, {}, 0.0, 0.0, {}};
    auto& mx = r.maxima;
    mx.h = detail::max_abs(h_hat.raw, b);
    mx.param = detail::max_abs(b_hat.raw, b);
    mx.acc = detail::max_abs(r.c.raw, b);
    auto to_double = [b](const fxp::RawVector& v) { return VectorXd(v.cast<double>() * std::ldexp(1.0, -b)); };

    fxp::RawVector z = z0.raw;
    fxp::RawVector w = w0.raw;
    for (Eigen::Index j = 0; j < n; ++j) {
        z[j] = fxp::detail::settle(z[j], f.z, opt.policy, "z");
        w[j] = fxp::detail::settle(w[j], f.w, opt.policy, "w");
    }
    fxp::RawVector y(n);
    fxp::RawVector v(n);
    fxp::RawVector p(n);
    if (opt.record_iterates)
        r.iterates.push_back(to_double(z));
    for (int i = 0; i < I_max; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const fxp::wide_t scaled = detail::shift(static_cast<fxp::wide_t>(z[j]) - w[j], d.rho_shift);
            v[j] = fxp::detail::settle(scaled - h_hat.raw[j], f.v, opt.policy, "-h + rho (z - w)");
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto acc = fxp::detail::dot_raw(d.M11.raw.row(j).data(), v.data(), static_cast<std::size_t>(n), b,
                                                  f.acc, opt.policy);
            mx.acc = std::max(mx.acc, std::ldexp(static_cast<double>(std::abs(acc)), -b));
            y[j] = fxp::detail::settle(static_cast<fxp::wide_t>(acc) + r.c.raw[j], f.y, opt.policy, "y");
            p[j] = fxp::detail::settle(static_cast<fxp::wide_t>(y[j]) + w[j], f.z, opt.policy, "y + w");
        }
        d.K.project(p);
        for (Eigen::Index j = 0; j < n; ++j) {
            z[j] = p[j];
            w[j] = fxp::detail::settle(static_cast<fxp::wide_t>(w[j]) + y[j] - z[j], f.w, opt.policy, "w");
        }
        mx.z = std::max(mx.z, detail::max_abs(z, b));
        mx.y = std::max(mx.y, detail::max_abs(y, b));
        mx.w = std::max(mx.w, detail::max_abs(w, b));
        mx.v = std::max(mx.v, detail::max_abs(v, b));
        if (opt.record_iterates) {
            r.iterates.push_back(to_double(z));
            r.primal_residual.push_back((to_double(y) - to_double(z)).cwiseAbs().maxCoeff());
        }
    }
    r.z = fxp::FxVector{f.z, z};
    r.y = fxp::FxVector{f.y, y};
    r.w = fxp::FxVector{f.w, w};
    return r;
}

/// Exact-arithmetic twin of a fixed-point run (same quantized data, same
/// cached M12 b term).
inline AdmmResult admm_twin(const AdmmOffline& off, const KSet& K_hat, const MatrixXd& H, const AdmmFxResult& fx,
                            const VectorXd& h_hat, int I_max, const VectorXd& z0, const VectorXd& w0) {
    return admm_iterate(off.M11, off.rho, K_hat, H, h_hat, fx.c.to_double(), I_max, z0, w0, true);
}

/// Observed signal maxima of double-precision runs, used to size integer bits.
struct AdmmSample {
    VectorXd x;
    VectorXd h;
    VectorXd z0;
    VectorXd nu0;
};

inline AdmmMaxima simulate_maxima(const AdmmOffline& off, const SparseQp& s, const std::vector<AdmmSample>& samples,
                                  int I_max) {
    AdmmMaxima mx;
    const MatrixXd absM = off.M11.cwiseAbs();
    const MatrixXd absM12 = off.M12.cwiseAbs();
    for (const auto& smp : samples) {
        const VectorXd bx = s.b(smp.x);
        const VectorXd c = off.M12 * bx;
        mx.acc = std::max(mx.acc, (absM12 * bx.cwiseAbs()).maxCoeff());
        mx.h = std::max(mx.h, smp.h.cwiseAbs().maxCoeff());
        mx.param = std::max(mx.param, bx.cwiseAbs().maxCoeff());
        VectorXd z = smp.z0;
        VectorXd w = smp.nu0 / off.rho;
        mx.z = std::max(mx.z, z.cwiseAbs().maxCoeff());
        mx.w = std::max(mx.w, w.cwiseAbs().maxCoeff());
        for (int i = 0; i < I_max; ++i) {
            const VectorXd v = off.rho * (z - w) - smp.h;
            mx.v = std::max(mx.v, v.cwiseAbs().maxCoeff());
            mx.acc = std::max(mx.acc, (absM * v.cwiseAbs()).maxCoeff());
            const VectorXd y = off.M11 * v + c;
            const VectorXd pre = y + w;
            z = project_K(pre, s.K);
            w += y - z;
            mx.y = std::max(mx.y, y.cwiseAbs().maxCoeff());
            mx.z = std::max({mx.z, z.cwiseAbs().maxCoeff(), pre.cwiseAbs().maxCoeff()});
            mx.w = std::max(mx.w, w.cwiseAbs().maxCoeff());
        }
    }
    return mx;
}

/// Integer bits = bits needed for safety * observed maximum.
inline AdmmFormats formats_from_maxima(const AdmmMaxima& mx, int fraction_bits, double safety = 2.0) {
    const double eps = std::ldexp(1.0, -fraction_bits);
    auto fmt = [&](double m) {
        return fxp::FxFormat(fxp::min_integer_bits(safety * m + eps, fraction_bits), fraction_bits);
    };
    return {fmt(mx.z), fmt(mx.y), fmt(mx.w), fmt(mx.v), fmt(mx.acc), fmt(mx.h), fmt(mx.param)};
}

} // namespace fixmpc::admm
