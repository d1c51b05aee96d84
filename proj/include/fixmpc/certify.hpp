#pragma once

/**
 * @file
 * @brief Overflow bounds, round-off error recurrences, Schur-stability checks
 * and the accumulated-error bound
 *
 *   eta_i <= ||E A^i|| ||[eta_0; eta_0]|| + 2^-b sqrt(n (1 + n^2)) sum_{k<i} ||E A^{i-1-k} B||
 *
 * for the fixed-point FGM and ADMM iterations.
 */

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "admm.hpp"
#include "condense.hpp"
#include "errors.hpp"
#include "fgm.hpp"
#include "fxp.hpp"
#include "json.hpp"
#include "linalg.hpp"
#include "sparse.hpp"

namespace fixmpc::certify {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Sign bit plus one guard bit on top of the magnitude.
inline int integer_bits_for(double bound) {
    if (!(bound > 0.0))
        return 1;
    return std::max(1, static_cast<int>(std::ceil(std::log2(bound))) + 2);
}

struct OverflowReport {
    double z_bar = 0.0;
    double y_bar = 0.0;
    double y_inter_bar = 0.0;
    double x_bar = 0.0;
    double h_bar = 0.0;
    double t_bar = 0.0;
    double product_bar = 0.0; ///< (1 + beta) z, an extra internal signal
    int n = 0;
    int fraction_bits = 0;

    /// Formats from the bounds; under_allocate removes bits from every signal
    /// (never below one).
    [[nodiscard]] fgm::FgmFormats formats(int under_allocate = 0) const {
        auto f = [&](double bound) {
            return fxp::FxFormat(std::max(1, integer_bits_for(bound) - under_allocate), fraction_bits);
        };
        return {f(z_bar), f(y_bar), f(y_inter_bar), f(h_bar), f(t_bar), f(product_bar), f(x_bar)};
    }

    /// Runtime bounds including the round-off allowance of the fixed-point
    /// datapath (products truncate by less than 2^-b each).
    [[nodiscard]] fgm::SignalBounds runtime_bounds() const {
        const double e = std::ldexp(1.0, -fraction_bits);
        const double slack = (n + 2) * e;
        return {z_bar, y_bar + 2 * e, y_inter_bar + slack, h_bar + slack, t_bar + 2 * slack};
    }

    [[nodiscard]] nlohmann::json to_json() const {
        const auto f = formats();
        nlohmann::json bits = {{"z", f.z.integer_bits()},        {"y", f.y.integer_bits()},
                               {"y_inter", f.inter.integer_bits()}, {"h", f.h.integer_bits()},
                               {"t", f.t.integer_bits()},        {"product", f.product.integer_bits()},
                               {"x", f.param.integer_bits()}};
        return {{"z_bar", z_bar},   {"y_bar", y_bar}, {"y_inter_bar", y_inter_bar}, {"x_bar", x_bar},
                {"h_bar", h_bar},   {"t_bar", t_bar}, {"product_bar", product_bar}, {"fraction_bits", fraction_bits},
                {"integer_bits", bits}};
    }
};

/// Bounds on every FGM signal for parameters p in the box [p_lo, p_hi].
inline OverflowReport fgm_overflow_bounds(const transform::FgmOffline& off, const VectorXd& p_lo,
                                          const VectorXd& p_hi) {
    if (!off.fraction_bits)
        throw ConfigError("overflow bounds need quantized offline data");
    if (p_lo.size() != off.Phi_n.cols() || p_hi.size() != off.Phi_n.cols())
        throw DimensionError("parameter box dimension mismatch");
    if (!p_lo.allFinite() || !p_hi.allFinite() || (p_lo.array() > p_hi.array()).any())
        throw ValidationError("parameter box must be bounded and nonempty");
    OverflowReport r;
    r.n = off.n();
    r.fraction_bits = *off.fraction_bits;
    r.z_bar = std::max(off.z_min.cwiseAbs().maxCoeff(), off.z_max.cwiseAbs().maxCoeff());
    r.y_bar = r.z_bar + off.beta * (off.z_max - off.z_min).cwiseAbs().maxCoeff();
    r.y_inter_bar = linalg::inf_norm(off.iteration_matrix()) * r.y_bar;
    r.x_bar = std::max(p_lo.cwiseAbs().maxCoeff(), p_hi.cwiseAbs().maxCoeff());
    r.h_bar = linalg::inf_norm(off.Phi_n) * r.x_bar;
    r.t_bar = r.y_inter_bar + r.h_bar;
    r.product_bar = (1.0 + off.beta) * r.z_bar;
    return r;
}

enum class Method { fgm, admm };

struct ErrorSystem {
    Method kind = Method::fgm;
    int n = 0;
    MatrixXd A;
    MatrixXd B;
    double spectral_radius = 0.0;
    VectorXd iteration_eigenvalues; ///< eigenvalues of I - H_n (FGM only)
    double beta = 0.0;

    [[nodiscard]] MatrixXd E() const {
        MatrixXd e = MatrixXd::Zero(n, 2 * n);
        e.leftCols(n).setIdentity();
        return e;
    }
};

inline ErrorSystem build_error_system(const transform::FgmOffline& off) {
    ErrorSystem s;
    s.kind = Method::fgm;
    s.n = off.n();
    const int n = s.n;
    const MatrixXd G = off.iteration_matrix();
    const MatrixXd I = MatrixXd::Identity(n, n);
    s.A = MatrixXd::Zero(2 * n, 2 * n);
    s.A.topLeftCorner(n, n) = (1.0 + off.beta) * G;
    s.A.topRightCorner(n, n) = -off.beta * G;
    s.A.bottomLeftCorner(n, n) = I;
    s.B = MatrixXd::Zero(2 * n, 2 * n);
    s.B.topLeftCorner(n, n) = G;
    s.B.topRightCorner(n, n) = I;
    s.spectral_radius = linalg::spectral_radius(s.A);
    s.iteration_eigenvalues = linalg::sym_eigenvalues(G);
    s.beta = off.beta;
    return s;
}

inline ErrorSystem build_error_system(const transform::AdmmOffline& off) {
    ErrorSystem s;
    s.kind = Method::admm;
    s.n = static_cast<int>(off.M11.rows());
    const int n = s.n;
    const MatrixXd I = MatrixXd::Identity(n, n);
    s.A = MatrixXd::Zero(2 * n, 2 * n);
    s.A.topLeftCorner(n, n) = off.rho * off.M11;
    s.A.topRightCorner(n, n) = -(off.M11 - I / off.rho);
    s.B = MatrixXd::Identity(2 * n, 2 * n);
    // Eigenvalues are 0 and rho * lambda(M11); M11 is symmetric.
    const VectorXd ev = linalg::sym_eigenvalues(off.M11);
    s.spectral_radius = off.rho * ev.cwiseAbs().maxCoeff();
    return s;
}

/// Root conditions of mu^2 - (1 + g) l mu + g l = 0 for one eigenvalue l of I - H_n.
struct RootConditions {
    double lhs1, lhs2, lhs3, rhs3;
    bool i, ii, iii;
    [[nodiscard]] bool ok() const { return i && ii && iii; }
};

inline RootConditions root_conditions(double lambda, double gamma) {
    RootConditions r{};
    r.lhs1 = (1.0 + gamma) * std::abs(lambda) / 2.0;
    r.lhs2 = lambda * gamma;
    r.lhs3 = (1.0 + gamma) * std::abs(lambda);
    r.rhs3 = gamma * lambda + 1.0;
    r.i = r.lhs1 < 1.0;
    r.ii = r.lhs2 < 1.0;
    r.iii = r.lhs3 < r.rhs3;
    return r;
}

struct SchurReport {
    bool stable = false;
    double margin = 0.0;
    bool roots_checked = false;
    bool roots_ok = false;
};

inline SchurReport schur_check(const ErrorSystem& sys) {
    SchurReport r;
    r.margin = 1.0 - sys.spectral_radius;
    r.stable = sys.spectral_radius < 1.0 - 1e-9;
    if (sys.kind == Method::fgm && sys.iteration_eigenvalues.size()) {
        r.roots_checked = true;
        r.roots_ok = true;
        for (Eigen::Index i = 0; i < sys.iteration_eigenvalues.size(); ++i)
            r.roots_ok = r.roots_ok && root_conditions(sys.iteration_eigenvalues[i], sys.beta).ok();
    }
    return r;
}

struct ErrorBoundSeries {
    std::vector<double> eta_bar; ///< i = 0 .. I_max
    double asymptote = 0.0;      ///< limit for eta_0 = 0
    double series_sum = 0.0;     ///< sum_k ||E A^k B||
    double fit_ratio = 0.0;      ///< geometric rate of approach
    double fit_coefficient = 0.0;
};

/// ||E A^k B|| for k = 0 .. count-1.
inline std::vector<double> transfer_norms(const ErrorSystem& sys, int count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    MatrixXd R = sys.E();
    const bool identity_b = sys.kind == Method::admm;
    for (int k = 0; k < count; ++k) {
        out.push_back(linalg::spectral_norm(identity_b ? R : MatrixXd(R * sys.B)));
        R = R * sys.A;
    }
    return out;
}

/// Norms ||E A^k|| for k = 0 .. count-1.
inline std::vector<double> free_norms(const ErrorSystem& sys, int count) {
    std::vector<double> out;
    MatrixXd R = sys.E();
    for (int k = 0; k < count; ++k) {
        out.push_back(linalg::spectral_norm(R));
        R = R * sys.A;
    }
    return out;
}

inline double noise_gain(int n) {
    const double nn = n;
    return std::sqrt(nn * (1.0 + nn * nn));
}

/// sum_k ||E A^k B|| truncated when terms drop below 1e-15; a geometric tail
/// at rate max(rho(A), last ratio) covers the remainder past max_terms.
inline double series_sum(const ErrorSystem& sys, int max_terms = 4000) {
    if (!(sys.spectral_radius < 1.0))
        throw UnstableSystemError("error recurrence is not Schur stable (spectral radius " +
                                  std::to_string(sys.spectral_radius) + ")");
    MatrixXd R = sys.E();
    const bool identity_b = sys.kind == Method::admm;
    double sum = 0.0;
    double prev = 0.0;
    double term = 0.0;
    for (int k = 0; k < max_terms; ++k) {
        prev = term;
        term = linalg::spectral_norm(identity_b ? R : MatrixXd(R * sys.B));
        sum += term;
        if (term < 1e-15)
            return sum;
        R = R * sys.A;
    }
    const double ratio = std::max(sys.spectral_radius, prev > 0.0 ? term / prev : 0.0);
    if (ratio >= 1.0)
        throw UnstableSystemError("error series does not converge numerically");
    return sum + term * ratio / (1.0 - ratio);
}

inline ErrorBoundSeries eta_bound(const ErrorSystem& sys, int fraction_bits, int n, double eta0, int I_max) {
    if (I_max < 1)
        throw ConfigError("I_max must be at least 1");
    ErrorBoundSeries s;
    const auto tb = transfer_norms(sys, I_max);
    const auto fr = free_norms(sys, I_max + 1);
    const double scale = std::ldexp(1.0, -fraction_bits) * noise_gain(n);
    double cum = 0.0;
    for (int i = 0; i <= I_max; ++i) {
        if (i > 0)
            cum += tb[static_cast<std::size_t>(i - 1)];
        s.eta_bar.push_back(fr[static_cast<std::size_t>(i)] * std::sqrt(2.0) * eta0 + scale * cum);
    }
    if (sys.spectral_radius < 1.0) {
        s.series_sum = series_sum(sys);
        s.asymptote = scale * s.series_sum;
        s.fit_ratio = sys.spectral_radius;
        const double gap = s.asymptote - scale * cum;
        s.fit_coefficient = s.fit_ratio > 0.0 ? gap / std::pow(s.fit_ratio, I_max) : gap;
    } else {
        s.asymptote = std::numeric_limits<double>::infinity();
    }
    return s;
}

/// Smallest b whose asymptotic bound (eta_0 = 0) meets target_eta.
inline int min_fraction_bits(const ErrorSystem& sys, int n, double target_eta) {
    if (!(target_eta > 0.0))
        throw ConfigError("target error must be positive");
    const double s = series_sum(sys);
    const double need = s * noise_gain(n) / target_eta;
    int b = std::max(1, static_cast<int>(std::ceil(std::log2(need))));
    while (b > 1 && std::ldexp(need, -(b - 1)) <= 1.0)
        --b;
    while (std::ldexp(need, -b) > 1.0)
        ++b;
    return b;
}

inline nlohmann::json series_json(const ErrorBoundSeries& s) {
    return {{"eta_bar", s.eta_bar},
            {"asymptote", s.asymptote},
            {"series_sum", s.series_sum},
            {"fit_ratio", s.fit_ratio},
            {"fit_coefficient", s.fit_coefficient}};
}

} // namespace fixmpc::certify
