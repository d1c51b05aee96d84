#pragma once

/**
 * @file
 * @brief Condensed (input-only) QP and the offline data of the fast gradient
 * method.
 *
 * Eliminating the states through the prediction X = Omega x + Gamma z gives
 *   f(z; x, r) = 1/2 z' H z + z'(Phi x + Psi r)
 * where r = (x_ref, u_ref) is a constant tracking target. f differs from the
 * MPC cost only by a term that does not depend on z.
 */

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fxp.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace fixmpc::transform {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Constant tracking target; zero for regulation.
struct Setpoint {
    VectorXd x;
    VectorXd u;

    static Setpoint zero(int nx, int nu) { return {VectorXd::Zero(nx), VectorXd::Zero(nu)}; }
};

/// Stacks (x, x_ref, u_ref) into the parameter vector consumed by Phi_ext.
inline VectorXd stack_parameter(const VectorXd& x, const Setpoint& ref) {
    VectorXd p(x.size() + ref.x.size() + ref.u.size());
    p << x, ref.x, ref.u;
    return p;
}

struct CondensedQp {
    int horizon = 0;
    int nx = 0;
    int nu = 0;
    MatrixXd H;     ///< n x n
    MatrixXd Phi;   ///< n x nx
    MatrixXd Psi;   ///< n x (nx + nu), couples the setpoint
    MatrixXd Omega; ///< (N+1)nx x nx free response
    MatrixXd Gamma; ///< (N+1)nx x n forced response
    MatrixXd C;     ///< nx x nx, 1/2 x'Cx is the z-independent cost part (regulation)
    VectorXd z_min;
    VectorXd z_max;
    double L = 0.0;  ///< lambda_max(H)
    double mu = 0.0; ///< lambda_min(H)

    [[nodiscard]] int n() const { return static_cast<int>(H.rows()); }
    [[nodiscard]] MatrixXd Phi_ext() const {
        MatrixXd out(H.rows(), Phi.cols() + Psi.cols());
        out << Phi, Psi;
        return out;
    }
    [[nodiscard]] VectorXd linear_term(const VectorXd& x, const Setpoint& ref) const {
        return Phi * x + Psi * stack_parameter(VectorXd::Zero(0), ref);
    }
    [[nodiscard]] double objective(const VectorXd& z, const VectorXd& x, const Setpoint& ref) const {
        return 0.5 * z.dot(H * z) + z.dot(linear_term(x, ref));
    }
    /// Predicted states x_0..x_N stacked.
    [[nodiscard]] VectorXd predict(const VectorXd& x, const VectorXd& z) const { return Omega * x + Gamma * z; }
};

/// Builds the condensed QP. State constraints cannot be condensed; pass
/// drop_state_constraints to ignore them explicitly.
inline CondensedQp condense(const model::MpcProblem& p, bool drop_state_constraints = false) {
    model::check_structure(p);
    if (!drop_state_constraints && (!p.constraints.hard.empty() || !p.constraints.soft.empty()))
        throw NotCondensableError("state constraints present; use the sparse form");
    const int N = p.horizon;
    const int nx = p.nx();
    const int nu = p.nu();
    const int n = N * nu;
    const auto& A = p.model.A;
    const auto& B = p.model.B;
    const auto& w = p.weights;

    CondensedQp q;
    q.horizon = N;
    q.nx = nx;
    q.nu = nu;
    q.Omega = MatrixXd::Zero((N + 1) * nx, nx);
    q.Gamma = MatrixXd::Zero((N + 1) * nx, n);
    MatrixXd Ak = MatrixXd::Identity(nx, nx);
    for (int k = 0; k <= N; ++k) {
        q.Omega.block(k * nx, 0, nx, nx) = Ak;
        Ak = A * Ak;
    }
    for (int k = 1; k <= N; ++k)
        for (int j = 0; j < k; ++j)
            q.Gamma.block(k * nx, j * nu, nx, nu) =
                q.Omega.block((k - 1 - j) * nx, 0, nx, nx) * B;

    MatrixXd Qbar = MatrixXd::Zero((N + 1) * nx, (N + 1) * nx);
    MatrixXd Sbar = MatrixXd::Zero((N + 1) * nx, n);
    MatrixXd Rbar = MatrixXd::Zero(n, n);
    for (int k = 0; k < N; ++k) {
        Qbar.block(k * nx, k * nx, nx, nx) = w.Q;
        Sbar.block(k * nx, k * nu, nx, nu) = w.S;
        Rbar.block(k * nu, k * nu, nu, nu) = w.R;
    }
    Qbar.block(N * nx, N * nx, nx, nx) = w.QN;

    const MatrixXd GtQ = q.Gamma.transpose() * Qbar;
    const MatrixXd GtS = q.Gamma.transpose() * Sbar;
    q.H = linalg::symmetric_part(GtQ * q.Gamma + Rbar + GtS + GtS.transpose());
    q.Phi = (GtQ + Sbar.transpose()) * q.Omega;
    q.C = q.Omega.transpose() * Qbar * q.Omega;

    MatrixXd Xrep = MatrixXd::Zero((N + 1) * nx, nx);
    MatrixXd Urep = MatrixXd::Zero(n, nu);
    for (int k = 0; k <= N; ++k)
        Xrep.block(k * nx, 0, nx, nx).setIdentity();
    for (int k = 0; k < N; ++k)
        Urep.block(k * nu, 0, nu, nu).setIdentity();
    q.Psi.resize(n, nx + nu);
    q.Psi << -(GtQ + Sbar.transpose()) * Xrep, -(Rbar + GtS) * Urep;

    q.z_min = p.constraints.u_min.replicate(N, 1);
    q.z_max = p.constraints.u_max.replicate(N, 1);
    const auto ev = linalg::sym_eigenvalues(q.H);
    q.mu = ev.minCoeff();
    q.L = ev.maxCoeff();
    if (!(q.mu > 0.0))
        throw ValidationError("condensed Hessian is not positive definite");
    return q;
}

/// Offline data of the fast gradient method on the normalized problem
/// (I - H_n) y - Phi_n p. With fraction_bits set, every matrix and scalar
/// holds values on the 2^-b grid and the box is quantized inward.
struct FgmOffline {
    MatrixXd H_n;   ///< normalized Hessian
    MatrixXd Phi_n; ///< n x (2 nx + nu), acts on stack_parameter(x, ref)
    double beta = 0.0;
    double c = 1.0;
    double kappa_n = 1.0;
    double scale = 1.0; ///< c * lambda_max(H_F hat)
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    VectorXd z_min; ///< K hat
    VectorXd z_max;
    std::optional<int> fraction_bits;

    [[nodiscard]] int n() const { return static_cast<int>(H_n.rows()); }
    [[nodiscard]] MatrixXd iteration_matrix() const {
        return MatrixXd::Identity(H_n.rows(), H_n.cols()) - H_n;
    }
};

inline double momentum_for(double kappa) {
    const double s = std::sqrt(kappa);
    return (s - 1.0) / (s + 1.0);
}

inline double effective_condition(double beta) {
    const double r = (1.0 + beta) / (1.0 - beta);
    return r * r;
}

/// Rounds a box inward onto the 2^-b grid so that K hat is a subset of K.
inline void quantize_box_inward(VectorXd& lo, VectorXd& hi, int fraction_bits) {
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (std::isfinite(lo[i]))
            lo[i] = -fxp::round_to_grid(-lo[i], fraction_bits, fxp::Rounding::truncate);
        if (std::isfinite(hi[i]))
            hi[i] = fxp::round_to_grid(hi[i], fraction_bits, fxp::Rounding::truncate);
        if (lo[i] > hi[i])
            throw PrecisionError("box collapses under quantization");
    }
}

/// Exact normalization: c = 1, beta from the exact condition number.
inline FgmOffline normalize_fgm(const CondensedQp& q) {
    FgmOffline off;
    off.scale = q.L;
    off.H_n = q.H / q.L;
    off.Phi_n = q.Phi_ext() / q.L;
    off.lambda_min = q.mu / q.L;
    off.lambda_max = 1.0;
    off.beta = momentum_for(q.L / q.mu);
    off.kappa_n = effective_condition(off.beta);
    off.z_min = q.z_min;
    off.z_max = q.z_max;
    return off;
}

/// Fixed-point normalization at b fraction bits.
///
/// Searches c = 1 + k 2^-b (c <= 2) until the quantized normalized Hessian
/// has its spectrum in (0, 1], then rounds the momentum up to the grid.
/// The momentum is sized from 1/lambda_min(H_n hat), the condition number
/// that governs the iteration with unit step.
inline FgmOffline normalize_fgm(const CondensedQp& q, int fraction_bits) {
    if (fraction_bits < 1 || fraction_bits > 52)
        throw FormatError("fraction bits out of range");
    const double res = std::ldexp(1.0, -fraction_bits);
    const MatrixXd H_hat = q.H.unaryExpr([&](double v) { return fxp::round_to_grid(v, fraction_bits); });
    const double lmax_hat = linalg::max_sym_eigenvalue(H_hat);
    if (!(lmax_hat > 0.0))
        throw PrecisionError("quantized Hessian has no positive eigenvalue");

    FgmOffline off;
    off.fraction_bits = fraction_bits;
    long k = 0;
    const long k_limit = 1L << fraction_bits;
    for (;;) {
        const double c = 1.0 + static_cast<double>(k) * res;
        const MatrixXd Hn = (H_hat / (c * lmax_hat)).unaryExpr([&](double v) {
            return fxp::round_to_grid(v, fraction_bits);
        });
        const auto ev = linalg::sym_eigenvalues(Hn);
        if (ev.minCoeff() <= 0.0)
            throw PrecisionError("normalized Hessian loses positive definiteness at " +
                                 std::to_string(fraction_bits) + " fraction bits");
        if (ev.maxCoeff() <= 1.0) {
            off.c = c;
            off.H_n = Hn;
            off.lambda_min = ev.minCoeff();
            off.lambda_max = ev.maxCoeff();
            break;
        }
        k += std::max(1L, static_cast<long>(std::floor((ev.maxCoeff() - 1.0) / res)));
        if (k > k_limit)
            throw PrecisionError("no c <= 2 satisfies the spectrum condition");
    }
    off.scale = off.c * lmax_hat;
    off.Phi_n = (q.Phi_ext() / off.scale).unaryExpr([&](double v) { return fxp::round_to_grid(v, fraction_bits); });

    const double beta_min = momentum_for(1.0 / off.lambda_min);
    off.beta = std::ceil(std::ldexp(beta_min, fraction_bits) - 1e-9) * res;
    off.beta = std::max(off.beta, 0.0);
    if (off.beta >= 1.0)
        throw PrecisionError("momentum rounds to 1");
    off.kappa_n = effective_condition(off.beta);

    off.z_min = q.z_min;
    off.z_max = q.z_max;
    quantize_box_inward(off.z_min, off.z_max, fraction_bits);
    return off;
}

/// Condition number of the (quantized) normalized Hessian.
inline double condition_number(const FgmOffline& off) { return off.lambda_max / off.lambda_min; }

} // namespace fixmpc::transform
