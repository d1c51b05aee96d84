#pragma once

/**
 * @file
 * @brief High-accuracy double-precision QP solver used as a reference.
 *
 * Solves  min 1/2 z'Hz + g'z  s.t.  A z = b,  G z <= h
 * by eliminating the equalities through an orthonormal null-space basis and
 * running Mehrotra's predictor-corrector interior-point method on the
 * reduced problem. Returns primal solution and multipliers.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace fixmpc::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct QpProblem {
    MatrixXd H;
    VectorXd g;
    MatrixXd A; ///< equality rows (may be empty)
    VectorXd b;
    MatrixXd G; ///< inequality rows (may be empty)
    VectorXd h;

    [[nodiscard]] double objective(const VectorXd& z) const { return 0.5 * z.dot(H * z) + g.dot(z); }
};

enum class QpStatus { optimal, not_converged };

struct QpSolution {
    VectorXd z;
    VectorXd lambda; ///< inequality multipliers (>= 0)
    VectorXd nu;     ///< equality multipliers
    double objective = 0.0;
    QpStatus status = QpStatus::not_converged;
    int iterations = 0;
};

struct IpmSettings {
    double tolerance = 1e-13;
    double accept_tolerance = 1e-8; ///< used when the iteration stalls
    int max_iterations = 200;
};

/// Orthonormal null-space parametrization z = z_p + Z w of {z : A z = b}.
struct NullSpace {
    MatrixXd Z;
    VectorXd zp;
    MatrixXd Q1;
    MatrixXd R;

    NullSpace(const MatrixXd& A, const VectorXd& b, Eigen::Index n) {
        if (A.rows() == 0) {
            Z = MatrixXd::Identity(n, n);
            zp = VectorXd::Zero(n);
            return;
        }
        const auto m = A.rows();
        Eigen::HouseholderQR<MatrixXd> qr(A.transpose());
        const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, n);
        R = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
        const double rmax = R.diagonal().cwiseAbs().maxCoeff();
        if (R.diagonal().cwiseAbs().minCoeff() <= 1e-12 * std::max(1.0, rmax))
            throw OracleFailure("equality constraints are rank deficient");
        Q1 = Q.leftCols(m);
        Z = Q.rightCols(n - m);
        zp = Q1 * R.transpose().triangularView<Eigen::Lower>().solve(b);
    }

    /// Least-squares nu with A' nu = r.
    [[nodiscard]] VectorXd solve_transposed(const VectorXd& r) const {
        if (R.size() == 0)
            return VectorXd();
        return R.triangularView<Eigen::Upper>().solve(Q1.transpose() * r);
    }
};

namespace detail {

inline double max_step(const VectorXd& v, const VectorXd& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0)
            a = std::min(a, -v[i] / dv[i]);
    return a;
}

/// Largest violation of the reduced KKT conditions.
inline double reduced_kkt(const MatrixXd& Hw, const VectorXd& gw, const MatrixXd& Gw, const VectorXd& hw,
                          const VectorXd& w, const VectorXd& lambda) {
    const VectorXd slack = hw - Gw * w;
    double v = (Hw * w + gw + Gw.transpose() * lambda).cwiseAbs().maxCoeff();
    v = std::max({v, (-slack).maxCoeff(), (-lambda).maxCoeff(), slack.cwiseProduct(lambda).cwiseAbs().maxCoeff()});
    return v;
}

/// Equality-constrained solve with the given rows held active. Returns false
/// when the KKT matrix is singular.
inline bool eqp(const MatrixXd& Hw, const VectorXd& gw, const MatrixXd& Gw, const VectorXd& hw,
                const std::vector<Eigen::Index>& act, VectorXd& w, VectorXd& l_act) {
    const auto nw = Hw.rows();
    const auto k = static_cast<Eigen::Index>(act.size());
    MatrixXd K = MatrixXd::Zero(nw + k, nw + k);
    K.topLeftCorner(nw, nw) = Hw;
    VectorXd rhs(nw + k);
    rhs.head(nw) = -gw;
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto r = act[static_cast<std::size_t>(j)];
        K.block(nw + j, 0, 1, nw) = Gw.row(r);
        K.block(0, nw + j, nw, 1) = Gw.row(r).transpose();
        rhs[nw + j] = hw[r];
    }
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible())
        return false;
    const VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite())
        return false;
    w = sol.head(nw);
    l_act = sol.tail(k);
    return true;
}

/// Starts from the rows the interior point left active and runs a few
/// primal-dual active-set corrections (drop negative multipliers, add violated
/// rows). The result replaces (w, lambda) only if it is a better KKT point.
inline void polish(const MatrixXd& Hw, const VectorXd& gw, const MatrixXd& Gw, const VectorXd& hw, VectorXd& w,
                   VectorXd& s, VectorXd& lambda) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        if (lambda[i] > s[i])
            act.push_back(i);
    const double feas_tol = 1e-13 * (1.0 + hw.cwiseAbs().maxCoeff());
    VectorXd best_w = w, best_l = lambda;
    double best = reduced_kkt(Hw, gw, Gw, hw, w, lambda);
    for (int round = 0; round < 4 * static_cast<int>(lambda.size()) + 10; ++round) {
        VectorXd w2, la;
        if (!eqp(Hw, gw, Gw, hw, act, w2, la))
            break;
        VectorXd l2 = VectorXd::Zero(lambda.size());
        for (std::size_t j = 0; j < act.size(); ++j)
            l2[act[j]] = la[static_cast<Eigen::Index>(j)];
        const double v = reduced_kkt(Hw, gw, Gw, hw, w2, l2);
        if (v < best) {
            best = v;
            best_w = w2;
            best_l = l2;
        }
        Eigen::Index drop = -1;
        double most_neg = 0.0;
        for (std::size_t j = 0; j < act.size(); ++j)
            if (la[static_cast<Eigen::Index>(j)] < most_neg) {
                most_neg = la[static_cast<Eigen::Index>(j)];
                drop = static_cast<Eigen::Index>(j);
            }
        if (drop >= 0) {
            act.erase(act.begin() + drop);
            continue;
        }
        const VectorXd slack = hw - Gw * w2;
        Eigen::Index add = -1;
        double worst = -feas_tol;
        for (Eigen::Index i = 0; i < slack.size(); ++i)
            if (slack[i] < worst && std::find(act.begin(), act.end(), i) == act.end()) {
                worst = slack[i];
                add = i;
            }
        if (add < 0)
            break; // exact KKT point for this active set
        act.push_back(add);
    }
    w = best_w;
    lambda = best_l.cwiseMax(0.0);
    s = (hw - Gw * w).cwiseMax(0.0);
}

} // namespace detail

inline QpSolution solve_qp(const QpProblem& qp, const IpmSettings& settings = {}) {
    const auto n = qp.H.rows();
    if (qp.H.cols() != n || qp.g.size() != n || (qp.A.rows() && qp.A.cols() != n) ||
        (qp.G.rows() && qp.G.cols() != n) || qp.G.rows() != qp.h.size() || qp.A.rows() != qp.b.size())
        throw DimensionError("QP data dimensions are inconsistent");

    const NullSpace ns(qp.A, qp.b, n);
    const MatrixXd Hw = ns.Z.transpose() * qp.H * ns.Z;
    const VectorXd gw = ns.Z.transpose() * (qp.H * ns.zp + qp.g);
    const auto nw = Hw.rows();

    // Rows that are constant on {Az = b} are either always satisfied or
    // make the problem infeasible; they are kept out of the iteration.
    std::vector<Eigen::Index> active_rows;
    bool infeasible_row = false;
    for (Eigen::Index r = 0; r < qp.G.rows(); ++r) {
        const VectorXd gr = ns.Z.transpose() * qp.G.row(r).transpose();
        const double rhs = qp.h[r] - qp.G.row(r).dot(ns.zp);
        if (gr.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, qp.G.row(r).cwiseAbs().maxCoeff()))
            active_rows.push_back(r);
        else if (rhs < -1e-9)
            infeasible_row = true;
    }
    const auto m = static_cast<Eigen::Index>(active_rows.size());
    MatrixXd Gw(m, nw);
    VectorXd hw(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto r = active_rows[static_cast<std::size_t>(i)];
        Gw.row(i) = qp.G.row(r) * ns.Z;
        hw[i] = qp.h[r] - qp.G.row(r).dot(ns.zp);
    }

    QpSolution sol;
    VectorXd w = VectorXd::Zero(nw);
    VectorXd lambda = VectorXd::Ones(m);

    const double scale_g = 1.0 + (gw.size() ? gw.cwiseAbs().maxCoeff() : 0.0);
    const double scale_h = 1.0 + (m ? hw.cwiseAbs().maxCoeff() : 0.0);

    if (m == 0) {
        Eigen::LDLT<MatrixXd> ldlt(Hw);
        w = ldlt.solve(-gw);
        sol.status = (Hw * w + gw).cwiseAbs().maxCoeff() <= 1e-8 * scale_g ? QpStatus::optimal
                                                                           : QpStatus::not_converged;
    } else {
        VectorXd s = (hw - Gw * w).cwiseMax(1.0);
        const double reg = 1e-13 * (1.0 + Hw.diagonal().cwiseAbs().maxCoeff());
        bool augmented = false;
        auto converged = [&](double tol) {
            const VectorXd rd = Hw * w + gw + Gw.transpose() * lambda;
            const VectorXd rp = Gw * w + s - hw;
            const double mu = s.dot(lambda) / static_cast<double>(m);
            return rd.cwiseAbs().maxCoeff() <= tol * scale_g && rp.cwiseAbs().maxCoeff() <= tol * scale_h &&
                   mu <= tol;
        };
        for (int it = 0; it < settings.max_iterations; ++it) {
            sol.iterations = it;
            if (converged(settings.tolerance)) {
                sol.status = QpStatus::optimal;
                break;
            }
            const VectorXd rd = Hw * w + gw + Gw.transpose() * lambda;
            const VectorXd rp = Gw * w + s - hw;
            const double mu = s.dot(lambda) / static_cast<double>(m);
            const VectorXd W = lambda.cwiseQuotient(s);
            // Normal equations while they factor cleanly, then the
            // augmented system, which tolerates W spanning many decades.
            Eigen::LDLT<MatrixXd> ldlt;
            Eigen::PartialPivLU<MatrixXd> lu;
            if (!augmented) {
                MatrixXd K = Hw + Gw.transpose() * W.asDiagonal() * Gw;
                K.diagonal().array() += reg;
                ldlt.compute(K);
                augmented = ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all();
            }
            if (augmented) {
                MatrixXd K(nw + m, nw + m);
                K << Hw, Gw.transpose(), Gw, MatrixXd((-s.cwiseQuotient(lambda)).asDiagonal());
                K.topLeftCorner(nw, nw).diagonal().array() += reg;
                lu.compute(K);
            }

            auto newton = [&](const VectorXd& rc, VectorXd& dw, VectorXd& ds, VectorXd& dl) {
                if (augmented) {
                    VectorXd rhs(nw + m);
                    rhs << -rd, -rp + rc.cwiseQuotient(lambda);
                    const VectorXd sol_aug = lu.solve(rhs);
                    dw = sol_aug.head(nw);
                    dl = sol_aug.tail(m);
                } else {
                    const VectorXd rcs = rc.cwiseQuotient(s);
                    dw = ldlt.solve(-rd - Gw.transpose() * (W.cwiseProduct(rp) - rcs));
                    dl = W.cwiseProduct(Gw * dw + rp) - rcs;
                }
                ds = -(rc + s.cwiseProduct(dl)).cwiseQuotient(lambda);
            };

            VectorXd dw, ds, dl;
            const VectorXd rc_aff = s.cwiseProduct(lambda);
            newton(rc_aff, dw, ds, dl);
            const double a_aff = std::min(detail::max_step(s, ds), detail::max_step(lambda, dl));
            const double mu_aff = (s + a_aff * ds).dot(lambda + a_aff * dl) / static_cast<double>(m);
            const double sigma = std::pow(mu_aff / mu, 3);
            const VectorXd rc = rc_aff + ds.cwiseProduct(dl) - VectorXd::Constant(m, sigma * mu);
            newton(rc, dw, ds, dl);
            const double a = std::min(1.0, 0.995 * std::min(detail::max_step(s, ds), detail::max_step(lambda, dl)));
            if (!dw.allFinite() || !dl.allFinite() || !ds.allFinite())
                break;
            w += a * dw;
            s += a * ds;
            lambda += a * dl;
            if (lambda.maxCoeff() > 1e14)
                break;
        }
        if (sol.status != QpStatus::optimal && converged(settings.accept_tolerance))
            sol.status = QpStatus::optimal;
        if (sol.status == QpStatus::optimal)
            detail::polish(Hw, gw, Gw, hw, w, s, lambda);
    }
    if (infeasible_row)
        sol.status = QpStatus::not_converged;

    VectorXd lambda_full = VectorXd::Zero(qp.G.rows());
    for (Eigen::Index i = 0; i < m; ++i)
        lambda_full[active_rows[static_cast<std::size_t>(i)]] = lambda[i];
    lambda = lambda_full;
    const auto m_full = qp.G.rows();

    sol.z = ns.zp + ns.Z * w;
    sol.lambda = lambda;
    if (qp.A.rows()) {
        VectorXd r = qp.H * sol.z + qp.g;
        if (m_full)
            r += qp.G.transpose() * lambda;
        sol.nu = -ns.solve_transposed(r);
    }
    sol.objective = qp.objective(sol.z);
    return sol;
}

/// Largest violation of the KKT conditions of a candidate primal-dual point.
inline double kkt_violation(const QpProblem& qp, const VectorXd& z, const VectorXd& lambda, const VectorXd& nu) {
    VectorXd stat = qp.H * z + qp.g;
    double v = 0.0;
    if (qp.G.rows()) {
        stat += qp.G.transpose() * lambda;
        const VectorXd slack = qp.h - qp.G * z;
        v = std::max(v, (-slack).maxCoeff());
        v = std::max(v, (-lambda).maxCoeff());
        v = std::max(v, slack.cwiseProduct(lambda).cwiseAbs().maxCoeff());
    }
    if (qp.A.rows()) {
        stat += qp.A.transpose() * nu;
        v = std::max(v, (qp.A * z - qp.b).cwiseAbs().maxCoeff());
    }
    return std::max(v, stat.cwiseAbs().maxCoeff());
}

} // namespace fixmpc::qp
