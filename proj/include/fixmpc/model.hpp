#pragma once

/**
 * @file
 * @brief LTI plant, stage-cost weights and constraint structure of the
 * soft-constrained linear-quadratic MPC problem.
 *
 * The cost is
 *   1/2 x_N' Q_N x_N + 1/2 sum_k (x_k' Q x_k + u_k' R u_k + 2 x_k' S u_k)
 *   + sum_k (sigma1 1'delta_k + sigma2 |delta_k|^2)
 * subject to x+ = A x + B u, u in [u_min, u_max], and a state partition into
 * free (F), hard box (B) and soft interval (S) components, where each soft
 * component satisfies |x_i - c_i| <= r_i + delta_i with delta_i >= 0.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "linalg.hpp"

namespace fixmpc::model {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPsdTolerance = -1e-10;

struct LtiModel {
    MatrixXd A;
    MatrixXd B;

    [[nodiscard]] int nx() const { return static_cast<int>(A.rows()); }
    [[nodiscard]] int nu() const { return static_cast<int>(B.cols()); }

    void check() const {
        if (A.rows() != A.cols())
            throw DimensionError("A must be square");
        if (B.rows() != A.rows())
            throw DimensionError("B must have as many rows as A");
    }
};

struct CostWeights {
    MatrixXd Q;
    MatrixXd R;
    MatrixXd S; ///< nx x nu cross term
    MatrixXd QN;
    double sigma1 = 0.0;
    double sigma2 = 0.0;
};

/// Index sets are 0-based here; the JSON front end converts from 1-based.
struct ConstraintSpec {
    VectorXd u_min;
    VectorXd u_max;
    std::vector<int> hard;   ///< B
    VectorXd x_min;          ///< over hard, same order
    VectorXd x_max;
    std::vector<int> soft;   ///< S
    VectorXd center;         ///< over soft
    VectorXd radius;

    /// F, the complement of hard and soft.
    [[nodiscard]] std::vector<int> free_indices(int nx) const {
        std::vector<int> out;
        for (int i = 0; i < nx; ++i)
            if (std::find(hard.begin(), hard.end(), i) == hard.end() &&
                std::find(soft.begin(), soft.end(), i) == soft.end())
                out.push_back(i);
        return out;
    }
    [[nodiscard]] int n_soft() const { return static_cast<int>(soft.size()); }
};

struct MpcProblem {
    LtiModel model;
    CostWeights weights;
    ConstraintSpec constraints;
    int horizon = 1;

    [[nodiscard]] int nx() const { return model.nx(); }
    [[nodiscard]] int nu() const { return model.nu(); }
    [[nodiscard]] int ns() const { return constraints.n_soft(); }
};

/// Dimension and index-set consistency; throws DimensionError / ValidationError.
inline void check_structure(const MpcProblem& p) {
    p.model.check();
    const int nx = p.nx();
    const int nu = p.nu();
    const auto& w = p.weights;
    const auto& c = p.constraints;
    auto dims = [](const MatrixXd& m, Eigen::Index r, Eigen::Index cc, const char* name) {
        if (m.rows() != r || m.cols() != cc)
            throw DimensionError(std::string(name) + " has wrong dimensions");
    };
    dims(w.Q, nx, nx, "Q");
    dims(w.R, nu, nu, "R");
    dims(w.S, nx, nu, "S");
    dims(w.QN, nx, nx, "Q_N");
    if (p.horizon < 1)
        throw ValidationError("horizon must be >= 1");
    if (w.sigma1 < 0 || w.sigma2 < 0)
        throw ValidationError("sigma1 and sigma2 must be nonnegative");
    if (c.u_min.size() != nu || c.u_max.size() != nu)
        throw DimensionError("input bounds must have n_u entries");
    if ((c.u_min.array() >= c.u_max.array()).any())
        throw ValidationError("u_min must be < u_max componentwise");
    if (c.x_min.size() != static_cast<Eigen::Index>(c.hard.size()) ||
        c.x_max.size() != static_cast<Eigen::Index>(c.hard.size()))
        throw DimensionError("hard bounds must match the hard index set");
    if ((c.x_min.array() >= c.x_max.array()).any())
        throw ValidationError("x_min must be < x_max over B");
    if (c.center.size() != c.n_soft() || c.radius.size() != c.n_soft())
        throw DimensionError("soft centers/radii must match the soft index set");
    if ((c.radius.array() <= 0.0).any())
        throw ValidationError("soft radii must be > 0");
    std::vector<int> seen(static_cast<std::size_t>(nx), 0);
    for (const auto* set : {&c.hard, &c.soft})
        for (int i : *set) {
            if (i < 0 || i >= nx)
                throw ValidationError("state index out of range");
            if (seen[static_cast<std::size_t>(i)]++)
                throw ValidationError("index sets F, B, S must be pairwise disjoint");
        }
}

struct EigenCheck {
    std::string name;
    double min_eigenvalue;
    bool ok;
};

struct ValidationReport {
    std::vector<EigenCheck> checks;
    std::vector<std::string> failures;

    [[nodiscard]] bool ok() const { return failures.empty(); }
    [[nodiscard]] std::string message() const {
        std::string s;
        for (const auto& f : failures)
            s += (s.empty() ? "" : "; ") + f;
        return s;
    }
};

/// Convexity checks on Q, Q_N, R and the joint stage matrix [Q S; S' R].
inline ValidationReport validate(const MpcProblem& p) {
    ValidationReport rep;
    try {
        check_structure(p);
    } catch (const Error& e) {
        rep.failures.emplace_back(e.what());
        return rep;
    }
    const auto& w = p.weights;
    auto check = [&](const std::string& name, const MatrixXd& m, bool strict) {
        const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
        const double lmin = linalg::min_sym_eigenvalue(m);
        const bool ok = asym <= 1e-9 && (strict ? lmin > 0.0 : lmin >= kPsdTolerance);
        rep.checks.push_back({name, lmin, ok});
        if (!ok)
            rep.failures.push_back(name + (asym > 1e-9 ? " is not symmetric"
                                                       : strict ? " is not positive definite (min eigenvalue " +
                                                                      std::to_string(lmin) + ")"
                                                                : " is not positive semidefinite (min eigenvalue " +
                                                                      std::to_string(lmin) + ")"));
    };
    check("Q", w.Q, false);
    check("Q_N", w.QN, false);
    check("R", w.R, true);
    MatrixXd joint(p.nx() + p.nu(), p.nx() + p.nu());
    joint << w.Q, w.S, w.S.transpose(), w.R;
    check("joint stage cost [Q S; S' R]", joint, false);
    return rep;
}

inline void require_valid(const MpcProblem& p) {
    const auto rep = validate(p);
    if (!rep.ok())
        throw ValidationError(rep.message());
}

/// Zero-order-hold discretization through the augmented matrix exponential
/// exp([A B; 0 0] Ts) = [A_d B_d; 0 I].
inline LtiModel discretize_zoh(const MatrixXd& Ac, const MatrixXd& Bc, double Ts) {
    if (Ac.rows() != Ac.cols() || Bc.rows() != Ac.rows())
        throw DimensionError("continuous model dimensions are inconsistent");
    if (!(Ts > 0.0))
        throw ValidationError("sampling time must be positive");
    const auto nx = Ac.rows();
    const auto nu = Bc.cols();
    MatrixXd M = MatrixXd::Zero(nx + nu, nx + nu);
    M.topLeftCorner(nx, nx) = Ac;
    M.topRightCorner(nx, nu) = Bc;
    const MatrixXd phi = linalg::expm(M * Ts);
    return {phi.topLeftCorner(nx, nx), phi.topRightCorner(nx, nu)};
}

/// Re-models input-rate bounds as hard state constraints.
///
/// The new state is (x, u_prev) and the new input is du, with
/// u = u_prev + du. The stage cost on (x, u) is preserved exactly, u_prev is
/// appended to B with the original input bounds, and du inherits the rate
/// bounds as its input box.
inline MpcProblem augment_for_rate_constraints(const MpcProblem& p, const VectorXd& du_min,
                                               const VectorXd& du_max) {
    check_structure(p);
    const int nx = p.nx();
    const int nu = p.nu();
    if (du_min.size() != nu || du_max.size() != nu)
        throw DimensionError("rate bounds must have n_u entries");
    if ((du_min.array() >= du_max.array()).any())
        throw ValidationError("du_min must be < du_max componentwise");

    const auto& A = p.model.A;
    const auto& B = p.model.B;
    const auto& w = p.weights;
    MpcProblem out;
    out.horizon = p.horizon;

    out.model.A = MatrixXd::Zero(nx + nu, nx + nu);
    out.model.A.topLeftCorner(nx, nx) = A;
    out.model.A.topRightCorner(nx, nu) = B;
    out.model.A.bottomRightCorner(nu, nu).setIdentity();
    out.model.B = MatrixXd::Zero(nx + nu, nu);
    out.model.B.topRows(nx) = B;
    out.model.B.bottomRows(nu).setIdentity();

    out.weights.Q = MatrixXd::Zero(nx + nu, nx + nu);
    out.weights.Q << w.Q, w.S, w.S.transpose(), w.R;
    out.weights.R = w.R;
    out.weights.S = MatrixXd::Zero(nx + nu, nu);
    out.weights.S << w.S, w.R;
    out.weights.QN = linalg::block_diag(w.QN, MatrixXd::Zero(nu, nu));
    out.weights.sigma1 = w.sigma1;
    out.weights.sigma2 = w.sigma2;

    const auto& c = p.constraints;
    auto& oc = out.constraints;
    oc.u_min = du_min;
    oc.u_max = du_max;
    oc.hard = c.hard;
    oc.x_min.resize(static_cast<Eigen::Index>(c.hard.size()) + nu);
    oc.x_max.resize(oc.x_min.size());
    oc.x_min << c.x_min, c.u_min;
    oc.x_max << c.x_max, c.u_max;
    for (int j = 0; j < nu; ++j)
        oc.hard.push_back(nx + j);
    oc.soft = c.soft;
    oc.center = c.center;
    oc.radius = c.radius;
    return out;
}

/// Evaluates the full cost of a trajectory (states x_0..x_N as columns of X,
/// inputs u_0..u_{N-1} as columns of U, slacks delta_0..delta_N as columns of D).
inline double trajectory_cost(const MpcProblem& p, const MatrixXd& X, const MatrixXd& U,
                              const MatrixXd& D = MatrixXd()) {
    const auto& w = p.weights;
    double cost = 0.0;
    for (int k = 0; k < p.horizon; ++k) {
        const VectorXd x = X.col(k);
        const VectorXd u = U.col(k);
        cost += 0.5 * (x.dot(w.Q * x) + u.dot(w.R * u)) + x.dot(w.S * u);
    }
    const VectorXd xN = X.col(p.horizon);
    cost += 0.5 * xN.dot(w.QN * xN);
    for (Eigen::Index k = 0; k < D.cols(); ++k)
        cost += w.sigma1 * D.col(k).sum() + w.sigma2 * D.col(k).squaredNorm();
    return cost;
}

} // namespace fixmpc::model
