#pragma once

/**
 * @file
 * @brief Numerical verification that the soft-constraint penalty is exact:
 * sigma1 must exceed the largest multiplier of the corresponding hard
 * constraints |x_i - c_i| <= r_i.
 *
 * The slack of stage 0 is excluded throughout since x_0 is the measured state
 * and cannot be steered.
 */

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "model.hpp"
#include "qp_reference.hpp"
#include "sparse.hpp"

namespace fixmpc::transform {

struct PenaltySample {
    bool feasible = false;
    double max_multiplier = 0.0;
    double max_slack = 0.0; ///< of the soft problem at the configured sigma1
};

struct PenaltyReport {
    std::vector<PenaltySample> samples;
    double max_multiplier = 0.0;
    double sigma1 = 0.0;
    int infeasible = 0;

    [[nodiscard]] bool exact() const { return sigma1 > max_multiplier; }
};

/// Hard-constrained QP: the soft QP with delta_k = 0 for k >= 1.
inline ReferenceQp hard_qp(const SparseQp& s, const VectorXd& x, const VectorXd& hv) {
    ReferenceQp full = to_qp(s, x, hv);
    ReferenceQp out;
    out.qp = full.qp;
    std::vector<Eigen::Index> keep;
    for (std::size_t r = 0; r < full.rows.size(); ++r) {
        const auto& tag = full.rows[r];
        if (tag.kind == RowKind::slack_sign && s.K.cones[static_cast<std::size_t>(tag.index)].stage > 0)
            continue;
        keep.push_back(static_cast<Eigen::Index>(r));
        out.rows.push_back(tag);
    }
    out.qp.G = full.qp.G(keep, Eigen::all);
    out.qp.h = full.qp.h(keep);

    std::vector<int> fixed;
    for (const auto& c : s.K.cones)
        if (c.stage > 0)
            fixed.push_back(c.id);
    const auto m = full.qp.A.rows();
    out.qp.A.conservativeResize(m + static_cast<Eigen::Index>(fixed.size()), Eigen::NoChange);
    out.qp.b.conservativeResize(out.qp.A.rows());
    for (std::size_t j = 0; j < fixed.size(); ++j) {
        const auto row = m + static_cast<Eigen::Index>(j);
        out.qp.A.row(row).setZero();
        out.qp.A(row, fixed[j]) = 1.0;
        out.qp.b[row] = 0.0;
    }
    return out;
}

/// Largest slack over stages k >= 1.
inline double max_future_slack(const SparseQp& s, const VectorXd& z) {
    double m = 0.0;
    for (const auto& c : s.K.cones)
        if (c.stage > 0)
            m = std::max(m, z[c.id]);
    return m;
}

inline qp::QpSolution solve_soft(const SparseQp& s, const VectorXd& x, const VectorXd& hv) {
    return qp::solve_qp(to_qp(s, x, hv).qp);
}

/// Solves one sample; infeasible samples are detected by re-solving the soft
/// problem with a very large penalty.
inline PenaltySample penalty_sample(const model::MpcProblem& p, const SparseQp& s, const VectorXd& x,
                                    const Setpoint& ref) {
    PenaltySample out;
    const VectorXd hv = s.h(ref);
    const auto hard = hard_qp(s, x, hv);
    const auto sol = qp::solve_qp(hard.qp);
    if (sol.status == qp::QpStatus::optimal) {
        out.feasible = true;
        for (std::size_t r = 0; r < hard.rows.size(); ++r) {
            const auto& tag = hard.rows[r];
            if ((tag.kind == RowKind::cone_upper || tag.kind == RowKind::cone_lower) &&
                s.K.cones[static_cast<std::size_t>(tag.index)].stage > 0)
                out.max_multiplier = std::max(out.max_multiplier, sol.lambda[static_cast<Eigen::Index>(r)]);
        }
    } else {
        model::MpcProblem big = p;
        big.weights.sigma1 = 1e6;
        const auto sb = build_sparse(big);
        const auto soft = solve_soft(sb, x, sb.h(ref));
        if (soft.status != qp::QpStatus::optimal || max_future_slack(sb, soft.z) <= 1e-6)
            throw OracleFailure("hard-constrained problem could not be solved");
    }
    const auto soft = solve_soft(s, x, hv);
    if (soft.status != qp::QpStatus::optimal)
        throw OracleFailure("soft-constrained problem could not be solved");
    out.max_slack = max_future_slack(s, soft.z);
    return out;
}

inline PenaltyReport exact_penalty_check(const model::MpcProblem& p, const std::vector<VectorXd>& x_samples,
                                         const std::vector<Setpoint>& refs = {}) {
    if (!refs.empty() && refs.size() != x_samples.size())
        throw DimensionError("one setpoint per sample expected");
    const auto s = build_sparse(p);
    PenaltyReport rep;
    rep.sigma1 = p.weights.sigma1;
    for (std::size_t i = 0; i < x_samples.size(); ++i) {
        const auto ref = refs.empty() ? Setpoint::zero(p.nx(), p.nu()) : refs[i];
        auto smp = penalty_sample(p, s, x_samples[i], ref);
        if (!smp.feasible)
            ++rep.infeasible;
        rep.max_multiplier = std::max(rep.max_multiplier, smp.max_multiplier);
        rep.samples.push_back(smp);
    }
    return rep;
}

} // namespace fixmpc::transform
