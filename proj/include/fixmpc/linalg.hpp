#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "errors.hpp"

namespace fixmpc::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd symmetric_part(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Ascending eigenvalues of the symmetric part of m.
inline VectorXd sym_eigenvalues(const MatrixXd& m) {
    if (m.rows() != m.cols())
        throw DimensionError("eigenvalues of a non-square matrix");
    if (m.size() == 0)
        return VectorXd();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetric_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double min_sym_eigenvalue(const MatrixXd& m) {
    const auto ev = sym_eigenvalues(m);
    return ev.size() ? ev.minCoeff() : 0.0;
}

inline double max_sym_eigenvalue(const MatrixXd& m) {
    const auto ev = sym_eigenvalues(m);
    return ev.size() ? ev.maxCoeff() : 0.0;
}

/// max |lambda_i(m)| for a general square matrix.
inline double spectral_radius(const MatrixXd& m) {
    if (m.rows() != m.cols())
        throw DimensionError("spectral radius of a non-square matrix");
    if (m.size() == 0)
        return 0.0;
    Eigen::EigenSolver<MatrixXd> es(m, false);
    if (es.info() != Eigen::Success)
        throw Error("eigenvalue iteration did not converge");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Largest singular value, computed from the smaller Gram matrix.
inline double spectral_norm(const MatrixXd& m) {
    if (m.size() == 0)
        return 0.0;
    const MatrixXd gram = m.rows() <= m.cols() ? MatrixXd(m * m.transpose()) : MatrixXd(m.transpose() * m);
    return std::sqrt(std::max(0.0, max_sym_eigenvalue(gram)));
}

inline double inf_norm(const MatrixXd& m) {
    return m.size() ? m.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
}

inline MatrixXd expm(const MatrixXd& m) { return m.exp(); }

inline MatrixXd block_diag(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out = MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

} // namespace fixmpc::linalg
