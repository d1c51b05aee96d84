#pragma once

/**
 * @file
 * @brief Sparse (state-keeping) QP and the offline data of ADMM.
 *
 * Decision vector z = (u_0..u_{N-1}, x_0, delta_0, ..., x_N, delta_N).
 * Equalities F z = b(x) encode x_0 = x and the state update; the feasible
 * set K is a product of boxes (inputs, hard states), free components and
 * two-dimensional cones {|x_i - c_i| <= r_i + delta_i, delta_i >= 0}.
 */

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "condense.hpp"
#include "errors.hpp"
#include "fxp.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "qp_reference.hpp"

namespace fixmpc::transform {

struct StageLayout {
    int N = 0;
    int nx = 0;
    int nu = 0;
    int ns = 0;

    [[nodiscard]] int n() const { return N * nu + (N + 1) * (nx + ns); }
    [[nodiscard]] int m() const { return (N + 1) * nx; }
    [[nodiscard]] int u(int k) const { return k * nu; }
    [[nodiscard]] int x(int k) const { return N * nu + k * (nx + ns); }
    [[nodiscard]] int d(int k) const { return x(k) + nx; }
};

enum class Bound { free, box, cone_x, cone_d };

struct Cone {
    int ix = 0; ///< position of the soft state in z
    int id = 0; ///< position of its slack
    double c = 0.0;
    double r = 0.0;
    int stage = 0;
};

/// Componentwise description of K over a vector of length n().
struct KSet {
    std::vector<Bound> kind;
    VectorXd lo; ///< meaningful for Bound::box only
    VectorXd hi;
    std::vector<Cone> cones;

    [[nodiscard]] int n() const { return static_cast<int>(kind.size()); }

    [[nodiscard]] bool contains(const VectorXd& v, double tol = 0.0) const {
        if (v.size() != n())
            throw LayoutError("vector does not match the constraint layout");
        for (int i = 0; i < n(); ++i)
            if (kind[static_cast<std::size_t>(i)] == Bound::box && (v[i] < lo[i] - tol || v[i] > hi[i] + tol))
                return false;
        for (const auto& c : cones)
            if (v[c.id] < -tol || std::abs(v[c.ix] - c.c) > c.r + v[c.id] + tol)
                return false;
        return true;
    }
};

struct SparseQp {
    StageLayout layout;
    MatrixXd H;       ///< H_A
    VectorXd h0;      ///< linear term for a zero setpoint
    MatrixXd Href;    ///< h = h0 + Href (x_ref, u_ref)
    MatrixXd F;
    MatrixXd Fx;      ///< b(x) = Fx x + b_const
    VectorXd b_const;
    KSet K;
    VectorXd D;       ///< variable scaling, original z = D .* z_scaled

    [[nodiscard]] int n() const { return static_cast<int>(H.rows()); }
    [[nodiscard]] int m() const { return static_cast<int>(F.rows()); }
    [[nodiscard]] VectorXd h(const Setpoint& ref) const {
        VectorXd r(ref.x.size() + ref.u.size());
        r << ref.x, ref.u;
        return h0 + Href * r;
    }
    [[nodiscard]] VectorXd h() const { return h0; }
    [[nodiscard]] VectorXd b(const VectorXd& x) const { return Fx * x + b_const; }
    [[nodiscard]] double objective(const VectorXd& z, const VectorXd& hv) const {
        return 0.5 * z.dot(H * z) + hv.dot(z);
    }
    [[nodiscard]] VectorXd unscale(const VectorXd& z) const { return D.cwiseProduct(z); }
    [[nodiscard]] bool scaled() const { return (D.array() != 1.0).any(); }

    /// Input sequence (original coordinates) extracted from z.
    [[nodiscard]] VectorXd inputs(const VectorXd& z) const {
        return unscale(z).head(layout.N * layout.nu);
    }
    [[nodiscard]] VectorXd first_input(const VectorXd& z) const {
        return unscale(z).head(layout.nu);
    }
};

inline SparseQp build_sparse(const model::MpcProblem& p) {
    model::check_structure(p);
    const int N = p.horizon;
    const int nx = p.nx();
    const int nu = p.nu();
    const int ns = p.ns();
    const auto& w = p.weights;
    const auto& c = p.constraints;

    SparseQp s;
    s.layout = {N, nx, nu, ns};
    const auto& L = s.layout;
    const int n = L.n();
    const int m = L.m();

    s.H = MatrixXd::Zero(n, n);
    s.h0 = VectorXd::Zero(n);
    s.Href = MatrixXd::Zero(n, nx + nu);
    for (int k = 0; k < N; ++k) {
        s.H.block(L.u(k), L.u(k), nu, nu) = w.R;
        s.H.block(L.x(k), L.x(k), nx, nx) = w.Q;
        s.H.block(L.x(k), L.u(k), nx, nu) = w.S;
        s.H.block(L.u(k), L.x(k), nu, nx) = w.S.transpose();
        s.Href.block(L.u(k), 0, nu, nx) = -w.S.transpose();
        s.Href.block(L.u(k), nx, nu, nu) = -w.R;
        s.Href.block(L.x(k), 0, nx, nx) = -w.Q;
        s.Href.block(L.x(k), nx, nx, nu) = -w.S;
    }
    s.H.block(L.x(N), L.x(N), nx, nx) = w.QN;
    s.Href.block(L.x(N), 0, nx, nx) = -w.QN;
    for (int k = 0; k <= N; ++k)
        for (int j = 0; j < ns; ++j) {
            s.H(L.d(k) + j, L.d(k) + j) = 2.0 * w.sigma2;
            s.h0[L.d(k) + j] = w.sigma1;
        }

    s.F = MatrixXd::Zero(m, n);
    s.Fx = MatrixXd::Zero(m, nx);
    s.F.block(0, L.x(0), nx, nx).setIdentity();
    s.Fx.topRows(nx).setIdentity();
    for (int k = 0; k < N; ++k) {
        const int row = (k + 1) * nx;
        s.F.block(row, L.x(k + 1), nx, nx).setIdentity();
        s.F.block(row, L.x(k), nx, nx) = -p.model.A;
        s.F.block(row, L.u(k), nx, nu) = -p.model.B;
    }
    s.b_const = VectorXd::Zero(m);

    auto& K = s.K;
    K.kind.assign(static_cast<std::size_t>(n), Bound::free);
    K.lo = VectorXd::Constant(n, -model::kInf);
    K.hi = VectorXd::Constant(n, model::kInf);
    auto set_box = [&](int i, double lo, double hi) {
        K.kind[static_cast<std::size_t>(i)] = Bound::box;
        K.lo[i] = lo;
        K.hi[i] = hi;
    };
    for (int k = 0; k < N; ++k)
        for (int j = 0; j < nu; ++j)
            set_box(L.u(k) + j, c.u_min[j], c.u_max[j]);
    for (int k = 0; k <= N; ++k) {
        for (std::size_t j = 0; j < c.hard.size(); ++j)
            set_box(L.x(k) + c.hard[j], c.x_min[static_cast<Eigen::Index>(j)],
                    c.x_max[static_cast<Eigen::Index>(j)]);
        for (int j = 0; j < ns; ++j) {
            const int ix = L.x(k) + c.soft[static_cast<std::size_t>(j)];
            const int id = L.d(k) + j;
            K.kind[static_cast<std::size_t>(ix)] = Bound::cone_x;
            K.kind[static_cast<std::size_t>(id)] = Bound::cone_d;
            K.cones.push_back({ix, id, c.center[j], c.radius[j], k});
        }
    }
    s.D = VectorXd::Ones(n);
    return s;
}

/// Rows of the inequality form G z <= g generated from K, tagged so that
/// multipliers can be mapped back to constraints.
enum class RowKind { box_upper, box_lower, cone_upper, cone_lower, slack_sign };

struct RowTag {
    RowKind kind;
    int index; ///< component for boxes, cone number for cones
};

struct ReferenceQp {
    qp::QpProblem qp;
    std::vector<RowTag> rows;
};

/// The sparse problem as a generic QP (in the coordinates of s).
inline ReferenceQp to_qp(const SparseQp& s, const VectorXd& x, const VectorXd& hv) {
    ReferenceQp out;
    const int n = s.n();
    std::vector<std::pair<VectorXd, double>> rows;
    auto add = [&](RowTag tag, VectorXd g, double rhs) {
        rows.emplace_back(std::move(g), rhs);
        out.rows.push_back(tag);
    };
    for (int i = 0; i < n; ++i) {
        if (s.K.kind[static_cast<std::size_t>(i)] != Bound::box)
            continue;
        if (std::isfinite(s.K.hi[i]))
            add({RowKind::box_upper, i}, VectorXd::Unit(n, i), s.K.hi[i]);
        if (std::isfinite(s.K.lo[i]))
            add({RowKind::box_lower, i}, -VectorXd::Unit(n, i), -s.K.lo[i]);
    }
    for (std::size_t j = 0; j < s.K.cones.size(); ++j) {
        const auto& c = s.K.cones[j];
        const int jj = static_cast<int>(j);
        VectorXd g = VectorXd::Zero(n);
        g[c.ix] = 1.0;
        g[c.id] = -1.0;
        add({RowKind::cone_upper, jj}, g, c.c + c.r);
        g[c.ix] = -1.0;
        add({RowKind::cone_lower, jj}, g, c.r - c.c);
        add({RowKind::slack_sign, jj}, -VectorXd::Unit(n, c.id), 0.0);
    }
    auto& q = out.qp;
    q.H = s.H;
    q.g = hv;
    q.A = s.F;
    q.b = s.b(x);
    q.G.resize(static_cast<Eigen::Index>(rows.size()), n);
    q.h.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        q.G.row(static_cast<Eigen::Index>(r)) = rows[r].first.transpose();
        q.h[static_cast<Eigen::Index>(r)] = rows[r].second;
    }
    return out;
}

struct AdmmOffline {
    MatrixXd M11;
    MatrixXd M12;
    MatrixXd M22; ///< kept for the consistency check only
    double rho = 2.0;
    std::optional<int> fraction_bits;
    double kkt_residual = 0.0;
    double rho_m11_norm = 0.0;     ///< rho * ||M11 hat||
    double consistency_min = 0.0;  ///< min eigenvalue of the consistency matrix
    double F_quantization_error = 0.0;
};

struct AdmmSettings {
    double kkt_tolerance = 1e-8;
    double consistency_tolerance = -1e-8;
    bool enforce_consistency = true;
};

inline bool is_power_of_two(double v) {
    if (!(v > 0.0) || !std::isfinite(v))
        return false;
    int e = 0;
    return std::frexp(v, &e) == 0.5;
}

inline AdmmOffline precompute_admm(const SparseQp& s, double rho, std::optional<int> fraction_bits = std::nullopt,
                                   const AdmmSettings& settings = {}) {
    if (!is_power_of_two(rho))
        throw ConfigError("rho must be a power of two");
    const int n = s.n();
    const int m = s.m();
    if (m && Eigen::FullPivLU<MatrixXd>(s.F).rank() < m)
        throw SingularKktError("equality constraint matrix is rank deficient");

    MatrixXd kkt = MatrixXd::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = s.H + rho * MatrixXd::Identity(n, n);
    kkt.topRightCorner(n, m) = s.F.transpose();
    kkt.bottomLeftCorner(m, n) = s.F;
    Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (!lu.isInvertible())
        throw SingularKktError("KKT matrix is singular");
    const MatrixXd inv = lu.inverse();

    AdmmOffline a;
    a.rho = rho;
    a.fraction_bits = fraction_bits;
    a.M11 = linalg::symmetric_part(inv.topLeftCorner(n, n));
    a.M12 = inv.topRightCorner(n, m);
    a.M22 = linalg::symmetric_part(inv.bottomRightCorner(m, m));
    MatrixXd left(n + m, n);
    left << a.M11, a.M12.transpose();
    MatrixXd target = MatrixXd::Zero(n + m, n);
    target.topRows(n).setIdentity();
    a.kkt_residual = (kkt * left - target).cwiseAbs().maxCoeff();
    if (a.kkt_residual > settings.kkt_tolerance)
        throw SingularKktError("KKT inverse residual " + std::to_string(a.kkt_residual) + " exceeds tolerance");

    MatrixXd F_hat = s.F;
    if (fraction_bits) {
        const int b = *fraction_bits;
        if (std::ldexp(rho, b) < 1.0)
            throw FormatError("rho is not representable with this many fraction bits");
        auto q = [b](double v) { return fxp::round_to_grid(v, b); };
        a.M11 = a.M11.unaryExpr(q);
        a.M12 = a.M12.unaryExpr(q);
        F_hat = s.F.unaryExpr(q);
        a.F_quantization_error = linalg::inf_norm(F_hat - s.F);
    }

    MatrixXd Mhat(n + m, n + m);
    Mhat << a.M11, a.M12, a.M12.transpose(), a.M22;
    Eigen::FullPivLU<MatrixXd> lu_hat(Mhat);
    if (!lu_hat.isInvertible())
        throw AssumptionError("quantized KKT inverse is singular");
    MatrixXd base = MatrixXd::Zero(n + m, n + m);
    base.topLeftCorner(n, n) = rho * MatrixXd::Identity(n, n);
    base.topRightCorner(n, m) = F_hat.transpose();
    base.bottomLeftCorner(m, n) = F_hat;
    a.consistency_min = linalg::min_sym_eigenvalue(lu_hat.inverse() - base);
    if (settings.enforce_consistency && a.consistency_min < settings.consistency_tolerance)
        throw AssumptionError("quantized KKT inverse consistency matrix is indefinite (min eigenvalue " +
                              std::to_string(a.consistency_min) + ")");

    a.rho_m11_norm = rho * linalg::spectral_norm(a.M11);
    if (!(a.rho_m11_norm < 1.0))
        throw AssumptionError("rho * ||M11|| = " + std::to_string(a.rho_m11_norm) + " is not below 1");
    return a;
}

/// How the soft-constraint scaling D acts on the slack and soft-state
/// components: multiply by sigma or by 1/sigma.
enum class SoftScaling { multiply, divide };

/// Variable transformation z = D z_scaled with D = sigma (or 1/sigma) on soft
/// states and slacks and 1 elsewhere.
inline SparseQp scale_sparse(const SparseQp& s, double sigma, SoftScaling dir = SoftScaling::multiply) {
    if (!(sigma > 0.0))
        throw ConfigError("scaling factor must be positive");
    if (sigma == 1.0 || s.K.cones.empty())
        return s;
    const double f = dir == SoftScaling::multiply ? sigma : 1.0 / sigma;
    VectorXd d = VectorXd::Ones(s.n());
    for (const auto& c : s.K.cones) {
        d[c.ix] = f;
        d[c.id] = f;
    }
    SparseQp t = s;
    t.H = d.asDiagonal() * s.H * d.asDiagonal();
    t.h0 = d.cwiseProduct(s.h0);
    t.Href = d.asDiagonal() * s.Href;
    t.F = s.F * d.asDiagonal();
    for (int i = 0; i < t.n(); ++i)
        if (t.K.kind[static_cast<std::size_t>(i)] == Bound::box) {
            t.K.lo[i] /= d[i];
            t.K.hi[i] /= d[i];
        }
    for (auto& c : t.K.cones) {
        c.c /= f;
        c.r /= f;
    }
    t.D = s.D.cwiseProduct(d);
    return t;
}

/// Scaled problem together with freshly computed offline data for it.
inline std::pair<SparseQp, AdmmOffline> scale_soft_constraints(const SparseQp& s, const AdmmOffline& a,
                                                               double sigma, SoftScaling dir = SoftScaling::multiply,
                                                               const AdmmSettings& settings = {}) {
    if (!(sigma > 0.0))
        throw ConfigError("scaling factor must be positive");
    if (sigma == 1.0 || s.K.cones.empty())
        return {s, a};
    SparseQp t = scale_sparse(s, sigma, dir);
    return {t, precompute_admm(t, a.rho, a.fraction_bits, settings)};
}

/// Quantizes the cone and box data of K inward onto the 2^-b grid.
inline KSet quantize_inward(const KSet& K, int fraction_bits) {
    KSet out = K;
    for (int i = 0; i < out.n(); ++i) {
        if (out.kind[static_cast<std::size_t>(i)] != Bound::box)
            continue;
        VectorXd lo(1), hi(1);
        lo << out.lo[i];
        hi << out.hi[i];
        quantize_box_inward(lo, hi, fraction_bits);
        out.lo[i] = lo[0];
        out.hi[i] = hi[0];
    }
    for (auto& c : out.cones) {
        const double ch = fxp::round_to_grid(c.c, fraction_bits);
        const double rh = fxp::round_to_grid(c.r - std::abs(ch - c.c), fraction_bits, fxp::Rounding::truncate);
        if (!(rh > 0.0))
            throw PrecisionError("cone radius vanishes under quantization");
        c.c = ch;
        c.r = rh;
    }
    return out;
}

} // namespace fixmpc::transform
