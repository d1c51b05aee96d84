#pragma once

/**
 * @file
 * @brief Oscillating-masses benchmark: plant, MPC problems, reference signal,
 * closed-loop simulation and the fixed-point cost-degradation study.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "admm.hpp"
#include "certify.hpp"
#include "condense.hpp"
#include "errors.hpp"
#include "fgm.hpp"
#include "fxp.hpp"
#include "model.hpp"
#include "qp_reference.hpp"
#include "sparse.hpp"

namespace fixmpc::bench {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using transform::Setpoint;

struct OscillatingMasses {
    int masses = 4;
    double spring = 1.0;
    double mass = 1.0;
    double Ts = 0.5;

    /// Stiffness of the wall-mass-...-mass-wall chain.
    [[nodiscard]] MatrixXd stiffness() const {
        MatrixXd K = MatrixXd::Zero(masses, masses);
        for (int i = 0; i < masses; ++i) {
            K(i, i) = 2.0 * spring;
            if (i + 1 < masses)
                K(i, i + 1) = K(i + 1, i) = -spring;
        }
        return K;
    }
    /// Actuator j pushes element j (wall for j = 0 is implicit) apart from
    /// mass j: force u_j on mass j and -u_j on mass j - 1.
    [[nodiscard]] MatrixXd actuators() const {
        MatrixXd T = MatrixXd::Identity(masses, masses);
        for (int i = 0; i + 1 < masses; ++i)
            T(i, i + 1) = -1.0;
        return T;
    }
    [[nodiscard]] std::pair<MatrixXd, MatrixXd> continuous() const {
        const int M = masses;
        MatrixXd Ac = MatrixXd::Zero(2 * M, 2 * M);
        Ac.topRightCorner(M, M).setIdentity();
        Ac.bottomLeftCorner(M, M) = -stiffness() / mass;
        MatrixXd Bc = MatrixXd::Zero(2 * M, M);
        Bc.bottomRows(M) = actuators() / mass;
        return {Ac, Bc};
    }
    [[nodiscard]] model::LtiModel discrete() const {
        const auto [Ac, Bc] = continuous();
        return model::discretize_zoh(Ac, Bc, Ts);
    }
    /// Input holding the masses at rest at the given positions.
    [[nodiscard]] VectorXd holding_input(const VectorXd& pos) const {
        return actuators().lu().solve(stiffness() * pos);
    }
};

enum class Variant { input_constrained, soft_constrained };

struct BenchmarkOptions {
    int horizon = 10;
    double u_bound = 0.5;
    double du_bound = 0.1;
    double soft_radius = 0.5;
    double sigma1 = 8.0;
    double sigma2 = 1.0;
};

struct Benchmark {
    OscillatingMasses plant;
    Variant variant = Variant::input_constrained;
    BenchmarkOptions options;
    model::MpcProblem problem;

    /// Steady-state target (x_ss, u_ss) of the MPC problem for mass positions pos.
    [[nodiscard]] Setpoint setpoint(const VectorXd& pos) const {
        const int M = plant.masses;
        const VectorXd u = plant.holding_input(pos);
        Setpoint s = Setpoint::zero(problem.nx(), problem.nu());
        s.x.head(M) = pos;
        if (variant == Variant::input_constrained)
            s.u = u;
        else
            s.x.tail(M) = u;
        return s;
    }
    /// Input actually applied to the masses for MPC input v at state x.
    [[nodiscard]] VectorXd plant_input(const VectorXd& x, const VectorXd& v) const {
        if (variant == Variant::input_constrained)
            return v;
        return x.tail(plant.masses) + v;
    }
};

inline Benchmark build_benchmark(Variant variant, const BenchmarkOptions& opt = {}, const OscillatingMasses& plant = {}) {
    Benchmark b;
    b.plant = plant;
    b.variant = variant;
    b.options = opt;
    const int M = plant.masses;
    auto& p = b.problem;
    p.model = plant.discrete();
    p.horizon = opt.horizon;
    p.weights.Q = MatrixXd::Identity(2 * M, 2 * M);
    p.weights.R = MatrixXd::Identity(M, M);
    p.weights.S = MatrixXd::Zero(2 * M, M);
    p.weights.QN = MatrixXd::Identity(2 * M, 2 * M);
    p.constraints.u_min = VectorXd::Constant(M, -opt.u_bound);
    p.constraints.u_max = VectorXd::Constant(M, opt.u_bound);
    p.constraints.x_min.resize(0);
    p.constraints.x_max.resize(0);
    p.constraints.center.resize(0);
    p.constraints.radius.resize(0);
    if (variant == Variant::soft_constrained) {
        p.weights.sigma1 = opt.sigma1;
        p.weights.sigma2 = opt.sigma2;
        for (int i = 0; i < M; ++i)
            p.constraints.soft.push_back(i);
        p.constraints.center = VectorXd::Zero(M);
        p.constraints.radius = VectorXd::Constant(M, opt.soft_radius);
        p = model::augment_for_rate_constraints(p, VectorXd::Constant(M, -opt.du_bound),
                                                VectorXd::Constant(M, opt.du_bound));
    }
    model::require_valid(p);
    return b;
}

/// Piecewise-constant position setpoints; every period steps each mass gets
/// a new level from {-0.5, -0.25, 0.25, 0.5}.
inline std::vector<VectorXd> reference_positions(int steps, std::uint64_t seed, int masses = 4, int period = 25) {
    static constexpr double levels[4] = {-0.5, -0.25, 0.25, 0.5};
    std::mt19937_64 gen(seed);
    std::vector<VectorXd> out;
    VectorXd cur(masses);
    for (int k = 0; k < steps; ++k) {
        if (k % period == 0)
            for (int i = 0; i < masses; ++i)
                cur[i] = levels[gen() % 4];
        out.push_back(cur);
    }
    return out;
}

enum class Method { oracle, fgm, admm };

struct SolverConfig {
    Method method = Method::oracle;
    std::optional<int> fraction_bits; ///< fixed point when set
    int iterations = 15;
    bool warm_start = false;
    double rho = 2.0;
    bool scale_soft = true;
    transform::SoftScaling scaling = transform::SoftScaling::multiply;
    admm::Padding nu_padding = admm::Padding::repeat;
    /// Closed loops report the quantized-inverse PSD check instead of aborting
    /// on it (it fails at every practical b on the soft benchmark).
    transform::AdmmSettings admm_settings{.enforce_consistency = false};
    fxp::OverflowPolicy policy = fxp::OverflowPolicy::checked;
    /// FGM: box over p = (x, x_ref, u_ref) used for the overflow bounds.
    std::optional<std::pair<VectorXd, VectorXd>> param_box;
    /// ADMM: formats from simulation (see calibrate_admm).
    std::optional<admm::AdmmFormats> admm_formats;
};

class Controller {
public:
    virtual ~Controller() = default;
    /// Returns the MPC input for state x and setpoint ref.
    virtual VectorXd control(const VectorXd& x, const Setpoint& ref) = 0;
    virtual void reset() {}
};

class OracleController : public Controller {
public:
    explicit OracleController(const model::MpcProblem& p) : p_(p) {
        condensable_ = p.constraints.hard.empty() && p.constraints.soft.empty();
        if (condensable_) {
            q_ = transform::condense(p);
            const int n = q_.n();
            G_.resize(2 * n, n);
            G_ << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
            g_.resize(2 * n);
            g_ << q_.z_max, -q_.z_min;
        } else {
            s_ = transform::build_sparse(p);
        }
    }

    VectorXd control(const VectorXd& x, const Setpoint& ref) override {
        if (condensable_) {
            qp::QpProblem qp{q_.H, q_.linear_term(x, ref), MatrixXd(0, q_.n()), VectorXd(0), G_, g_};
            const auto sol = qp::solve_qp(qp);
            if (sol.status != qp::QpStatus::optimal)
                throw OracleFailure("reference QP did not converge");
            last_ = sol.z;
            return sol.z.head(p_.nu());
        }
        const auto rq = transform::to_qp(s_, x, s_.h(ref));
        const auto sol = qp::solve_qp(rq.qp);
        if (sol.status != qp::QpStatus::optimal)
            throw OracleFailure("reference QP did not converge");
        last_ = sol.z;
        return s_.first_input(sol.z);
    }

    [[nodiscard]] const VectorXd& last_solution() const { return last_; }
    [[nodiscard]] const transform::SparseQp& sparse() const { return s_; }

private:
    model::MpcProblem p_;
    bool condensable_ = false;
    transform::CondensedQp q_;
    transform::SparseQp s_;
    MatrixXd G_;
    VectorXd g_;
    VectorXd last_;
};

class FgmController : public Controller {
public:
    FgmController(const model::MpcProblem& p, const SolverConfig& cfg) : cfg_(cfg), nu_(p.nu()) {
        q_ = transform::condense(p);
        if (cfg.fraction_bits) {
            off_ = transform::normalize_fgm(q_, *cfg.fraction_bits);
            if (!cfg.param_box)
                throw ConfigError("fixed-point FGM needs a parameter box for its overflow bounds");
            report_ = certify::fgm_overflow_bounds(off_, cfg.param_box->first, cfg.param_box->second);
            data_.emplace(off_, report_.formats());
        } else {
            off_ = transform::normalize_fgm(q_);
        }
        reset();
    }

    void reset() override { prev_.reset(); }

    VectorXd control(const VectorXd& x, const Setpoint& ref) override {
        const VectorXd p = transform::stack_parameter(x, ref);
        VectorXd z0 = fgm::project_box(VectorXd::Zero(q_.n()), off_.z_min, off_.z_max);
        if (cfg_.warm_start && prev_)
            z0 = fgm::shift_blocks(*prev_, nu_);
        VectorXd z;
        if (data_) {
            const auto& f = data_->formats;
            const auto ph = fxp::FxVector::quantize(p, f.param, fxp::Rounding::truncate);
            const auto z0h = fxp::FxVector::quantize(z0, f.z, fxp::Rounding::truncate);
            fgm::FgmFxOptions opt;
            opt.policy = cfg_.policy;
            z = fgm::fgm_solve_fx(*data_, ph, cfg_.iterations, z0h, opt).z.to_double();
        } else {
            z = fgm::fgm_solve(off_, p, cfg_.iterations, z0).z;
        }
        prev_ = z;
        return z.head(nu_);
    }

    [[nodiscard]] const transform::FgmOffline& offline() const { return off_; }
    [[nodiscard]] const certify::OverflowReport& overflow() const { return report_; }

private:
    SolverConfig cfg_;
    int nu_;
    transform::CondensedQp q_;
    transform::FgmOffline off_;
    certify::OverflowReport report_;
    std::optional<fgm::FgmFxData> data_;
    std::optional<VectorXd> prev_;
};

class AdmmController : public Controller {
public:
    AdmmController(const model::MpcProblem& p, const SolverConfig& cfg) : cfg_(cfg) {
        s_ = transform::build_sparse(p);
        if (cfg.scale_soft && p.weights.sigma1 > 0.0)
            s_ = transform::scale_sparse(s_, p.weights.sigma1, cfg.scaling);
        off_ = transform::precompute_admm(s_, cfg.rho, cfg.fraction_bits, cfg.admm_settings);
        if (cfg.fraction_bits) {
            if (!cfg.admm_formats)
                throw ConfigError("fixed-point ADMM needs calibrated formats");
            K_hat_ = transform::quantize_inward(s_.K, *cfg.fraction_bits);
            data_.emplace(off_, K_hat_, *cfg.admm_formats);
        }
        reset();
    }

    void reset() override {
        z_prev_ = VectorXd::Zero(s_.n());
        nu_prev_ = VectorXd::Zero(s_.n());
        started_ = false;
    }

    VectorXd control(const VectorXd& x, const Setpoint& ref) override {
        VectorXd z0 = VectorXd::Zero(s_.n());
        VectorXd nu0 = VectorXd::Zero(s_.n());
        if (cfg_.warm_start && started_)
            std::tie(z0, nu0) = admm::warm_start_shift(z_prev_, nu_prev_, s_.layout, cfg_.nu_padding);
        const VectorXd h = s_.h(ref);
        if (data_) {
            const auto& f = data_->formats;
            const auto xh = fxp::FxVector::quantize(x, f.param, fxp::Rounding::truncate).to_double();
            const auto bh = fxp::FxVector::quantize(s_.b(xh), f.param, fxp::Rounding::nearest);
            const auto hh = fxp::FxVector::quantize(h, f.h, fxp::Rounding::nearest);
            const auto zh = fxp::FxVector::quantize(z0, f.z, fxp::Rounding::nearest);
            const auto wh = fxp::FxVector::quantize(nu0 / off_.rho, f.w, fxp::Rounding::nearest);
            admm::AdmmFxOptions opt;
            opt.policy = cfg_.policy;
            const auto r = admm::admm_solve_fx(*data_, hh, bh, cfg_.iterations, zh, wh, opt);
            z_prev_ = r.z.to_double();
            nu_prev_ = off_.rho * r.w.to_double();
        } else {
            if (recorder_)
                recorder_->push_back({x, h, z0, nu0});
            const auto r = admm::admm_solve(off_, s_, x, h, cfg_.iterations, z0, nu0);
            z_prev_ = r.z;
            nu_prev_ = r.nu;
        }
        started_ = true;
        return s_.first_input(z_prev_);
    }

    /// Double-precision runs append their per-solve inputs here.
    void record_into(std::vector<admm::AdmmSample>* rec) { recorder_ = rec; }

    [[nodiscard]] const transform::SparseQp& sparse() const { return s_; }
    [[nodiscard]] const transform::AdmmOffline& offline() const { return off_; }

private:
    SolverConfig cfg_;
    transform::SparseQp s_;
    transform::AdmmOffline off_;
    transform::KSet K_hat_;
    std::optional<admm::AdmmFxData> data_;
    VectorXd z_prev_;
    VectorXd nu_prev_;
    bool started_ = false;
    std::vector<admm::AdmmSample>* recorder_ = nullptr;
};

inline std::unique_ptr<Controller> make_controller(const model::MpcProblem& p, const SolverConfig& cfg) {
    switch (cfg.method) {
    case Method::oracle:
        return std::make_unique<OracleController>(p);
    case Method::fgm:
        return std::make_unique<FgmController>(p, cfg);
    case Method::admm:
        return std::make_unique<AdmmController>(p, cfg);
    }
    throw ConfigError("unknown method");
}

struct SimulationTrace {
    MatrixXd X;                   ///< states x_0..x_steps as columns
    MatrixXd U;                   ///< MPC inputs
    std::vector<Setpoint> refs;
    std::vector<double> stage_cost;
    double average_cost = 0.0;
    int input_active_steps = 0;   ///< steps with an input or hard-state bound active
    int soft_active_steps = 0;    ///< steps with a soft interval active or violated
    double dynamics_residual = 0.0;
    double max_input_violation = 0.0;
};

inline double stage_cost(const model::MpcProblem& p, const VectorXd& x, const VectorXd& u, const Setpoint& ref) {
    const VectorXd e = x - ref.x;
    const VectorXd v = u - ref.u;
    const auto& w = p.weights;
    return 0.5 * e.dot(w.Q * e) + 0.5 * v.dot(w.R * v) + e.dot(w.S * v);
}

inline SimulationTrace closed_loop_sim(const Benchmark& b, Controller& ctrl, const std::vector<VectorXd>& positions,
                                       const std::optional<VectorXd>& x0 = std::nullopt) {
    const auto& p = b.problem;
    const int steps = static_cast<int>(positions.size());
    const auto& A = p.model.A;
    const auto& B = p.model.B;
    const auto& c = p.constraints;
    SimulationTrace tr;
    tr.X = MatrixXd::Zero(p.nx(), steps + 1);
    tr.U = MatrixXd::Zero(p.nu(), steps);
    if (x0)
        tr.X.col(0) = *x0;
    ctrl.reset();
    double total = 0.0;
    const double tol = 1e-9;
    for (int k = 0; k < steps; ++k) {
        const VectorXd x = tr.X.col(k);
        const Setpoint ref = b.setpoint(positions[static_cast<std::size_t>(k)]);
        const VectorXd u = ctrl.control(x, ref);
        tr.U.col(k) = u;
        const VectorXd xn = A * x + B * u;
        tr.X.col(k + 1) = xn;
        tr.dynamics_residual = std::max(tr.dynamics_residual, (xn - A * x - B * u).cwiseAbs().maxCoeff());
        tr.max_input_violation = std::max({tr.max_input_violation, (u - c.u_max).maxCoeff(), (c.u_min - u).maxCoeff()});
        bool input_active = ((u - c.u_max).array() >= -tol).any() || ((c.u_min - u).array() >= -tol).any();
        for (std::size_t j = 0; j < c.hard.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double v = xn[c.hard[j]];
            input_active = input_active || v >= c.x_max[jj] - tol || v <= c.x_min[jj] + tol;
        }
        bool soft_active = false;
        for (std::size_t j = 0; j < c.soft.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            soft_active = soft_active || std::abs(xn[c.soft[j]] - c.center[jj]) >= c.radius[jj] - 1e-6;
        }
        tr.input_active_steps += input_active;
        tr.soft_active_steps += soft_active;
        const double sc = stage_cost(p, x, u, ref);
        tr.stage_cost.push_back(sc);
        tr.refs.push_back(ref);
        total += sc;
    }
    tr.average_cost = steps ? total / steps : 0.0;
    return tr;
}

/// Parameter envelope of a trace: symmetric box of half-width factor * max |p_i|.
inline std::pair<VectorXd, VectorXd> parameter_envelope(const SimulationTrace& tr, double factor = 1.5) {
    VectorXd m;
    for (std::size_t k = 0; k < tr.refs.size(); ++k) {
        const VectorXd p = transform::stack_parameter(tr.X.col(static_cast<Eigen::Index>(k)), tr.refs[k]);
        m = m.size() ? VectorXd(m.cwiseMax(p.cwiseAbs())) : VectorXd(p.cwiseAbs());
    }
    return {-factor * m, factor * m};
}

/// Integer bits for fixed-point ADMM from a double-precision closed loop with
/// the same settings (safety factor on the observed maxima).
inline admm::AdmmFormats calibrate_admm(const Benchmark& b, SolverConfig cfg, const std::vector<VectorXd>& positions,
                                        int fraction_bits, double safety = 2.0) {
    cfg.fraction_bits.reset();
    AdmmController ctrl(b.problem, cfg);
    std::vector<admm::AdmmSample> samples;
    ctrl.record_into(&samples);
    closed_loop_sim(b, ctrl, positions);
    const auto mx = admm::simulate_maxima(ctrl.offline(), ctrl.sparse(), samples, cfg.iterations);
    return admm::formats_from_maxima(mx, fraction_bits, safety);
}

inline int thread_count() {
    if (const char* env = std::getenv("FIXMPC_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on a small thread pool.
template <class Fn>
void parallel_for(int count, Fn&& fn, int threads = thread_count()) {
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < count; i = next++)
            fn(i);
    };
    const int t = std::min(threads, count);
    if (t <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    for (int i = 0; i < t; ++i)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
}

struct CostCell {
    int fraction_bits = 0;
    int iterations = 0;
    double average_cost = 0.0;
    double relative_percent = 0.0;
    std::string error; ///< nonempty when the run failed (e.g. overflow)
    SimulationTrace trace;
};

struct CostComparison {
    std::vector<int> b_grid;
    std::vector<int> I_grid;
    double baseline = 0.0;
    std::vector<CostCell> cells; ///< row-major over (I, b)

    [[nodiscard]] const CostCell& at(int I, int b) const {
        for (const auto& c : cells)
            if (c.iterations == I && c.fraction_bits == b)
                return c;
        throw ConfigError("cell not in grid");
    }

    /// Rows I_max, columns b, relative percent (or the error tag).
    [[nodiscard]] std::string csv() const {
        std::string out = "I_max";
        for (int b : b_grid)
            out += ",b" + std::to_string(b);
        out += '\n';
        for (int I : I_grid) {
            out += std::to_string(I);
            for (int b : b_grid) {
                const auto& c = at(I, b);
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.4f", c.relative_percent);
                out += "," + (c.error.empty() ? std::string(buf) : "error");
            }
            out += '\n';
        }
        return out;
    }
};

inline double relative_percent(double J, double J_ref) { return 100.0 * (J - J_ref) / J_ref; }

/// Optimal double-precision closed loop used as the reference cost.
inline SimulationTrace baseline(const Benchmark& b, const std::vector<VectorXd>& positions) {
    OracleController ctrl(b.problem);
    return closed_loop_sim(b, ctrl, positions);
}

/// Fixed-point closed loop for every (b, I_max); base carries method and
/// the remaining solver settings.
inline CostComparison cost_table(const Benchmark& b, const SolverConfig& base, const std::vector<int>& b_grid,
                                 const std::vector<int>& I_grid, const SimulationTrace& ref,
                                 const std::vector<VectorXd>& positions, int threads = thread_count()) {
    CostComparison out;
    out.b_grid = b_grid;
    out.I_grid = I_grid;
    out.baseline = ref.average_cost;
    for (int I : I_grid)
        for (int bb : b_grid)
            out.cells.push_back({bb, I, 0.0, 0.0, {}, {}});
    const auto box = parameter_envelope(ref);
    parallel_for(
        static_cast<int>(out.cells.size()),
        [&](int i) {
            auto& cell = out.cells[static_cast<std::size_t>(i)];
            try {
                SolverConfig cfg = base;
                cfg.iterations = cell.iterations;
                cfg.fraction_bits = cell.fraction_bits;
                if (cfg.method == Method::fgm && !cfg.param_box)
                    cfg.param_box = box;
                if (cfg.method == Method::admm && !cfg.admm_formats)
                    cfg.admm_formats = calibrate_admm(b, cfg, positions, cell.fraction_bits);
                auto ctrl = make_controller(b.problem, cfg);
                cell.trace = closed_loop_sim(b, *ctrl, positions);
                cell.average_cost = cell.trace.average_cost;
                cell.relative_percent = relative_percent(cell.average_cost, out.baseline);
            } catch (const Error& e) {
                cell.error = e.what();
            }
        },
        threads);
    return out;
}

} // namespace fixmpc::bench
