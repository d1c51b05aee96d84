#include <gtest/gtest.h>

#include <random>

#include "fixmpc/bench.hpp"
#include "fixmpc/certify.hpp"
#include "fixmpc/fgm.hpp"

using namespace fixmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Fixture {
    bench::Benchmark b = bench::build_benchmark(bench::Variant::input_constrained);
    transform::CondensedQp q = transform::condense(b.problem);

    // Minimizer of the condensed QP by the interior-point reference.
    VectorXd oracle(const VectorXd& x, const transform::Setpoint& ref) const {
        const int n = q.n();
        MatrixXd G(2 * n, n);
        G << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
        VectorXd g(2 * n);
        g << q.z_max, -q.z_min;
        const auto s = qp::solve_qp({q.H, q.linear_term(x, ref), MatrixXd(0, n), VectorXd(0), G, g});
        EXPECT_EQ(s.status, qp::QpStatus::optimal);
        return s.z;
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

std::vector<std::pair<VectorXd, transform::Setpoint>> samples(int count, std::uint64_t seed) {
    const auto& f = fixture();
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const auto pos = bench::reference_positions(count * 25, seed);
    std::vector<std::pair<VectorXd, transform::Setpoint>> out;
    for (int k = 0; k < count; ++k)
        out.emplace_back(VectorXd::NullaryExpr(f.b.problem.nx(), [&] { return ud(gen); }),
                         f.b.setpoint(pos[static_cast<std::size_t>(25 * k)]));
    return out;
}

} // namespace

TEST(Projection, BoxClamp) {
    const VectorXd lo = VectorXd::Constant(3, -1.0);
    const VectorXd hi = VectorXd::Constant(3, 1.0);
    const VectorXd t = (VectorXd(3) << -2.0, 0.3, 5.0).finished();
    const VectorXd p = fgm::project_box(t, lo, hi);
    EXPECT_EQ(p, (VectorXd(3) << -1.0, 0.3, 1.0).finished());
    EXPECT_THROW(fgm::project_box(VectorXd::Zero(2), lo, hi), DimensionError);
}

TEST(Shift, RepeatsLastBlock) {
    const VectorXd v = (VectorXd(6) << 1, 2, 3, 4, 5, 6).finished();
    EXPECT_EQ(fgm::shift_blocks(v, 2), (VectorXd(6) << 3, 4, 5, 6, 5, 6).finished());
    EXPECT_THROW(fgm::shift_blocks(v, 4), LayoutError);
}

TEST(Iterate, OneStepForIdentityHessian) {
    transform::FgmOffline off;
    off.H_n = MatrixXd::Identity(2, 2);
    off.Phi_n = MatrixXd::Identity(2, 2);
    off.z_min = VectorXd::Constant(2, -1.0);
    off.z_max = VectorXd::Constant(2, 1.0);
    const VectorXd p = (VectorXd(2) << -0.5, 3.0).finished();
    const auto r = fgm::fgm_solve(off, p, 1, VectorXd::Zero(2));
    EXPECT_EQ(r.z, (VectorXd(2) << 0.5, -1.0).finished());
    EXPECT_EQ(r.iterates.size(), 2u);
}

TEST(Iterate, MatchesOracleAfter200Iterations) {
    const auto& f = fixture();
    const auto off = transform::normalize_fgm(f.q);
    for (const auto& [x, ref] : samples(5, 3)) {
        const auto r = fgm::fgm_solve(off, transform::stack_parameter(x, ref), 200, VectorXd::Zero(f.q.n()));
        EXPECT_LT((r.z - f.oracle(x, ref)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Iterate, ResidualWithinConvergenceEnvelope) {
    const auto& f = fixture();
    const auto off = transform::normalize_fgm(f.q);
    for (const auto& [x, ref] : samples(5, 4)) {
        const VectorXd p = transform::stack_parameter(x, ref);
        const VectorXd h = off.Phi_n * p;
        const double fstar = fgm::objective(off, f.oracle(x, ref), h);
        const VectorXd z0 = VectorXd::Zero(f.q.n());
        const double delta0 = fgm::objective(off, z0, h) - fstar;
        const auto r = fgm::fgm_iterate(off, h, 40, z0);
        for (int i = 0; i <= 40; ++i)
            EXPECT_LE(r.objective[static_cast<std::size_t>(i)] - fstar,
                      fgm::residual_bound(off.kappa_n, i, delta0) + 1e-10)
                << "iteration " << i;
    }
}

TEST(IterationBound, Examples) {
    EXPECT_EQ(fgm::iteration_bound(4.0, 1.0, 1e-3), 11);
    EXPECT_EQ(fgm::iteration_bound(4.0, 1.0, 2.0), 0);
    EXPECT_EQ(fgm::iteration_bound(1.0, 1.0, 1e-3), 1);
    EXPECT_THROW(fgm::iteration_bound(0.5, 1.0, 1e-3), ConfigError);
    EXPECT_THROW(fgm::iteration_bound(4.0, 1.0, 0.0), ConfigError);
}

TEST(IterationBound, MonotoneInAccuracy) {
    int prev = 0;
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
        const int i = fgm::iteration_bound(100.0, 1.0, eps);
        EXPECT_GE(i, prev);
        prev = i;
    }
}

class FixedPointFgm : public ::testing::TestWithParam<int> {};

TEST_P(FixedPointFgm, DeterministicFeasibleAndWithinBounds) {
    const int b = GetParam();
    const auto& f = fixture();
    const auto off = transform::normalize_fgm(f.q, b);
    const int np = static_cast<int>(off.Phi_n.cols());
    const VectorXd p_lo = VectorXd::Constant(np, -1.5);
    const VectorXd p_hi = VectorXd::Constant(np, 1.5);
    const auto rep = certify::fgm_overflow_bounds(off, p_lo, p_hi);
    const auto formats = rep.formats();
    const fgm::FgmFxData d(off, formats);
    fgm::FgmFxOptions opt;
    opt.bounds = rep.runtime_bounds();
    opt.record_iterates = true;
    const auto eta = certify::eta_bound(certify::build_error_system(off), b, off.n(), 0.0, 20);
    const auto z0 = fxp::FxVector::quantize(VectorXd::Zero(off.n()), formats.z, fxp::Rounding::truncate);
    for (const auto& [x, ref] : samples(6, 7)) {
        const VectorXd p = transform::stack_parameter(x, ref).cwiseMax(p_lo).cwiseMin(p_hi);
        const auto ph = fxp::FxVector::quantize(p, formats.param, fxp::Rounding::truncate);
        const auto r1 = fgm::fgm_solve_fx(d, ph, 20, z0, opt);
        const auto r2 = fgm::fgm_solve_fx(d, ph, 20, z0, opt);
        EXPECT_EQ(r1.z.raw, r2.z.raw);
        for (const auto& it : r1.iterates) {
            EXPECT_TRUE((it.array() >= off.z_min.array()).all());
            EXPECT_TRUE((it.array() <= off.z_max.array()).all());
        }
        EXPECT_LE(r1.maxima.y, rep.runtime_bounds().y);
        EXPECT_LE(r1.maxima.t, rep.runtime_bounds().t);
        // fixed point stays within the certified distance of its exact-arithmetic twin
        const auto tw = fgm::fgm_twin(off, r1, 20, z0.to_double());
        EXPECT_LE((tw.z - r1.z.to_double()).norm(), eta.eta_bar.back());
    }
}

INSTANTIATE_TEST_SUITE_P(Bits, FixedPointFgm, ::testing::Values(10, 14, 18));

TEST(FixedPointFgm, InitialIterateOutsideBoxRejected) {
    const auto& f = fixture();
    const auto off = transform::normalize_fgm(f.q, 12);
    const VectorXd bound = VectorXd::Constant(off.Phi_n.cols(), 1.0);
    const auto formats = certify::fgm_overflow_bounds(off, -bound, bound).formats();
    const fgm::FgmFxData d(off, formats);
    const auto ph = fxp::FxVector::quantize(VectorXd::Zero(off.Phi_n.cols()), formats.param, fxp::Rounding::truncate);
    const auto z0 = fxp::FxVector::quantize(VectorXd::Constant(off.n(), 0.75), formats.z, fxp::Rounding::truncate);
    EXPECT_THROW(fgm::fgm_solve_fx(d, ph, 5, z0), ValidationError);
}
