// Acceptance run: one PASS/FAIL line per criterion, details on the following lines.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fixmpc/admm.hpp"
#include "fixmpc/bench.hpp"
#include "fixmpc/certify.hpp"
#include "fixmpc/fgm.hpp"
#include "fixmpc/hwmodel.hpp"
#include "fixmpc/penalty.hpp"
#include "fixmpc/qp_reference.hpp"

using namespace fixmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what) {
    std::printf("%s %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

template <class... Args>
void note(const char* fmt, Args... args) {
    std::printf("    ");
    std::printf(fmt, args...);
    std::printf("\n");
    std::fflush(stdout);
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double s() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// shared benchmark data, built once
struct Data {
    bench::Benchmark bi = bench::build_benchmark(bench::Variant::input_constrained);
    bench::Benchmark bs = bench::build_benchmark(bench::Variant::soft_constrained);
    std::vector<VectorXd> pos = bench::reference_positions(200, 1);
    bench::SimulationTrace tri = bench::baseline(bi, pos);
    bench::SimulationTrace trs = bench::baseline(bs, pos);
    transform::CondensedQp q = transform::condense(bi.problem);
};

VectorXd condensed_oracle(const transform::CondensedQp& q, const VectorXd& x, const transform::Setpoint& ref) {
    const int n = q.n();
    MatrixXd G(2 * n, n);
    G << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
    VectorXd g(2 * n);
    g << q.z_max, -q.z_min;
    const auto s = qp::solve_qp({q.H, q.linear_term(x, ref), MatrixXd(0, n), VectorXd(0), G, g});
    if (s.status != qp::QpStatus::optimal)
        throw Error("reference QP not optimal");
    return s.z;
}

// 1 ------------------------------------------------------------------------
void sample_times() {
    const std::vector<double> clocks{400e6, 230e6};
    bool ok = true;
    double worst = 0;
    auto compare = [&](hw::Family fam, long dim, long nx, const std::vector<int>& Ps, int iters, const double* v6,
                       const double* s6, const long* mult) {
        // the ADMM datapath always carries the warm-start register
        const auto rows = hw::sample_time_grid(fam, dim, nx, Ps, clocks, iters, 1, 1, fam == hw::Family::admm);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            worst = std::max({worst, std::abs(rows[i].sample_time_us[0] - v6[i]),
                              std::abs(rows[i].sample_time_us[1] - s6[i])});
            ok = ok && rows[i].multipliers == mult[i];
        }
    };
    const double fv[] = {1.95, 1.20, 0.98, 0.82, 0.64, 0.56, 0.53};
    const double fs[] = {3.39, 2.09, 1.70, 1.43, 1.10, 0.98, 0.91};
    const long fm[] = {42, 84, 126, 168, 336, 672, 1344};
    compare(hw::Family::fgm, 40, 8, {1, 2, 3, 4, 8, 16, 32}, 15, fv, fs, fm);
    const double av[] = {23.40, 12.60, 9.00, 7.20, 6.20, 5.40, 4.90};
    const double as[] = {40.70, 21.91, 15.65, 12.52, 10.78, 9.39, 8.52};
    const long am[] = {216, 432, 648, 864, 1080, 1296, 1512};
    compare(hw::Family::admm, 216, 0, {1, 2, 3, 4, 5, 6, 7}, 40, av, as, am);
    ok = ok && worst <= 0.01 + 1e-9;
    char buf[160];
    std::snprintf(buf, sizeof buf, "sample-time grids, worst deviation %.4f us, multiplier counts %s", worst,
                  ok ? "exact" : "checked");
    report(1, ok, buf);
}

// 2 ------------------------------------------------------------------------
void resources() {
    bool ok = true;
    for (int P = 1; P <= 32; ++P) {
        const long N = 40, nx = 8, nA = 216;
        const auto f = hw::fgm_resources(N, nx, P);
        ok = ok && f.multipliers == P * (N + 2) && f.adders == P * (N + 3) && f.memory_blocks == P * (N + nx + 4) &&
             f.memory_depth == (N + P - 1) / P;
        const auto a = hw::admm_resources(nA, P);
        ok = ok && a.multipliers == P * nA && a.adders == P * (nA + 15) && a.memory_blocks == P * (nA + 8) &&
             a.memory_depth == (nA + P - 1) / P;
    }
    report(2, ok, "resource formulas for P = 1..32, both families");
}

// 3 ------------------------------------------------------------------------
void error_bounds(const Data& D) {
    bool ok = true;
    const auto box = bench::parameter_envelope(D.tri);
    for (int b : {12, 16, 20}) {
        const auto off = transform::normalize_fgm(D.q, b);
        const auto rep = certify::fgm_overflow_bounds(off, box.first, box.second);
        const fgm::FgmFxData d(off, rep.formats());
        const auto sys = certify::build_error_system(off);
        const int I = 30;
        const auto eta = certify::eta_bound(sys, b, off.n(), 0.0, I);
        double worst = 0;
        int viol = 0, samples = 0;
        for (int k = 0; k < 200; k += 4, ++samples) {
            const VectorXd p = transform::stack_parameter(D.tri.X.col(k), D.tri.refs[static_cast<std::size_t>(k)]);
            const auto ph = fxp::FxVector::quantize(p, d.formats.param, fxp::Rounding::truncate);
            const auto z0 = fxp::FxVector::quantize(VectorXd::Zero(off.n()), d.formats.z, fxp::Rounding::truncate);
            fgm::FgmFxOptions o;
            o.record_iterates = true;
            const auto fx = fgm::fgm_solve_fx(d, ph, I, z0, o);
            const auto tw = fgm::fgm_twin(off, fx, I, VectorXd::Zero(off.n()));
            for (int i = 0; i <= I; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                const double e = (fx.iterates[ii] - tw.iterates[ii]).norm();
                worst = std::max(worst, e / eta.eta_bar[ii]);
                viol += e > eta.eta_bar[ii];
            }
        }
        note("fgm  b=%d: %d samples, worst observed/bound %.3f, violations %d", b, samples, worst, viol);
        ok = ok && viol == 0;
    }

    bench::SolverConfig cfg;
    cfg.method = bench::Method::admm;
    cfg.warm_start = false;
    cfg.iterations = 40;
    const auto s = transform::scale_sparse(transform::build_sparse(D.bs.problem), D.bs.problem.weights.sigma1);
    for (int b : {12, 16, 20}) {
        const auto off = transform::precompute_admm(s, cfg.rho, b, cfg.admm_settings);
        const auto Kh = transform::quantize_inward(s.K, b);
        const auto fmts = bench::calibrate_admm(D.bs, cfg, D.pos, b);
        const admm::AdmmFxData d(off, Kh, fmts);
        const auto sys = certify::build_error_system(off);
        const int I = cfg.iterations;
        const auto eta = certify::eta_bound(sys, b, s.n(), 0.0, I);
        double worst = 0;
        int viol = 0, samples = 0;
        const VectorXd zero = VectorXd::Zero(s.n());
        for (int k = 0; k < 200; k += 4, ++samples) {
            const VectorXd x = D.trs.X.col(k);
            const VectorXd h = s.h(D.trs.refs[static_cast<std::size_t>(k)]);
            const VectorXd xh = fxp::FxVector::quantize(x, fmts.param, fxp::Rounding::truncate).to_double();
            const auto bh = fxp::FxVector::quantize(s.b(xh), fmts.param, fxp::Rounding::nearest);
            const auto hh = fxp::FxVector::quantize(h, fmts.h, fxp::Rounding::nearest);
            const auto z0 = fxp::FxVector::quantize(zero, fmts.z, fxp::Rounding::nearest);
            const auto w0 = fxp::FxVector::quantize(zero, fmts.w, fxp::Rounding::nearest);
            admm::AdmmFxOptions o;
            o.record_iterates = true;
            const auto fx = admm::admm_solve_fx(d, hh, bh, I, z0, w0, o);
            const auto tw = admm::admm_twin(off, Kh, s.H, fx, hh.to_double(), I, zero, zero);
            for (int i = 0; i <= I; ++i) {
                const auto ii = static_cast<std::size_t>(i);
                const double e = (fx.iterates[ii] - tw.iterates[ii]).norm();
                worst = std::max(worst, e / eta.eta_bar[ii]);
                viol += e > eta.eta_bar[ii];
            }
        }
        note("admm b=%d: %d samples, worst observed/bound %.3f, violations %d", b, samples, worst, viol);
        ok = ok && viol == 0;
    }
    report(3, ok, "observed fixed-point error within the bound at every iteration (b = 12, 16, 20)");
}

// 4 ------------------------------------------------------------------------
void stability(const Data& D) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd;
    int unstable = 0, root_disagree = 0;
    double worst = 0;
    for (int k = 0; k < 1000; ++k) {
        const int n = 1 + static_cast<int>(gen() % 8);
        // random symmetric H_n with spectrum in (0, 1], largest exactly 1
        const MatrixXd Qr = MatrixXd::NullaryExpr(n, n, [&] { return nd(gen); }).householderQr().householderQ();
        VectorXd ev = VectorXd::NullaryExpr(n, [&] { return 1e-3 + (1.0 - 1e-3) * u(gen); });
        ev[0] = 1.0;
        transform::FgmOffline off;
        off.H_n = Qr * ev.asDiagonal() * Qr.transpose();
        off.H_n = 0.5 * (off.H_n + off.H_n.transpose()).eval();
        off.beta = u(gen) * (1.0 - 1e-6);
        off.Phi_n = MatrixXd::Zero(n, 1);
        const auto sys = certify::build_error_system(off);
        const auto sc = certify::schur_check(sys);
        worst = std::max(worst, sys.spectral_radius);
        unstable += !sc.stable;
        root_disagree += sc.roots_ok != sc.stable;
    }
    note("fgm: 1000 random (H_n, beta) draws, max spectral radius %.6f, unstable %d, root-test disagreements %d",
         worst, unstable, root_disagree);
    bool ok = unstable == 0 && root_disagree == 0;

    const auto s = transform::scale_sparse(transform::build_sparse(D.bs.problem), D.bs.problem.weights.sigma1);
    transform::AdmmSettings st;
    st.enforce_consistency = false;
    double prev = 0;
    for (double rho : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const auto off = transform::precompute_admm(s, rho, 16, st);
        const auto sys = certify::build_error_system(off);
        note("admm: rho=%g  rho*||M11 hat|| = %.4f", rho, off.rho_m11_norm);
        ok = ok && off.rho_m11_norm < 1.0 && certify::schur_check(sys).stable;
        ok = ok && off.rho_m11_norm >= prev;
        prev = off.rho_m11_norm;
    }
    report(4, ok, "error dynamics Schur stable (random FGM draws, ADMM over the rho set)");
}

// 5 ------------------------------------------------------------------------
void overflow(const Data& D) {
    const auto box = bench::parameter_envelope(D.tri);
    const int b = 16;
    const auto off = transform::normalize_fgm(D.q, b);
    const auto rep = certify::fgm_overflow_bounds(off, box.first, box.second);
    int counts[2] = {0, 0};
    long iters[2] = {0, 0};
    const int under_bits[2] = {0, 2};
    for (int u = 0; u < 2; ++u) {
        std::mt19937_64 g(7);
        const fgm::FgmFxData d(off, rep.formats(under_bits[u]));
        for (int s = 0; s < 200; ++s) {
            VectorXd p(box.first.size());
            for (Eigen::Index i = 0; i < p.size(); ++i)
                p[i] = (g() & 1) ? box.second[i] : box.first[i];
            if (s < 40) // vertex aligned with row s of Phi_n
                for (Eigen::Index i = 0; i < p.size(); ++i)
                    p[i] = off.Phi_n(s, i) >= 0 ? box.second[i] : box.first[i];
            iters[u] += 50;
            try {
                const auto ph = fxp::FxVector::quantize(p, d.formats.param, fxp::Rounding::truncate);
                const auto z0 =
                    fxp::FxVector::quantize(VectorXd::Zero(off.n()), d.formats.z, fxp::Rounding::truncate);
                fgm::fgm_solve_fx(d, ph, 50, z0);
            } catch (const Error&) {
                ++counts[u];
            }
        }
    }
    note("b=16, full allocation: %d overflows in %ld iterations", counts[0], iters[0]);
    note("b=16, two integer bits short: %d overflowing solves in %ld iterations", counts[1], iters[1]);
    report(5, counts[0] == 0 && counts[1] >= 1, "overflow-free at the certified word lengths, not when 2 bits short");
}

// 6 ------------------------------------------------------------------------
void costs(const Data& D) {
    std::vector<int> bg;
    for (int b = 10; b <= 20; ++b)
        bg.push_back(b);

    bench::SolverConfig fcfg;
    fcfg.method = bench::Method::fgm;
    const auto ft = bench::cost_table(D.bi, fcfg, bg, {5, 10, 15, 20}, D.tri, D.pos, 1);
    std::printf("    fgm relative cost (%%), baseline J = %.6f\n", ft.baseline);
    std::printf("%s", ft.csv().c_str());

    bench::SolverConfig acfg;
    acfg.method = bench::Method::admm;
    acfg.warm_start = true;
    acfg.scaling = transform::SoftScaling::multiply;
    const auto at = bench::cost_table(D.bs, acfg, bg, {10, 20, 40}, D.trs, D.pos, 1);
    std::printf("    admm relative cost (%%), baseline J = %.6f\n", at.baseline);
    std::printf("%s", at.csv().c_str());

    auto err = [](const bench::CostComparison& t, int I, int b) {
        const auto& c = t.at(I, b);
        return c.error.empty() ? c.relative_percent : std::numeric_limits<double>::infinity();
    };
    const bool a = std::abs(err(ft, 15, 16)) < 0.5;
    bool bb = true;
    for (int I : {10, 15, 20})
        bb = bb && err(ft, I, 10) > 5.0;
    const bool c = std::abs(err(at, 40, 18)) < 2.0;
    const bool d = err(at, 40, 10) > 10.0;
    bool e = true;
    for (const auto* t : {&ft, &at})
        for (int I : t->I_grid)
            for (int b = 12; b < 20; ++b)
                e = e && std::abs(err(*t, I, b + 1)) <= std::abs(err(*t, I, b)) + 0.3;
    note("(a) fgm b=16 I=15 |err| < 0.5%%: %s (%.3f%%)", a ? "yes" : "no", err(ft, 15, 16));
    note("(b) fgm b=10 err > 5%% for I >= 10: %s (%.3f%%, %.3f%%, %.3f%%)", bb ? "yes" : "no", err(ft, 10, 10),
         err(ft, 15, 10), err(ft, 20, 10));
    note("(c) admm b=18 I=40 |err| < 2%%: %s (%.3f%%)", c ? "yes" : "no", err(at, 40, 18));
    note("(d) admm b=10 I=40 err > 10%%: %s (%.3f%%)", d ? "yes" : "no", err(at, 40, 10));
    note("(e) |err| nonincreasing in b from 12 to 20 within 0.3%%: %s", e ? "yes" : "no");
    report(6, a && bb && c && d && e, "closed-loop cost tables");
}

// 7 ------------------------------------------------------------------------
model::MpcProblem random_small(std::mt19937_64& gen, bool soft) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.3, 1.0);
    model::MpcProblem p;
    const int nx = 2, nu = 1;
    MatrixXd A = MatrixXd::NullaryExpr(nx, nx, [&] { return nd(gen); });
    A *= 0.95 / std::max(1e-9, A.eigenvalues().cwiseAbs().maxCoeff());
    p.model.A = A;
    p.model.B = MatrixXd::NullaryExpr(nx, nu, [&] { return nd(gen); });
    p.weights.Q = MatrixXd::Identity(nx, nx);
    p.weights.R = MatrixXd::Identity(nu, nu) * ud(gen);
    p.weights.S = MatrixXd::Zero(nx, nu);
    p.weights.QN = MatrixXd::Identity(nx, nx);
    p.constraints.u_min = VectorXd::Constant(nu, -ud(gen));
    p.constraints.u_max = VectorXd::Constant(nu, ud(gen));
    p.constraints.x_min.resize(0);
    p.constraints.x_max.resize(0);
    p.constraints.center.resize(0);
    p.constraints.radius.resize(0);
    p.horizon = soft ? 3 : 5;
    if (soft) {
        p.weights.sigma1 = 2.0;
        p.weights.sigma2 = 1.0;
        p.constraints.hard = {1};
        p.constraints.x_min = VectorXd::Constant(1, -5.0);
        p.constraints.x_max = VectorXd::Constant(1, 5.0);
        p.constraints.soft = {0};
        p.constraints.center = VectorXd::Constant(1, 0.1 * nd(gen));
        p.constraints.radius = VectorXd::Constant(1, ud(gen));
    }
    return p;
}

// Projection onto {|x - c| <= r + d, d >= 0} by enumerating active sets.
std::pair<double, double> cone_oracle(double x0, double d0, double c, double r) {
    const Eigen::Vector2d v(x0, d0);
    const Eigen::Vector2d a[3] = {{1, -1}, {-1, -1}, {0, -1}};
    const double rhs[3] = {c + r, r - c, 0.0};
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector2d arg = v;
    for (unsigned mask = 0; mask < 8; ++mask) {
        std::vector<int> act;
        for (int k = 0; k < 3; ++k)
            if (mask & (1u << k))
                act.push_back(k);
        if (act.size() > 2)
            continue;
        Eigen::Vector2d p = v;
        if (!act.empty()) {
            MatrixXd A(static_cast<Eigen::Index>(act.size()), 2);
            VectorXd b(static_cast<Eigen::Index>(act.size()));
            for (std::size_t k = 0; k < act.size(); ++k) {
                A.row(static_cast<Eigen::Index>(k)) = a[act[k]].transpose();
                b[static_cast<Eigen::Index>(k)] = rhs[act[k]];
            }
            if (Eigen::FullPivLU<MatrixXd>(A * A.transpose()).rank() < A.rows())
                continue;
            p = v - A.transpose() * (A * A.transpose()).inverse() * (A * v - b);
        }
        bool feasible = true;
        for (int k = 0; k < 3; ++k)
            feasible = feasible && a[k].dot(p) <= rhs[k] + 1e-12;
        if (feasible && (p - v).squaredNorm() < best) {
            best = (p - v).squaredNorm();
            arg = p;
        }
    }
    return {arg[0], arg[1]};
}

void double_precision(const Data& D) {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> ud(-1.5, 1.5);
    double fgm_small = 0, admm_small = 0, fgm_bench = 0, admm_bench = 0, cone = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto p = random_small(gen, false);
        const auto q = transform::condense(p);
        const auto off = transform::normalize_fgm(q);
        const VectorXd x = VectorXd::NullaryExpr(2, [&] { return ud(gen); });
        const auto ref = transform::Setpoint::zero(2, 1);
        const auto r = fgm::fgm_solve(off, transform::stack_parameter(x, ref), 200, VectorXd::Zero(q.n()));
        fgm_small = std::max(fgm_small, (r.z - condensed_oracle(q, x, ref)).cwiseAbs().maxCoeff());
    }
    for (int rep = 0; rep < 20; ++rep) {
        const auto p = random_small(gen, true);
        const auto s = transform::build_sparse(p);
        const auto off = transform::precompute_admm(s, rep % 2 ? 1.0 : 2.0);
        const VectorXd x = VectorXd::NullaryExpr(2, [&] { return ud(gen); });
        const auto ref = qp::solve_qp(transform::to_qp(s, x, s.h()).qp);
        const auto r = admm::admm_solve(off, s, x, s.h(), 2000, VectorXd::Zero(s.n()), VectorXd::Zero(s.n()));
        admm_small = std::max(admm_small, (r.z - ref.z).cwiseAbs().maxCoeff());
    }
    {
        const auto off = transform::normalize_fgm(D.q);
        const auto s = transform::build_sparse(D.bs.problem);
        const auto aoff = transform::precompute_admm(s, 2.0);
        for (int k = 0; k < 200; k += 20) {
            const auto kk = static_cast<std::size_t>(k);
            const VectorXd xi = D.tri.X.col(k);
            const auto r = fgm::fgm_solve(off, transform::stack_parameter(xi, D.tri.refs[kk]), 200,
                                          VectorXd::Zero(D.q.n()));
            fgm_bench = std::max(fgm_bench, (r.z - condensed_oracle(D.q, xi, D.tri.refs[kk])).cwiseAbs().maxCoeff());
            const VectorXd xs = D.trs.X.col(k);
            const VectorXd h = s.h(D.trs.refs[kk]);
            const auto ref = qp::solve_qp(transform::to_qp(s, xs, h).qp);
            const auto a = admm::admm_solve(aoff, s, xs, h, 2000, VectorXd::Zero(s.n()), VectorXd::Zero(s.n()));
            admm_bench = std::max(admm_bench, (a.z - ref.z).cwiseAbs().maxCoeff());
        }
    }
    std::mt19937_64 cg(12);
    std::uniform_real_distribution<double> cu(-3, 3), cr(0.1, 2);
    for (int k = 0; k < 1000; ++k) {
        const double x0 = cu(cg), d0 = cu(cg), c = 0.3 * cu(cg), r = cr(cg);
        const auto a = admm::project_cone(x0, d0, c, r);
        const auto o = cone_oracle(x0, d0, c, r);
        cone = std::max({cone, std::abs(a.first - o.first), std::abs(a.second - o.second)});
    }
    note("fgm  200 it:  small %.2e, benchmark %.2e", fgm_small, fgm_bench);
    note("admm 2000 it: small %.2e, benchmark %.2e", admm_small, admm_bench);
    note("cone projection vs enumeration: %.2e", cone);
    const bool ok = fgm_small < 1e-6 && fgm_bench < 1e-6 && admm_small < 1e-6 && admm_bench < 1e-6 && cone < 1e-9;
    report(7, ok, "double-precision solvers agree with the reference QP solver");
}

// 8 ------------------------------------------------------------------------
void penalty(const Data& D) {
    std::vector<VectorXd> xs;
    std::vector<transform::Setpoint> rs;
    for (int k = 0; k < 200; ++k) {
        xs.push_back(D.trs.X.col(k));
        rs.push_back(D.trs.refs[static_cast<std::size_t>(k)]);
    }
    const auto r8 = transform::exact_penalty_check(D.bs.problem, xs, rs);
    double slack8 = 0;
    int feas = 0;
    for (const auto& s : r8.samples)
        if (s.feasible) {
            ++feas;
            slack8 = std::max(slack8, s.max_slack);
        }
    auto p1 = D.bs.problem;
    p1.weights.sigma1 = 1.0;
    const auto r1 = transform::exact_penalty_check(p1, xs, rs);
    int nonzero1 = 0;
    for (const auto& s : r1.samples)
        nonzero1 += s.feasible && s.max_slack > 1e-6;
    note("sigma1=8: %d feasible samples, max multiplier %.3f, max slack %.2e", feas, r8.max_multiplier, slack8);
    note("sigma1=1: feasible samples with nonzero slack %d", nonzero1);
    report(8, slack8 <= 1e-6 && r8.exact() && nonzero1 >= 1, "exact penalty at sigma1 = 8, not at sigma1 = 1");
}

// 9 ------------------------------------------------------------------------
void envelope(const Data& D) {
    const auto off = transform::normalize_fgm(D.q);
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const auto pos = bench::reference_positions(50 * 25, 9);
    int viol = 0;
    double worst = 0;
    for (int k = 0; k < 50; ++k) {
        const VectorXd x = VectorXd::NullaryExpr(D.bi.problem.nx(), [&] { return ud(gen); });
        const auto ref = D.bi.setpoint(pos[static_cast<std::size_t>(25 * k)]);
        const VectorXd h = off.Phi_n * transform::stack_parameter(x, ref);
        const double fstar = fgm::objective(off, condensed_oracle(D.q, x, ref), h);
        const VectorXd z0 = VectorXd::Zero(off.n());
        const double delta0 = fgm::objective(off, z0, h) - fstar;
        const auto r = fgm::fgm_iterate(off, h, 60, z0);
        for (int i = 0; i <= 60; ++i) {
            const double gap = r.objective[static_cast<std::size_t>(i)] - fstar;
            const double bound = fgm::residual_bound(off.kappa_n, i, delta0);
            viol += gap > bound + 1e-10;
            if (bound > 1e-12)
                worst = std::max(worst, gap / bound);
        }
    }
    note("50 random states, 60 iterations: worst gap/bound %.3f, violations %d", worst, viol);
    report(9, viol == 0, "fgm suboptimality within the convergence envelope");
}

} // namespace

int main() {
    Timer total;
    sample_times();
    resources();
    const Data D;
    note("baselines: input J = %.6f, soft J = %.6f", D.tri.average_cost, D.trs.average_cost);
    error_bounds(D);
    stability(D);
    overflow(D);
    double_precision(D);
    penalty(D);
    envelope(D);
    costs(D);
    std::printf("%d of 9 criteria failed (%.0f s)\n", failures, total.s());
    return failures == 0 ? 0 : 1;
}
