// fixmpc command-line front end.
//
//   fixmpc validate problem.json
//   fixmpc solve problem.json --method fgm --b 16 --iters 15 --x0 0.1,0,...
//   fixmpc certify problem.json --method admm --b 18 --iters 40
//   fixmpc hwmodel --family fgm --Nnu 40 --P 1,2,4 --clock 400e6,230e6 --iters 15
//   fixmpc bench --variant soft --method admm --b 18 --iters 40
//
// Exit status: 0 success, 1 configuration or validation error, 2 solver or
// certification failure. Every run writes <out>/manifest.json.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fixmpc/admm.hpp"
#include "fixmpc/bench.hpp"
#include "fixmpc/certify.hpp"
#include "fixmpc/condense.hpp"
#include "fixmpc/errors.hpp"
#include "fixmpc/fgm.hpp"
#include "fixmpc/hwmodel.hpp"
#include "fixmpc/io.hpp"
#include "fixmpc/model.hpp"
#include "fixmpc/qp_reference.hpp"
#include "fixmpc/sparse.hpp"

namespace fs = std::filesystem;
using namespace fixmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

struct Globals {
    std::string out = "fixmpc-out";
    std::uint64_t seed = 1;
    std::string config;
};

// Settings shared by solve and certify.
struct SolverOptions {
    std::string problem;
    std::string method = "fgm";
    int b = 0; // 0: double precision
    int iters = 0;
    double rho = 2.0;
    std::optional<double> sigma1;
    std::optional<double> sigma2;
    std::string scale = "multiply";
    std::vector<double> x0;
    std::vector<double> xref;
    std::vector<double> uref;
    double param_bound = 0.0;
};

struct Run {
    Globals g;
    io::Manifest manifest;

    void output(const std::string& name, const std::string& content) {
        io::write_file((fs::path(g.out) / name).string(), content);
        manifest.add_output(name, content);
    }
    void artifact(const std::string& name, const std::string& content) {
        io::write_file((fs::path(g.out) / name).string(), content);
        manifest.add_artifact(name, content);
    }
    void finish() {
        manifest.seed = g.seed;
        io::write_file((fs::path(g.out) / "manifest.json").string(), manifest.to_json().dump(2) + "\n");
    }
};

VectorXd to_vector(const std::vector<double>& v, int n, const char* what) {
    if (v.empty())
        return VectorXd::Zero(n);
    if (static_cast<int>(v.size()) != n)
        throw ConfigError(std::string(what) + " needs " + std::to_string(n) + " entries");
    return Eigen::Map<const VectorXd>(v.data(), n);
}

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

model::MpcProblem load(const SolverOptions& o) {
    auto p = io::load_problem(o.problem);
    if (o.sigma1)
        p.weights.sigma1 = *o.sigma1;
    if (o.sigma2)
        p.weights.sigma2 = *o.sigma2;
    model::require_valid(p);
    return p;
}

transform::Setpoint setpoint(const model::MpcProblem& p, const SolverOptions& o) {
    return {to_vector(o.xref, p.nx(), "--xref"), to_vector(o.uref, p.nu(), "--uref")};
}

int default_iters(const SolverOptions& o) { return o.iters > 0 ? o.iters : (o.method == "admm" ? 40 : 15); }

/// Symmetric parameter box for the FGM overflow bounds.
std::pair<VectorXd, VectorXd> param_box(const VectorXd& p, double bound) {
    const double r = bound > 0.0 ? bound : std::max(1.0, 2.0 * p.cwiseAbs().maxCoeff());
    return {VectorXd::Constant(p.size(), -r), VectorXd::Constant(p.size(), r)};
}

transform::SparseQp sparse_for(const model::MpcProblem& p, const SolverOptions& o) {
    auto s = transform::build_sparse(p);
    if (p.weights.sigma1 > 0.0 && o.scale != "none")
        s = transform::scale_sparse(s, p.weights.sigma1,
                                    o.scale == "divide" ? transform::SoftScaling::divide : transform::SoftScaling::multiply);
    return s;
}

transform::AdmmSettings admm_settings() { return {.enforce_consistency = false}; }

void solve_fgm(Run& run, const SolverOptions& o, const model::MpcProblem& p) {
    const int I = default_iters(o);
    const auto q = transform::condense(p);
    const VectorXd x = to_vector(o.x0, p.nx(), "--x0");
    const auto ref = setpoint(p, o);
    const VectorXd par = transform::stack_parameter(x, ref);

    bench::OracleController oracle(p);
    oracle.control(x, ref);
    const VectorXd z_star = oracle.last_solution();

    const auto off = o.b > 0 ? transform::normalize_fgm(q, o.b) : transform::normalize_fgm(q);
    const VectorXd h = off.Phi_n * par;
    const double f_star = fgm::objective(off, z_star, h);
    const VectorXd z0 = fgm::project_box(VectorXd::Zero(q.n()), off.z_min, off.z_max);

    std::vector<io::TraceRow> rows;
    VectorXd z;
    if (o.b > 0) {
        const auto box = param_box(par, o.param_bound);
        const auto rep = certify::fgm_overflow_bounds(off, box.first, box.second);
        const auto formats = rep.formats();
        const fgm::FgmFxData d(off, formats);
        fgm::FgmFxOptions opt;
        opt.record_iterates = true;
        opt.bounds = rep.runtime_bounds();
        const auto fx = fgm::fgm_solve_fx(d, fxp::FxVector::quantize(par, formats.param, fxp::Rounding::truncate), I,
                                          fxp::FxVector::quantize(z0, formats.z, fxp::Rounding::truncate), opt);
        const auto twin = fgm::fgm_twin(off, fx, I, z0);
        const auto eta = certify::eta_bound(certify::build_error_system(off), o.b, off.n(), 0.0, I);
        const VectorXd hh = fx.h.to_double();
        for (int i = 0; i <= I; ++i) {
            const auto& zi = fx.iterates[static_cast<std::size_t>(i)];
            const double f = fgm::objective(off, zi, hh);
            rows.push_back({i, f, fgm::objective(off, zi, h) - f_star,
                            (zi - twin.iterates[static_cast<std::size_t>(i)]).norm(),
                            eta.eta_bar[static_cast<std::size_t>(i)]});
        }
        z = fx.z.to_double();
        run.artifact("artifact.json", io::fgm_artifact(off, formats).dump(2) + "\n");
        run.output("overflow.json", rep.to_json().dump(2) + "\n");
    } else {
        const auto r = fgm::fgm_solve(off, par, I, z0);
        for (int i = 0; i <= I; ++i)
            rows.push_back({i, r.objective[static_cast<std::size_t>(i)],
                            r.objective[static_cast<std::size_t>(i)] - f_star, 0.0, 0.0});
        z = r.z;
    }
    run.output("trace.csv", io::fgm_trace_csv(rows));
    const json sol = {{"method", "fgm"},
                      {"fraction_bits", o.b},
                      {"iterations", I},
                      {"z", vec_json(z)},
                      {"u0", vec_json(z.head(p.nu()))},
                      {"objective_gap", fgm::objective(off, z, h) - f_star},
                      {"max_deviation_from_reference_solution", (z - z_star).cwiseAbs().maxCoeff()}};
    run.output("solution.json", sol.dump(2) + "\n");
    std::cout << sol.dump(2) << "\n";
}

void solve_admm(Run& run, const SolverOptions& o, const model::MpcProblem& p) {
    const int I = default_iters(o);
    const auto s = sparse_for(p, o);
    const VectorXd x = to_vector(o.x0, p.nx(), "--x0");
    const auto ref = setpoint(p, o);
    const VectorXd h = s.h(ref);
    const VectorXd zero = VectorXd::Zero(s.n());

    const auto plain = transform::build_sparse(p);
    const auto oracle = qp::solve_qp(transform::to_qp(plain, x, plain.h(ref)).qp);
    if (oracle.status != qp::QpStatus::optimal)
        throw OracleFailure("reference QP did not converge");

    std::vector<io::TraceRow> rows;
    VectorXd z;
    const auto off_d = transform::precompute_admm(s, o.rho, std::nullopt, admm_settings());
    if (o.b > 0) {
        const auto off = transform::precompute_admm(s, o.rho, o.b, admm_settings());
        const auto K_hat = transform::quantize_inward(s.K, o.b);
        const auto mx = admm::simulate_maxima(off_d, s, {{x, h, zero, zero}}, I);
        const auto formats = admm::formats_from_maxima(mx, o.b);
        const admm::AdmmFxData d(off, K_hat, formats);
        const auto xh = fxp::FxVector::quantize(x, formats.param, fxp::Rounding::truncate).to_double();
        const auto bh = fxp::FxVector::quantize(s.b(xh), formats.param, fxp::Rounding::nearest);
        const auto hh = fxp::FxVector::quantize(h, formats.h, fxp::Rounding::nearest);
        admm::AdmmFxOptions opt;
        opt.record_iterates = true;
        const auto fx = admm::admm_solve_fx(d, hh, bh, I, fxp::FxVector::quantize(zero, formats.z, fxp::Rounding::nearest),
                                            fxp::FxVector::quantize(zero, formats.w, fxp::Rounding::nearest), opt);
        const auto twin = admm::admm_twin(off, K_hat, s.H, fx, hh.to_double(), I, zero, zero);
        const auto eta = certify::eta_bound(certify::build_error_system(off), o.b, s.n(), 0.0, I);
        for (int i = 1; i <= I; ++i) {
            const auto& zi = fx.iterates[static_cast<std::size_t>(i)];
            rows.push_back({i, s.objective(zi, h), fx.primal_residual[static_cast<std::size_t>(i - 1)],
                            (zi - twin.iterates[static_cast<std::size_t>(i)]).norm(),
                            eta.eta_bar[static_cast<std::size_t>(i)]});
        }
        z = fx.z.to_double();
        run.artifact("artifact.json", io::admm_artifact(off, K_hat, formats).dump(2) + "\n");
    } else {
        const auto r = admm::admm_solve(off_d, s, x, h, I, zero, zero);
        for (int i = 1; i <= I; ++i)
            rows.push_back({i, r.objective[static_cast<std::size_t>(i - 1)],
                            r.primal_residual[static_cast<std::size_t>(i - 1)], 0.0, 0.0});
        z = r.z;
    }
    run.output("trace.csv", io::admm_trace_csv(rows));
    const VectorXd zu = s.unscale(z);
    const json sol = {{"method", "admm"},
                      {"fraction_bits", o.b},
                      {"iterations", I},
                      {"rho", o.rho},
                      {"z", vec_json(zu)},
                      {"u0", vec_json(s.first_input(z))},
                      {"max_deviation_from_reference_solution", (zu - oracle.z).cwiseAbs().maxCoeff()}};
    run.output("solution.json", sol.dump(2) + "\n");
    std::cout << sol.dump(2) << "\n";
}

void certify_run(Run& run, const SolverOptions& o, double target_eta) {
    const auto p = load(o);
    if (o.b <= 0)
        throw ConfigError("certify needs --b");
    const int I = default_iters(o);
    json rep = {{"method", o.method}, {"fraction_bits", o.b}, {"iterations", I}};
    certify::ErrorSystem sys;
    int n = 0;
    if (o.method == "fgm") {
        const auto q = transform::condense(p);
        const auto off = transform::normalize_fgm(q, o.b);
        sys = certify::build_error_system(off);
        n = off.n();
        const VectorXd par = transform::stack_parameter(to_vector(o.x0, p.nx(), "--x0"), setpoint(p, o));
        const auto box = param_box(par, o.param_bound);
        const auto ov = certify::fgm_overflow_bounds(off, box.first, box.second);
        rep["overflow"] = ov.to_json();
        rep["momentum"] = off.beta;
        rep["kappa_n"] = off.kappa_n;
        rep["c"] = off.c;
        run.artifact("artifact.json", io::fgm_artifact(off, ov.formats()).dump(2) + "\n");
    } else {
        const auto s = sparse_for(p, o);
        const auto off = transform::precompute_admm(s, o.rho, o.b, admm_settings());
        sys = certify::build_error_system(off);
        n = s.n();
        rep["rho"] = off.rho;
        rep["rho_m11_norm"] = off.rho_m11_norm;
        rep["consistency_min_eigenvalue"] = off.consistency_min;
        rep["kkt_residual"] = off.kkt_residual;
        rep["F_quantization_error"] = off.F_quantization_error;
    }
    const auto schur = certify::schur_check(sys);
    rep["spectral_radius"] = sys.spectral_radius;
    rep["schur_stable"] = schur.stable;
    if (schur.roots_checked)
        rep["root_conditions_hold"] = schur.roots_ok;
    if (!schur.stable) {
        run.output("certificate.json", rep.dump(2) + "\n");
        throw UnstableSystemError("error recursion is not Schur stable (spectral radius " +
                                  std::to_string(sys.spectral_radius) + ")");
    }
    rep["error_bound"] = certify::series_json(certify::eta_bound(sys, o.b, n, 0.0, I));
    if (target_eta > 0.0)
        rep["min_fraction_bits"] = certify::min_fraction_bits(sys, n, target_eta);
    run.output("certificate.json", rep.dump(2) + "\n");
    std::cout << rep.dump(2) << "\n";
}

/// Applies a JSON config to options the command line left unset.
void apply_config(CLI::App* sub, const std::string& path) {
    const auto j = io::parse_json(io::read_file(path), path);
    if (!j.is_object())
        throw ConfigError(path + ": top level must be an object");
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt)
            throw ConfigError(path + ": unknown key '" + key + "' for " + sub->get_name());
        if (opt->count() > 0)
            continue;
        std::vector<std::string> vals;
        auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array())
            for (const auto& e : value)
                vals.push_back(text(e));
        else
            vals.push_back(text(value));
        opt->add_result(vals);
        opt->run_callback();
    }
}

// numbers and booleans keep their type in the manifest
json typed(const std::string& s) {
    auto j = json::parse(s, nullptr, false);
    if (j.is_discarded())
        return s;
    if (j.is_number() || j.is_boolean())
        return j;
    if (j.is_array() && std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_number(); }))
        return j;
    return s;
}

json typed(const std::vector<std::string>& v) {
    json out = json::array();
    for (const auto& s : v)
        out.push_back(typed(s));
    return out;
}

json echo(const CLI::App* sub) {
    json out = json::object();
    for (const auto* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help")
            continue;
        const auto& res = opt->results();
        if (!res.empty())
            out[name] = res.size() == 1 ? typed(res[0]) : typed(res);
        else if (!opt->get_default_str().empty())
            out[name] = typed(opt->get_default_str());
    }
    return out;
}

void add_solver_options(CLI::App* sub, SolverOptions& o) {
    sub->add_option("problem", o.problem, "problem JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--method", o.method, "fgm or admm")->check(CLI::IsMember({"fgm", "admm"}))->capture_default_str();
    sub->add_option("--b", o.b, "fraction bits (0: double precision)")->check(CLI::Range(0, 40))->capture_default_str();
    sub->add_option("--iters", o.iters, "iterations (default 15 for fgm, 40 for admm)")->check(CLI::NonNegativeNumber);
    sub->add_option("--rho", o.rho, "ADMM penalty (power of two for fixed point)")->capture_default_str();
    sub->add_option("--sigma1", o.sigma1, "override the L1 soft-constraint weight");
    sub->add_option("--sigma2", o.sigma2, "override the quadratic soft-constraint weight");
    sub->add_option("--scale", o.scale, "soft-constraint variable scaling for ADMM")
        ->check(CLI::IsMember({"multiply", "divide", "none"}))
        ->capture_default_str();
    sub->add_option("--x0", o.x0, "initial state")->delimiter(',');
    sub->add_option("--xref", o.xref, "state setpoint")->delimiter(',');
    sub->add_option("--uref", o.uref, "input setpoint")->delimiter(',');
    sub->add_option("--param-bound", o.param_bound, "FGM overflow box half-width on (x, x_ref, u_ref)")
        ->check(CLI::NonNegativeNumber);
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"Fixed-point MPC solvers: offline transformation, certification, hardware model, benchmark"};
    app.require_subcommand(1);
    app.fallthrough();
    Run run;
    app.add_option("--out", run.g.out, "output directory")->capture_default_str();
    app.add_option("--seed", run.g.seed, "seed of the single random generator")->capture_default_str();

    auto* validate = app.add_subcommand("validate", "check a problem file");
    std::string validate_file;
    validate->add_option("problem", validate_file, "problem JSON file")->required()->check(CLI::ExistingFile);

    SolverOptions solve_opt;
    auto* solve = app.add_subcommand("solve", "one QP solve with a per-iteration trace");
    add_solver_options(solve, solve_opt);

    SolverOptions cert_opt;
    double target_eta = 0.0;
    auto* cert = app.add_subcommand("certify", "error-recursion stability, error bound and overflow bounds");
    add_solver_options(cert, cert_opt);
    cert->add_option("--target-eta", target_eta, "also report the smallest b meeting this asymptotic error");

    std::string family = "fgm";
    long dim = 0;
    long nx = 0;
    std::vector<int> Ps{1, 2, 3, 4, 8, 16, 32};
    std::vector<double> clocks{400e6, 230e6};
    int hw_iters = 0;
    int lA = 1;
    int lM = 1;
    std::optional<bool> hw_warm;
    auto* hwm = app.add_subcommand("hwmodel", "sample-time and resource grid over P");
    hwm->add_option("--family", family, "fgm or admm")->check(CLI::IsMember({"fgm", "admm"}))->capture_default_str();
    hwm->add_option("--dim,--Nnu,--nA", dim, "decision dimension (N n_u for fgm, n_A for admm)")
        ->required()
        ->check(CLI::PositiveNumber);
    hwm->add_option("--nx", nx, "state dimension (fgm adder count)")->capture_default_str();
    hwm->add_option("--P", Ps, "parallelism levels")->delimiter(',')->capture_default_str();
    hwm->add_option("--clock", clocks, "clock frequencies in Hz; Virtex-6 first, then Spartan-6")
        ->delimiter(',')
        ->capture_default_str();
    hwm->add_option("--iters", hw_iters, "iterations (default 15 for fgm, 40 for admm)");
    hwm->add_option("--lA", lA, "adder latency")->capture_default_str();
    hwm->add_option("--lM", lM, "multiplier latency")->capture_default_str();
    hwm->add_option("--warm", hw_warm, "count the warm-start cycle (default on for admm)");

    std::string variant = "input";
    std::string bench_method = "fgm";
    std::vector<int> b_grid{10, 12, 14, 16, 18, 20};
    std::vector<int> I_grid;
    int steps = 200;
    int threads = 0;
    std::optional<bool> bench_warm;
    std::string bench_scale = "multiply";
    auto* bch = app.add_subcommand("bench", "closed-loop cost degradation on the oscillating-masses benchmark");
    bch->add_option("--variant", variant, "input or soft")->check(CLI::IsMember({"input", "soft"}))->capture_default_str();
    bch->add_option("--method", bench_method, "fgm or admm")->check(CLI::IsMember({"fgm", "admm"}))->capture_default_str();
    bch->add_option("--b", b_grid, "fraction bits")->delimiter(',')->capture_default_str();
    bch->add_option("--iters", I_grid, "iteration counts (default 5,10,15,20 for fgm, 10,20,40 for admm)")
        ->delimiter(',');
    bch->add_option("--steps", steps, "closed-loop steps")->check(CLI::PositiveNumber)->capture_default_str();
    bch->add_option("--threads", threads, "worker threads (0: FIXMPC_THREADS or all cores)");
    bch->add_option("--warm", bench_warm, "warm start (default on for admm)");
    bch->add_option("--scale", bench_scale, "soft-constraint variable scaling for ADMM")
        ->check(CLI::IsMember({"multiply", "divide", "none"}))
        ->capture_default_str();

    for (auto* sub : {validate, solve, cert, hwm, bch})
        sub->add_option("--config", run.g.config, "JSON file with defaults for this subcommand's options");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!run.g.config.empty())
            apply_config(sub, run.g.config);
        fs::create_directories(run.g.out);
        run.manifest.command = sub->get_name();
        run.manifest.config = echo(sub);

        int status = 0;
        try {
            if (sub == validate) {
                const auto p = io::load_problem(validate_file);
                const auto rep = model::validate(p);
                json checks = json::array();
                for (const auto& c : rep.checks)
                    checks.push_back({{"name", c.name}, {"min_eigenvalue", c.min_eigenvalue}, {"ok", c.ok}});
                const json out = {{"ok", rep.ok()}, {"checks", checks}, {"failures", rep.failures},
                                  {"nx", p.nx()},   {"nu", p.nu()},   {"horizon", p.horizon}};
                run.output("validation.json", out.dump(2) + "\n");
                if (!rep.ok()) {
                    std::cerr << "invalid problem: " << rep.message() << "\n";
                    status = 1;
                } else {
                    std::cout << "ok: nx=" << p.nx() << " nu=" << p.nu() << " N=" << p.horizon << "\n";
                }
            } else if (sub == solve) {
                const auto p = load(solve_opt);
                if (solve_opt.method == "fgm")
                    solve_fgm(run, solve_opt, p);
                else
                    solve_admm(run, solve_opt, p);
            } else if (sub == cert) {
                certify_run(run, cert_opt, target_eta);
            } else if (sub == hwm) {
                const auto fam = family == "admm" ? hw::Family::admm : hw::Family::fgm;
                const int iters = hw_iters > 0 ? hw_iters : (fam == hw::Family::admm ? 40 : 15);
                const bool warm = hw_warm.value_or(fam == hw::Family::admm);
                const auto rows = hw::sample_time_grid(fam, dim, nx, Ps, clocks, iters, lA, lM, warm);
                const auto csv = hw::grid_csv(rows, clocks);
                run.output("hwmodel.csv", csv);
                std::cout << csv;
            } else if (sub == bch) {
                const auto v = variant == "soft" ? bench::Variant::soft_constrained : bench::Variant::input_constrained;
                const auto b = bench::build_benchmark(v);
                bench::SolverConfig cfg;
                cfg.method = bench_method == "admm" ? bench::Method::admm : bench::Method::fgm;
                cfg.warm_start = bench_warm.value_or(cfg.method == bench::Method::admm);
                cfg.scale_soft = bench_scale != "none";
                cfg.scaling = bench_scale == "divide" ? transform::SoftScaling::divide : transform::SoftScaling::multiply;
                if (cfg.method == bench::Method::fgm)
                    transform::condense(b.problem); // rejects the soft variant early
                if (I_grid.empty())
                    I_grid = cfg.method == bench::Method::admm ? std::vector<int>{10, 20, 40}
                                                               : std::vector<int>{5, 10, 15, 20};
                const auto positions = bench::reference_positions(steps, run.g.seed);
                const auto base = bench::baseline(b, positions);
                const auto table = bench::cost_table(b, cfg, b_grid, I_grid, base, positions,
                                                     threads > 0 ? threads : bench::thread_count());
                run.output("cost_table.csv", table.csv());
                run.output("trace_baseline.csv", io::simulation_csv(base.X, base.U, base.refs, base.stage_cost));
                for (const auto& c : table.cells) {
                    if (!c.error.empty()) {
                        std::cerr << "I_max=" << c.iterations << " b=" << c.fraction_bits << ": " << c.error << "\n";
                        status = 2;
                        continue;
                    }
                    run.output("trace_I" + std::to_string(c.iterations) + "_b" + std::to_string(c.fraction_bits) +
                                   ".csv",
                               io::simulation_csv(c.trace.X, c.trace.U, c.trace.refs, c.trace.stage_cost));
                }
                std::cout << "baseline average cost " << base.average_cost << "\n" << table.csv();
            }
        } catch (...) {
            run.finish();
            throw;
        }
        run.finish();
        return status;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "invalid problem: " << e.what() << "\n";
        return 1;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return 1;
    } catch (const NotCondensableError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int main(int argc, char** argv) { return run(argc, argv); }
