#pragma once

/**
 * @file
 * @brief JSON problem files, bit-exact offline artifacts, run manifests and
 * CSV traces.
 *
 * Needs OpenSSL's libcrypto for the content hashes.
 */

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <Eigen/Dense>

#include "admm.hpp"
#include "errors.hpp"
#include "fgm.hpp"
#include "fxp.hpp"
#include "json.hpp"
#include "model.hpp"

namespace fixmpc::io {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace detail {

inline void allow_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
    if (!j.is_object())
        throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items())
        if (!keys.count(k))
            throw ConfigError("unknown key '" + k + "' in " + where);
}

inline const json& need(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key))
        throw ConfigError("missing key '" + key + "' in " + where);
    return j.at(key);
}

/// Number or the strings "inf" / "-inf".
inline double number(const json& v, const std::string& what) {
    if (v.is_number())
        return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf")
            return model::kInf;
        if (s == "-inf")
            return -model::kInf;
    }
    throw ConfigError(what + ": expected a number or \"inf\"/\"-inf\"");
}

inline VectorXd vector(const json& v, const std::string& what) {
    if (!v.is_array())
        throw ConfigError(what + " must be an array");
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = number(v[i], what);
    return out;
}

/// Row-major nested arrays; [] is a 0x0 matrix.
inline MatrixXd matrix(const json& v, const std::string& what) {
    if (!v.is_array())
        throw ConfigError(what + " must be an array of rows");
    if (v.empty())
        return MatrixXd(0, 0);
    const auto rows = v.size();
    const auto cols = v[0].is_array() ? v[0].size() : 0;
    MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols)
            throw DimensionError(what + " has ragged rows");
        for (std::size_t j = 0; j < cols; ++j) {
            const double x = number(v[i][j], what);
            if (!std::isfinite(x))
                throw ConfigError(what + " entries must be finite");
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
        }
    }
    return out;
}

/// 1-based index list to 0-based.
inline std::vector<int> indices(const json& v, const std::string& what) {
    if (!v.is_array())
        throw ConfigError(what + " must be an array of 1-based indices");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer() || e.get<long>() < 1)
            throw ConfigError(what + " entries must be integers >= 1");
        out.push_back(static_cast<int>(e.get<long>()) - 1);
    }
    return out;
}

} // namespace detail

/// Builds a problem from its JSON description (schema in docs/problem-schema.md).
/// Structure is checked; convexity is left to model::validate.
inline model::MpcProblem problem_from_json(const json& j) {
    using namespace detail;
    allow_keys(j, {"model", "weights", "constraints", "horizon"}, "problem");
    model::MpcProblem p;

    const auto& m = need(j, "model", "problem");
    allow_keys(m, {"A", "B", "A_c", "B_c", "Ts"}, "model");
    if (m.contains("A_c")) {
        if (m.contains("A") || m.contains("B"))
            throw ConfigError("model: give either A/B or A_c/B_c/Ts");
        const double Ts = need(m, "Ts", "model").get<double>();
        p.model = model::discretize_zoh(matrix(need(m, "A_c", "model"), "A_c"), matrix(need(m, "B_c", "model"), "B_c"),
                                        Ts);
    } else {
        p.model.A = matrix(need(m, "A", "model"), "A");
        p.model.B = matrix(need(m, "B", "model"), "B");
    }
    p.model.check();
    const auto nx = p.model.A.rows();
    const auto nu = p.model.B.cols();

    const auto& w = need(j, "weights", "problem");
    allow_keys(w, {"Q", "R", "S", "Q_N", "sigma1", "sigma2"}, "weights");
    p.weights.Q = matrix(need(w, "Q", "weights"), "Q");
    p.weights.R = matrix(need(w, "R", "weights"), "R");
    p.weights.S = w.contains("S") ? matrix(w["S"], "S") : MatrixXd::Zero(nx, nu);
    p.weights.QN = w.contains("Q_N") ? matrix(w["Q_N"], "Q_N") : p.weights.Q;
    p.weights.sigma1 = w.value("sigma1", 0.0);
    p.weights.sigma2 = w.value("sigma2", 0.0);

    const auto& h = need(j, "horizon", "problem");
    if (!h.is_number_integer())
        throw ConfigError("horizon must be an integer");
    p.horizon = h.get<int>();

    const auto& c = need(j, "constraints", "problem");
    allow_keys(c, {"u_min", "u_max", "hard", "soft", "rate"}, "constraints");
    p.constraints.u_min = vector(need(c, "u_min", "constraints"), "u_min");
    p.constraints.u_max = vector(need(c, "u_max", "constraints"), "u_max");
    p.constraints.x_min.resize(0);
    p.constraints.x_max.resize(0);
    p.constraints.center.resize(0);
    p.constraints.radius.resize(0);
    if (c.contains("hard")) {
        const auto& hd = c["hard"];
        allow_keys(hd, {"indices", "x_min", "x_max"}, "constraints.hard");
        p.constraints.hard = indices(need(hd, "indices", "constraints.hard"), "hard.indices");
        p.constraints.x_min = vector(need(hd, "x_min", "constraints.hard"), "hard.x_min");
        p.constraints.x_max = vector(need(hd, "x_max", "constraints.hard"), "hard.x_max");
    }
    if (c.contains("soft")) {
        const auto& sf = c["soft"];
        allow_keys(sf, {"indices", "center", "radius"}, "constraints.soft");
        p.constraints.soft = indices(need(sf, "indices", "constraints.soft"), "soft.indices");
        p.constraints.center = vector(need(sf, "center", "constraints.soft"), "soft.center");
        p.constraints.radius = vector(need(sf, "radius", "constraints.soft"), "soft.radius");
    }
    model::check_structure(p);
    if (c.contains("rate")) {
        const auto& rt = c["rate"];
        allow_keys(rt, {"du_min", "du_max"}, "constraints.rate");
        p = model::augment_for_rate_constraints(p, vector(need(rt, "du_min", "constraints.rate"), "rate.du_min"),
                                                vector(need(rt, "du_max", "constraints.rate"), "rate.du_max"));
    }
    return p;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path);
    out << content;
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

inline model::MpcProblem load_problem(const std::string& path) {
    const auto j = parse_json(read_file(path), path);
    try {
        return problem_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Hash of the content as git computes it for a blob: sha1("blob <len>\0" + data).
inline std::string git_blob_hash(const std::string& data) {
    const std::string header = "blob " + std::to_string(data.size()) + '\0';
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx)
        throw Error("cannot allocate hash context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok)
        throw Error("sha1 failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

// Offline artifacts. Matrices, bounds and scalars are stored as raw integers
// with their format so loading reproduces the fixed-point data bit for bit.

inline json format_json(const fxp::FxFormat& f) {
    return {{"integer_bits", f.integer_bits()}, {"fraction_bits", f.fraction_bits()}};
}

inline fxp::FxFormat format_from_json(const json& j) {
    detail::allow_keys(j, {"integer_bits", "fraction_bits"}, "format");
    return {j.at("integer_bits").get<int>(), j.at("fraction_bits").get<int>()};
}

inline json raw_json(const fxp::RawVector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v[i]);
    return out;
}

inline json raw_json(const fxp::FxMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        rows.push_back(raw_json(fxp::RawVector(m.raw.row(i).transpose())));
    return {{"format", format_json(m.format)}, {"raw", std::move(rows)}};
}

inline double from_raw(const json& v, int b) {
    return std::ldexp(static_cast<double>(v.get<fxp::raw_t>()), -b);
}

inline VectorXd grid_vector(const json& j, int b) {
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = from_raw(j[static_cast<std::size_t>(i)], b);
    return v;
}

inline MatrixXd grid_matrix(const json& j, int b) {
    const auto& rows = j.at("raw");
    const auto cols = rows.empty() ? 0 : rows[0].size();
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        m.row(static_cast<Eigen::Index>(i)) = grid_vector(rows[i], b).transpose();
    return m;
}

struct FgmArtifact {
    transform::FgmOffline offline;
    fgm::FgmFormats formats;
};

inline json fgm_artifact(const transform::FgmOffline& off, const fgm::FgmFormats& f) {
    const fgm::FgmFxData d(off, f);
    return {{"kind", "fgm"},
            {"fraction_bits", f.fraction_bits()},
            {"formats",
             {{"z", format_json(f.z)},
              {"y", format_json(f.y)},
              {"inter", format_json(f.inter)},
              {"h", format_json(f.h)},
              {"t", format_json(f.t)},
              {"product", format_json(f.product)},
              {"param", format_json(f.param)}}},
            {"iteration_matrix", raw_json(d.G)},
            {"Phi_n", raw_json(d.Phi)},
            {"beta", d.beta},
            {"z_min", raw_json(d.lo)},
            {"z_max", raw_json(d.hi)},
            {"c", off.c},
            {"kappa_n", off.kappa_n},
            {"scale", off.scale},
            {"lambda_min", off.lambda_min},
            {"lambda_max", off.lambda_max}};
}

inline FgmArtifact fgm_artifact_from_json(const json& j) {
    if (j.at("kind") != "fgm")
        throw ConfigError("not an FGM artifact");
    const int b = j.at("fraction_bits").get<int>();
    const auto& f = j.at("formats");
    const fgm::FgmFormats formats{format_from_json(f.at("z")),     format_from_json(f.at("y")),
                                  format_from_json(f.at("inter")), format_from_json(f.at("h")),
                                  format_from_json(f.at("t")),     format_from_json(f.at("product")),
                                  format_from_json(f.at("param"))};
    transform::FgmOffline off;
    off.fraction_bits = b;
    const MatrixXd G = grid_matrix(j.at("iteration_matrix"), b);
    off.H_n = MatrixXd::Identity(G.rows(), G.cols()) - G;
    off.Phi_n = grid_matrix(j.at("Phi_n"), b);
    off.beta = from_raw(j.at("beta"), b);
    off.z_min = grid_vector(j.at("z_min"), b);
    off.z_max = grid_vector(j.at("z_max"), b);
    off.c = j.at("c").get<double>();
    off.kappa_n = j.at("kappa_n").get<double>();
    off.scale = j.at("scale").get<double>();
    off.lambda_min = j.at("lambda_min").get<double>();
    off.lambda_max = j.at("lambda_max").get<double>();
    return {off, formats};
}

struct AdmmArtifact {
    transform::AdmmOffline offline;
    transform::KSet K;
    admm::AdmmFormats formats;
};

inline const char* bound_name(transform::Bound k) {
    switch (k) {
    case transform::Bound::box: return "box";
    case transform::Bound::cone_x: return "cone_x";
    case transform::Bound::cone_d: return "cone_d";
    default: return "free";
    }
}

inline transform::Bound bound_from_name(const std::string& s) {
    if (s == "box")
        return transform::Bound::box;
    if (s == "cone_x")
        return transform::Bound::cone_x;
    if (s == "cone_d")
        return transform::Bound::cone_d;
    if (s == "free")
        return transform::Bound::free;
    throw ConfigError("unknown bound kind '" + s + "'");
}

inline json admm_artifact(const transform::AdmmOffline& off, const transform::KSet& K, const admm::AdmmFormats& f) {
    const admm::AdmmFxData d(off, K, f);
    json kinds = json::array();
    for (auto k : d.K.kind)
        kinds.push_back(bound_name(k));
    json cones = json::array();
    for (std::size_t i = 0; i < d.K.cones.size(); ++i)
        cones.push_back({{"x", d.K.cones[i].ix},
                         {"slack", d.K.cones[i].id},
                         {"center", d.K.cones[i].c},
                         {"radius", d.K.cones[i].r},
                         {"stage", K.cones[i].stage}});
    return {{"kind", "admm"},
            {"fraction_bits", f.fraction_bits()},
            {"formats",
             {{"z", format_json(f.z)},
              {"y", format_json(f.y)},
              {"w", format_json(f.w)},
              {"v", format_json(f.v)},
              {"acc", format_json(f.acc)},
              {"h", format_json(f.h)},
              {"param", format_json(f.param)}}},
            {"rho", off.rho},
            {"M11", raw_json(d.M11)},
            {"M12", raw_json(d.M12)},
            {"bounds", std::move(kinds)},
            {"lo", raw_json(d.K.lo)},
            {"hi", raw_json(d.K.hi)},
            {"cones", std::move(cones)},
            {"kkt_residual", off.kkt_residual},
            {"rho_m11_norm", off.rho_m11_norm},
            {"consistency_min", off.consistency_min},
            {"F_quantization_error", off.F_quantization_error}};
}

inline AdmmArtifact admm_artifact_from_json(const json& j) {
    if (j.at("kind") != "admm")
        throw ConfigError("not an ADMM artifact");
    const int b = j.at("fraction_bits").get<int>();
    const auto& f = j.at("formats");
    const admm::AdmmFormats formats{format_from_json(f.at("z")),   format_from_json(f.at("y")),
                                    format_from_json(f.at("w")),   format_from_json(f.at("v")),
                                    format_from_json(f.at("acc")), format_from_json(f.at("h")),
                                    format_from_json(f.at("param"))};
    transform::AdmmOffline off;
    off.fraction_bits = b;
    off.rho = j.at("rho").get<double>();
    off.M11 = grid_matrix(j.at("M11"), b);
    off.M12 = grid_matrix(j.at("M12"), b);
    off.kkt_residual = j.at("kkt_residual").get<double>();
    off.rho_m11_norm = j.at("rho_m11_norm").get<double>();
    off.consistency_min = j.at("consistency_min").get<double>();
    off.F_quantization_error = j.at("F_quantization_error").get<double>();
    transform::KSet K;
    for (const auto& k : j.at("bounds"))
        K.kind.push_back(bound_from_name(k.get<std::string>()));
    K.lo = grid_vector(j.at("lo"), b);
    K.hi = grid_vector(j.at("hi"), b);
    for (const auto& c : j.at("cones"))
        K.cones.push_back({c.at("x").get<int>(), c.at("slack").get<int>(), from_raw(c.at("center"), b),
                           from_raw(c.at("radius"), b), c.at("stage").get<int>()});
    return {off, K, formats};
}

// Run manifest: echo of the configuration plus hashes of every artifact and
// output written by the run.

struct Manifest {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    json artifacts = json::object();
    json outputs = json::object();

    void add_artifact(const std::string& name, const std::string& content) { artifacts[name] = git_blob_hash(content); }
    void add_output(const std::string& name, const std::string& content) { outputs[name] = git_blob_hash(content); }

    [[nodiscard]] json to_json() const {
        return {{"tool", "fixmpc"},   {"command", command},     {"config", config},
                {"seed", seed},       {"artifacts", artifacts}, {"outputs", outputs}};
    }
};

// CSV traces.

struct TraceRow {
    int iter = 0;
    double objective = 0.0;
    double residual = 0.0; ///< f(z_i) - f* for FGM, ||y_i - z_i||_inf for ADMM
    double eta_observed = 0.0;
    double eta_bound = 0.0;
};

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string fgm_trace_csv(const std::vector<TraceRow>& rows) {
    std::string out = "iter,objective,residual,eta_observed,eta_bound\n";
    for (const auto& r : rows)
        out += std::to_string(r.iter) + "," + fmt_double(r.objective) + "," + fmt_double(r.residual) + "," +
               fmt_double(r.eta_observed) + "," + fmt_double(r.eta_bound) + "\n";
    return out;
}

inline std::string admm_trace_csv(const std::vector<TraceRow>& rows) {
    std::string out = "iter,primal_residual,objective,eta_observed,eta_bound\n";
    for (const auto& r : rows)
        out += std::to_string(r.iter) + "," + fmt_double(r.residual) + "," + fmt_double(r.objective) + "," +
               fmt_double(r.eta_observed) + "," + fmt_double(r.eta_bound) + "\n";
    return out;
}

/// One row per closed-loop step: states, inputs, setpoint and stage cost.
inline std::string simulation_csv(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                                  const std::vector<transform::Setpoint>& refs, const std::vector<double>& cost) {
    std::string out = "step";
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out += ",x" + std::to_string(i + 1);
    for (Eigen::Index i = 0; i < U.rows(); ++i)
        out += ",u" + std::to_string(i + 1);
    if (!refs.empty())
        for (Eigen::Index i = 0; i < refs[0].x.size(); ++i)
            out += ",xref" + std::to_string(i + 1);
    out += ",stage_cost\n";
    for (Eigen::Index k = 0; k < U.cols(); ++k) {
        out += std::to_string(k);
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            out += "," + fmt_double(X(i, k));
        for (Eigen::Index i = 0; i < U.rows(); ++i)
            out += "," + fmt_double(U(i, k));
        const auto ks = static_cast<std::size_t>(k);
        if (ks < refs.size())
            for (Eigen::Index i = 0; i < refs[ks].x.size(); ++i)
                out += "," + fmt_double(refs[ks].x[i]);
        out += "," + fmt_double(ks < cost.size() ? cost[ks] : 0.0) + "\n";
    }
    return out;
}

} // namespace fixmpc::io
