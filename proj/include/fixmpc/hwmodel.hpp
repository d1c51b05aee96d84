#pragma once

/**
 * @file
 * @brief Cycle-count and resource model of the parallel FGM and ADMM
 * datapaths as a function of the parallelism P.
 */

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace fixmpc::hw {

struct HwParams {
    int P = 1;
    int l_A = 1;      ///< adder latency
    int l_M = 1;      ///< multiplier latency
    double clock_hz = 400e6;
    int iterations = 1;
};

struct LatencyReport {
    long cycles_per_iter = 0;
    long total_cycles = 0;
    double sample_time_s = 0.0;
};

struct ResourceReport {
    long multipliers = 0;
    long adders = 0;
    long memory_blocks = 0;
    long memory_depth = 0;
};

inline long ceil_div(long a, long b) { return (a + b - 1) / b; }

inline long ceil_log2(long v) {
    long k = 0;
    while ((1L << k) < v)
        ++k;
    return k;
}

namespace detail {

inline void check(const HwParams& hw, long dim) {
    if (dim < 1)
        throw RangeError("problem dimension must be positive");
    if (hw.P < 1 || hw.P > dim)
        throw RangeError("parallelism P must lie in [1, " + std::to_string(dim) + "]");
    if (hw.l_A < 0 || hw.l_M < 0 || hw.iterations < 0 || !(hw.clock_hz > 0.0))
        throw RangeError("latencies, iteration count and clock must be nonnegative/positive");
}

inline LatencyReport finish(long per_iter, const HwParams& hw) {
    LatencyReport r;
    r.cycles_per_iter = per_iter;
    r.total_cycles = per_iter * hw.iterations;
    r.sample_time_s = static_cast<double>(r.total_cycles) / hw.clock_hz;
    return r;
}

} // namespace detail

inline LatencyReport fgm_latency(long Nnu, const HwParams& hw, bool warm_start = false) {
    detail::check(hw, Nnu);
    const long L = ceil_div(Nnu, hw.P) + hw.l_A * ceil_log2(Nnu) + 2L * hw.l_M + 3L * hw.l_A + 1 + (warm_start ? 1 : 0);
    return detail::finish(L, hw);
}

inline LatencyReport admm_latency(long nA, const HwParams& hw, bool warm_start = true) {
    detail::check(hw, nA);
    const long L = ceil_div(nA, hw.P) + hw.l_A * ceil_log2(nA) + hw.l_M + 6L * hw.l_A + 2 + (warm_start ? 1 : 0);
    return detail::finish(L, hw);
}

inline ResourceReport fgm_resources(long Nnu, long nx, int P) {
    if (Nnu < 1 || nx < 0 || P < 1 || P > Nnu)
        throw RangeError("invalid FGM dimensions or parallelism");
    return {P * (Nnu + 2), P * (Nnu + 3), P * (Nnu + nx + 4), ceil_div(Nnu, P)};
}

inline ResourceReport admm_resources(long nA, int P) {
    if (nA < 1 || P < 1 || P > nA)
        throw RangeError("invalid ADMM dimension or parallelism");
    return {P * nA, P * (nA + 15), P * (nA + 8), ceil_div(nA, P)};
}

/// Embedded-multiplier capacity of the devices used for the sample-time tables.
struct Chip {
    std::string name;
    long multipliers;
};

inline const std::vector<Chip>& virtex6() {
    static const std::vector<Chip> chips{{"LX75", 288},   {"LX130", 480},   {"LX240", 768},
                                         {"LX550", 864},  {"SX315", 1344},  {"SX475", 2016}};
    return chips;
}

inline const std::vector<Chip>& spartan6() {
    static const std::vector<Chip> chips{{"LX45", 58}, {"LX75", 132}, {"LX100", 180}};
    return chips;
}

/// Smallest chip of the family with enough multipliers, or "-".
inline std::string suggest_chip(const std::vector<Chip>& family, long multipliers) {
    for (const auto& c : family)
        if (c.multipliers >= multipliers)
            return c.name;
    return "-";
}

enum class Family { fgm, admm };

struct GridRow {
    int P = 1;
    long multipliers = 0;
    std::vector<double> sample_time_us; ///< one per clock
    std::vector<std::string> chips;     ///< one per clock/device family
};

/// Sample-time grid over P for the given clocks. Device families pair with
/// clocks by position (Virtex-6 first, then Spartan-6).
inline std::vector<GridRow> sample_time_grid(Family fam, long dim, long nx, const std::vector<int>& Ps,
                                             const std::vector<double>& clocks, int iterations, int l_A = 1,
                                             int l_M = 1, bool warm_start = false) {
    std::vector<GridRow> rows;
    const std::vector<const std::vector<Chip>*> families{&virtex6(), &spartan6()};
    for (int P : Ps) {
        GridRow row;
        row.P = P;
        row.multipliers = fam == Family::fgm ? fgm_resources(dim, nx, P).multipliers : admm_resources(dim, P).multipliers;
        for (std::size_t c = 0; c < clocks.size(); ++c) {
            const HwParams hw{P, l_A, l_M, clocks[c], iterations};
            const auto lat = fam == Family::fgm ? fgm_latency(dim, hw, warm_start) : admm_latency(dim, hw, warm_start);
            row.sample_time_us.push_back(lat.sample_time_s * 1e6);
            row.chips.push_back(c < families.size() ? suggest_chip(*families[c], row.multipliers) : "");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string grid_csv(const std::vector<GridRow>& rows, const std::vector<double>& clocks) {
    std::string out = "P,multipliers";
    for (double c : clocks) {
        char buf[64];
        std::snprintf(buf, sizeof buf, ",time_us_%gMHz,chip_%gMHz", c / 1e6, c / 1e6);
        out += buf;
    }
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.P) + "," + std::to_string(r.multipliers);
        for (std::size_t c = 0; c < r.sample_time_us.size(); ++c) {
            char buf[64];
            std::snprintf(buf, sizeof buf, ",%.3f,", r.sample_time_us[c]);
            out += buf + r.chips[c];
        }
        out += '\n';
    }
    return out;
}

} // namespace fixmpc::hw
