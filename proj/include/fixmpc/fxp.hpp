#pragma once

/**
 * @file
 * @brief Bit-accurate signed two's-complement fixed-point arithmetic.
 *
 * A value with format Q(i, b) is stored as a raw integer r and represents
 * r * 2^-b. Products are formed exactly with 2b fraction bits and truncated
 * back to b bits by an arithmetic right shift (floor toward -inf), so the
 * round-off error of every multiplication lies in (-2^-b, 0] regardless of
 * sign. Additions and subtractions are exact unless they overflow.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"

namespace fixmpc::fxp {

using raw_t = std::int64_t;
using wide_t = __int128;

enum class Rounding { truncate, nearest };

enum class OverflowPolicy { checked, saturate, wrap };

class FxFormat {
public:
    FxFormat(int integer_bits, int fraction_bits)
        : integer_bits_(integer_bits), fraction_bits_(fraction_bits) {
        if (integer_bits < 1)
            throw FormatError("integer_bits must be >= 1 (it includes the sign bit)");
        if (fraction_bits < 1)
            throw FormatError("fraction_bits must be >= 1");
        if (integer_bits + fraction_bits > 64)
            throw FormatError("total width exceeds 64 bits");
    }

    [[nodiscard]] int integer_bits() const { return integer_bits_; }
    [[nodiscard]] int fraction_bits() const { return fraction_bits_; }
    [[nodiscard]] int width() const { return integer_bits_ + fraction_bits_; }

    [[nodiscard]] raw_t raw_max() const {
        return width() == 64 ? std::numeric_limits<raw_t>::max()
                             : (raw_t{1} << (width() - 1)) - 1;
    }
    [[nodiscard]] raw_t raw_min() const {
        return width() == 64 ? std::numeric_limits<raw_t>::min()
                             : -(raw_t{1} << (width() - 1));
    }

    /// 2^-b
    [[nodiscard]] double resolution() const { return std::ldexp(1.0, -fraction_bits_); }
    [[nodiscard]] double max_value() const { return std::ldexp(static_cast<double>(raw_max()), -fraction_bits_); }
    [[nodiscard]] double min_value() const { return std::ldexp(static_cast<double>(raw_min()), -fraction_bits_); }

    [[nodiscard]] bool contains_raw(wide_t raw) const { return raw >= raw_min() && raw <= raw_max(); }

    friend bool operator==(const FxFormat&, const FxFormat&) = default;

private:
    int integer_bits_;
    int fraction_bits_;
};

/// Smallest integer-bit count whose range holds every value of magnitude <= max_abs.
inline int min_integer_bits(double max_abs, int fraction_bits) {
    int bits = 1;
    while (bits + fraction_bits < 64 &&
           std::ldexp(1.0, bits - 1) - std::ldexp(1.0, -fraction_bits) < max_abs)
        ++bits;
    return bits;
}

namespace detail {

inline raw_t wrap_to(wide_t v, const FxFormat& fmt) {
    const int w = fmt.width();
    if (w == 64)
        return static_cast<raw_t>(static_cast<std::uint64_t>(static_cast<unsigned __int128>(v)));
    const auto mask = (std::uint64_t{1} << w) - 1;
    auto bits = static_cast<std::uint64_t>(static_cast<unsigned __int128>(v)) & mask;
    if (bits & (std::uint64_t{1} << (w - 1)))
        bits |= ~mask;
    return static_cast<raw_t>(bits);
}

inline raw_t settle(wide_t v, const FxFormat& fmt, OverflowPolicy policy, const char* what) {
    if (fmt.contains_raw(v))
        return static_cast<raw_t>(v);
    switch (policy) {
    case OverflowPolicy::checked:
        throw OverflowError(std::string("fixed-point overflow in ") + what + " (Q" +
                            std::to_string(fmt.integer_bits()) + "." +
                            std::to_string(fmt.fraction_bits()) + ")");
    case OverflowPolicy::saturate:
        return v > 0 ? fmt.raw_max() : fmt.raw_min();
    case OverflowPolicy::wrap:
        break;
    }
    return wrap_to(v, fmt);
}

/// Exact product of two raws with 2b fraction bits, truncated to b bits.
inline wide_t mul_trunc_raw(raw_t a, raw_t b, int fraction_bits) {
    return (static_cast<wide_t>(a) * static_cast<wide_t>(b)) >> fraction_bits;
}

/// Hardware-faithful dot product: one truncation per product, exact sums.
/// Every partial sum is checked against the output format.
inline raw_t dot_raw(const raw_t* row, const raw_t* col, std::size_t n, int fraction_bits,
                     const FxFormat& out, OverflowPolicy policy) {
    wide_t acc = 0;
    for (std::size_t j = 0; j < n; ++j) {
        acc += mul_trunc_raw(row[j], col[j], fraction_bits);
        if (!out.contains_raw(acc))
            acc = settle(acc, out, policy, "dot product");
    }
    return static_cast<raw_t>(acc);
}

inline void require_same_fraction(const FxFormat& a, const FxFormat& b) {
    if (a.fraction_bits() != b.fraction_bits())
        throw FormatError("operands must share the number of fraction bits");
}

} // namespace detail

/// Immutable fixed-point scalar.
class FxValue {
public:
    FxValue(raw_t raw, FxFormat fmt) : raw_(raw), fmt_(fmt) {
        if (!fmt_.contains_raw(raw))
            throw RangeError("raw value outside the range of its format");
    }

    [[nodiscard]] raw_t raw() const { return raw_; }
    [[nodiscard]] const FxFormat& format() const { return fmt_; }
    [[nodiscard]] double to_double() const { return std::ldexp(static_cast<double>(raw_), -fmt_.fraction_bits()); }

    friend bool operator==(const FxValue&, const FxValue&) = default;

private:
    raw_t raw_;
    FxFormat fmt_;
};

inline raw_t quantize_raw(double x, const FxFormat& fmt, Rounding mode) {
    if (!std::isfinite(x))
        throw RangeError("cannot quantize a non-finite value");
    const double scaled = std::ldexp(x, fmt.fraction_bits());
    const double r = mode == Rounding::truncate ? std::floor(scaled) : std::round(scaled);
    if (r < static_cast<double>(fmt.raw_min()) || r > static_cast<double>(fmt.raw_max()))
        throw RangeError("value " + std::to_string(x) + " outside fixed-point range");
    return static_cast<raw_t>(r);
}

inline FxValue quantize(double x, const FxFormat& fmt, Rounding mode = Rounding::truncate) {
    return {quantize_raw(x, fmt, mode), fmt};
}

/// Rounds x to the 2^-b grid without any range restriction (offline data).
inline double round_to_grid(double x, int fraction_bits, Rounding mode = Rounding::nearest) {
    const double scaled = std::ldexp(x, fraction_bits);
    return std::ldexp(mode == Rounding::truncate ? std::floor(scaled) : std::round(scaled),
                      -fraction_bits);
}

inline FxValue add(const FxValue& a, const FxValue& b, OverflowPolicy policy = OverflowPolicy::checked) {
    if (a.format() != b.format())
        throw FormatError("fx add requires operands of the same format");
    const wide_t s = static_cast<wide_t>(a.raw()) + b.raw();
    return {detail::settle(s, a.format(), policy, "addition"), a.format()};
}

inline FxValue sub(const FxValue& a, const FxValue& b, OverflowPolicy policy = OverflowPolicy::checked) {
    if (a.format() != b.format())
        throw FormatError("fx sub requires operands of the same format");
    const wide_t s = static_cast<wide_t>(a.raw()) - b.raw();
    return {detail::settle(s, a.format(), policy, "subtraction"), a.format()};
}

inline FxValue mul_trunc(const FxValue& a, const FxValue& b, OverflowPolicy policy = OverflowPolicy::checked) {
    if (a.format() != b.format())
        throw FormatError("fx multiply requires operands of the same format");
    const auto p = detail::mul_trunc_raw(a.raw(), b.raw(), a.format().fraction_bits());
    return {detail::settle(p, a.format(), policy, "multiplication"), a.format()};
}

/// Exact decimal rendering of raw * 2^-b (dyadic values have finite expansions).
inline std::string to_decimal(raw_t raw, int fraction_bits) {
    const bool neg = raw < 0;
    unsigned __int128 mag = neg ? static_cast<unsigned __int128>(-static_cast<wide_t>(raw))
                                : static_cast<unsigned __int128>(raw);
    const unsigned __int128 mask = (static_cast<unsigned __int128>(1) << fraction_bits) - 1;
    const auto int_part = static_cast<std::uint64_t>(mag >> fraction_bits);
    unsigned __int128 frac = mag & mask;
    std::string out = (neg ? "-" : "") + std::to_string(int_part);
    if (frac != 0) {
        out += '.';
        while (frac != 0) {
            frac *= 10;
            out += static_cast<char>('0' + static_cast<int>(frac >> fraction_bits));
            frac &= mask;
        }
    }
    return out;
}

/// Two's-complement hex of the raw word, zero-padded to the format width.
inline std::string to_hex(raw_t raw, const FxFormat& fmt) {
    const int digits = (fmt.width() + 3) / 4;
    auto bits = static_cast<std::uint64_t>(raw);
    if (fmt.width() < 64)
        bits &= (std::uint64_t{1} << fmt.width()) - 1;
    static constexpr char hex[] = "0123456789abcdef";
    std::string s(static_cast<std::size_t>(digits), '0');
    for (int i = digits - 1; i >= 0; --i, bits >>= 4)
        s[static_cast<std::size_t>(i)] = hex[bits & 0xf];
    return "0x" + s;
}

inline std::string to_string(const FxValue& v) {
    return to_decimal(v.raw(), v.format().fraction_bits()) + " " + to_hex(v.raw(), v.format());
}

using RawVector = Eigen::Matrix<raw_t, Eigen::Dynamic, 1>;
using RawMatrix = Eigen::Matrix<raw_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Vector of fixed-point values sharing one format.
struct FxVector {
    FxFormat format;
    RawVector raw;

    static FxVector quantize(const Eigen::VectorXd& x, const FxFormat& fmt, Rounding mode) {
        FxVector v{fmt, RawVector(x.size())};
        for (Eigen::Index i = 0; i < x.size(); ++i)
            v.raw[i] = quantize_raw(x[i], fmt, mode);
        return v;
    }
    [[nodiscard]] Eigen::VectorXd to_double() const {
        return raw.cast<double>() * std::ldexp(1.0, -format.fraction_bits());
    }
    [[nodiscard]] Eigen::Index size() const { return raw.size(); }
    [[nodiscard]] FxValue at(Eigen::Index i) const { return {raw[i], format}; }
};

/// Row-major matrix of fixed-point values sharing one format.
struct FxMatrix {
    FxFormat format;
    RawMatrix raw;

    static FxMatrix quantize(const Eigen::MatrixXd& m, const FxFormat& fmt, Rounding mode) {
        FxMatrix q{fmt, RawMatrix(m.rows(), m.cols())};
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                q.raw(i, j) = quantize_raw(m(i, j), fmt, mode);
        return q;
    }
    /// Quantizes with a format whose integer part is just wide enough for m.
    static FxMatrix quantize_fit(const Eigen::MatrixXd& m, int fraction_bits, Rounding mode) {
        const double max_abs = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
        return quantize(m, FxFormat(min_integer_bits(max_abs + std::ldexp(1.0, -fraction_bits), fraction_bits),
                                    fraction_bits),
                        mode);
    }
    [[nodiscard]] Eigen::MatrixXd to_double() const {
        return raw.cast<double>() * std::ldexp(1.0, -format.fraction_bits());
    }
    [[nodiscard]] Eigen::Index rows() const { return raw.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return raw.cols(); }
};

inline FxValue dot(const FxVector& row, const FxVector& col, const FxFormat& out,
                   OverflowPolicy policy = OverflowPolicy::checked) {
    if (row.size() != col.size())
        throw DimensionError("dot product operands differ in length");
    detail::require_same_fraction(row.format, col.format);
    detail::require_same_fraction(row.format, out);
    return {detail::dot_raw(row.raw.data(), col.raw.data(), static_cast<std::size_t>(row.size()),
                            out.fraction_bits(), out, policy),
            out};
}

inline FxValue dot(const FxVector& row, const FxVector& col, OverflowPolicy policy = OverflowPolicy::checked) {
    return dot(row, col, row.format, policy);
}

/// y = M v with per-row hardware dot products.
inline FxVector matvec(const FxMatrix& m, const FxVector& v, const FxFormat& out,
                       OverflowPolicy policy = OverflowPolicy::checked) {
    if (m.cols() != v.size())
        throw DimensionError("matrix-vector dimension mismatch");
    detail::require_same_fraction(m.format, v.format);
    detail::require_same_fraction(m.format, out);
    FxVector y{out, RawVector(m.rows())};
    const auto n = static_cast<std::size_t>(m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        y.raw[i] = detail::dot_raw(m.raw.row(i).data(), v.raw.data(), n, out.fraction_bits(), out, policy);
    return y;
}

} // namespace fixmpc::fxp
