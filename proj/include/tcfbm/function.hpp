#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "tcfbm/error.hpp"

namespace tcfbm {

/// Closed interval, possibly unbounded.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
  double sup_abs() const { return std::max(std::abs(lo), std::abs(hi)); }
};

namespace detail {
inline double mul0(double a, double b) { return (a == 0.0 || b == 0.0) ? 0.0 : a * b; }
}  // namespace detail

/**
 * @brief Expression tree for test functions f: ℝ^d → ℝ with a derived range enclosure.
 *
 * Coordinates are zero-based here; the JSON form uses one-based indices.
 */
class FunctionDescriptor {
 public:
  enum class Op { constant, coord, add, mul, clamp, exp, log, pow, abs, tanh, sin, cos, norm };

  FunctionDescriptor() : FunctionDescriptor(constant(1.0)) {}

  static FunctionDescriptor constant(double c) {
    require(std::isfinite(c), "constant must be finite");
    return FunctionDescriptor(Op::constant, {}, c);
  }
  static FunctionDescriptor coord(std::size_t k) { return FunctionDescriptor(Op::coord, {}, 0.0, 0.0, 0.0, k); }
  static FunctionDescriptor norm() { return FunctionDescriptor(Op::norm, {}); }
  static FunctionDescriptor add(std::vector<FunctionDescriptor> a) {
    require(!a.empty(), "add needs arguments");
    return FunctionDescriptor(Op::add, std::move(a));
  }
  static FunctionDescriptor mul(std::vector<FunctionDescriptor> a) {
    require(!a.empty(), "mul needs arguments");
    return FunctionDescriptor(Op::mul, std::move(a));
  }
  static FunctionDescriptor clamp(FunctionDescriptor a, double lo, double hi) {
    require(lo <= hi, "clamp needs lo <= hi");
    return FunctionDescriptor(Op::clamp, {std::move(a)}, 0.0, lo, hi);
  }
  static FunctionDescriptor exp(FunctionDescriptor a) { return FunctionDescriptor(Op::exp, {std::move(a)}); }
  static FunctionDescriptor log(FunctionDescriptor a) {
    FunctionDescriptor f(Op::log, {std::move(a)});
    require(f.args_[0].range().lo > 0.0, "log argument must be bounded away from zero");
    return f;
  }
  static FunctionDescriptor pow(FunctionDescriptor a, unsigned n) {
    return FunctionDescriptor(Op::pow, {std::move(a)}, static_cast<double>(n));
  }
  static FunctionDescriptor abs(FunctionDescriptor a) { return FunctionDescriptor(Op::abs, {std::move(a)}); }
  static FunctionDescriptor tanh(FunctionDescriptor a) { return FunctionDescriptor(Op::tanh, {std::move(a)}); }
  static FunctionDescriptor sin(FunctionDescriptor a) { return FunctionDescriptor(Op::sin, {std::move(a)}); }
  static FunctionDescriptor cos(FunctionDescriptor a) { return FunctionDescriptor(Op::cos, {std::move(a)}); }

  double operator()(const double* z) const {
    switch (op_) {
      case Op::constant:
        return value_;
      case Op::coord:
        return z[index_];
      case Op::norm: {
        double s = 0.0;
        for (std::size_t k = 0; k < norm_dim_; ++k) s += z[k] * z[k];
        return std::sqrt(s);
      }
      case Op::add: {
        double s = 0.0;
        for (const auto& a : args_) s += a(z);
        return s;
      }
      case Op::mul: {
        double s = 1.0;
        for (const auto& a : args_) s *= a(z);
        return s;
      }
      case Op::clamp:
        return std::clamp(args_[0](z), lo_, hi_);
      case Op::exp:
        return std::exp(args_[0](z));
      case Op::log:
        return std::log(args_[0](z));
      case Op::pow:
        return std::pow(args_[0](z), value_);
      case Op::abs:
        return std::abs(args_[0](z));
      case Op::tanh:
        return std::tanh(args_[0](z));
      case Op::sin:
        return std::sin(args_[0](z));
      case Op::cos:
        return std::cos(args_[0](z));
    }
    return 0.0;
  }

  double operator()(const std::vector<double>& z) const { return (*this)(z.data()); }

  /// Range enclosure over all of ℝ^d.
  Interval range() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (op_) {
      case Op::constant:
        return {value_, value_};
      case Op::coord:
        return {-inf, inf};
      case Op::norm:
        return {0.0, inf};
      case Op::add: {
        Interval r{0.0, 0.0};
        for (const auto& a : args_) {
          const Interval x = a.range();
          r.lo += x.lo;
          r.hi += x.hi;
        }
        return r;
      }
      case Op::mul: {
        Interval r{1.0, 1.0};
        for (const auto& a : args_) {
          const Interval x = a.range();
          const double c[4] = {detail::mul0(r.lo, x.lo), detail::mul0(r.lo, x.hi), detail::mul0(r.hi, x.lo),
                               detail::mul0(r.hi, x.hi)};
          r = {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
        }
        return r;
      }
      case Op::clamp: {
        const Interval x = args_[0].range();
        return {std::clamp(x.lo, lo_, hi_), std::clamp(x.hi, lo_, hi_)};
      }
      case Op::exp: {
        const Interval x = args_[0].range();
        return {std::exp(x.lo), std::exp(x.hi)};
      }
      case Op::log: {
        const Interval x = args_[0].range();
        return {std::log(x.lo), std::log(x.hi)};
      }
      case Op::pow: {
        const Interval x = args_[0].range();
        const unsigned n = static_cast<unsigned>(value_);
        if (n == 0) return {1.0, 1.0};
        const double a = std::pow(x.lo, value_), b = std::pow(x.hi, value_);
        if (n % 2 == 1) return {a, b};
        if (x.lo >= 0.0) return {a, b};
        if (x.hi <= 0.0) return {b, a};
        return {0.0, std::max(a, b)};
      }
      case Op::abs: {
        const Interval x = args_[0].range();
        if (x.lo >= 0.0) return x;
        if (x.hi <= 0.0) return {-x.hi, -x.lo};
        return {0.0, std::max(-x.lo, x.hi)};
      }
      case Op::tanh: {
        const Interval x = args_[0].range();
        return {std::tanh(x.lo), std::tanh(x.hi)};
      }
      case Op::sin:
      case Op::cos:
        return {-1.0, 1.0};
    }
    return {};
  }

  bool bounded() const { return range().bounded(); }

  /// Largest coordinate index referenced plus one.
  std::size_t min_dimension() const {
    std::size_t d = op_ == Op::coord ? index_ + 1 : 0;
    for (const auto& a : args_) d = std::max(d, a.min_dimension());
    return d;
  }

  /// Fixes the dimension used by `norm` nodes.
  FunctionDescriptor& bind_dimension(std::size_t d) {
    require(min_dimension() <= d, "function refers to a coordinate beyond the model dimension");
    norm_dim_ = d;
    for (auto& a : args_) a.bind_dimension(d);
    return *this;
  }

  /// Checks the boundedness and range precondition of an inequality.
  void require_range(double min_value, const std::string& what) const {
    const Interval r = range();
    if (!r.bounded()) throw DomainError(what + ": test function is not provably bounded");
    if (r.lo < min_value) throw DomainError(what + ": test function range must lie in [" + std::to_string(min_value) + ", inf)");
  }

  FunctionDescriptor squared() const { return mul({*this, *this}); }

  Op op() const { return op_; }

 private:
  FunctionDescriptor(Op op, std::vector<FunctionDescriptor> args, double value = 0.0, double lo = 0.0,
                     double hi = 0.0, std::size_t index = 0)
      : op_(op), args_(std::move(args)), value_(value), lo_(lo), hi_(hi), index_(index) {}

  Op op_;
  std::vector<FunctionDescriptor> args_;
  double value_ = 0.0, lo_ = 0.0, hi_ = 0.0;
  std::size_t index_ = 0, norm_dim_ = 1;
};

inline FunctionDescriptor operator+(FunctionDescriptor a, FunctionDescriptor b) {
  return FunctionDescriptor::add({std::move(a), std::move(b)});
}
inline FunctionDescriptor operator*(FunctionDescriptor a, FunctionDescriptor b) {
  return FunctionDescriptor::mul({std::move(a), std::move(b)});
}

}  // namespace tcfbm
