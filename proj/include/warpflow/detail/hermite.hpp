#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "warpflow/errors.hpp"

namespace warpflow::detail {

/// Piecewise quintic Hermite interpolant through (x, f, f', f'') samples.
///
/// Knots must be strictly increasing. Uniform knots are located in O(1),
/// general knots by binary search. Evaluation outside [x.front(), x.back()]
/// throws; the table never extrapolates.
class QuinticHermiteTable {
 public:
  QuinticHermiteTable() = default;

  QuinticHermiteTable(std::vector<double> x, std::vector<double> f, std::vector<double> d1,
                      std::vector<double> d2)
      : x_(std::move(x)), f_(std::move(f)), d1_(std::move(d1)), d2_(std::move(d2)) {
    if (x_.size() < 2 || f_.size() != x_.size() || d1_.size() != x_.size() ||
        d2_.size() != x_.size()) {
      throw ShapeError("QuinticHermiteTable: inconsistent sample sizes");
    }
    for (std::size_t i = 1; i < x_.size(); ++i) {
      if (!(x_[i] > x_[i - 1])) throw ConfigError("QuinticHermiteTable: knots not increasing");
    }
    const double h = (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1);
    uniform_ = true;
    for (std::size_t i = 1; i < x_.size(); ++i) {
      if (std::abs((x_[i] - x_[i - 1]) - h) > 1e-12 * std::max(1.0, std::abs(h))) {
        uniform_ = false;
        break;
      }
    }
    inv_h_ = 1.0 / h;
  }

  bool empty() const { return x_.empty(); }
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return f_; }

  bool contains(double x) const { return !x_.empty() && x >= x_.front() && x <= x_.back(); }

  double operator()(double x) const {
    if (x_.empty()) throw StateError("QuinticHermiteTable: table not built");
    if (!(x >= x_.front() && x <= x_.back())) {
      throw DomainError("QuinticHermiteTable: argument " + std::to_string(x) +
                        " outside [" + std::to_string(x_.front()) + ", " +
                        std::to_string(x_.back()) + "]");
    }
    const std::size_t i = locate(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double t4 = t3 * t;
    const double t5 = t4 * t;
    const double h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    const double h01 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    const double h02 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    const double h10 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    const double h11 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    const double h12 = 0.5 * t3 - t4 + 0.5 * t5;
    return f_[i] * h00 + h * d1_[i] * h01 + h * h * d2_[i] * h02 + f_[i + 1] * h10 +
           h * d1_[i + 1] * h11 + h * h * d2_[i + 1] * h12;
  }

  /// Index i of the interval [x_i, x_{i+1}] containing x (x already in range).
  std::size_t locate(double x) const {
    const std::size_t last = x_.size() - 2;
    if (uniform_) {
      const auto i = static_cast<std::size_t>((x - x_.front()) * inv_h_);
      std::size_t j = std::min(i, last);
      // Guard against rounding at interval edges.
      while (j > 0 && x < x_[j]) --j;
      while (j < last && x >= x_[j + 1]) ++j;
      return j;
    }
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const auto i = static_cast<std::size_t>(std::distance(x_.begin(), it));
    return std::min(i == 0 ? 0 : i - 1, last);
  }

 private:
  std::vector<double> x_, f_, d1_, d2_;
  bool uniform_ = false;
  double inv_h_ = 0.0;
};

}  // namespace warpflow::detail
