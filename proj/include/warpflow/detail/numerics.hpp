#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace warpflow {

/// Area of the unit n-sphere, from omega_n = 2 pi omega_{n-2} / (n - 1).
inline double sphere_area(int n) {
  if (n < 0) return 0.0;
  double even = 2.0;                    // omega_0
  double odd = 2.0 * std::numbers::pi;  // omega_1
  if (n == 0) return even;
  if (n == 1) return odd;
  double prev2 = (n % 2 == 0) ? even : odd;
  for (int k = (n % 2 == 0) ? 2 : 3; k <= n; k += 2) {
    prev2 = 2.0 * std::numbers::pi * prev2 / (k - 1);
  }
  return prev2;
}

namespace detail {

/// Neumaier-compensated sum in a fixed order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double dot_fixed_order(std::span<const double> a, std::span<const double> b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.value();
}

/// Adaptive Gauss-Kronrod integral; used for table construction.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-13) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 6, tol);
}

/// Fixed-order Gauss-Legendre integral; used for partial panels.
template <class F>
double integrate_fixed(F&& f, double a, double b) {
  if (a == b) return 0.0;
  return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

}  // namespace detail
}  // namespace warpflow
