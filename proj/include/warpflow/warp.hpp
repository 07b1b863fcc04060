#pragma once

// Rotationally symmetric ambient spaces dr^2 + phi(r)^2 sigma over the round
// n-sphere: warping-function families, the gamma <-> r change of variable,
// ambient curvature and staticity diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "warpflow/detail/hermite.hpp"
#include "warpflow/detail/numerics.hpp"
#include "warpflow/errors.hpp"

namespace warpflow {

enum class Family { euclidean, sphere, hyperbolic, schwarzschild, ads_schwarzschild, custom };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::euclidean: return "euclidean";
    case Family::sphere: return "sphere";
    case Family::hyperbolic: return "hyperbolic";
    case Family::schwarzschild: return "schwarzschild";
    case Family::ads_schwarzschild: return "ads_schwarzschild";
    case Family::custom: return "custom";
  }
  return "unknown";
}

inline Family family_from_string(const std::string& s) {
  for (Family f : {Family::euclidean, Family::sphere, Family::hyperbolic, Family::schwarzschild,
                   Family::ads_schwarzschild, Family::custom}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown space family '" + s + "'");
}

/// phi and its first three radial derivatives at one radius.
struct PhiValues {
  double phi = 0.0;
  double dphi = 0.0;
  double d2phi = 0.0;
  double d3phi = 0.0;
};

/// One record of a tabulated custom warping function.
struct PhiSample {
  double r = 0.0;
  PhiValues v;
};

/// Construction parameters of a WarpedSpace.
struct SpaceSpec {
  Family family = Family::hyperbolic;
  int n = 2;
  double curvature = 1.0;  // |sectional curvature| for sphere / hyperbolic
  double mass = 1.0;       // m for the Schwarzschild families
  double kappa = 1.0;      // AdS scale for ads_schwarzschild
  double r_min = 0.0;
  double r_max = 3.0;
  std::optional<double> r_ref;
  std::vector<PhiSample> samples;                // custom, tabulated
  std::function<PhiValues(double)> custom_phi;  // custom, closed form
};

/// Ricci eigenvalues (radial, tangential) and scalar curvature at a radius.
struct AmbientRicci {
  double radial = 0.0;
  double tangential = 0.0;
  double scalar = 0.0;
};

struct StaticityReport {
  bool is_substatic = false;
  bool is_static = false;
  double c0 = 0.0;
  double c0_max_deviation = 0.0;
  double c0_stddev = 0.0;
  double max_residual = 0.0;  // max |phi^2 phi''' + (n-2) phi phi' phi'' - (n-1) phi'((phi')^2 - 1)|
  double min_residual = 0.0;
  double tolerance = 0.0;
};

/// Pointwise hypotheses on phi over the working interval.
struct AdmissibilityReport {
  bool phi_positive = false;
  bool dphi_positive = false;
  bool d2phi_positive = false;
  bool lower_bound = false;  // (phi')^2 - phi phi'' >= 0
  bool upper_bound = false;  // (phi')^2 - phi phi'' <= 1
  double min_gap = 0.0;      // min of (phi')^2 - phi phi''
  double max_gap = 0.0;
  bool admissible() const {
    return phi_positive && dphi_positive && d2phi_positive && lower_bound && upper_bound;
  }
};

namespace detail {

/// lambda(r) for the (AdS-)Schwarzschild metric, lambda' = sqrt(1 + k^2 lambda^2 - 2 m lambda^(1-n)).
///
/// r(lambda) is integrated in tau with lambda = s0 + tau^2, which removes the
/// inverse square root at the horizon; lambda(r) is then tabulated on uniform r
/// knots with exact derivatives from the closed forms.
class BlackHoleTable {
 public:
  BlackHoleTable(int n, double mass, double kappa, double r_max) : n_(n), m_(mass), k2_(kappa * kappa) {
    if (n < 2) throw ConfigError("Schwarzschild families need n >= 2");
    if (!(mass > 0.0)) throw ConfigError("Schwarzschild mass must be positive");
    s0_ = solve_horizon();
    build_tau_table(r_max);
    build_lambda_table(r_max);
  }

  double s0() const { return s0_; }

  /// (lambda')^2 written in tau^2 = lambda - s0 without cancellation.
  double f_of_tau2(double tau2) const {
    const double lam = s0_ + tau2;
    const double a = 1.0 + k2_ * s0_ * s0_;
    return k2_ * tau2 * (lam + s0_) + a * (-std::expm1(-(n_ - 1) * std::log1p(tau2 / s0_)));
  }

  /// dr/dtau = 2 tau / lambda'.
  double dr_dtau(double tau) const {
    const double tau2 = tau * tau;
    double q;  // f / tau^2
    if (tau2 < 1e-280) {
      q = k2_ * 2.0 * s0_ + (1.0 + k2_ * s0_ * s0_) * (n_ - 1) / s0_;
    } else {
      q = f_of_tau2(tau2) / tau2;
    }
    return 2.0 / std::sqrt(q);
  }

  double r_of_tau(double tau) const {
    if (tau < 0.0 || tau > tau_knots_.back()) {
      throw RangeError("Schwarzschild table does not cover tau = " + std::to_string(tau));
    }
    const auto it = std::upper_bound(tau_knots_.begin(), tau_knots_.end(), tau);
    std::size_t j = static_cast<std::size_t>(std::distance(tau_knots_.begin(), it));
    j = (j == 0) ? 0 : std::min(j - 1, tau_knots_.size() - 2);
    return r_at_tau_[j] + integrate_fixed([this](double s) { return dr_dtau(s); }, tau_knots_[j], tau);
  }

  double lambda_of_r(double r) const { return lambda_(r); }
  double r_max() const { return lambda_.hi(); }

  PhiValues eval(double r) const {
    const double lam = lambda_(r);
    const double tau2 = std::max(0.0, lam - s0_);
    const double d1 = std::sqrt(std::max(0.0, f_of_tau2(tau2)));
    const double lam_mn = ipow(lam, -n_);
    const double d2 = k2_ * lam + (n_ - 1) * m_ * lam_mn;
    const double d3 = (k2_ - n_ * (n_ - 1) * m_ * lam_mn / lam) * d1;
    return {lam, d1, d2, d3};
  }

 private:
  static double ipow(double x, int p) {
    if (p < 0) return 1.0 / ipow(x, -p);
    double out = 1.0;
    for (int i = 0; i < p; ++i) out *= x;
    return out;
  }

  double solve_horizon() const {
    const double flat = std::pow(2.0 * m_, 1.0 / (n_ - 1));
    if (k2_ == 0.0) return flat;
    auto f = [this](double lam) { return 1.0 + k2_ * lam * lam - 2.0 * m_ * std::pow(lam, 1 - n_); };
    boost::math::tools::eps_tolerance<double> tol(52);
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(f, 1e-12 * flat, flat, tol, iters);
    return 0.5 * (a + b);
  }

  void build_tau_table(double r_max) {
    const double dtau = 0.01;
    tau_knots_ = {0.0};
    r_at_tau_ = {0.0};
    const double target = r_max + 0.05 + 1e-9 * r_max;
    while (r_at_tau_.back() < target) {
      const double a = tau_knots_.back();
      const double b = a + dtau;
      r_at_tau_.push_back(r_at_tau_.back() +
                          integrate_adaptive([this](double s) { return dr_dtau(s); }, a, b));
      tau_knots_.push_back(b);
    }
  }

  double tau_of_r(double r) const {
    const auto it = std::upper_bound(r_at_tau_.begin(), r_at_tau_.end(), r);
    std::size_t j = static_cast<std::size_t>(std::distance(r_at_tau_.begin(), it));
    j = (j == 0) ? 0 : std::min(j - 1, r_at_tau_.size() - 2);
    const double ta = tau_knots_[j];
    const double tb = tau_knots_[j + 1];
    double tau = ta + (tb - ta) * (r - r_at_tau_[j]) / (r_at_tau_[j + 1] - r_at_tau_[j]);
    for (int it2 = 0; it2 < 50; ++it2) {
      const double val = r_at_tau_[j] + integrate_fixed([this](double s) { return dr_dtau(s); }, ta, tau);
      const double step = (val - r) / dr_dtau(tau);
      tau = std::clamp(tau - step, ta, tb);
      if (std::abs(step) <= 1e-15 * std::max(1.0, tau)) break;
    }
    return tau;
  }

  void build_lambda_table(double r_max) {
    const double h = std::min(0.002, r_max / 200.0);
    const auto count = static_cast<std::size_t>(std::ceil(r_max / h)) + 1;
    std::vector<double> x(count), f(count), d1(count), d2(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double r = h * static_cast<double>(k);
      const double tau = (k == 0) ? 0.0 : tau_of_r(r);
      const double lam = s0_ + tau * tau;
      x[k] = r;
      f[k] = lam;
      d1[k] = std::sqrt(std::max(0.0, f_of_tau2(tau * tau)));
      d2[k] = k2_ * lam + (n_ - 1) * m_ * ipow(lam, -n_);
    }
    lambda_ = QuinticHermiteTable(std::move(x), std::move(f), std::move(d1), std::move(d2));
  }

  int n_;
  double m_;
  double k2_;
  double s0_ = 0.0;
  std::vector<double> tau_knots_, r_at_tau_;
  QuinticHermiteTable lambda_;
};

/// phi from (r, phi, phi', phi'', phi''') records.
class CustomTable {
 public:
  explicit CustomTable(const std::vector<PhiSample>& s) {
    if (s.size() < 2) throw ConfigError("custom phi table needs at least two records");
    std::vector<double> r, p0, p1, p2, p3;
    for (const auto& rec : s) {
      if (!r.empty() && !(rec.r > r.back())) throw ConfigError("custom phi table: r not strictly increasing");
      r.push_back(rec.r);
      p0.push_back(rec.v.phi);
      p1.push_back(rec.v.dphi);
      p2.push_back(rec.v.d2phi);
      p3.push_back(rec.v.d3phi);
    }
    r_ = r;
    d2_ = p2;
    d3_ = p3;
    d4_ = five_point_slopes(r, p3);
    phi_ = QuinticHermiteTable(r, p0, p1, p2);
    dphi_ = QuinticHermiteTable(r, p1, p2, p3);
  }

  double lo() const { return r_.front(); }
  double hi() const { return r_.back(); }

  PhiValues eval(double r) const {
    PhiValues v;
    v.phi = phi_(r);
    v.dphi = dphi_(r);
    const std::size_t i = phi_.locate(r);
    const double h = r_[i + 1] - r_[i];
    const double t = (r - r_[i]) / h;
    // cubic Hermite for phi'' and phi'''; the slopes of phi''' are differenced
    const double h00 = 2 * t * t * t - 3 * t * t + 1, h10 = t * t * t - 2 * t * t + t;
    const double h01 = -2 * t * t * t + 3 * t * t, h11 = t * t * t - t * t;
    v.d2phi = h00 * d2_[i] + h10 * h * d3_[i] + h01 * d2_[i + 1] + h11 * h * d3_[i + 1];
    v.d3phi = h00 * d3_[i] + h10 * h * d4_[i] + h01 * d3_[i + 1] + h11 * h * d4_[i + 1];
    return v;
  }

 private:
  /// First derivative at each knot from the Lagrange interpolant through the 5 nearest knots.
  static std::vector<double> five_point_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> out(n, 0.0);
    const std::size_t w = std::min<std::size_t>(5, n);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t lo = (k >= w / 2) ? k - w / 2 : 0;
      lo = std::min(lo, n - w);
      const double z = x[k];
      double d = 0.0;
      for (std::size_t j = lo; j < lo + w; ++j) {
        double denom = 1.0;
        for (std::size_t l = lo; l < lo + w; ++l) {
          if (l != j) denom *= x[j] - x[l];
        }
        double num = 0.0;
        for (std::size_t m = lo; m < lo + w; ++m) {
          if (m == j) continue;
          double prod = 1.0;
          for (std::size_t l = lo; l < lo + w; ++l) {
            if (l != j && l != m) prod *= z - x[l];
          }
          num += prod;
        }
        d += y[j] * num / denom;
      }
      out[k] = d;
    }
    return out;
  }

  std::vector<double> r_, d2_, d3_, d4_;
  QuinticHermiteTable phi_, dphi_;
};

}  // namespace detail

/// An admissible (or merely evaluable) warped product over the round n-sphere.
///
/// Immutable after construction; copies share the tables.
class WarpedSpace {
 public:
  WarpedSpace() = default;

  explicit WarpedSpace(SpaceSpec spec) : impl_(std::make_shared<Impl>(std::move(spec))) {}

  static WarpedSpace euclidean(int n, double r_min, double r_max, std::optional<double> r_ref = {}) {
    SpaceSpec s;
    s.family = Family::euclidean;
    s.n = n;
    s.r_min = r_min;
    s.r_max = r_max;
    s.r_ref = r_ref;
    return WarpedSpace(s);
  }
  static WarpedSpace hyperbolic(int n, double c, double r_min, double r_max,
                                std::optional<double> r_ref = {}) {
    SpaceSpec s;
    s.family = Family::hyperbolic;
    s.n = n;
    s.curvature = c;
    s.r_min = r_min;
    s.r_max = r_max;
    s.r_ref = r_ref;
    return WarpedSpace(s);
  }
  static WarpedSpace sphere(int n, double c, double r_min, double r_max,
                            std::optional<double> r_ref = {}) {
    SpaceSpec s;
    s.family = Family::sphere;
    s.n = n;
    s.curvature = c;
    s.r_min = r_min;
    s.r_max = r_max;
    s.r_ref = r_ref;
    return WarpedSpace(s);
  }
  static WarpedSpace schwarzschild(int n, double m, double r_min, double r_max,
                                   std::optional<double> r_ref = {}) {
    SpaceSpec s;
    s.family = Family::schwarzschild;
    s.n = n;
    s.mass = m;
    s.r_min = r_min;
    s.r_max = r_max;
    s.r_ref = r_ref;
    return WarpedSpace(s);
  }
  static WarpedSpace ads_schwarzschild(int n, double m, double kappa, double r_min, double r_max,
                                       std::optional<double> r_ref = {}) {
    SpaceSpec s;
    s.family = Family::ads_schwarzschild;
    s.n = n;
    s.mass = m;
    s.kappa = kappa;
    s.r_min = r_min;
    s.r_max = r_max;
    s.r_ref = r_ref;
    return WarpedSpace(s);
  }
  static WarpedSpace custom(int n, std::function<PhiValues(double)> phi, double r_min, double r_max,
                            std::optional<double> r_ref = {}) {
    SpaceSpec s;
    s.family = Family::custom;
    s.n = n;
    s.custom_phi = std::move(phi);
    s.r_min = r_min;
    s.r_max = r_max;
    s.r_ref = r_ref;
    return WarpedSpace(s);
  }

  const SpaceSpec& spec() const { return impl().spec; }
  Family family() const { return impl().spec.family; }
  int n() const { return impl().spec.n; }
  double r_min() const { return impl().spec.r_min; }
  double r_max() const { return impl().spec.r_max; }
  /// Lower end of the gamma map: r_min, or slightly above it when phi(r_min) = 0.
  double r_lo() const { return impl().r_lo; }
  double r_ref() const { return impl().r_ref; }
  double gamma_lo() const { return impl().r_to_gamma.values().front(); }
  double gamma_hi() const { return impl().r_to_gamma.values().back(); }
  /// Static constant C0 (exact for the closed-form families, sampled otherwise).
  double c0() const { return impl().c0; }
  bool is_black_hole() const {
    return family() == Family::schwarzschild || family() == Family::ads_schwarzschild;
  }

  PhiValues eval_phi(double r) const {
    const auto& s = impl().spec;
    if (!(r >= s.r_min && r <= s.r_max)) {
      throw DomainError("eval_phi: r = " + std::to_string(r) + " outside [" + std::to_string(s.r_min) +
                        ", " + std::to_string(s.r_max) + "]");
    }
    return impl().raw_phi(r);
  }

  double gamma_of_r(double r) const {
    const auto& t = impl().r_to_gamma;
    if (!t.contains(r)) throw DomainError("gamma_of_r: r = " + std::to_string(r) + " outside table");
    return t(r);
  }

  double r_of_gamma(double gamma) const {
    const auto& t = impl().gamma_to_r;
    if (!t.contains(gamma)) {
      throw DomainError("r_of_gamma: gamma = " + std::to_string(gamma) + " outside table");
    }
    return t(gamma);
  }

  /// Radial knots shared by the gamma map and the slice tables.
  const std::vector<double>& radial_knots() const { return impl().r_to_gamma.knots(); }

  /// R(X,Y,Z,W) for vectors given in the orthonormal frame {d_r, e_1..e_n}.
  double ambient_riemann(double r, std::span<const double> x, std::span<const double> y,
                         std::span<const double> z, std::span<const double> w) const {
    const auto dim = static_cast<std::size_t>(n() + 1);
    if (x.size() != dim || y.size() != dim || z.size() != dim || w.size() != dim) {
      throw ShapeError("ambient_riemann: vectors must have n+1 components");
    }
    const PhiValues p = eval_phi(r);
    if (!(p.phi > 0.0)) throw DomainError("ambient_riemann: phi vanishes at r");
    const double k1 = (p.dphi * p.dphi - p.phi * p.d2phi - 1.0) / (p.phi * p.phi);
    const double k2 = (p.dphi * p.dphi - 1.0) / (p.phi * p.phi);
    auto dot = [](std::span<const double> a, std::span<const double> b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
      return s;
    };
    const double xz = dot(x, z), yw = dot(y, w), xw = dot(x, w), yz = dot(y, z);
    return k1 * (x[0] * z[0] * yw + y[0] * w[0] * xz - x[0] * w[0] * yz - y[0] * z[0] * xw) -
           k2 * (xz * yw - xw * yz);
  }

  AmbientRicci ambient_ricci_scalar(double r) const {
    const PhiValues p = eval_phi(r);
    if (!(p.phi > 0.0)) throw DomainError("ambient_ricci_scalar: phi vanishes at r");
    const int n = this->n();
    AmbientRicci out;
    out.radial = -n * p.d2phi / p.phi;
    out.tangential = -((n - 1) * (p.dphi * p.dphi - 1.0) + p.phi * p.d2phi) / (p.phi * p.phi);
    out.scalar = -n * (2.0 * p.d2phi / p.phi + (n - 1) * (p.dphi * p.dphi - 1.0) / (p.phi * p.phi));
    return out;
  }

  /// phi^2 phi''' + (n-2) phi phi' phi'' - (n-1) phi' ((phi')^2 - 1); zero iff static.
  double static_residual(double r) const {
    const PhiValues p = eval_phi(r);
    const int n = this->n();
    return p.phi * p.phi * p.d3phi + (n - 2) * p.phi * p.dphi * p.d2phi -
           (n - 1) * p.dphi * (p.dphi * p.dphi - 1.0);
  }

  StaticityReport staticity_report(std::size_t samples = 2001) const {
    StaticityReport rep;
    const int n = this->n();
    const auto rs = sample_radii(samples);
    double scale = 1.0;
    for (double r : rs) scale = std::max(scale, std::pow(eval_phi(r).phi, 3));
    rep.tolerance = 1e-8 * scale;
    rep.max_residual = 0.0;
    rep.min_residual = std::numeric_limits<double>::infinity();
    detail::CompensatedSum sum;
    std::vector<double> c0s;
    c0s.reserve(rs.size());
    for (double r : rs) {
      const double res = static_residual(r);
      rep.max_residual = std::max(rep.max_residual, std::abs(res));
      rep.min_residual = std::min(rep.min_residual, res);
      const PhiValues p = eval_phi(r);
      const double c0 = -std::pow(p.phi, n - 1) * (p.dphi * p.dphi - p.phi * p.d2phi - 1.0);
      c0s.push_back(c0);
      sum.add(c0);
    }
    rep.c0 = sum.value() / static_cast<double>(c0s.size());
    double var = 0.0;
    for (double c : c0s) {
      rep.c0_max_deviation = std::max(rep.c0_max_deviation, std::abs(c - rep.c0));
      var += (c - rep.c0) * (c - rep.c0);
    }
    rep.c0_stddev = std::sqrt(var / static_cast<double>(c0s.size() > 1 ? c0s.size() - 1 : 1));
    rep.is_static = rep.max_residual < rep.tolerance;
    rep.is_substatic = rep.min_residual > -rep.tolerance;
    return rep;
  }

  AdmissibilityReport admissibility_report(std::size_t samples = 2001) const {
    AdmissibilityReport rep;
    rep.phi_positive = rep.dphi_positive = rep.d2phi_positive = true;
    rep.min_gap = std::numeric_limits<double>::infinity();
    rep.max_gap = -std::numeric_limits<double>::infinity();
    for (double r : sample_radii(samples)) {
      const PhiValues p = eval_phi(r);
      rep.phi_positive = rep.phi_positive && p.phi > 0.0;
      rep.dphi_positive = rep.dphi_positive && p.dphi > 0.0;
      rep.d2phi_positive = rep.d2phi_positive && p.d2phi > 0.0;
      const double gap = p.dphi * p.dphi - p.phi * p.d2phi;
      rep.min_gap = std::min(rep.min_gap, gap);
      rep.max_gap = std::max(rep.max_gap, gap);
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(rep.max_gap));
    rep.lower_bound = rep.min_gap >= -tol;
    rep.upper_bound = rep.max_gap <= 1.0 + tol;
    return rep;
  }

  /// Sign of phi'' on [a, b]: +1 or -1 when strict throughout, 0 otherwise.
  int phi_second_sign(double a, double b, std::size_t samples = 257) const {
    a = std::max(a, r_lo());
    b = std::min(b, r_max());
    bool pos = true, neg = true;
    for (std::size_t i = 0; i < samples; ++i) {
      const double r = (samples == 1) ? a : a + (b - a) * static_cast<double>(i) / (samples - 1);
      const double d2 = eval_phi(r).d2phi;
      pos = pos && d2 > 0.0;
      neg = neg && d2 < 0.0;
    }
    return pos ? 1 : (neg ? -1 : 0);
  }

  /// Radius r0 of the Schwarzschild families where (phi')^2 - phi phi'' = 0.
  double schwarzschild_r0() const {
    if (!is_black_hole()) throw NotApplicableError("schwarzschild_r0: space is not a Schwarzschild family");
    const auto& s = impl().spec;
    const double lam0 = std::pow(s.mass * (s.n + 1), 1.0 / (s.n - 1));
    const double tau0 = std::sqrt(lam0 - impl().hole->s0());
    return impl().hole->r_of_tau(tau0);
  }

  double horizon_lambda() const {
    if (!is_black_hole()) throw NotApplicableError("horizon_lambda: not a Schwarzschild family");
    return impl().hole->s0();
  }

  /// Uniform samples on [r_lo, r_max].
  std::vector<double> sample_radii(std::size_t samples) const {
    samples = std::max<std::size_t>(samples, 2);
    std::vector<double> out(samples);
    const double a = r_lo(), b = r_max();
    for (std::size_t i = 0; i < samples; ++i) {
      out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(samples - 1);
    }
    out.back() = b;
    return out;
  }

 private:
  struct Impl {
    SpaceSpec spec;
    std::shared_ptr<const detail::BlackHoleTable> hole;
    std::shared_ptr<const detail::CustomTable> table;
    double sqrt_c = 1.0;
    double r_lo = 0.0;
    double r_ref = 0.0;
    double c0 = 0.0;
    detail::QuinticHermiteTable r_to_gamma;
    detail::QuinticHermiteTable gamma_to_r;

    explicit Impl(SpaceSpec s) : spec(std::move(s)) {
      if (spec.n < 1) throw ConfigError("space dimension n must be >= 1");
      if (!(spec.r_max > spec.r_min) || spec.r_min < 0.0) {
        throw ConfigError("space interval must satisfy 0 <= r_min < r_max");
      }
      switch (spec.family) {
        case Family::euclidean: break;
        case Family::sphere:
        case Family::hyperbolic:
          if (!(spec.curvature > 0.0)) throw ConfigError("curvature parameter must be positive");
          sqrt_c = std::sqrt(spec.curvature);
          if (spec.family == Family::sphere && spec.r_max >= std::numbers::pi / (2.0 * sqrt_c)) {
            throw ConfigError("sphere family needs r_max < pi / (2 sqrt(c)) so that phi' > 0");
          }
          break;
        case Family::schwarzschild:
          hole = std::make_shared<detail::BlackHoleTable>(spec.n, spec.mass, 0.0, spec.r_max);
          break;
        case Family::ads_schwarzschild:
          hole = std::make_shared<detail::BlackHoleTable>(spec.n, spec.mass, spec.kappa, spec.r_max);
          break;
        case Family::custom:
          if (!spec.custom_phi) {
            table = std::make_shared<detail::CustomTable>(spec.samples);
            if (spec.r_min < table->lo() || spec.r_max > table->hi()) {
              throw ConfigError("custom phi table does not cover [r_min, r_max]");
            }
          }
          break;
      }
      const PhiValues at_min = raw_phi(spec.r_min);
      r_lo = (at_min.phi > 0.0) ? spec.r_min : spec.r_min + 1e-6 * (spec.r_max - spec.r_min);
      r_ref = spec.r_ref.value_or(r_lo);
      if (r_ref < r_lo || r_ref > spec.r_max) throw ConfigError("reference radius outside the working interval");
      build_gamma_map();
      switch (spec.family) {
        case Family::euclidean:
        case Family::sphere:
        case Family::hyperbolic: c0 = 0.0; break;
        case Family::schwarzschild:
        case Family::ads_schwarzschild: c0 = spec.mass * (spec.n + 1); break;
        case Family::custom: {
          const PhiValues p = raw_phi(r_lo);
          c0 = -std::pow(p.phi, spec.n - 1) * (p.dphi * p.dphi - p.phi * p.d2phi - 1.0);
          break;
        }
      }
    }

    PhiValues raw_phi(double r) const {
      switch (spec.family) {
        case Family::euclidean: return {r, 1.0, 0.0, 0.0};
        case Family::hyperbolic: {
          const double k = sqrt_c;
          const double sh = std::sinh(k * r), ch = std::cosh(k * r);
          return {sh / k, ch, k * sh, k * k * ch};
        }
        case Family::sphere: {
          const double k = sqrt_c;
          const double sn = std::sin(k * r), cs = std::cos(k * r);
          return {sn / k, cs, -k * sn, -k * k * cs};
        }
        case Family::schwarzschild:
        case Family::ads_schwarzschild: return hole->eval(r);
        case Family::custom: return spec.custom_phi ? spec.custom_phi(r) : table->eval(r);
      }
      return {};
    }

    void build_gamma_map() {
      const double h_max = std::min(0.005, (spec.r_max - r_lo) / 400.0);
      const double c_gamma = 0.005;
      std::vector<double> r = {r_lo};
      while (r.back() < spec.r_max) {
        const double phi = raw_phi(r.back()).phi;
        double next = r.back() + std::min(h_max, c_gamma * phi);
        if (next > spec.r_max - 1e-3 * h_max) next = spec.r_max;
        r.push_back(next);
      }
      const std::size_t k = r.size();
      std::vector<double> g(k), g1(k), g2(k), rr1(k), rr2(k);
      auto inv_phi = [this](double s) { return 1.0 / raw_phi(s).phi; };
      g[0] = 0.0;
      for (std::size_t i = 1; i < k; ++i) g[i] = g[i - 1] + detail::integrate_adaptive(inv_phi, r[i - 1], r[i]);
      for (std::size_t i = 0; i < k; ++i) {
        const PhiValues p = raw_phi(r[i]);
        g1[i] = 1.0 / p.phi;
        g2[i] = -p.dphi / (p.phi * p.phi);
        rr1[i] = p.phi;
        rr2[i] = p.phi * p.dphi;
      }
      // Anchor gamma(r_ref) = 0.
      const auto i_ref = static_cast<std::size_t>(std::distance(r.begin(), std::upper_bound(r.begin(), r.end(), r_ref))) - 1;
      const double offset = g[i_ref] + detail::integrate_adaptive(inv_phi, r[i_ref], r_ref);
      for (double& v : g) v -= offset;
      r_to_gamma = detail::QuinticHermiteTable(r, g, g1, g2);
      gamma_to_r = detail::QuinticHermiteTable(g, r, rr1, rr2);
    }
  };

  const Impl& impl() const {
    if (!impl_) throw StateError("WarpedSpace used before construction");
    return *impl_;
  }

  std::shared_ptr<const Impl> impl_;
};

}  // namespace warpflow
