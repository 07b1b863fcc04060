#pragma once

// Weighted volumes, areas and mean-curvature integrals of graphs and slices,
// the slice comparison profiles xi_alpha / chi_{i,alpha}, and the Minkowski
// integral identities.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "warpflow/graphgeom.hpp"

namespace warpflow {

/// Psi_alpha(r) = integral from r_min to r of (phi')^alpha phi^n, tabulated on the radial knots.
class VolumeTable {
 public:
  VolumeTable() = default;

  VolumeTable(const WarpedSpace& space, double alpha) : space_(space), alpha_(alpha) {
    const auto& knots = space.radial_knots();
    r_.reserve(knots.size() + 1);
    psi_.reserve(knots.size() + 1);
    r_.push_back(space.r_min());
    psi_.push_back(0.0);
    auto f = [this](double s) { return density(s); };
    double prev = space.r_min();
    for (double x : knots) {
      if (x <= prev) continue;
      psi_.push_back(psi_.back() + detail::integrate_adaptive(f, prev, x));
      r_.push_back(x);
      prev = x;
    }
  }

  double alpha() const { return alpha_; }
  const WarpedSpace& space() const { return space_; }
  const std::vector<double>& knots() const { return r_; }
  const std::vector<double>& knot_values() const { return psi_; }

  /// (phi')^alpha phi^n at r.
  double density(double r) const {
    const PhiValues p = space_.eval_phi(r);
    const double w = (alpha_ == 0.0) ? 1.0 : std::pow(std::max(0.0, p.dphi), alpha_);
    return w * std::pow(p.phi, space_.n());
  }

  double operator()(double r) const {
    if (r_.empty()) throw StateError("VolumeTable used before construction");
    if (!(r >= r_.front() && r <= r_.back())) {
      throw DomainError("VolumeTable: r = " + std::to_string(r) + " outside the working interval");
    }
    const std::size_t i = locate(r);
    return psi_[i] + detail::integrate_fixed([this](double s) { return density(s); }, r_[i], r);
  }

  std::size_t locate(double r) const {
    const auto it = std::upper_bound(r_.begin(), r_.end(), r);
    const auto i = static_cast<std::size_t>(std::distance(r_.begin(), it));
    return std::min(i == 0 ? 0 : i - 1, r_.size() - 2);
  }

 private:
  WarpedSpace space_;
  double alpha_ = 1.0;
  std::vector<double> r_, psi_;
};

/// V^alpha_phi of the region enclosed by the graph, given a prebuilt table.
inline double weighted_volume_alpha(const VolumeTable& table, const GraphState& state) {
  const SphereGrid& grid = state.g();
  if (state.gamma.size() != grid.node_count()) throw ShapeError("weighted_volume_alpha: size mismatch");
  const auto& space = table.space();
  std::vector<double> inner(grid.node_count());
  for (std::size_t k = 0; k < inner.size(); ++k) {
    inner[k] = table(detail::radial_node(space, state.gamma[k], k).r);
  }
  return grid.integrate(inner);
}

inline double weighted_volume_alpha(const WarpedSpace& space, const GraphState& state, double alpha) {
  return weighted_volume_alpha(VolumeTable(space, alpha), state);
}

/// A_{0,phi} = integral over M of phi'.
inline double weighted_area(const GeometryFields& f) { return f.integrate(f.dphi); }

/// A_{1,phi} = integral over M of phi' H.
inline double weighted_mean_curvature_integral(const GeometryFields& f) {
  std::vector<double> v(f.nodes);
  for (std::size_t k = 0; k < f.nodes; ++k) v[k] = f.dphi[k] * f.H[k];
  return f.integrate(v);
}

/// Normal speed n - u H / phi' of the flow at every node.
inline std::vector<double> normal_speed(const GeometryFields& f) {
  std::vector<double> F(f.nodes);
  for (std::size_t k = 0; k < f.nodes; ++k) F[k] = f.n - f.u[k] * f.H[k] / f.dphi[k];
  return F;
}

/// Instantaneous rates of the functionals for a normal speed F, from the first-variation formulas.
struct FunctionalRates {
  double volume_alpha = 0.0;  // integral of (phi')^alpha F
  double area0 = 0.0;         // integral of (u phi'' / phi + phi' H) F
  double area1 = 0.0;         // integral of (u phi'' H / phi - Lap phi' + 2 phi' sigma_2 - phi' Ric(nu, nu)) F
};

inline FunctionalRates functional_rates(const GeometryFields& f, std::span<const double> F, double alpha) {
  if (F.size() != f.nodes) throw ShapeError("functional_rates: speed size mismatch");
  const int n = f.n;
  std::vector<double> a(f.nodes), b(f.nodes), c(f.nodes);
  for (std::size_t k = 0; k < f.nodes; ++k) {
    const double phi = f.phi[k], d1 = f.dphi[k], d2 = f.d2phi[k], u = f.u[k], H = f.H[k];
    const double k1 = (d1 * d1 - phi * d2 - 1.0) / (phi * phi);
    const double lap_dphi = (n - 1) * k1 * (1.0 - u * u / (phi * phi)) + d2 / phi * (n * d1 - u * H);
    const double ric_nn = -(phi * d2 + (n - 1) * (d1 * d1 - 1.0)) / (phi * phi) + (n - 1) * u * u * k1 / (phi * phi);
    a[k] = ((alpha == 0.0) ? 1.0 : std::pow(d1, alpha)) * F[k];
    b[k] = (u * d2 / phi + d1 * H) * F[k];
    c[k] = (u * d2 * H / phi - lap_dphi + 2.0 * d1 * f.sigma2[k] - d1 * ric_nn) * F[k];
  }
  return {f.integrate(a), f.integrate(b), f.integrate(c)};
}

struct MinkowskiResiduals {
  double residual1 = 0.0;
  double residual2 = 0.0;
  double residual3 = 0.0;
  bool has_residual2 = false;  // needs n >= 2
  bool has_residual3 = false;  // needs n >= 3
};

inline MinkowskiResiduals minkowski_residuals(const GeometryFields& f) {
  const int n = f.n;
  MinkowskiResiduals out;
  std::vector<double> a(f.nodes), b(f.nodes), c(f.nodes);
  for (std::size_t k = 0; k < f.nodes; ++k) a[k] = n * f.dphi[k] - f.u[k] * f.H[k];
  out.residual1 = f.integrate(a);
  if (n >= 2) {
    out.has_residual2 = true;
    for (std::size_t k = 0; k < f.nodes; ++k) {
      const double phi = f.phi[k], u = f.u[k];
      const double k1 = (f.dphi[k] * f.dphi[k] - phi * f.d2phi[k] - 1.0) / (phi * phi);
      b[k] = (n - 1) * f.dphi[k] * f.H[k] - 2.0 * f.sigma2[k] * u - u * (n - 1) * k1 * (1.0 - u * u / (phi * phi));
    }
    out.residual2 = f.integrate(b);
  }
  if (n >= 3) {
    out.has_residual3 = true;
    for (std::size_t k = 0; k < f.nodes; ++k) {
      const double phi = f.phi[k], u = f.u[k];
      const double k1 = (f.dphi[k] * f.dphi[k] - phi * f.d2phi[k] - 1.0) / (phi * phi);
      // sigma_2^{ij} r_i r_j with sigma_2^{ij} = H g^{ij} - h^{ij}
      std::vector<double> up(n, 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) up[i] += f.tensor(f.g_inv, k, i, j) * f.r_grad[k * n + j];
      double grr = 0.0, hrr = 0.0;
      for (int i = 0; i < n; ++i) {
        grr += up[i] * f.r_grad[k * n + i];
        for (int j = 0; j < n; ++j) hrr += up[i] * f.tensor(f.h, k, i, j) * up[j];
      }
      const double s2rr = f.H[k] * grr - hrr;
      c[k] = (n - 2) * f.dphi[k] * f.sigma2[k] - 3.0 * u * f.sigma3[k] - (n - 2) * u * k1 * s2rr;
    }
    out.residual3 = f.integrate(c);
  }
  return out;
}

/// Slice values r -> V_phi, V^alpha_phi, A_{0,phi}, A_{1,phi} and their monotone inversions.
class SliceProfile {
 public:
  SliceProfile(const WarpedSpace& space, double alpha)
      : space_(space), alpha_(alpha), vol_(space, 1.0), vol_alpha_(space, alpha) {
    const auto& r = vol_.knots();
    for (std::size_t i = 1; i < r.size(); ++i) {
      if (!(vol_.knot_values()[i] > vol_.knot_values()[i - 1]) ||
          !(vol_alpha_.knot_values()[i] > vol_alpha_.knot_values()[i - 1])) {
        throw ConfigError("slice volume profile is not strictly increasing near r = " + std::to_string(r[i]));
      }
    }
    area_increasing_ = {true, true};
    double prev0 = -1.0, prev1 = -1.0;
    for (double x : r) {
      const double a0 = area0(x), a1 = area1(x);
      if (prev0 >= 0.0 && !(a0 > prev0)) area_increasing_[0] = false;
      if (prev1 >= 0.0 && !(a1 > prev1)) area_increasing_[1] = false;
      prev0 = a0;
      prev1 = a1;
    }
  }

  const WarpedSpace& space() const { return space_; }
  double alpha() const { return alpha_; }
  bool area_table_increasing(int i) const { return area_increasing_.at(static_cast<std::size_t>(i)); }
  const VolumeTable& volume_table() const { return vol_; }
  const VolumeTable& volume_alpha_table() const { return vol_alpha_; }

  double volume(double r) const { return sphere_area(space_.n()) * vol_(r); }
  double volume_alpha(double r) const { return sphere_area(space_.n()) * vol_alpha_(r); }
  double area0(double r) const {
    const PhiValues p = space_.eval_phi(r);
    return sphere_area(space_.n()) * std::pow(p.phi, space_.n()) * p.dphi;
  }
  double area1(double r) const {
    const PhiValues p = space_.eval_phi(r);
    return space_.n() * sphere_area(space_.n()) * std::pow(p.phi, space_.n() - 1) * p.dphi * p.dphi;
  }

  /// r with V_phi(B(r)) = x.
  double radius_for_volume(double x) const { return invert(vol_, x); }
  /// r with V^alpha_phi(B(r)) = x.
  double radius_for_volume_alpha(double x) const { return invert(vol_alpha_, x); }

  double xi(double x) const { return volume_alpha(radius_for_volume(x)); }

  double chi(int i, double x) const {
    if (i != 0 && i != 1) throw ConfigError("chi: index must be 0 or 1");
    const double r = radius_for_volume_alpha(x);
    return i == 0 ? area0(r) : area1(r);
  }

 private:
  double invert(const VolumeTable& t, double x) const {
    const double wn = sphere_area(space_.n());
    const auto& r = t.knots();
    const auto& v = t.knot_values();
    const double target = x / wn;
    if (!(target >= v.front() && target <= v.back())) {
      throw RangeError("profile inversion: value " + std::to_string(x) + " outside the tabulated range [" +
                       std::to_string(wn * v.front()) + ", " + std::to_string(wn * v.back()) + "]");
    }
    const auto it = std::upper_bound(v.begin(), v.end(), target);
    std::size_t i = static_cast<std::size_t>(std::distance(v.begin(), it));
    i = std::min(i == 0 ? 0 : i - 1, v.size() - 2);
    double lo = r[i], hi = r[i + 1];
    // Bisection to a tight bracket, then Newton polish.
    for (int it2 = 0; it2 < 40; ++it2) {
      const double mid = 0.5 * (lo + hi);
      if (t(mid) < target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    double x0 = 0.5 * (lo + hi);
    for (int it2 = 0; it2 < 4; ++it2) {
      const double d = t.density(x0);
      if (!(d > 0.0)) break;
      const double next = x0 - (t(x0) - target) / d;
      if (!(next >= r[i] && next <= r[i + 1])) break;
      x0 = next;
    }
    return x0;
  }

  WarpedSpace space_;
  double alpha_;
  VolumeTable vol_, vol_alpha_;
  std::array<bool, 2> area_increasing_{};
};

inline double xi_alpha(const SliceProfile& p, double x) { return p.xi(x); }
inline double chi(const SliceProfile& p, int i, double x) { return p.chi(i, x); }

}  // namespace warpflow
