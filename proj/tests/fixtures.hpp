#pragma once

// Test data shared by several suites: smooth perturbations of slices.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "warpflow/graphgeom.hpp"

namespace fixture {

/// Zonal perturbation sum_k a_k cos(k theta) with k = 1..kmax and |a_k| <= amp / k^2.
struct Zonal {
  std::vector<double> a;
  double operator()(double th) const {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * std::cos((k + 1) * th);
    return s;
  }
};

inline Zonal random_zonal(std::mt19937_64& rng, double amp, int kmax = 4) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  Zonal z;
  for (int k = 1; k <= kmax; ++k) z.a.push_back(amp * ud(rng) / (k * k));
  return z;
}

/// gamma = gamma(r0) + perturbation sampled on the grid nodes.
template <class F>
warpflow::GraphState perturbed_slice(const warpflow::WarpedSpace& space,
                                     std::shared_ptr<const warpflow::SphereGrid> grid, double r0, F&& pert) {
  auto s = warpflow::slice_state(space, grid, r0);
  for (std::size_t k = 0; k < s.gamma.size(); ++k) {
    s.gamma[k] += pert(grid->coords()[k][0], grid->coords()[k][1]);
  }
  return s;
}

/// Random cubic polynomial in x, y, z on the unit 2-sphere, scaled by amp.
struct Cubic {
  std::vector<double> a;
  double operator()(double th, double ps) const {
    const double x = std::sin(th) * std::cos(ps), y = std::sin(th) * std::sin(ps), z = std::cos(th);
    const double m[19] = {x, y, z, x * x, y * y, z * z, x * y, y * z, z * x, x * x * x, y * y * y, z * z * z,
                          x * x * y, x * x * z, y * y * x, y * y * z, z * z * x, z * z * y, x * y * z};
    double s = 0.0;
    for (int i = 0; i < 19; ++i) s += a[i] * m[i];
    return s;
  }
};

inline Cubic random_cubic(std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  Cubic c;
  for (int i = 0; i < 19; ++i) c.a.push_back(amp * ud(rng) / 6.0);
  return c;
}

inline std::shared_ptr<const warpflow::SphereGrid> grid(warpflow::GridMode m, int n, int res) {
  return std::make_shared<const warpflow::SphereGrid>(warpflow::build_grid(m, n, res));
}

/// Relative mismatch of ambient_riemann against the finite-difference oracle at one random sample.
inline double riemann_mismatch(const warpflow::WarpedSpace& sp, std::mt19937_64& rng) {
  const int n = sp.n();
  std::uniform_real_distribution<double> ur(sp.r_lo() + 0.1, sp.r_max() - 0.1);
  std::uniform_real_distribution<double> ua(0.7, std::numbers::pi - 0.7);
  std::normal_distribution<double> nd;
  std::vector<double> x(n + 1);
  x[0] = ur(rng);
  for (int i = 1; i <= n; ++i) x[i] = ua(rng);
  auto vec = [&] {
    std::vector<double> v(n + 1);
    for (auto& c : v) c = nd(rng);
    return v;
  };
  const auto X = vec(), Y = vec(), Z = vec(), W = vec();
  auto phi = [&sp](double r) { return sp.eval_phi(r).phi; };
  // Steps shrink near a pole, where the Christoffel symbols vary on the scale of phi.
  const double hs = std::min(1.0, sp.eval_phi(x[0]).phi);
  const auto R = oracle::riemann_lowered(phi, n, x, 1e-2 * hs, 1e-3 * hs);
  const auto g = oracle::warped_metric_diag(phi, n, x);
  const double want = oracle::riemann_contract(R, g, n, X, Y, Z, W);
  const double got = sp.ambient_riemann(x[0], X, Y, Z, W);
  const warpflow::PhiValues p = sp.eval_phi(x[0]);
  const double k1 = (p.dphi * p.dphi - p.phi * p.d2phi - 1.0) / (p.phi * p.phi);
  const double k2 = (p.dphi * p.dphi - 1.0) / (p.phi * p.phi);
  double norms = 1.0;
  for (const auto* v : {&X, &Y, &Z, &W}) {
    double s = 0.0;
    for (double c : *v) s += c * c;
    norms *= std::sqrt(s);
  }
  const double scale = std::max({std::abs(want), std::abs(k1) * norms, std::abs(k2) * norms, norms / (p.phi * p.phi)});
  return std::abs(got - want) / scale;
}

}  // namespace fixture
