#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "warpflow/graphgeom.hpp"

using namespace warpflow;
using fixture::grid;

TEST(GraphGeom, SliceExactness) {
  const auto sp = WarpedSpace::hyperbolic(3, 1.0, 0.0, 3.0);
  const auto st = slice_state(sp, grid(GridMode::axisym, 3, 32), 1.0);
  const auto f = compute_fields(sp, st);
  const double r = sp.r_of_gamma(st.gamma[0]);
  const double phi = std::sinh(r), dphi = std::cosh(r);
  for (std::size_t k = 0; k < f.nodes; ++k) {
    EXPECT_EQ(f.omega[k], 1.0);
    EXPECT_EQ(f.grad_sq[k], 0.0);
    EXPECT_DOUBLE_EQ(f.u[k], phi);
    EXPECT_NEAR(f.H[k], 3 * dphi / phi, 1e-14);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(f.kappa[k * 3 + i], dphi / phi, 1e-14);
    EXPECT_NEAR(f.sigma2[k], 3 * std::pow(dphi / phi, 2), 1e-13);
    EXPECT_NEAR(f.sigma3[k], std::pow(dphi / phi, 3), 1e-13);
  }
  EXPECT_NEAR(r, 1.0, 1e-12);
}

TEST(GraphGeom, EuclideanUnitSphere) {
  const auto sp = WarpedSpace::euclidean(2, 0.0, 3.0);
  const auto f = compute_fields(sp, slice_state(sp, grid(GridMode::latlong, 2, 16), 1.0));
  for (std::size_t k = 0; k < f.nodes; ++k) {
    EXPECT_NEAR(f.H[k], 2.0, 1e-12);
    EXPECT_NEAR(f.u[k], 1.0, 1e-12);
    EXPECT_NEAR(f.sigma2[k], 1.0, 1e-12);
  }
  EXPECT_NEAR(f.area(), 4 * std::numbers::pi, 1e-10);
}

TEST(GraphGeom, SliceStaticConvexityMargin) {
  const auto sp = WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0);
  const double r0 = sp.schwarzschild_r0();
  for (double r : {r0, r0 + 0.5, r0 + 2.0}) {
    const auto f = compute_fields(sp, slice_state(sp, grid(GridMode::axisym, 2, 16), r));
    const PhiValues p = sp.eval_phi(f.r[0]);
    const double want = (p.dphi * p.dphi - p.phi * p.d2phi) / (p.phi * p.dphi);
    EXPECT_NEAR(f.s_min[3], want, 1e-12);
    if (r == r0) EXPECT_NEAR(f.s_min[3], 0.0, 1e-9);
    else EXPECT_GT(f.s_min[3], 0.0);
  }
}

TEST(GraphGeom, EigenvalueConsistency) {
  std::mt19937_64 rng(1);
  const auto sp = WarpedSpace::hyperbolic(3, 1.0, 0.0, 3.0);
  const auto g = grid(GridMode::axisym, 3, 64);
  const auto z = fixture::random_zonal(rng, 0.2);
  const auto f = compute_fields(sp, fixture::perturbed_slice(sp, g, 1.2, [&](double t, double) { return z(t); }));
  for (std::size_t k = 0; k < f.nodes; ++k) {
    double tr = 0.0, tr2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      tr += f.tensor(f.weingarten, k, i, i);
      for (int j = 0; j < 3; ++j) tr2 += f.tensor(f.weingarten, k, i, j) * f.tensor(f.weingarten, k, j, i);
    }
    EXPECT_NEAR(tr, f.H[k], 1e-10 * std::max(1.0, std::abs(f.H[k])));
    EXPECT_NEAR(0.5 * (tr * tr - tr2), f.sigma2[k], 1e-10 * std::max(1.0, std::abs(f.sigma2[k])));
    EXPECT_LE(f.kappa[k * 3], f.kappa[k * 3 + 1]);
  }
}

TEST(GraphGeom, GraphFormMatchesWeingartenTrace) {
  std::mt19937_64 rng(2);
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto g = grid(GridMode::axisym, 2, 512);
  for (int trial = 0; trial < 3; ++trial) {
    const auto z = fixture::random_zonal(rng, 0.3);
    const auto st = fixture::perturbed_slice(sp, g, 1.0, [&](double t, double) { return z(t); });
    const auto f = compute_fields(sp, st);
    const auto H = mean_curvature_graphform(sp, st);
    double worst = 0.0;
    for (std::size_t k = 0; k < H.size(); ++k) worst = std::max(worst, std::abs(H[k] - f.H[k]) / std::abs(f.H[k]));
    EXPECT_LT(worst, 1e-8);
  }
}

TEST(GraphGeom, NearSliceGraphsAreMeanConvex) {
  std::mt19937_64 rng(3);
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto g = grid(GridMode::latlong, 2, 32);
  for (int trial = 0; trial < 5; ++trial) {
    const auto c = fixture::random_cubic(rng, 0.3);
    const auto st = fixture::perturbed_slice(sp, g, 1.0, c);
    if (closeness(sp, st) > 0.1) continue;
    const auto f = compute_fields(sp, st);
    for (double h : f.H) EXPECT_GT(h, 0.0);
  }
}

TEST(GraphGeom, Closeness) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto g = grid(GridMode::axisym, 2, 256);
  EXPECT_EQ(closeness(sp, slice_state(sp, g, 1.0)), 0.0);
  const auto st = fixture::perturbed_slice(sp, g, 1.0, [](double t, double) { return 0.05 * std::cos(t); });
  const double eps = closeness(sp, st);
  EXPECT_NEAR(eps, 0.0025, 1e-10);
  const auto f = compute_fields(sp, st);
  for (std::size_t k = 0; k < f.nodes; ++k) {
    EXPECT_GE(f.u[k] * f.u[k] / (f.phi[k] * f.phi[k]) * (1.0 + eps), 1.0 - 1e-15);
  }
}

TEST(GraphGeom, ConformalIdentityOnSlice) {
  const auto sp = WarpedSpace::schwarzschild(2, 1.0, 0.0, 6.0);
  const auto res = conformal_identity_residual(sp, slice_state(sp, grid(GridMode::axisym, 2, 32), 4.0));
  EXPECT_EQ(res.max_residual, 0.0);
}

TEST(GraphGeom, ConformalIdentityConverges) {
  std::mt19937_64 rng(4);
  for (int n : {2, 3}) {
    const auto sp = WarpedSpace::schwarzschild(n, 1.0, 0.0, 6.0);
    const auto z = fixture::random_zonal(rng, 0.1);
    auto pert = [&](double t, double) { return z(t); };
    const auto a = conformal_identity_residual(sp, fixture::perturbed_slice(sp, grid(GridMode::axisym, n, 128), 3.5, pert));
    const auto b = conformal_identity_residual(sp, fixture::perturbed_slice(sp, grid(GridMode::axisym, n, 256), 3.5, pert));
    EXPECT_GT(a.max_residual / b.max_residual, std::pow(2.0, 3.5)) << "n=" << n;
    EXPECT_LT(b.max_residual, 1e-5);
    EXPECT_LT(std::abs(b.trace_integral), 1e-6);
    EXPECT_LT(b.trace_mismatch, 1e-5);
  }
}

TEST(GraphGeom, ConformalIdentityLatlong) {
  std::mt19937_64 rng(5);
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto c = fixture::random_cubic(rng, 0.1);
  const auto a = conformal_identity_residual(sp, fixture::perturbed_slice(sp, grid(GridMode::latlong, 2, 32), 1.0, c));
  const auto b = conformal_identity_residual(sp, fixture::perturbed_slice(sp, grid(GridMode::latlong, 2, 64), 1.0, c));
  EXPECT_LT(b.max_residual, a.max_residual);
  EXPECT_LT(std::abs(b.trace_integral), 1e-2);
}

TEST(GraphGeom, StrictStaticConvexPointAtOuterMaximum) {
  std::mt19937_64 rng(6);
  const auto bh = WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0);
  for (const auto& sp : {WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0), bh}) {
    const double r0 = sp.is_black_hole() ? sp.schwarzschild_r0() + 1.0 : 1.0;
    for (int trial = 0; trial < 5; ++trial) {
      const auto c = fixture::random_cubic(rng, 0.2);
      const auto f = compute_fields(sp, fixture::perturbed_slice(sp, grid(GridMode::latlong, 2, 32), r0, c));
      const auto at = std::max_element(f.phi.begin(), f.phi.end()) - f.phi.begin();
      EXPECT_GT(f.s_min[static_cast<std::size_t>(at)], 0.0);
    }
  }
}

TEST(GraphGeom, LatlongRotationPermutesFields) {
  std::mt19937_64 rng(7);
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto g = grid(GridMode::latlong, 2, 16);
  const auto c = fixture::random_cubic(rng, 0.2);
  const auto st = fixture::perturbed_slice(sp, g, 1.0, c);
  auto rot = st;
  const int cols = g->cols(), shift = 7;
  for (int i = 0; i < g->rows(); ++i)
    for (int j = 0; j < cols; ++j) rot.gamma[i * cols + (j + shift) % cols] = st.gamma[i * cols + j];
  const auto a = compute_fields(sp, st), b = compute_fields(sp, rot);
  for (int i = 0; i < g->rows(); ++i)
    for (int j = 0; j < cols; ++j) {
      const std::size_t k = i * cols + j, kr = i * cols + (j + shift) % cols;
      EXPECT_EQ(a.H[k], b.H[kr]);
      EXPECT_EQ(a.s_min[k], b.s_min[kr]);
      EXPECT_EQ(a.dmu[k], b.dmu[kr]);
    }
}

TEST(GraphGeom, DomainEscapeCarriesNode) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  auto st = slice_state(sp, grid(GridMode::axisym, 2, 16), 1.0);
  st.gamma[5] = sp.gamma_hi() + 0.1;
  try {
    compute_fields(sp, st);
    FAIL() << "expected DomainEscape";
  } catch (const DomainEscape& e) {
    EXPECT_EQ(e.node(), 5u);
  }
  st.gamma.pop_back();
  EXPECT_THROW(compute_fields(sp, st), ShapeError);
}
