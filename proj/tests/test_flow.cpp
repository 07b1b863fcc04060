#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "warpflow/flow.hpp"

using namespace warpflow;
using fixture::grid;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Integrates to t = steps * dt with a fixed step.
std::vector<double> integrate_fixed(const WarpedSpace& sp, const GraphState& s0, Scheme scheme, double dt, int steps) {
  FlowConfig cfg;
  cfg.scheme = scheme;
  cfg.dt_policy = DtPolicy::fixed;
  cfg.dt = dt;
  FlowStepper st(sp, s0.grid, cfg);
  auto g = s0.gamma;
  for (int i = 0; i < steps; ++i) {
    st.evaluate(g);
    st.advance(g, dt);
  }
  return g;
}

GraphState cos_perturbed(const WarpedSpace& sp, int n, int res, double r0, double amp) {
  return fixture::perturbed_slice(sp, grid(GridMode::axisym, n, res), r0,
                                  [amp](double t, double) { return amp * std::cos(t); });
}

}  // namespace

TEST(Flow, SpeedVanishesOnSlices) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto s = speed(sp, slice_state(sp, grid(GridMode::axisym, 2, 64), 1.0));
  for (std::size_t k = 0; k < s.normal.size(); ++k) {
    EXPECT_NEAR(s.normal[k], 0.0, 1e-14);
    EXPECT_EQ(s.gamma_rate_expanded[k], 0.0);
  }
  const auto e = WarpedSpace::euclidean(2, 0.0, 3.0);
  const auto u = speed(e, slice_state(e, grid(GridMode::latlong, 2, 16), 1.0));
  for (double f : u.normal) EXPECT_NEAR(f, 0.0, 1e-14);
}

TEST(Flow, ProductAndExpandedGammaRatesAgree) {
  std::mt19937_64 rng(21);
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  for (int trial = 0; trial < 3; ++trial) {
    const auto z = fixture::random_zonal(rng, 0.2);
    const auto st = fixture::perturbed_slice(sp, grid(GridMode::axisym, 2, 512), 1.2,
                                             [&](double t, double) { return z(t); });
    EXPECT_LT(speed(sp, st).max_mismatch, 1e-8);
  }
  const auto bh = WarpedSpace::schwarzschild(2, 1.0, 0.0, 6.0);
  const auto c = fixture::random_cubic(rng, 0.1);
  EXPECT_LT(speed(bh, fixture::perturbed_slice(bh, grid(GridMode::latlong, 2, 48), 4.0, c)).max_mismatch, 1e-8);
}

TEST(Flow, SlicesAreFixedPoints) {
  const auto sp = WarpedSpace::schwarzschild(3, 1.0, 0.0, 6.0);
  for (Scheme sc : {Scheme::rk4, Scheme::imex}) {
    FlowConfig cfg;
    cfg.scheme = sc;
    const auto s0 = slice_state(sp, grid(GridMode::axisym, 3, 64), 3.0);
    FlowStepper st(sp, s0.grid, cfg);
    auto g = s0.gamma;
    for (int i = 0; i < 1000; ++i) st.advance(g, planned_dt(s0.g(), st.evaluate(g), cfg));
    EXPECT_LT(max_abs_diff(g, s0.gamma), 1e-13) << to_string(sc);
  }
}

TEST(Flow, StepAdvancesTime) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto s0 = cos_perturbed(sp, 2, 32, 1.0, 0.05);
  const auto s1 = step(sp, s0, FlowConfig{});
  EXPECT_GT(s1.t, 0.0);
  EXPECT_GT(max_abs_diff(s1.gamma, s0.gamma), 0.0);
}

TEST(Flow, RK4IsFourthOrderInTime) {
  // Coarse grid so the largest stable step leaves the time error well above roundoff.
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto s0 = cos_perturbed(sp, 2, 16, 1.0, 0.1);
  FlowConfig cfg;
  FlowStepper probe(sp, s0.grid, cfg);
  const double dt = planned_dt(s0.g(), probe.evaluate(s0.gamma), cfg);
  const int N = 40;
  const auto a = integrate_fixed(sp, s0, Scheme::rk4, dt, N);
  const auto b = integrate_fixed(sp, s0, Scheme::rk4, dt / 2, 2 * N);
  const auto c = integrate_fixed(sp, s0, Scheme::rk4, dt / 4, 4 * N);
  ASSERT_GT(max_abs_diff(b, c), 1e-13);
  const double order = std::log2(max_abs_diff(a, b) / max_abs_diff(b, c));
  EXPECT_NEAR(order, 4.0, 0.5);
}

TEST(Flow, ImexIsFirstOrderInTime) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto s0 = cos_perturbed(sp, 2, 32, 1.0, 0.1);
  const double dt = 0.01;
  const auto a = integrate_fixed(sp, s0, Scheme::imex, dt, 20);
  const auto b = integrate_fixed(sp, s0, Scheme::imex, dt / 2, 40);
  const auto c = integrate_fixed(sp, s0, Scheme::imex, dt / 4, 80);
  EXPECT_NEAR(std::log2(max_abs_diff(a, b) / max_abs_diff(b, c)), 1.0, 0.3);
}

TEST(Flow, RunConvergesToTheVolumeMatchedSlice) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  FlowConfig cfg;
  cfg.grad_tol = 1e-12;
  cfg.alphas = {0.0};
  const auto tr = run(sp, cos_perturbed(sp, 2, 64, 1.0, 0.05), cfg);
  ASSERT_TRUE(tr.converged);
  ASSERT_TRUE(tr.r_infinity && tr.r_star);
  EXPECT_NEAR(*tr.r_infinity, *tr.r_star, 1e-8);
  EXPECT_NEAR(tr.rows.back().v_phi / tr.rows.front().v_phi, 1.0, 1e-8);
  EXPECT_LE(tr.grad_increase, 1e-13);
  EXPECT_LE(tr.c0_violation, 0.0);
  ASSERT_TRUE(tr.measured_decay_rate);
  EXPECT_LE(*tr.measured_decay_rate, -0.9 * tr.beta_hat);
  ASSERT_EQ(tr.verdicts.size(), 1u);
  EXPECT_TRUE(tr.verdicts[0].passed());
}

TEST(Flow, ImexAgreesWithRK4OnTheLimit) {
  const auto sp = WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0);
  const auto s0 = cos_perturbed(sp, 2, 64, 3.5, 0.03);
  FlowConfig cfg;
  cfg.grad_tol = 1e-10;
  const auto a = run(sp, s0, cfg);
  cfg.scheme = Scheme::imex;
  const auto b = run(sp, s0, cfg);
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_LT(b.steps * 3, a.steps);
  EXPECT_NEAR(*a.r_infinity, *b.r_infinity, 1e-4);  // imex is first order
}

TEST(Flow, TraceInvariantsAndObservers) {
  std::mt19937_64 rng(22);
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto s0 = fixture::perturbed_slice(sp, grid(GridMode::latlong, 2, 24), 1.0, fixture::random_cubic(rng, 0.1));
  FlowConfig cfg;
  cfg.max_steps = 450;
  cfg.monitors_every = 100;
  cfg.snapshot_every = 200;
  cfg.alphas = {0.0, 2.0};
  std::size_t rows = 0;
  std::vector<std::size_t> snaps;
  FlowObserver obs;
  obs.on_row = [&](const TraceRow&) { ++rows; };
  obs.on_snapshot = [&](std::size_t s, const GraphState&) { snaps.push_back(s); };
  const auto tr = run(sp, s0, cfg, obs);
  EXPECT_EQ(tr.steps, 450u);
  EXPECT_EQ(rows, tr.rows.size());
  ASSERT_EQ(tr.rows.size(), 6u);  // 0, 100, ..., 400, 450
  EXPECT_EQ(snaps, (std::vector<std::size_t>{0, 200, 400, 450}));
  for (std::size_t i = 1; i < tr.rows.size(); ++i) {
    EXPECT_GT(tr.rows[i].t, tr.rows[i - 1].t);
    EXPECT_GT(tr.rows[i].dt, 0.0);
    EXPECT_EQ(tr.rows[i].v_alpha.size(), 2u);
  }
  EXPECT_FALSE(tr.converged);
  EXPECT_EQ(tr.verdicts[0].status, VerdictStatus::inconclusive);
  EXPECT_LE(tr.grad_increase, 1e-13);
  EXPECT_LE(tr.c0_violation, 1e-10);
}

TEST(Flow, AbortsInsteadOfClamping) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  auto s0 = cos_perturbed(sp, 2, 32, 1.0, 0.05);
  FlowConfig cfg;
  cfg.dt_policy = DtPolicy::fixed;
  cfg.dt = 5.0;
  cfg.max_steps = 50;
  try {
    run(sp, s0, cfg);
    FAIL() << "expected an abort";
  } catch (const DomainEscape&) {
  } catch (const SchemeInstability&) {
  }
  s0.gamma[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(run(sp, s0, FlowConfig{}), SchemeInstability);
  s0.gamma[3] = sp.gamma_hi() + 1.0;
  EXPECT_THROW(run(sp, s0, FlowConfig{}), DomainEscape);
}

TEST(Flow, ConfigValidation) {
  FlowConfig c;
  c.c_cfl = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.grad_tol = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.monitors_every = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(scheme_from_string("euler"), ConfigError);
  EXPECT_EQ(dt_policy_from_string("fixed"), DtPolicy::fixed);
}

TEST(Flow, BetaHatFromSlab) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto st = slice_state(sp, grid(GridMode::axisym, 2, 32), 1.0);
  EXPECT_NEAR(beta_hat(sp, st), 2.0 / (std::sinh(1.0) * std::cosh(1.0)), 1e-10);
}
