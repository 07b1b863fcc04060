#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "warpflow/monitors.hpp"

using namespace warpflow;
using fixture::grid;

namespace {

FlowTrace synthetic(int n, std::vector<double> alphas, std::size_t rows) {
  FlowTrace tr;
  tr.n = n;
  tr.alphas = std::move(alphas);
  for (std::size_t i = 0; i < rows; ++i) {
    TraceRow r;
    r.step = i * 10;
    r.t = 0.1 * static_cast<double>(i);
    r.dt = 0.01;
    r.v_phi = 2.0;
    r.v_alpha.assign(tr.alphas.size(), 1.0 + 0.01 * static_cast<double>(i));
    r.rate_v_alpha.assign(tr.alphas.size(), 0.0);
    r.a0 = 5.0 - 0.01 * static_cast<double>(i);
    r.a1 = 7.0 - 0.01 * static_cast<double>(i);
    r.min_smin = 0.1;
    r.r_min_node = 3.3;
    r.r_max_node = 3.6;
    tr.rows.push_back(r);
  }
  return tr;
}

FlowTrace hyperbolic_run(std::size_t monitors_every, std::size_t max_steps) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto s0 = fixture::perturbed_slice(sp, grid(GridMode::axisym, 2, 64), 1.0,
                                           [](double t, double) { return 0.05 * std::cos(t); });
  FlowConfig cfg;
  cfg.alphas = {0.0, 2.0};
  cfg.monitors_every = monitors_every;
  cfg.max_steps = max_steps;
  return run(sp, s0, cfg);
}

}  // namespace

TEST(Monitors, Epsilon0Bound) {
  EXPECT_TRUE(std::isinf(epsilon0_bound(WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0), 2.0)));
  EXPECT_TRUE(std::isinf(epsilon0_bound(WarpedSpace::euclidean(3, 0.0, 3.0), 2.0)));
  for (int n : {2, 3}) {
    const auto sp = WarpedSpace::schwarzschild(n, 1.0, 0.0, 8.0);
    const double R = sp.schwarzschild_r0() + 1.0;
    const double e = epsilon0_bound(sp, R);
    ASSERT_GT(e, 0.0);
    EXPECT_LT(e, 2.0 / (3.0 * n));
    // Direct substitution on both sides of the crossing.
    const PhiValues p = sp.eval_phi(R);
    const double rhs = 2.0 * p.dphi * std::pow(p.phi, 0.5 * (n - 1));
    auto lhs = [&](double x) { return 2.0 / (1.0 + x) * std::sqrt(sp.c0() * (2.0 / x - 3.0 * n)); };
    EXPECT_GE(lhs(e), rhs);
    EXPECT_LT(lhs(e * (1.0 + 1e-9)), rhs);
  }
  EXPECT_NEAR(epsilon0_bound(WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0), 4.0), 0.2905, 5e-4);
}

TEST(Monitors, Epsilon0RejectsBadInput) {
  const auto sp = WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0);
  EXPECT_THROW(epsilon0_bound(sp, 9.0), DomainError);
  const auto ns = WarpedSpace::custom(
      2, [](double r) { return PhiValues{std::exp(r), std::exp(r), std::exp(r), std::exp(r)}; }, 0.0, 2.0);
  EXPECT_THROW(epsilon0_bound(ns, 1.0), NotApplicableError);
}

TEST(Monitors, VerdictInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double w = u(rng), t = std::abs(u(rng));
    const auto v = graded("x", w, t, "");
    EXPECT_EQ(v.passed(), w <= t);
    EXPECT_EQ(v.failed(), w > t);
    EXPECT_TRUE(v.preconditions_held);
  }
  EXPECT_FALSE(graded("x", std::nan(""), 1.0, "").passed());
}

TEST(Monitors, SyntheticMonotonicity) {
  const auto sp = WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0);
  auto tr = synthetic(2, {0.0, 1.0}, 6);
  // phi'' > 0 on Schwarzschild, so alpha = 0 must be non-decreasing and alpha = 2 non-increasing.
  auto v = check_alpha_monotonicity(tr, sp, 0.0);
  EXPECT_TRUE(v.passed());
  EXPECT_EQ(v.note, "non-decreasing");
  auto t2 = synthetic(2, {2.0}, 6);
  EXPECT_TRUE(check_alpha_monotonicity(t2, sp, 2.0).failed());
  const auto hyp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  auto th = synthetic(2, {0.0}, 6);
  for (auto& r : th.rows) r.r_min_node = 0.9, r.r_max_node = 1.1;
  EXPECT_TRUE(check_alpha_monotonicity(th, hyp, 0.0).passed());

  // alpha = 1 is conservation.
  auto c = check_alpha_monotonicity(tr, sp, 1.0);
  EXPECT_TRUE(c.passed());
  EXPECT_EQ(c.worst_violation, 0.0);
  tr.rows[3].v_phi = 2.0 * (1.0 + 1e-3);
  EXPECT_TRUE(check_alpha_monotonicity(tr, sp, 1.0).failed());
  EXPECT_NEAR(check_volume_conservation(tr).worst_violation, 1e-3, 1e-12);

  EXPECT_EQ(check_alpha_monotonicity(tr, sp, 3.0).status, VerdictStatus::not_applicable);
}

TEST(Monitors, AreaMonotonicityPreconditions) {
  const auto sp = WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0);
  auto tr = synthetic(2, {}, 5);
  EXPECT_TRUE(check_area_monotonicity(tr, sp, AreaFunctional::a0).passed());
  EXPECT_EQ(check_area_monotonicity(tr, sp, AreaFunctional::a1).status, VerdictStatus::not_applicable);
  tr.rows[2].a0 += 0.1;
  EXPECT_TRUE(check_area_monotonicity(tr, sp, AreaFunctional::a0).failed());
  tr.rows[2].min_smin = -1.0;
  EXPECT_EQ(check_area_monotonicity(tr, sp, AreaFunctional::a0).status, VerdictStatus::not_applicable);

  // Below r0 the pointwise lower hypothesis fails.
  auto low = synthetic(2, {}, 5);
  for (auto& r : low.rows) r.r_min_node = 2.1, r.r_max_node = 2.5;
  EXPECT_EQ(check_area_monotonicity(low, sp, AreaFunctional::a0).status, VerdictStatus::not_applicable);

  const auto ns = WarpedSpace::custom(
      2, [](double r) { return PhiValues{std::exp(r), std::exp(r), std::exp(r), std::exp(r)}; }, 0.0, 5.0);
  EXPECT_EQ(check_area_monotonicity(synthetic(2, {}, 5), ns, AreaFunctional::a0).status,
            VerdictStatus::not_applicable);
}

TEST(Monitors, InequalitiesOnSlicesAreEqualities) {
  const auto sp = WarpedSpace::schwarzschild(3, 1.0, 0.0, 8.0);
  const std::vector<double> alphas{0.0, 0.5, 1.0};
  std::vector<SliceProfile> profs;
  for (double a : alphas) profs.emplace_back(sp, a);
  const auto st = slice_state(sp, grid(GridMode::axisym, 3, 128), 3.0);
  const auto vs = check_inequalities(sp, summarize_graph(sp, st, profs), profs, 1e-12, 4.0);
  ASSERT_EQ(vs.size(), 9u);
  for (const auto& v : vs) {
    EXPECT_TRUE(v.passed()) << v.name << " " << v.note;
    EXPECT_NE(v.note.find("equality"), std::string::npos) << v.name << " " << v.note;
  }
}

TEST(Monitors, HyperbolicVolumeGapIsStrict) {
  std::mt19937_64 rng(9);
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  std::vector<SliceProfile> profs{SliceProfile(sp, 0.0)};
  for (int i = 0; i < 4; ++i) {
    const auto z = fixture::random_zonal(rng, 0.15);
    const auto st = fixture::perturbed_slice(sp, grid(GridMode::axisym, 2, 256), 1.2,
                                             [&](double t, double) { return z(t); });
    const auto vs = check_inequalities(sp, summarize_graph(sp, st, profs), profs, 1e-12);
    ASSERT_TRUE(vs[0].passed()) << vs[0].note;
    EXPECT_LT(vs[0].worst_violation, -1e-6);  // strict gap
  }
}

TEST(Monitors, SchwarzschildAreaInequalityHolds) {
  std::mt19937_64 rng(10);
  const auto sp = WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0);
  const double R = sp.schwarzschild_r0() + 1.0;
  std::vector<SliceProfile> profs{SliceProfile(sp, 0.0), SliceProfile(sp, 0.5)};
  int checked = 0;
  for (int i = 0; i < 4; ++i) {
    const auto z = fixture::random_zonal(rng, 0.03);
    const auto st = fixture::perturbed_slice(sp, grid(GridMode::axisym, 2, 256), 3.5,
                                             [&](double t, double) { return z(t); });
    for (const auto& v : check_inequalities(sp, summarize_graph(sp, st, profs), profs, 1e-12, R)) {
      if (v.status == VerdictStatus::not_applicable) continue;
      EXPECT_TRUE(v.passed()) << v.name << " " << v.note;
      ++checked;
    }
  }
  EXPECT_GE(checked, 8);
}

TEST(Monitors, RunBatteryOnHyperbolicFlow) {
  const auto tr = hyperbolic_run(200, 0);
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  int applicable = 0;
  for (const auto& v : check_trace(tr, sp)) {
    if (v.status == VerdictStatus::not_applicable) continue;
    ++applicable;
    EXPECT_TRUE(v.passed()) << v.name << " worst=" << v.worst_violation << " " << v.note;
  }
  EXPECT_GE(applicable, 7);
}

TEST(Monitors, VariationalMismatchIsSecondOrderInMonitorSpacing) {
  const auto tr = hyperbolic_run(40, 4000);
  for (auto q : {VariationalQuantity::v_alpha, VariationalQuantity::a0}) {
    const double m1 = variational_mismatch(tr, q, 0, 1, 2);
    const double m2 = variational_mismatch(tr, q, 0, 2, 2);
    EXPECT_NEAR(m2 / m1, 4.0, 1.0);
  }
  EXPECT_THROW(variational_mismatch(tr, VariationalQuantity::a0, 0, 3, 2), ConfigError);
  const auto fine = hyperbolic_run(10, 1000);
  const auto v = check_variational_formulas(fine, VariationalQuantity::v_alpha, 0);
  EXPECT_TRUE(v.passed()) << v.worst_violation << " " << v.tolerance;
}

TEST(Monitors, RunsAreDeterministic) {
  const auto a = hyperbolic_run(100, 600);
  const auto b = hyperbolic_run(100, 600);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].t, b.rows[i].t);
    EXPECT_EQ(a.rows[i].v_alpha, b.rows[i].v_alpha);
    EXPECT_EQ(a.rows[i].a1, b.rows[i].a1);
  }
}

TEST(Monitors, ImexVolumeDriftShrinksWithDt) {
  const auto sp = WarpedSpace::hyperbolic(2, 1.0, 0.0, 3.0);
  const auto s0 = fixture::perturbed_slice(sp, grid(GridMode::axisym, 2, 64), 1.0,
                                           [](double t, double) { return 0.1 * std::cos(t); });
  auto drift = [&](double dt, std::size_t steps) {
    FlowConfig cfg;
    cfg.scheme = Scheme::imex;
    cfg.dt_policy = DtPolicy::fixed;
    cfg.dt = dt;
    cfg.max_steps = steps;
    return check_volume_conservation(run(sp, s0, cfg)).worst_violation;
  };
  const double d1 = drift(4e-3, 50), d2 = drift(2e-3, 100);
  EXPECT_NEAR(std::log2(d1 / d2), 1.0, 0.3);
}

TEST(Monitors, SummaryOverloadsAgree) {
  const auto sp = WarpedSpace::schwarzschild(2, 1.0, 0.0, 8.0);
  std::mt19937_64 rng(12);
  const auto st = fixture::perturbed_slice(sp, grid(GridMode::latlong, 2, 16), 3.5, fixture::random_cubic(rng, 0.05));
  const std::vector<SliceProfile> profs{SliceProfile(sp, 0.0), SliceProfile(sp, 0.5)};
  const auto a = summarize_graph(sp, st, std::vector<double>{0.0, 0.5});
  const auto b = summarize_graph(sp, st, profs);
  EXPECT_EQ(a.alphas, b.alphas);
  EXPECT_NEAR(a.v_phi, b.v_phi, 1e-13 * a.v_phi);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(a.v_alpha[i], b.v_alpha[i], 1e-13 * a.v_alpha[i]);
  EXPECT_EQ(a.a0, b.a0);
  EXPECT_EQ(a.closeness, b.closeness);
}
