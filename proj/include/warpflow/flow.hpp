#pragma once

// Time integration of the scalar graph equation
//   d gamma / dt = (n - u H / phi') omega / phi
// with explicit RK4 or a lagged-coefficient IMEX scheme, plus the run loop
// that records functionals and detects convergence to a slice.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "warpflow/functionals.hpp"
#include "warpflow/verdict.hpp"

namespace warpflow {

enum class Scheme { rk4, imex };
enum class DtPolicy { fixed, adaptive };

inline std::string to_string(Scheme s) { return s == Scheme::rk4 ? "rk4" : "imex"; }
inline std::string to_string(DtPolicy p) { return p == DtPolicy::fixed ? "fixed" : "adaptive"; }

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "rk4") return Scheme::rk4;
  if (s == "imex") return Scheme::imex;
  throw ConfigError("unknown scheme '" + s + "' (expected rk4 or imex)");
}

inline DtPolicy dt_policy_from_string(const std::string& s) {
  if (s == "fixed") return DtPolicy::fixed;
  if (s == "adaptive") return DtPolicy::adaptive;
  throw ConfigError("unknown dt policy '" + s + "' (expected fixed or adaptive)");
}

struct FlowConfig {
  Scheme scheme = Scheme::rk4;
  DtPolicy dt_policy = DtPolicy::adaptive;
  double dt = 1e-4;  // used by the fixed policy
  double c_cfl = 0.5;
  double imex_boost = 10.0;  // IMEX dt cap as a multiple of the explicit bound
  double t_max = 50.0;
  double grad_tol = 1e-12;
  std::size_t max_steps = 0;  // 0: unlimited
  int monitors_every = 100;
  int snapshot_every = 0;  // 0: first and last only
  std::vector<double> alphas;  // V_phi^alpha columns besides V_phi itself

  void validate() const {
    if (!(c_cfl > 0.0 && c_cfl <= 1.0)) throw ConfigError("c_cfl must lie in (0, 1]");
    if (!(grad_tol > 0.0)) throw ConfigError("grad_tol must be positive");
    if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
    if (dt_policy == DtPolicy::fixed && !(dt > 0.0)) throw ConfigError("fixed dt must be positive");
    if (monitors_every < 1) throw ConfigError("monitors_every must be >= 1");
    if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
    if (!(imex_boost >= 1.0)) throw ConfigError("imex_boost must be >= 1");
    for (double a : alphas)
      if (!std::isfinite(a)) throw ConfigError("alpha values must be finite");
  }
};

/// Normal speed and gamma-rate at every node, evaluated twice for cross-checking.
struct SpeedFields {
  std::vector<double> normal;             // F = n - u H / phi'
  std::vector<double> gamma_rate;         // F omega / phi
  std::vector<double> gamma_rate_expanded;
  double max_mismatch = 0.0;  // max |product - expanded| / max(1, |product|)
};

namespace detail {

/// Right-hand side of the gamma equation in expanded form, with the quantities
/// the stepper needs for its time-step bound.
struct RateEval {
  std::vector<double> rate;
  std::vector<double> coef;  // 1 / (phi phi' omega), the Laplacian coefficient
  double max_grad_sq = 0.0;
  double min_phi_dphi_omega = std::numeric_limits<double>::infinity();
  double min_imex_bound = std::numeric_limits<double>::infinity();  // min phi phi' omega^3 / |D gamma|^2
};

inline void check_gamma(const WarpedSpace& space, std::span<const double> gamma) {
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    if (!std::isfinite(gamma[k])) {
      throw SchemeInstability("non-finite gamma at node " + std::to_string(k) + "; reduce c_cfl or dt");
    }
  }
  for (std::size_t k = 0; k < gamma.size(); ++k) radial_node(space, gamma[k], k);
}

inline void gamma_rate(const WarpedSpace& space, const SphereGrid& grid, std::span<const double> gamma,
                       RateEval& out) {
  const auto s = grid.scalar_derivatives(gamma);
  const std::size_t N = gamma.size();
  const int n = grid.n();
  out.rate.resize(N);
  out.coef.resize(N);
  out.max_grad_sq = 0.0;
  out.min_phi_dphi_omega = std::numeric_limits<double>::infinity();
  out.min_imex_bound = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < N; ++k) {
    const auto rn = radial_node(space, gamma[k], k);
    const double p2 = s.grad_sq[k];
    const double om2 = 1.0 + p2;
    const double om = std::sqrt(om2);
    const double ppo = rn.p.phi * rn.p.dphi * om;
    out.coef[k] = 1.0 / ppo;
    out.rate[k] = (s.lap[k] - s.q[k] / om2) / ppo + n * p2 / (rn.p.phi * om);
    out.max_grad_sq = std::max(out.max_grad_sq, p2);
    out.min_phi_dphi_omega = std::min(out.min_phi_dphi_omega, ppo);
    if (p2 > 0.0) out.min_imex_bound = std::min(out.min_imex_bound, ppo * om2 / p2);
  }
}

}  // namespace detail

inline SpeedFields speed(const WarpedSpace& space, const GraphState& state) {
  const auto f = compute_fields(space, state);
  SpeedFields out;
  out.normal = normal_speed(f);
  out.gamma_rate.resize(f.nodes);
  for (std::size_t k = 0; k < f.nodes; ++k) out.gamma_rate[k] = out.normal[k] * f.omega[k] / f.phi[k];
  detail::RateEval e;
  detail::gamma_rate(space, state.g(), state.gamma, e);
  out.gamma_rate_expanded = e.rate;
  for (std::size_t k = 0; k < f.nodes; ++k) {
    const double a = out.gamma_rate[k];
    out.max_mismatch = std::max(out.max_mismatch, std::abs(a - e.rate[k]) / std::max(1.0, std::abs(a)));
  }
  return out;
}

/// Explicit step bound c_cfl h_eff^2 min(phi phi' omega); IMEX relaxes it to the explicit remainder.
inline double planned_dt(const SphereGrid& grid, const detail::RateEval& e, const FlowConfig& cfg) {
  if (cfg.dt_policy == DtPolicy::fixed) return cfg.dt;
  const double h = grid.stiffness_spacing();
  const double dt_exp = cfg.c_cfl * h * h * e.min_phi_dphi_omega;
  if (cfg.scheme == Scheme::rk4) return dt_exp;
  const double dt_rem = cfg.c_cfl * h * h * e.min_imex_bound;
  return std::min(dt_rem, cfg.imex_boost * dt_exp);
}

/// Stepper holding scratch buffers and, for IMEX, the factorization pattern.
class FlowStepper {
 public:
  FlowStepper(WarpedSpace space, std::shared_ptr<const SphereGrid> grid, FlowConfig cfg)
      : space_(std::move(space)), grid_(std::move(grid)), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!grid_) throw StateError("FlowStepper needs a grid");
    if (grid_->n() != space_.n()) throw ShapeError("grid and space dimensions differ");
    if (cfg_.scheme == Scheme::imex) {
      lap_ = grid_->laplacian_matrix();
      Eigen::SparseMatrix<double> I(lap_.rows(), lap_.cols());
      I.setIdentity();
      system_ = I - lap_;
      lu_.analyzePattern(system_);
    }
  }

  const FlowConfig& config() const { return cfg_; }
  const SphereGrid& grid() const { return *grid_; }
  const WarpedSpace& space() const { return space_; }

  /// Evaluates the right-hand side at gamma; the result feeds the next advance().
  const detail::RateEval& evaluate(std::span<const double> gamma) {
    detail::gamma_rate(space_, *grid_, gamma, k1_);
    return k1_;
  }

  /// Advances gamma by dt, reusing the last evaluate() at gamma as the first stage.
  void advance(std::vector<double>& gamma, double dt) {
    if (cfg_.scheme == Scheme::rk4) {
      rk4(gamma, dt);
    } else {
      imex(gamma, dt);
    }
    detail::check_gamma(space_, gamma);
  }

 private:
  void rk4(std::vector<double>& y, double dt) {
    const std::size_t N = y.size();
    tmp_.resize(N);
    acc_ = k1_.rate;
    for (std::size_t k = 0; k < N; ++k) tmp_[k] = y[k] + 0.5 * dt * k1_.rate[k];
    stage(tmp_);
    for (std::size_t k = 0; k < N; ++k) {
      acc_[k] += 2.0 * ks_.rate[k];
      tmp_[k] = y[k] + 0.5 * dt * ks_.rate[k];
    }
    stage(tmp_);
    for (std::size_t k = 0; k < N; ++k) {
      acc_[k] += 2.0 * ks_.rate[k];
      tmp_[k] = y[k] + dt * ks_.rate[k];
    }
    stage(tmp_);
    for (std::size_t k = 0; k < N; ++k) y[k] += dt / 6.0 * (acc_[k] + ks_.rate[k]);
  }

  void stage(std::span<const double> y) {
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (!std::isfinite(y[k])) throw SchemeInstability("non-finite stage value; reduce c_cfl or dt");
    }
    detail::gamma_rate(space_, *grid_, y, ks_);
  }

  // (I - dt a L) y_new = y + dt (rate - a L y), a lagged from the current state.
  void imex(std::vector<double>& y, double dt) {
    const auto N = static_cast<Eigen::Index>(y.size());
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), N);
    const Eigen::VectorXd ly = lap_ * yv;
    Eigen::VectorXd rhs(N);
    for (Eigen::Index k = 0; k < N; ++k) {
      const auto i = static_cast<std::size_t>(k);
      rhs(k) = y[i] + dt * (k1_.rate[i] - k1_.coef[i] * ly(k));
    }
    for (Eigen::Index c = 0; c < lap_.outerSize(); ++c) {
      Eigen::SparseMatrix<double>::InnerIterator src(lap_, c);
      for (Eigen::SparseMatrix<double>::InnerIterator it(system_, c); it; ++it) {
        while (src && src.row() < it.row()) ++src;
        const double l = (src && src.row() == it.row()) ? src.value() : 0.0;
        it.valueRef() = (it.row() == it.col() ? 1.0 : 0.0) - dt * k1_.coef[static_cast<std::size_t>(it.row())] * l;
      }
    }
    lu_.factorize(system_);
    if (lu_.info() != Eigen::Success) throw SchemeInstability("IMEX factorization failed; reduce dt");
    const Eigen::VectorXd sol = lu_.solve(rhs);
    for (Eigen::Index k = 0; k < N; ++k) y[static_cast<std::size_t>(k)] = sol(k);
  }

  WarpedSpace space_;
  std::shared_ptr<const SphereGrid> grid_;
  FlowConfig cfg_;
  detail::RateEval k1_, ks_;
  std::vector<double> tmp_, acc_;
  Eigen::SparseMatrix<double> lap_, system_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

/// One step of the configured scheme with the configured dt policy.
inline GraphState step(const WarpedSpace& space, const GraphState& state, const FlowConfig& cfg) {
  FlowStepper s(space, state.grid, cfg);
  GraphState out = state;
  const auto& e = s.evaluate(out.gamma);
  const double dt = planned_dt(state.g(), e, cfg);
  s.advance(out.gamma, dt);
  out.t += dt;
  return out;
}

struct TraceRow {
  std::size_t step = 0;
  double t = 0.0;
  double dt = 0.0;
  double max_grad_sq = 0.0;
  double v_phi = 0.0;
  std::vector<double> v_alpha;
  double a0 = 0.0, a1 = 0.0;
  double min_smin = 0.0;
  double max_speed = 0.0;
  double r_min_node = 0.0, r_max_node = 0.0;
  // First-variation integrals with the current speed.
  std::vector<double> rate_v_alpha;
  double rate_v_phi = 0.0, rate_a0 = 0.0, rate_a1 = 0.0;
};

struct FlowTrace {
  int n = 0;
  std::vector<double> alphas;
  std::vector<TraceRow> rows;
  std::vector<double> step_t, step_grad;  // max |D gamma|^2 at the start of every step and at the end
  double gamma0_min = 0.0, gamma0_max = 0.0;
  double c0_violation = 0.0;  // worst excursion of gamma outside the initial bracket
  double grad_increase = 0.0;  // worst relative step-to-step increase of max |D gamma|^2
  double grad_increase_t = 0.0;
  double beta_hat = 0.0;
  std::optional<double> measured_decay_rate;
  std::optional<double> r_infinity;
  std::optional<double> r_star;
  bool converged = false;
  std::size_t steps = 0;
  std::vector<Verdict> verdicts;
  GraphState final_state;
};

struct FlowObserver {
  std::function<void(const TraceRow&)> on_row;
  std::function<void(std::size_t step, const GraphState&)> on_snapshot;
};

namespace detail {

inline TraceRow monitor_row(const WarpedSpace& space, const GraphState& st, const VolumeTable& vphi,
                            const std::vector<VolumeTable>& valpha, std::size_t step, double dt) {
  const auto f = compute_fields(space, st);
  const auto F = normal_speed(f);
  TraceRow row;
  row.step = step;
  row.t = st.t;
  row.dt = dt;
  row.v_phi = weighted_volume_alpha(vphi, st);
  for (const auto& tab : valpha) row.v_alpha.push_back(weighted_volume_alpha(tab, st));
  row.a0 = weighted_area(f);
  row.a1 = weighted_mean_curvature_integral(f);
  row.max_grad_sq = *std::max_element(f.grad_sq.begin(), f.grad_sq.end());
  row.min_smin = std::numeric_limits<double>::infinity();
  for (double s : f.s_min) row.min_smin = std::min(row.min_smin, s);
  for (double v : F) row.max_speed = std::max(row.max_speed, std::abs(v));
  row.r_min_node = *std::min_element(f.r.begin(), f.r.end());
  row.r_max_node = *std::max_element(f.r.begin(), f.r.end());
  const auto base = functional_rates(f, F, 1.0);
  row.rate_v_phi = base.volume_alpha;
  row.rate_a0 = base.area0;
  row.rate_a1 = base.area1;
  for (const auto& tab : valpha) row.rate_v_alpha.push_back(functional_rates(f, F, tab.alpha()).volume_alpha);
  return row;
}

/// Least-squares slope of log y against t over the samples with t >= t_from and y > 0.
inline std::optional<double> log_slope(const std::vector<double>& t, const std::vector<double>& y, double t_from) {
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_from || !(y[i] > 0.0)) continue;
    const double ly = std::log(y[i]);
    n += 1;
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
  }
  const double den = n * stt - st * st;
  if (n < 3 || !(den > 0.0)) return std::nullopt;
  return (n * sty - st * sy) / den;
}

}  // namespace detail

/// 2(n-1) / max of phi phi' omega over the slab swept by the initial graph.
inline double beta_hat(const WarpedSpace& space, const GraphState& state0) {
  const auto s = state0.g().scalar_derivatives(state0.gamma);
  double rlo = std::numeric_limits<double>::infinity(), rhi = -rlo, om = 1.0;
  for (std::size_t k = 0; k < state0.gamma.size(); ++k) {
    const double r = detail::radial_node(space, state0.gamma[k], k).r;
    rlo = std::min(rlo, r);
    rhi = std::max(rhi, r);
    om = std::max(om, std::sqrt(1.0 + s.grad_sq[k]));
  }
  double m = 0.0;
  const int samples = 64;
  for (int i = 0; i <= samples; ++i) {
    const PhiValues p = space.eval_phi(rlo + (rhi - rlo) * i / samples);
    m = std::max(m, p.phi * p.dphi);
  }
  return 2.0 * (space.n() - 1) / (m * om);
}

/// dmu-weighted mean of r over the graph.
inline double mean_radius(const WarpedSpace& space, const GraphState& state) {
  const auto f = compute_fields(space, state);
  return f.integrate(f.r) / f.area();
}

inline FlowTrace run(const WarpedSpace& space, const GraphState& state0, const FlowConfig& cfg,
                     const FlowObserver& obs = {}) {
  cfg.validate();
  const SphereGrid& grid = state0.g();
  detail::check_gamma(space, state0.gamma);
  FlowStepper stepper(space, state0.grid, cfg);
  const VolumeTable vphi(space, 1.0);
  std::vector<VolumeTable> valpha;
  for (double a : cfg.alphas) valpha.emplace_back(space, a);

  FlowTrace tr;
  tr.n = space.n();
  tr.alphas = cfg.alphas;
  tr.gamma0_min = *std::min_element(state0.gamma.begin(), state0.gamma.end());
  tr.gamma0_max = *std::max_element(state0.gamma.begin(), state0.gamma.end());
  tr.beta_hat = beta_hat(space, state0);
  try {
    const SliceProfile prof(space, 1.0);
    tr.r_star = prof.radius_for_volume_alpha(weighted_volume_alpha(vphi, state0));
  } catch (const std::exception&) {
    tr.r_star.reset();
  }

  GraphState st = state0;
  auto emit_row = [&](double dt) {
    tr.rows.push_back(detail::monitor_row(space, st, vphi, valpha, tr.steps, dt));
    if (obs.on_row) obs.on_row(tr.rows.back());
  };
  auto snapshot = [&] {
    if (obs.on_snapshot) obs.on_snapshot(tr.steps, st);
  };
  snapshot();
  std::size_t last_row_step = std::numeric_limits<std::size_t>::max();
  std::size_t last_snap_step = 0;
  double last_dt = 0.0;
  double prev_grad = -1.0;
  const double scale = std::max({1.0, std::abs(tr.gamma0_min), std::abs(tr.gamma0_max)});
  while (true) {
    const auto& e = stepper.evaluate(st.gamma);
    tr.step_t.push_back(st.t);
    tr.step_grad.push_back(e.max_grad_sq);
    if (prev_grad > 0.0) {
      const double inc = (e.max_grad_sq - prev_grad) / prev_grad;
      if (inc > tr.grad_increase) {
        tr.grad_increase = inc;
        tr.grad_increase_t = st.t;
      }
    }
    prev_grad = e.max_grad_sq;
    for (double g : st.gamma) {
      tr.c0_violation = std::max({tr.c0_violation, (g - tr.gamma0_max) / scale, (tr.gamma0_min - g) / scale});
    }
    double dt = planned_dt(grid, e, cfg);
    if (tr.steps == 0) {
      emit_row(dt);
      last_row_step = 0;
    }
    if (e.max_grad_sq < cfg.grad_tol) {
      tr.converged = true;
      break;
    }
    if (st.t >= cfg.t_max * (1.0 - 1e-15)) break;
    if (cfg.max_steps != 0 && tr.steps >= cfg.max_steps) break;
    dt = std::min(dt, cfg.t_max - st.t);
    stepper.advance(st.gamma, dt);
    st.t += dt;
    last_dt = dt;
    ++tr.steps;
    if (tr.steps % static_cast<std::size_t>(cfg.monitors_every) == 0) {
      emit_row(dt);
      last_row_step = tr.steps;
    }
    if (cfg.snapshot_every > 0 && tr.steps % static_cast<std::size_t>(cfg.snapshot_every) == 0) {
      snapshot();
      last_snap_step = tr.steps;
    }
  }
  if (last_row_step != tr.steps) emit_row(last_dt);
  if (last_snap_step != tr.steps) snapshot();

  tr.final_state = st;
  if (!tr.step_t.empty()) tr.measured_decay_rate = detail::log_slope(tr.step_t, tr.step_grad, 0.5 * st.t);
  Verdict conv;
  conv.name = "convergence";
  conv.preconditions_held = true;
  conv.worst_violation = tr.step_grad.back();
  conv.tolerance = cfg.grad_tol;
  conv.location = detail::at_time(st.t);
  if (tr.converged) {
    tr.r_infinity = mean_radius(space, st);
    conv.status = VerdictStatus::passed;
  } else {
    conv.status = VerdictStatus::inconclusive;
    conv.note = "max |D gamma|^2 above grad_tol when the run stopped";
  }
  tr.verdicts.push_back(conv);
  return tr;
}

}  // namespace warpflow
