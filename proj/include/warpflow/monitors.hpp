#pragma once

// Machine-checkable verdicts over a flow trace or a single graph: volume
// conservation, monotonicity of the weighted functionals, preservation of
// static convexity, the closeness bound, the weighted inequalities and the
// first-variation formulas.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "warpflow/flow.hpp"

namespace warpflow {

struct MonitorTolerances {
  double volume_drift = 1e-5;     // relative drift of V_phi
  double monotone = 1e-10;        // relative per-row slack for monotone functionals
  double convexity = 1e-8;        // floor on min s_min
  double inequality = 1e-8;       // absolute slack on inequality gaps
  double variational = 1e-4;      // relative mismatch of d/dt against the first-variation integral
};

/// max(floor, k * err) with err a refinement-estimated discretization error.
inline double scaled_tolerance(double floor, double refinement_error, double k = 10.0) {
  return std::max(floor, k * std::abs(refinement_error));
}

namespace detail {

inline double slab_lo(const FlowTrace& tr) {
  double r = std::numeric_limits<double>::infinity();
  for (const auto& row : tr.rows) r = std::min(r, row.r_min_node);
  return r;
}

inline double slab_hi(const FlowTrace& tr) {
  double r = -std::numeric_limits<double>::infinity();
  for (const auto& row : tr.rows) r = std::max(r, row.r_max_node);
  return r;
}

/// Pointwise hypotheses phi'' > 0 and 0 <= (phi')^2 - phi phi'' <= 1 on [a, b].
struct SlabHypotheses {
  bool d2phi_positive = true;
  bool lower = true;
  bool upper = true;
};

inline SlabHypotheses slab_hypotheses(const WarpedSpace& space, double a, double b, int samples = 257) {
  SlabHypotheses h;
  for (int i = 0; i < samples; ++i) {
    const double r = a + (b - a) * i / (samples - 1);
    const PhiValues p = space.eval_phi(std::clamp(r, space.r_lo(), space.r_max()));
    const double gap = p.dphi * p.dphi - p.phi * p.d2phi;
    const double tol = 1e-12 * std::max(1.0, std::abs(gap));
    h.d2phi_positive = h.d2phi_positive && p.d2phi > 0.0;
    h.lower = h.lower && gap >= -tol;
    h.upper = h.upper && gap <= 1.0 + tol;
  }
  return h;
}

/// Worst relative step against the required direction (+1 non-decreasing, -1 non-increasing).
inline Verdict monotone_verdict(std::string name, const std::vector<double>& t, const std::vector<double>& v,
                                int direction, double tol) {
  double worst = 0.0, where = t.empty() ? 0.0 : t.front();
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double step = direction * (v[i] - v[i - 1]);
    const double rel = -step / std::max(std::abs(v[i - 1]), std::numeric_limits<double>::min());
    if (rel > worst) {
      worst = rel;
      where = t[i];
    }
  }
  return graded(std::move(name), worst, tol, at_time(where));
}

inline bool is_static(const WarpedSpace& space) { return space.staticity_report().is_static; }

}  // namespace detail

inline Verdict check_volume_conservation(const FlowTrace& tr, double tol = MonitorTolerances{}.volume_drift) {
  if (tr.rows.size() < 2) return not_applicable("volume_conservation", "trace has fewer than two rows");
  const double v0 = tr.rows.front().v_phi;
  double worst = 0.0, where = 0.0;
  for (const auto& row : tr.rows) {
    const double d = std::abs(row.v_phi / v0 - 1.0);
    if (d > worst) {
      worst = d;
      where = row.t;
    }
  }
  return graded("volume_conservation", worst, tol, detail::at_time(where));
}

/// V_phi^alpha is non-decreasing when phi''(alpha - 1) < 0 and non-increasing when > 0.
inline Verdict check_alpha_monotonicity(const FlowTrace& tr, const WarpedSpace& space, double alpha,
                                        const MonitorTolerances& tol = {}) {
  std::ostringstream nm;
  nm << "alpha_monotonicity(" << alpha << ")";
  if (alpha == 1.0) {
    auto v = check_volume_conservation(tr, tol.volume_drift);
    v.name = nm.str();
    return v;
  }
  if (tr.rows.size() < 2) return not_applicable(nm.str(), "trace has fewer than two rows");
  const auto it = std::find(tr.alphas.begin(), tr.alphas.end(), alpha);
  if (it == tr.alphas.end()) return not_applicable(nm.str(), "alpha not recorded in the trace");
  const auto idx = static_cast<std::size_t>(it - tr.alphas.begin());
  const int sign = space.phi_second_sign(detail::slab_lo(tr), detail::slab_hi(tr));
  if (sign == 0) return not_applicable(nm.str(), "phi'' has no constant sign on the traversed slab");
  const int direction = (sign * (alpha - 1.0) < 0.0) ? +1 : -1;
  std::vector<double> t, v;
  for (const auto& row : tr.rows) {
    t.push_back(row.t);
    v.push_back(row.v_alpha[idx]);
  }
  auto out = detail::monotone_verdict(nm.str(), t, v, direction, tol.monotone);
  out.note = direction > 0 ? "non-decreasing" : "non-increasing";
  return out;
}

enum class AreaFunctional { a0, a1 };

inline Verdict check_area_monotonicity(const FlowTrace& tr, const WarpedSpace& space, AreaFunctional which,
                                       const MonitorTolerances& tol = {}) {
  const std::string nm = which == AreaFunctional::a0 ? "A0_monotonicity" : "A1_monotonicity";
  const int need = which == AreaFunctional::a0 ? 2 : 3;
  if (tr.n < need) return not_applicable(nm, "dimension below the threshold n >= " + std::to_string(need));
  if (tr.rows.size() < 2) return not_applicable(nm, "trace has fewer than two rows");
  for (const auto& row : tr.rows) {
    if (!(row.min_smin >= -tol.convexity)) return not_applicable(nm, "a monitored graph was not static convex");
  }
  if (!detail::is_static(space)) return not_applicable(nm, "space is not static");
  const auto h = detail::slab_hypotheses(space, detail::slab_lo(tr), detail::slab_hi(tr));
  if (!(h.d2phi_positive && h.lower && h.upper)) {
    return not_applicable(nm, "phi'' > 0 and 0 <= (phi')^2 - phi phi'' <= 1 fail on the traversed slab");
  }
  std::vector<double> t, v;
  for (const auto& row : tr.rows) {
    t.push_back(row.t);
    v.push_back(which == AreaFunctional::a0 ? row.a0 : row.a1);
  }
  auto out = detail::monotone_verdict(nm, t, v, -1, tol.monotone);
  out.note = "non-increasing";
  return out;
}

/// Largest epsilon < 2/(3n) with (2/(1+e)) sqrt(C0 (2/e - 3n)) >= 2 phi'(R) phi(R)^((n-1)/2).
inline double epsilon0_bound(const WarpedSpace& space, double R) {
  if (!(R > space.r_min() && R <= space.r_max())) throw DomainError("epsilon0_bound: R outside (r_min, r_max]");
  const auto rep = space.staticity_report();
  if (!rep.is_static) throw NotApplicableError("epsilon0_bound: space is not static");
  const double c0 = space.c0();
  if (c0 == 0.0) return std::numeric_limits<double>::infinity();
  if (c0 < 0.0) return 0.0;
  const int n = space.n();
  const PhiValues p = space.eval_phi(R);
  const double rhs = 2.0 * p.dphi * std::pow(p.phi, 0.5 * (n - 1));
  auto lhs = [&](double e) { return 2.0 / (1.0 + e) * std::sqrt(c0 * (2.0 / e - 3.0 * n)); };
  double lo = 0.0, hi = 2.0 / (3.0 * n);
  // lhs decreases from +inf to 0 on (0, 2/(3n)); find the crossing.
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (lhs(mid) >= rhs) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

/// min s_min stays >= -tol; preconditions: initial graph static convex, inside B(R), eps-close with eps <= eps0(R).
inline Verdict check_convexity_preservation(const FlowTrace& tr, const WarpedSpace& space,
                                            std::optional<double> R = {}, const MonitorTolerances& tol = {}) {
  const std::string nm = "convexity_preservation";
  if (tr.rows.empty()) return not_applicable(nm, "empty trace");
  const auto& first = tr.rows.front();
  if (!(first.min_smin >= -tol.convexity)) return not_applicable(nm, "initial graph is not static convex");
  if (!detail::is_static(space)) return not_applicable(nm, "space is not static");
  const double radius = R.value_or(first.r_max_node);
  if (first.r_max_node > radius) return not_applicable(nm, "initial graph leaves B(R)");
  const auto h = detail::slab_hypotheses(space, detail::slab_lo(tr), radius);
  if (!h.lower) return not_applicable(nm, "(phi')^2 - phi phi'' < 0 on the traversed slab");
  const double eps0 = epsilon0_bound(space, radius);
  if (first.max_grad_sq > eps0) return not_applicable(nm, "initial graph is not eps0-close");
  double worst = 0.0, where = 0.0;
  for (const auto& row : tr.rows) {
    if (-row.min_smin > worst) {
      worst = -row.min_smin;
      where = row.t;
    }
  }
  return graded(nm, worst, tol.convexity, detail::at_time(where));
}

/// Strict version: for a non-slice start, min s_min > 0 at every monitored t > 0.
inline Verdict check_strict_convexity(const FlowTrace& tr, const WarpedSpace& space, double slice_tol,
                                      std::optional<double> R = {}, const MonitorTolerances& tol = {}) {
  const std::string nm = "strict_convexity_after_start";
  auto pre = check_convexity_preservation(tr, space, R, tol);
  if (pre.status == VerdictStatus::not_applicable) return not_applicable(nm, pre.note);
  if (tr.rows.front().max_grad_sq < slice_tol) return not_applicable(nm, "initial graph is a slice");
  double worst = -std::numeric_limits<double>::infinity(), where = 0.0;
  for (const auto& row : tr.rows) {
    if (row.t <= 0.0) continue;
    if (-row.min_smin > worst) {
      worst = -row.min_smin;
      where = row.t;
    }
  }
  Verdict v;
  v.name = nm;
  v.preconditions_held = true;
  v.worst_violation = worst;
  v.tolerance = 0.0;
  v.location = detail::at_time(where);
  v.status = worst < 0.0 ? VerdictStatus::passed : VerdictStatus::failed;
  return v;
}

/// Everything check_inequalities needs from one graph.
struct GraphSummary {
  double v_phi = 0.0;
  std::vector<double> alphas, v_alpha;
  double a0 = 0.0, a1 = 0.0;
  double min_smin = 0.0;
  double closeness = 0.0;
  double r_lo = 0.0, r_hi = 0.0;
};

namespace detail {

inline void fill_geometry(GraphSummary& s, const WarpedSpace& space, const GraphState& st) {
  const auto f = compute_fields(space, st);
  s.a0 = weighted_area(f);
  s.a1 = weighted_mean_curvature_integral(f);
  s.min_smin = *std::min_element(f.s_min.begin(), f.s_min.end());
  s.closeness = *std::max_element(f.grad_sq.begin(), f.grad_sq.end());
  s.r_lo = *std::min_element(f.r.begin(), f.r.end());
  s.r_hi = *std::max_element(f.r.begin(), f.r.end());
}

}  // namespace detail

inline GraphSummary summarize_graph(const WarpedSpace& space, const GraphState& st, const std::vector<double>& alphas) {
  GraphSummary s;
  s.v_phi = weighted_volume_alpha(space, st, 1.0);
  s.alphas = alphas;
  for (double a : alphas) s.v_alpha.push_back(weighted_volume_alpha(space, st, a));
  detail::fill_geometry(s, space, st);
  return s;
}

/// Same, reusing the volume tables already held by the profiles (one alpha per profile).
inline GraphSummary summarize_graph(const WarpedSpace& space, const GraphState& st,
                                    const std::vector<SliceProfile>& profiles) {
  GraphSummary s;
  s.v_phi = profiles.empty() ? weighted_volume_alpha(space, st, 1.0)
                             : weighted_volume_alpha(profiles.front().volume_table(), st);
  for (const auto& p : profiles) {
    s.alphas.push_back(p.alpha());
    s.v_alpha.push_back(weighted_volume_alpha(p.volume_alpha_table(), st));
  }
  detail::fill_geometry(s, space, st);
  return s;
}

/// One verdict per (inequality, alpha). Gaps are recorded in the note; slices report the equality case.
inline std::vector<Verdict> check_inequalities(const WarpedSpace& space, const GraphSummary& g,
                                               const std::vector<SliceProfile>& profiles, double slice_tol,
                                               std::optional<double> R = {}, const MonitorTolerances& tol = {}) {
  std::vector<Verdict> out;
  const int n = space.n();
  const bool slice = g.closeness < slice_tol;
  const double radius = R.value_or(g.r_hi);
  const bool stat = detail::is_static(space);
  const auto hyp = detail::slab_hypotheses(space, g.r_lo, radius);
  double eps0 = 0.0;
  if (stat && radius > space.r_min() && radius <= space.r_max()) eps0 = epsilon0_bound(space, radius);
  auto fmt = [](double gap, bool eq) {
    std::ostringstream os;
    os.precision(17);
    os << "gap=" << gap << (eq ? " equality" : "");
    return os.str();
  };
  for (const auto& prof : profiles) {
    const double a = prof.alpha();
    const auto it = std::find(g.alphas.begin(), g.alphas.end(), a);
    std::ostringstream tag;
    tag << "(" << a << ")";
    if (it == g.alphas.end()) {
      out.push_back(not_applicable("V_alpha_vs_xi" + tag.str(), "alpha not summarized"));
      continue;
    }
    const double va = g.v_alpha[static_cast<std::size_t>(it - g.alphas.begin())];

    // V^alpha against xi_alpha(V_phi), oriented by the sign of phi''(alpha - 1).
    {
      const std::string nm = "V_alpha_vs_xi" + tag.str();
      const int sign = space.phi_second_sign(g.r_lo, g.r_hi);
      const double gap = prof.xi(g.v_phi) - va;
      Verdict v;
      if (a == 1.0 || space.family() == Family::euclidean) {  // xi_alpha is the identity
        v = graded(nm, std::abs(gap), tol.inequality, "");
      } else if (sign == 0) {
        v = not_applicable(nm, "phi'' has no constant sign on the graph's slab");
      } else {
        const double oriented = (sign * (a - 1.0) < 0.0) ? gap : -gap;
        v = graded(nm, -oriented, tol.inequality, "");
        v.note = fmt(oriented, slice && std::abs(gap) < tol.inequality);
      }
      if (v.note.empty() && v.status != VerdictStatus::not_applicable) v.note = fmt(gap, slice);
      out.push_back(v);
    }
    for (int i = 0; i < 2; ++i) {
      const std::string nm = std::string(i == 0 ? "A0" : "A1") + "_vs_chi" + tag.str();
      const int need = i == 0 ? 2 : 3;
      if (n < need) {
        out.push_back(not_applicable(nm, "dimension below the threshold n >= " + std::to_string(need)));
        continue;
      }
      if (a > 1.0) {
        out.push_back(not_applicable(nm, "alpha > 1"));
        continue;
      }
      if (!stat) {
        out.push_back(not_applicable(nm, "space is not static"));
        continue;
      }
      if (!(hyp.d2phi_positive && hyp.lower && hyp.upper)) {
        out.push_back(not_applicable(nm, "pointwise hypotheses on phi fail on the slab"));
        continue;
      }
      if (!(g.min_smin >= -tol.convexity)) {
        out.push_back(not_applicable(nm, "graph is not static convex"));
        continue;
      }
      if (g.closeness > eps0) {
        out.push_back(not_applicable(nm, "graph is not eps0-close"));
        continue;
      }
      const double gap = (i == 0 ? g.a0 : g.a1) - prof.chi(i, va);
      auto v = graded(nm, -gap, tol.inequality, "");
      v.note = fmt(gap, slice && std::abs(gap) < tol.inequality);
      out.push_back(v);
    }
  }
  return out;
}

enum class VariationalQuantity { v_phi, v_alpha, a0, a1 };

/// Max over interior rows of |central difference of Q - first-variation integral|, using rows i-stride, i, i+stride.
/// Centres are restricted to rows with at least `margin` neighbours on each side so different strides share them.
inline double variational_mismatch(const FlowTrace& tr, VariationalQuantity q, std::size_t alpha_index,
                                   std::size_t stride, std::size_t margin) {
  std::size_t rows = tr.rows.size();
  // The closing row may sit off the monitor cadence; drop it.
  if (rows >= 3) {
    const auto s1 = tr.rows[rows - 1].step - tr.rows[rows - 2].step;
    const auto s0 = tr.rows[rows - 2].step - tr.rows[rows - 3].step;
    if (s1 != s0) --rows;
  }
  auto value = [&](const TraceRow& r) {
    switch (q) {
      case VariationalQuantity::v_phi: return r.v_phi;
      case VariationalQuantity::v_alpha: return r.v_alpha.at(alpha_index);
      case VariationalQuantity::a0: return r.a0;
      case VariationalQuantity::a1: return r.a1;
    }
    return 0.0;
  };
  auto rate = [&](const TraceRow& r) {
    switch (q) {
      case VariationalQuantity::v_phi: return r.rate_v_phi;
      case VariationalQuantity::v_alpha: return r.rate_v_alpha.at(alpha_index);
      case VariationalQuantity::a0: return r.rate_a0;
      case VariationalQuantity::a1: return r.rate_a1;
    }
    return 0.0;
  };
  if (stride == 0 || margin < stride) throw ConfigError("variational_mismatch: need 0 < stride <= margin");
  double worst = 0.0;
  for (std::size_t i = margin; i + margin < rows; ++i) {
    const auto& a = tr.rows[i - stride];
    const auto& b = tr.rows[i];
    const auto& c = tr.rows[i + stride];
    const double h1 = b.t - a.t, h2 = c.t - b.t;
    // Second-order derivative at b on a non-uniform stencil.
    const double d = (-h2 / (h1 * (h1 + h2))) * value(a) + ((h2 - h1) / (h1 * h2)) * value(b) +
                     (h1 / (h2 * (h1 + h2))) * value(c);
    worst = std::max(worst, std::abs(d - rate(b)));
  }
  return worst;
}

inline Verdict check_variational_formulas(const FlowTrace& tr, VariationalQuantity q, std::size_t alpha_index = 0,
                                          const MonitorTolerances& tol = {}) {
  const std::string nm = q == VariationalQuantity::v_phi    ? "variation_V_phi"
                         : q == VariationalQuantity::v_alpha ? "variation_V_alpha(" + std::to_string(tr.alphas.at(alpha_index)) + ")"
                         : q == VariationalQuantity::a0      ? "variation_A0"
                                                             : "variation_A1";
  if (tr.rows.size() < 4) return not_applicable(nm, "trace has fewer than four rows");
  double scale = 0.0;
  for (const auto& r : tr.rows) {
    const double v = q == VariationalQuantity::v_phi    ? r.rate_v_phi
                     : q == VariationalQuantity::v_alpha ? r.rate_v_alpha.at(alpha_index)
                     : q == VariationalQuantity::a0      ? r.rate_a0
                                                         : r.rate_a1;
    scale = std::max(scale, std::abs(v));
  }
  const double m = variational_mismatch(tr, q, alpha_index, 1, 1);
  auto v = graded(nm, m, tol.variational * std::max(scale, 1e-300), "");
  return v;
}

/// Pointwise bound max|D gamma|^2(t) <= max|D gamma|^2(0) exp(-beta_hat t), checked in log form at every step.
inline Verdict check_gradient_decay_bound(const FlowTrace& tr, double tol = 1e-8) {
  const std::string nm = "gradient_decay_bound";
  if (tr.step_grad.empty() || !(tr.step_grad.front() > 0.0)) return not_applicable(nm, "initial graph is a slice");
  const double l0 = std::log(tr.step_grad.front());
  double worst = -std::numeric_limits<double>::infinity(), where = 0.0;
  for (std::size_t i = 0; i < tr.step_grad.size(); ++i) {
    if (!(tr.step_grad[i] > 0.0)) continue;
    const double ex = std::log(tr.step_grad[i]) - l0 + tr.beta_hat * tr.step_t[i];
    if (ex > worst) {
      worst = ex;
      where = tr.step_t[i];
    }
  }
  return graded(nm, worst, tol, detail::at_time(where));
}

/// Least-squares slope of log max|D gamma|^2 over the final half must be <= -beta_hat + 10% of beta_hat.
inline Verdict check_decay_rate(const FlowTrace& tr, double slack = 0.1) {
  const std::string nm = "decay_rate";
  if (tr.step_grad.empty() || !(tr.step_grad.front() > 0.0)) return not_applicable(nm, "initial graph is a slice");
  if (!tr.measured_decay_rate) return not_applicable(nm, "too few steps to fit a rate");
  auto v = graded(nm, *tr.measured_decay_rate + (1.0 - slack) * tr.beta_hat, 0.0, "");
  std::ostringstream os;
  os.precision(17);
  os << "slope=" << *tr.measured_decay_rate << " beta_hat=" << tr.beta_hat;
  v.note = os.str();
  return v;
}

/// The standard battery over a finished run.
inline std::vector<Verdict> check_trace(const FlowTrace& tr, const WarpedSpace& space, const MonitorTolerances& tol = {}) {
  std::vector<Verdict> out = tr.verdicts;
  out.push_back(check_volume_conservation(tr, tol.volume_drift));
  for (double a : tr.alphas) out.push_back(check_alpha_monotonicity(tr, space, a, tol));
  out.push_back(check_area_monotonicity(tr, space, AreaFunctional::a0, tol));
  out.push_back(check_area_monotonicity(tr, space, AreaFunctional::a1, tol));
  out.push_back(check_convexity_preservation(tr, space, {}, tol));
  {
    Verdict inc = graded("gradient_non_increasing", tr.grad_increase, 1e-13, detail::at_time(tr.grad_increase_t));
    out.push_back(inc);
  }
  out.push_back(graded("c0_bracket", tr.c0_violation, 1e-10, ""));
  out.push_back(check_gradient_decay_bound(tr));
  out.push_back(check_decay_rate(tr));
  return out;
}

}  // namespace warpflow
