// warpflow: command-line driver.
//
//   warpflow simulate <config.json>      run the flow, write trace/snapshots/verdicts
//   warpflow verify-space <config.json>  staticity and admissibility report
//   warpflow profiles <config.json>      slice profile tables
//   warpflow inequalities <config.json>  inequality checks over a seeded ensemble
//   warpflow sweep <config.json>         repeated simulate over one parameter
//
// Exit status: 0 all applicable verdicts pass, 1 a verdict failed or the run
// was inconclusive, 2 configuration error, 3 the run aborted.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "warpflow/io.hpp"

namespace fs = std::filesystem;
using namespace warpflow;

namespace {

enum Exit { ok = 0, verdict_failed = 1, config_error = 2, run_aborted = 3 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

RunConfig prepare(const Options& o) {
  auto c = load_config(o.config);
  if (!o.out.empty()) c.output = o.out;
  if (o.seed) c.seed = *o.seed;
  c.flow.validate();
  return c;
}

fs::path make_out(const RunConfig& c) {
  const fs::path dir(c.output);
  fs::create_directories(dir);
  return dir;
}

int exit_for(const std::vector<Verdict>& vs) {
  for (const auto& v : vs) {
    if (v.status == VerdictStatus::failed || v.status == VerdictStatus::inconclusive) return verdict_failed;
  }
  return ok;
}

struct SimulateResult {
  int code = ok;
  std::optional<FlowTrace> trace;
  std::string error;
};

SimulateResult simulate(const RunConfig& c, bool quiet) {
  SimulateResult res;
  const auto space = make_space(c);
  const auto grid = make_grid(c);
  const auto st0 = make_initial_state(c, space, grid);
  const auto dir = make_out(c);
  write_json(dir / "config.json", config_to_json(c));

  std::ofstream trace(dir / "trace.csv");
  if (!trace) throw std::runtime_error("cannot write " + (dir / "trace.csv").string());
  trace << trace_header(c.flow.alphas) << '\n';
  FlowObserver obs;
  obs.on_row = [&](const TraceRow& r) {
    trace << trace_line(r) << '\n';
    trace.flush();
  };
  obs.on_snapshot = [&](std::size_t step, const GraphState& s) {
    write_snapshot(dir / ("gamma_" + std::to_string(step) + ".csv"), s);
  };
  try {
    res.trace = run(space, st0, c.flow, obs);
  } catch (const DomainEscape& e) {
    res.code = run_aborted;
    res.error = e.what();
  } catch (const SchemeInstability& e) {
    res.code = run_aborted;
    res.error = e.what();
  }
  if (!res.trace) {
    json s;
    s["aborted"] = true;
    s["error"] = res.error;
    write_json(dir / "summary.json", s);
    return res;
  }
  const auto& tr = *res.trace;
  auto verdicts = check_trace(tr, space, c.tolerances);
  verdicts.push_back(check_strict_convexity(tr, space, c.flow.grad_tol, c.R, c.tolerances));
  write_json(dir / "verdicts.json", verdicts_json(verdicts));
  write_json(dir / "summary.json", summary_json(tr));
  res.code = exit_for(verdicts);
  if (!quiet) {
    std::cout << "steps " << tr.steps << ", t = " << fmt17(tr.final_state.t)
              << (tr.converged ? ", converged" : ", not converged") << '\n';
    for (const auto& v : verdicts) std::cout << "  " << to_string(v.status) << "  " << v.name << '\n';
  }
  return res;
}

int cmd_simulate(const Options& o) {
  const auto c = prepare(o);
  const auto r = simulate(c, o.quiet);
  if (r.code == run_aborted) std::cerr << "run aborted: " << r.error << '\n';
  return r.code;
}

int cmd_verify_space(const Options& o) {
  const auto c = prepare(o);
  const auto space = make_space(c);
  const auto st = space.staticity_report();
  const auto ad = space.admissibility_report();
  json j;
  j["family"] = c.family;
  j["n"] = c.n;
  j["r_lo"] = space.r_lo();
  j["r_max"] = space.r_max();
  j["static"] = st.is_static;
  j["substatic"] = st.is_substatic;
  j["c0"] = json_number(space.c0());
  j["c0_sampled"] = json_number(st.c0);
  j["c0_max_deviation"] = json_number(st.c0_max_deviation);
  j["static_residual_max"] = json_number(st.max_residual);
  j["static_residual_min"] = json_number(st.min_residual);
  j["static_tolerance"] = json_number(st.tolerance);
  j["admissible"] = ad.admissible();
  j["phi_positive"] = ad.phi_positive;
  j["dphi_positive"] = ad.dphi_positive;
  j["d2phi_positive"] = ad.d2phi_positive;
  j["gap_min"] = json_number(ad.min_gap);
  j["gap_max"] = json_number(ad.max_gap);
  if (space.is_black_hole()) {
    j["horizon_lambda"] = space.horizon_lambda();
    j["r0"] = space.schwarzschild_r0();
  }
  if (c.R && st.is_static) j["epsilon0"] = json_number(epsilon0_bound(space, *c.R));
  const auto dir = make_out(c);
  write_json(dir / "space_report.json", j);
  if (!o.quiet) {
    std::cout << "static=" << (st.is_static ? "true" : "false") << " substatic=" << (st.is_substatic ? "true" : "false")
              << " C0=" << fmt17(space.c0()) << " admissible=" << (ad.admissible() ? "true" : "false") << '\n';
  }
  return ok;
}

int cmd_profiles(const Options& o) {
  const auto c = prepare(o);
  const auto space = make_space(c);
  if (c.profile_samples < 2) throw ConfigError("profiles.samples must be >= 2");
  const SliceProfile base(space, 1.0);
  std::vector<SliceProfile> extra;
  for (double a : c.flow.alphas) extra.emplace_back(space, a);
  const auto dir = make_out(c);
  std::ofstream out(dir / "profiles.csv");
  out << "r,V,V_phi";
  for (double a : c.flow.alphas) out << ",V_phi_alpha_" << alpha_label(a);
  out << ",A0_phi,A1_phi\n";
  const double a = space.r_lo(), b = space.r_max();
  for (int i = 0; i < c.profile_samples; ++i) {
    const double r = a + (b - a) * i / (c.profile_samples - 1);
    out << fmt17(r) << ',' << fmt17(base.volume(r)) << ',' << fmt17(base.volume_alpha(r));
    for (const auto& p : extra) out << ',' << fmt17(p.volume_alpha(r));
    out << ',' << fmt17(base.area0(r)) << ',' << fmt17(base.area1(r)) << '\n';
  }
  if (!o.quiet) std::cout << "wrote " << (dir / "profiles.csv").string() << '\n';
  return ok;
}

int cmd_inequalities(const Options& o) {
  const auto c = prepare(o);
  const auto space = make_space(c);
  const auto batch = run_inequality_batch(c, space, make_grid(c));
  json samples = json::array();
  for (const auto& s : batch.samples) {
    json j;
    j["kind"] = s.kind;
    j["index"] = s.index;
    j["attempts"] = s.attempts;
    j["closeness"] = json_number(s.summary.closeness);
    j["min_smin"] = json_number(s.summary.min_smin);
    j["V_phi"] = json_number(s.summary.v_phi);
    j["A0_phi"] = json_number(s.summary.a0);
    j["A1_phi"] = json_number(s.summary.a1);
    j["verdicts"] = verdicts_json(s.verdicts);
    samples.push_back(j);
  }
  const auto all = batch.all();
  json report;
  report["epsilon0"] = json_number(batch.epsilon0);
  report["R"] = batch.R ? json(*batch.R) : json(nullptr);
  report["samples"] = samples;
  const int code = exit_for(all);
  report["all_passed"] = code == ok;
  const auto dir = make_out(c);
  write_json(dir / "inequalities.json", report);
  if (!o.quiet) {
    int pass = 0, fail = 0, na = 0;
    for (const auto& v : all) (v.passed() ? pass : v.failed() ? fail : na)++;
    std::cout << "inequality verdicts: " << pass << " passed, " << fail << " failed, " << na << " not applicable\n";
  }
  return code;
}

int cmd_sweep(const Options& o) {
  const auto c = prepare(o);
  if (c.sweep.values.empty()) throw ConfigError("sweep.values is empty");
  const auto dir = make_out(c);
  std::ofstream out(dir / "sweep.csv");
  out << "index,value,exit_code,converged,r_infinity,min_smin,steps\n";
  for (std::size_t i = 0; i < c.sweep.values.size(); ++i) {
    RunConfig rc = c;
    const double v = c.sweep.values[i];
    const std::string& p = c.sweep.parameter;
    if (p == "amplitude") {
      for (auto& m : rc.initial.perturbation) m.amplitude *= v;
      rc.initial.random_amplitude *= v;
    } else if (p == "resolution") {
      rc.resolution = static_cast<int>(v);
    } else if (p == "c_cfl") {
      rc.flow.c_cfl = v;
    } else if (p == "r_base") {
      rc.initial.r_base = v;
    } else if (p == "grad_tol") {
      rc.flow.grad_tol = v;
    } else {
      throw ConfigError("unknown sweep parameter '" + p + "'");
    }
    rc.flow.validate();
    rc.output = (dir / ("sweep_" + std::to_string(i))).string();
    const auto r = simulate(rc, true);
    double min_smin = std::numeric_limits<double>::quiet_NaN();
    if (r.trace) {
      min_smin = std::numeric_limits<double>::infinity();
      for (const auto& row : r.trace->rows) min_smin = std::min(min_smin, row.min_smin);
    }
    out << i << ',' << fmt17(v) << ',' << r.code << ',' << (r.trace && r.trace->converged ? 1 : 0) << ','
        << fmt17(r.trace && r.trace->r_infinity ? *r.trace->r_infinity : std::numeric_limits<double>::quiet_NaN())
        << ',' << fmt17(min_smin) << ',' << (r.trace ? r.trace->steps : 0) << '\n';
    if (!o.quiet) std::cout << p << " = " << fmt17(v) << ": exit " << r.code << '\n';
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"warpflow: weighted-volume-preserving curvature flow on radial graphs"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--out", o.out, "output directory (overrides the config)");
  app.add_option("--seed", o.seed, "64-bit random seed (overrides the config)");
  app.add_flag("--quiet", o.quiet, "suppress progress output");
  int (*handler)(const Options&) = nullptr;
  auto sub = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("config", o.config, "run configuration (JSON)")->required();
    s->fallthrough();
    s->callback([&handler, fn] { handler = fn; });
  };
  sub("simulate", "run the flow and check the verdicts", cmd_simulate);
  sub("verify-space", "report staticity and admissibility of the ambient space", cmd_verify_space);
  sub("profiles", "export slice profile tables", cmd_profiles);
  sub("inequalities", "check the weighted inequalities on a seeded ensemble", cmd_inequalities);
  sub("sweep", "repeat simulate over one parameter", cmd_sweep);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : config_error;
  }
  try {
    return handler(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const NotApplicableError& e) {
    std::cerr << "not applicable: " << e.what() << '\n';
    return config_error;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << '\n';
    return run_aborted;
  }
}
