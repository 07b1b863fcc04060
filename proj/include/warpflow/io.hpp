#pragma once

// Run configuration (JSON), seeded initial data, and the CSV / JSON output
// formats shared by the command-line driver and the plotting scripts.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "warpflow/monitors.hpp"

namespace warpflow {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- numbers

/// Fixed 17-significant-digit rendering used in every CSV file.
inline std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Short label for an alpha in column names, e.g. 0, 0.5, 2.
inline std::string alpha_label(double a) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", a);
  return buf;
}

inline json json_number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------- randomness

/// Counter-based generator: the k-th draw of stream s depends only on (seed, s, k).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return mix(seed_ ^ mix(stream_ * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL) ^ mix(counter + 0x632BE59BD9B4E019ULL));
  }
  std::uint64_t next_bits() { return bits(counter_++); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_bits() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  CounterRng substream(std::uint64_t s) const { return CounterRng(seed_, mix(stream_ + 1) ^ s); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  std::uint64_t seed_, stream_, counter_ = 0;
};

// ---------------------------------------------------------------- config

struct PerturbationMode {
  std::optional<int> index;     // zonal cos(k theta)
  std::optional<int> l, m;      // real spherical harmonic P_l^|m|(cos theta) cos(m psi) / sin(|m| psi)
  double amplitude = 0.0;
};

struct InitialSpec {
  std::optional<double> r_base;
  std::vector<PerturbationMode> perturbation;
  std::string snapshot;  // CSV in the snapshot format; overrides r_base / perturbation
  int random_modes = 0;
  double random_amplitude = 0.0;
};

struct InequalitySpec {
  int count = 20;
  double amplitude = 0.05;
  int modes = 3;
  std::vector<double> alphas{0.0, 0.5, 1.0};
  std::optional<double> R;
  bool require_convex_close = true;
  int max_attempts = 2000;
  bool include_slice = true;
};

struct SweepSpec {
  std::string parameter;  // amplitude | resolution | c_cfl | r_base | grad_tol
  std::vector<double> values;
};

struct RunConfig {
  std::string family = "hyperbolic";
  int n = 2;
  double curvature = 1.0, mass = 1.0, kappa = 1.0;
  std::optional<double> r_min, r_max, r_ref;
  std::string phi_file;
  std::string grid_mode = "axisym";
  int resolution = 128;
  InitialSpec initial;
  FlowConfig flow;
  MonitorTolerances tolerances;
  std::optional<double> R;
  std::uint64_t seed = 1;
  std::string output = "out";
  int profile_samples = 201;
  InequalitySpec inequalities;
  SweepSpec sweep;
  std::filesystem::path base_dir;  // directory of the config file, for relative paths
};

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T v{};
  read(j, key, v, where);
  out = v;
}

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  using detail::check_keys;
  using detail::read;
  using detail::read_opt;
  RunConfig c;
  check_keys(j, "config", {"space", "grid", "initial", "flow", "monitors", "seed", "output", "profiles",
                           "inequalities", "sweep"});
  if (j.contains("space")) {
    const auto& s = j.at("space");
    check_keys(s, "space", {"family", "n", "curvature", "mass", "kappa", "r_min", "r_max", "r_ref", "phi_file"});
    read(s, "family", c.family, "space");
    read(s, "n", c.n, "space");
    read(s, "curvature", c.curvature, "space");
    read(s, "mass", c.mass, "space");
    read(s, "kappa", c.kappa, "space");
    read_opt(s, "r_min", c.r_min, "space");
    read_opt(s, "r_max", c.r_max, "space");
    read_opt(s, "r_ref", c.r_ref, "space");
    read(s, "phi_file", c.phi_file, "space");
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, "grid", {"mode", "resolution"});
    read(g, "mode", c.grid_mode, "grid");
    read(g, "resolution", c.resolution, "grid");
  }
  if (j.contains("initial")) {
    const auto& s = j.at("initial");
    check_keys(s, "initial", {"r_base", "perturbation", "snapshot", "random_modes", "random_amplitude"});
    read_opt(s, "r_base", c.initial.r_base, "initial");
    read(s, "snapshot", c.initial.snapshot, "initial");
    read(s, "random_modes", c.initial.random_modes, "initial");
    read(s, "random_amplitude", c.initial.random_amplitude, "initial");
    if (s.contains("perturbation")) {
      if (!s.at("perturbation").is_array()) throw ConfigError("initial.perturbation must be an array");
      for (const auto& p : s.at("perturbation")) {
        check_keys(p, "initial.perturbation[]", {"mode", "l", "m", "amplitude"});
        PerturbationMode pm;
        read_opt(p, "mode", pm.index, "perturbation");
        read_opt(p, "l", pm.l, "perturbation");
        read_opt(p, "m", pm.m, "perturbation");
        read(p, "amplitude", pm.amplitude, "perturbation");
        if (pm.index.has_value() == pm.l.has_value()) {
          throw ConfigError("each perturbation needs exactly one of 'mode' or 'l' (with optional 'm')");
        }
        if (pm.m && !pm.l) throw ConfigError("perturbation 'm' requires 'l'");
        c.initial.perturbation.push_back(pm);
      }
    }
  }
  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    check_keys(f, "flow", {"scheme", "dt_policy", "dt", "c_cfl", "imex_boost", "t_max", "grad_tol", "max_steps",
                           "monitors_every", "snapshot_every"});
    std::string scheme = to_string(c.flow.scheme), pol = to_string(c.flow.dt_policy);
    read(f, "scheme", scheme, "flow");
    read(f, "dt_policy", pol, "flow");
    c.flow.scheme = scheme_from_string(scheme);
    c.flow.dt_policy = dt_policy_from_string(pol);
    read(f, "dt", c.flow.dt, "flow");
    read(f, "c_cfl", c.flow.c_cfl, "flow");
    read(f, "imex_boost", c.flow.imex_boost, "flow");
    read(f, "t_max", c.flow.t_max, "flow");
    read(f, "grad_tol", c.flow.grad_tol, "flow");
    read(f, "max_steps", c.flow.max_steps, "flow");
    read(f, "monitors_every", c.flow.monitors_every, "flow");
    read(f, "snapshot_every", c.flow.snapshot_every, "flow");
  }
  if (j.contains("monitors")) {
    const auto& m = j.at("monitors");
    check_keys(m, "monitors", {"alphas", "R", "tolerances"});
    read(m, "alphas", c.flow.alphas, "monitors");
    read_opt(m, "R", c.R, "monitors");
    if (m.contains("tolerances")) {
      const auto& t = m.at("tolerances");
      check_keys(t, "monitors.tolerances", {"volume_drift", "monotone", "convexity", "inequality", "variational"});
      read(t, "volume_drift", c.tolerances.volume_drift, "tolerances");
      read(t, "monotone", c.tolerances.monotone, "tolerances");
      read(t, "convexity", c.tolerances.convexity, "tolerances");
      read(t, "inequality", c.tolerances.inequality, "tolerances");
      read(t, "variational", c.tolerances.variational, "tolerances");
    }
  }
  read(j, "seed", c.seed, "config");
  read(j, "output", c.output, "config");
  if (j.contains("profiles")) {
    const auto& p = j.at("profiles");
    check_keys(p, "profiles", {"samples"});
    read(p, "samples", c.profile_samples, "profiles");
  }
  if (j.contains("inequalities")) {
    const auto& q = j.at("inequalities");
    check_keys(q, "inequalities", {"count", "amplitude", "modes", "alphas", "R", "require_convex_close",
                                   "max_attempts", "include_slice"});
    read(q, "count", c.inequalities.count, "inequalities");
    read(q, "amplitude", c.inequalities.amplitude, "inequalities");
    read(q, "modes", c.inequalities.modes, "inequalities");
    read(q, "alphas", c.inequalities.alphas, "inequalities");
    read_opt(q, "R", c.inequalities.R, "inequalities");
    read(q, "require_convex_close", c.inequalities.require_convex_close, "inequalities");
    read(q, "max_attempts", c.inequalities.max_attempts, "inequalities");
    read(q, "include_slice", c.inequalities.include_slice, "inequalities");
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, "sweep", {"parameter", "values"});
    read(s, "parameter", c.sweep.parameter, "sweep");
    read(s, "values", c.sweep.values, "sweep");
  }
  return c;
}

inline json config_to_json(const RunConfig& c) {
  using detail::opt_json;
  json pert = json::array();
  for (const auto& p : c.initial.perturbation) {
    json e = json::object();
    if (p.index) e["mode"] = *p.index;
    if (p.l) e["l"] = *p.l;
    if (p.m) e["m"] = *p.m;
    e["amplitude"] = p.amplitude;
    pert.push_back(e);
  }
  json j;
  j["space"] = {{"family", c.family}, {"n", c.n}, {"curvature", c.curvature}, {"mass", c.mass},
                {"kappa", c.kappa}, {"r_min", opt_json(c.r_min)}, {"r_max", opt_json(c.r_max)},
                {"r_ref", opt_json(c.r_ref)}, {"phi_file", c.phi_file}};
  j["grid"] = {{"mode", c.grid_mode}, {"resolution", c.resolution}};
  j["initial"] = {{"r_base", opt_json(c.initial.r_base)}, {"perturbation", pert},
                  {"snapshot", c.initial.snapshot}, {"random_modes", c.initial.random_modes},
                  {"random_amplitude", c.initial.random_amplitude}};
  j["flow"] = {{"scheme", to_string(c.flow.scheme)}, {"dt_policy", to_string(c.flow.dt_policy)},
               {"dt", c.flow.dt}, {"c_cfl", c.flow.c_cfl}, {"imex_boost", c.flow.imex_boost},
               {"t_max", c.flow.t_max}, {"grad_tol", c.flow.grad_tol}, {"max_steps", c.flow.max_steps},
               {"monitors_every", c.flow.monitors_every}, {"snapshot_every", c.flow.snapshot_every}};
  j["monitors"] = {{"alphas", c.flow.alphas}, {"R", opt_json(c.R)},
                   {"tolerances", {{"volume_drift", c.tolerances.volume_drift},
                                   {"monotone", c.tolerances.monotone},
                                   {"convexity", c.tolerances.convexity},
                                   {"inequality", c.tolerances.inequality},
                                   {"variational", c.tolerances.variational}}}};
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["profiles"] = {{"samples", c.profile_samples}};
  j["inequalities"] = {{"count", c.inequalities.count}, {"amplitude", c.inequalities.amplitude},
                       {"modes", c.inequalities.modes}, {"alphas", c.inequalities.alphas},
                       {"R", opt_json(c.inequalities.R)},
                       {"require_convex_close", c.inequalities.require_convex_close},
                       {"max_attempts", c.inequalities.max_attempts},
                       {"include_slice", c.inequalities.include_slice}};
  j["sweep"] = {{"parameter", c.sweep.parameter}, {"values", c.sweep.values}};
  return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto c = config_from_json(j);
  c.base_dir = path.parent_path();
  return c;
}

// ---------------------------------------------------------------- space, grid, initial data

/// Reads whitespace-separated records r phi phi' phi'' phi'''; '#' starts a comment.
inline std::vector<PhiSample> load_phi_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open phi table " + path.string());
  std::vector<PhiSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream is(line);
    PhiSample s;
    if (!(is >> s.r)) continue;
    if (!(is >> s.v.phi >> s.v.dphi >> s.v.d2phi >> s.v.d3phi)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 5 numbers");
    }
    std::string extra;
    if (is >> extra) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": trailing data");
    if (!out.empty() && !(s.r > out.back().r)) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": r must be strictly increasing");
    }
    out.push_back(s);
  }
  if (out.size() < 5) throw ConfigError("phi table needs at least 5 records");
  return out;
}

inline std::filesystem::path resolve(const RunConfig& c, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || c.base_dir.empty() ? path : c.base_dir / path;
}

inline WarpedSpace make_space(const RunConfig& c) {
  SpaceSpec s;
  s.family = family_from_string(c.family);
  s.n = c.n;
  s.curvature = c.curvature;
  s.mass = c.mass;
  s.kappa = c.kappa;
  s.r_ref = c.r_ref;
  if (s.family == Family::custom) {
    if (c.phi_file.empty()) throw ConfigError("custom family needs space.phi_file");
    s.samples = load_phi_table(resolve(c, c.phi_file));
    s.r_min = c.r_min.value_or(s.samples.front().r);
    s.r_max = c.r_max.value_or(s.samples.back().r);
  } else {
    if (!c.r_min || !c.r_max) throw ConfigError("space.r_min and space.r_max are required");
    s.r_min = *c.r_min;
    s.r_max = *c.r_max;
  }
  try {
    return WarpedSpace(s);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid space: ") + e.what());
  }
}

inline std::shared_ptr<const SphereGrid> make_grid(const RunConfig& c) {
  try {
    return std::make_shared<const SphereGrid>(build_grid(grid_mode_from_string(c.grid_mode), c.n, c.resolution));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid grid: ") + e.what());
  }
}

/// Value of one configured mode at (theta, psi).
inline double mode_value(const PerturbationMode& p, const SphereGrid& g, double th, double ps) {
  if (p.index) return std::cos(*p.index * th);
  const int l = *p.l, m = p.m.value_or(0);
  if (std::abs(m) > l || l < 0) throw ConfigError("perturbation needs 0 <= |m| <= l");
  if (m != 0 && g.mode() != GridMode::latlong) throw ConfigError("non-zonal harmonics need a latlong grid");
  const double P = std::assoc_legendre(static_cast<unsigned>(l), static_cast<unsigned>(std::abs(m)), std::cos(th));
  if (m > 0) return P * std::cos(m * ps);
  if (m < 0) return P * std::sin(-m * ps);
  return P;
}

/// Random smooth perturbation with |coefficient_k| <= amp / k^2, drawn from the counter generator.
inline std::vector<PerturbationMode> random_modes(CounterRng& rng, const SphereGrid& g, int modes, double amp) {
  std::vector<PerturbationMode> out;
  for (int k = 1; k <= modes; ++k) {
    if (g.mode() == GridMode::latlong) {
      for (int m = -k; m <= k; ++m) {
        PerturbationMode p;
        p.l = k;
        p.m = m;
        p.amplitude = amp * rng.uniform(-1.0, 1.0) / (k * k * (2 * k + 1));
        out.push_back(p);
      }
    } else {
      PerturbationMode p;
      p.index = k;
      p.amplitude = amp * rng.uniform(-1.0, 1.0) / (k * k);
      out.push_back(p);
    }
  }
  return out;
}

/// gamma = gamma(r_base) + sum of modes, checked against the working interval.
inline GraphState perturbed_state(const WarpedSpace& space, std::shared_ptr<const SphereGrid> grid, double r_base,
                                  const std::vector<PerturbationMode>& modes) {
  if (!(r_base > space.r_lo() && r_base < space.r_max())) {
    throw ConfigError("r_base = " + fmt17(r_base) + " outside the working interval (" + fmt17(space.r_lo()) +
                      ", " + fmt17(space.r_max()) + ")");
  }
  auto st = slice_state(space, grid, r_base);
  const auto& xy = grid->coords();
  for (std::size_t k = 0; k < st.gamma.size(); ++k) {
    for (const auto& p : modes) st.gamma[k] += p.amplitude * mode_value(p, *grid, xy[k][0], xy[k][1]);
  }
  for (std::size_t k = 0; k < st.gamma.size(); ++k) {
    if (!(st.gamma[k] > space.gamma_lo() && st.gamma[k] < space.gamma_hi())) {
      throw ConfigError("initial graph leaves the working interval at node " + std::to_string(k));
    }
  }
  return st;
}

inline GraphState read_snapshot(const std::filesystem::path& path, std::shared_ptr<const SphereGrid> grid) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open snapshot " + path.string());
  std::string line;
  std::getline(in, line);  // header
  GraphState st;
  st.grid = grid;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = line.rfind(',');
    try {
      st.gamma.push_back(std::stod(line.substr(c == std::string::npos ? 0 : c + 1)));
    } catch (const std::exception&) {
      throw ConfigError("malformed snapshot line in " + path.string() + ": " + line);
    }
  }
  if (st.gamma.size() != grid->node_count()) {
    throw ConfigError("snapshot has " + std::to_string(st.gamma.size()) + " nodes, grid has " +
                      std::to_string(grid->node_count()));
  }
  return st;
}

inline GraphState make_initial_state(const RunConfig& c, const WarpedSpace& space,
                                     std::shared_ptr<const SphereGrid> grid) {
  if (!c.initial.snapshot.empty()) {
    auto st = read_snapshot(resolve(c, c.initial.snapshot), grid);
    for (std::size_t k = 0; k < st.gamma.size(); ++k) {
      if (!(st.gamma[k] > space.gamma_lo() && st.gamma[k] < space.gamma_hi())) {
        throw ConfigError("snapshot leaves the working interval at node " + std::to_string(k));
      }
    }
    return st;
  }
  if (!c.initial.r_base) throw ConfigError("initial.r_base or initial.snapshot is required");
  auto modes = c.initial.perturbation;
  if (c.initial.random_modes > 0) {
    CounterRng rng(c.seed, 1);
    const auto extra = random_modes(rng, *grid, c.initial.random_modes, c.initial.random_amplitude);
    modes.insert(modes.end(), extra.begin(), extra.end());
  }
  return perturbed_state(space, grid, *c.initial.r_base, modes);
}

// ---------------------------------------------------------------- inequality batches

struct InequalitySample {
  std::string kind;  // "slice" or "random"
  int index = 0;
  int attempts = 0;
  GraphSummary summary;
  std::vector<Verdict> verdicts;
};

struct InequalityBatch {
  double epsilon0 = std::numeric_limits<double>::infinity();
  std::optional<double> R;
  std::vector<InequalitySample> samples;

  std::vector<Verdict> all() const {
    std::vector<Verdict> out;
    for (const auto& s : samples) out.insert(out.end(), s.verdicts.begin(), s.verdicts.end());
    return out;
  }
};

/// Optional slice at r_base plus `count` seeded random graphs (stream 2, substream i), rejection-sampled
/// to be static convex, eps0-close and inside B(R) when require_convex_close is set.
inline InequalityBatch run_inequality_batch(const RunConfig& c, const WarpedSpace& space,
                                            std::shared_ptr<const SphereGrid> grid) {
  const auto& q = c.inequalities;
  if (!c.initial.r_base) throw ConfigError("inequalities need initial.r_base");
  InequalityBatch out;
  out.R = q.R ? q.R : c.R;
  std::vector<SliceProfile> profiles;
  for (double a : q.alphas) profiles.emplace_back(space, a);
  if (q.require_convex_close) {
    if (!out.R) throw ConfigError("inequalities with require_convex_close need inequalities.R or monitors.R");
    out.epsilon0 = epsilon0_bound(space, *out.R);
  }
  const double slice_tol = c.flow.grad_tol;
  auto record = [&](const std::string& kind, int index, int attempts, const GraphState& st) {
    InequalitySample s;
    s.kind = kind;
    s.index = index;
    s.attempts = attempts;
    s.summary = summarize_graph(space, st, profiles);
    s.verdicts = check_inequalities(space, s.summary, profiles, slice_tol, out.R, c.tolerances);
    out.samples.push_back(std::move(s));
  };
  if (q.include_slice) record("slice", 0, 0, slice_state(space, grid, *c.initial.r_base));
  const CounterRng root(c.seed, 2);
  for (int i = 0; i < q.count; ++i) {
    CounterRng rng = root.substream(static_cast<std::uint64_t>(i));
    for (int attempt = 1;; ++attempt) {
      if (attempt > q.max_attempts) {
        throw ConfigError("could not draw an admissible graph for sample " + std::to_string(i) +
                          "; reduce inequalities.amplitude");
      }
      const auto modes = random_modes(rng, *grid, q.modes, q.amplitude);
      GraphState st;
      try {
        st = perturbed_state(space, grid, *c.initial.r_base, modes);
      } catch (const ConfigError&) {
        continue;
      }
      if (q.require_convex_close) {
        GraphSummary g;
        detail::fill_geometry(g, space, st);
        if (!(g.min_smin >= 0.0 && g.closeness <= out.epsilon0 && g.r_hi <= *out.R)) continue;
      }
      record("random", i, attempt, st);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------- outputs

inline std::string trace_header(const std::vector<double>& alphas) {
  std::string h = "t,dt,max_grad_sq,V_phi";
  for (double a : alphas) h += ",V_phi_alpha_" + alpha_label(a);
  h += ",A0_phi,A1_phi,min_smin,max_speed,r_min_node,r_max_node";
  return h;
}

inline std::string trace_line(const TraceRow& r) {
  std::string s = fmt17(r.t) + "," + fmt17(r.dt) + "," + fmt17(r.max_grad_sq) + "," + fmt17(r.v_phi);
  for (double v : r.v_alpha) s += "," + fmt17(v);
  for (double v : {r.a0, r.a1, r.min_smin, r.max_speed, r.r_min_node, r.r_max_node}) s += "," + fmt17(v);
  return s;
}

inline void write_snapshot(const std::filesystem::path& path, const GraphState& st) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& g = st.g();
  const bool two = g.mode() == GridMode::latlong;
  out << (two ? "theta,psi,gamma\n" : "theta,gamma\n");
  for (std::size_t k = 0; k < st.gamma.size(); ++k) {
    out << fmt17(g.coords()[k][0]) << ',';
    if (two) out << fmt17(g.coords()[k][1]) << ',';
    out << fmt17(st.gamma[k]) << '\n';
  }
}

inline json verdict_json(const Verdict& v) {
  json j;
  j["name"] = v.name;
  j["passed"] = v.passed();
  j["status"] = to_string(v.status);
  j["worst_violation"] = json_number(v.worst_violation);
  j["tolerance"] = json_number(v.tolerance);
  j["location"] = v.location;
  j["preconditions_held"] = v.preconditions_held;
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

inline json verdicts_json(const std::vector<Verdict>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(verdict_json(v));
  return a;
}

inline json summary_json(const FlowTrace& tr) {
  auto opt = [](const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); };
  json j;
  j["r_infinity"] = opt(tr.r_infinity);
  j["r_star"] = opt(tr.r_star);
  j["measured_decay_rate"] = opt(tr.measured_decay_rate);
  j["beta_hat"] = json_number(tr.beta_hat);
  j["converged"] = tr.converged;
  j["steps"] = tr.steps;
  j["t_final"] = json_number(tr.final_state.t);
  return j;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace warpflow
