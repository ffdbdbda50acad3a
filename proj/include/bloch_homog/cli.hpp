#ifndef BLOCH_HOMOG_CLI_HPP
#define BLOCH_HOMOG_CLI_HPP

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bloch.hpp"
#include "cell_solver.hpp"
#include "homogenize1d.hpp"
#include "microstructure.hpp"
#include "tensors.hpp"

namespace bloch_homog::cli {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

enum class Mode { tensors, bloch_verify, bounds, transform_check, converge_1d, variational, all };

inline Mode parse_mode(const std::string& s) {
  static const std::map<std::string, Mode> modes = {
      {"tensors", Mode::tensors},         {"bloch-verify", Mode::bloch_verify},
      {"bounds", Mode::bounds},           {"transform-check", Mode::transform_check},
      {"converge-1d", Mode::converge_1d}, {"variational", Mode::variational},
      {"all", Mode::all}};
  const auto it = modes.find(s);
  if (it == modes.end()) throw ConfigError("unknown mode '" + s + "'");
  return it->second;
}

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::tensors: return "tensors";
    case Mode::bloch_verify: return "bloch-verify";
    case Mode::bounds: return "bounds";
    case Mode::transform_check: return "transform-check";
    case Mode::converge_1d: return "converge-1d";
    case Mode::variational: return "variational";
    case Mode::all: return "all";
  }
  return "unknown";
}

struct TwoscaleSettings {
  TwoscaleMode mode = TwoscaleMode::t_ratio;
  Rational factor{1, 1};
};

struct BoundsSettings {
  std::optional<double> a1, a2, b1, b2;
};

struct BlochSettings {
  double h = 1e-3;
  double eig_tol = 1e-12;
  int dispersion_points = 9;
};

struct TransformSettings {
  int dim = 1;
  std::optional<PresetSpec> A;  // defaults to the top-level A
  int cell_resolution = 16;
  int cells = 8;
  std::vector<int> eps_cells{8, 16, 32, 64};
  int max_frequency = 3;
  unsigned seed = 7;
};

struct Converge1dSettings {
  PiecewiseProfile a;
  PiecewiseProfile b;
  Rational t{1, 1};
  std::vector<int> cells{8, 16, 32, 64, 128};
  int per_cell = 32;
  double source = 1.0;
  int oracle_resolution = 512;
};

struct VariationalSettings {
  int samples = 20;
  unsigned seed = 1;
};

struct RunConfig {
  Mode mode = Mode::tensors;
  int dim = 2;
  int resolution = 32;
  std::optional<PresetSpec> A;
  std::optional<PresetSpec> B;
  SolverConfig solver;
  std::optional<TwoscaleSettings> twoscale;
  BoundsSettings bounds;
  BlochSettings bloch;
  TransformSettings transform;
  std::optional<Converge1dSettings> converge;
  VariationalSettings variational;
  json echo;
};

namespace detail {

inline void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
}

inline void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  expect_object(j, where);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing field '" + key + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + key + "' in " + where + " has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

inline double positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive");
  return v;
}

inline Rational rational(const json& v, const std::string& what) {
  try {
    if (v.is_string()) return Rational::parse(v.get<std::string>());
    if (v.is_number()) return Rational::from_double(v.get<double>());
  } catch (const Error& e) {
    throw ConfigError(what + ": " + e.what());
  }
  throw ConfigError(what + " must be a number or a \"p/q\" string");
}

inline Phase phase(const json& v, const std::string& where) {
  if (v.is_number()) return Phase::scalar(v.get<double>());
  if (v.is_array()) {
    Phase p;
    for (const auto& row : v) {
      if (row.is_number()) {
        p.entries.push_back(row.get<double>());
        continue;
      }
      if (!row.is_array()) throw ConfigError("phase matrix rows in " + where + " must be arrays");
      for (const auto& x : row) {
        if (!x.is_number()) throw ConfigError("phase entries in " + where + " must be numbers");
        p.entries.push_back(x.get<double>());
      }
    }
    return p;
  }
  throw ConfigError("phase in " + where + " must be a number or a matrix");
}

inline TrigFn trig_fn(const std::string& s) {
  if (s == "sin") return TrigFn::sin;
  if (s == "cos") return TrigFn::cos;
  throw ConfigError("trig function must be sin or cos, got '" + s + "'");
}

inline PresetSpec preset(const json& j, const std::string& where, const std::filesystem::path& base) {
  expect_keys(j, {"kind", "phases", "fraction", "axis", "smoothing", "offset", "terms", "file", "alpha", "beta"},
              where);
  PresetSpec s;
  try {
    s.kind = parse_preset_kind(get<std::string>(j, "kind", where));
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (j.contains("phases")) {
    if (!j["phases"].is_array()) throw ConfigError("phases in " + where + " must be an array");
    for (const auto& p : j["phases"]) s.phases.push_back(phase(p, where));
  }
  s.fraction = get_or<double>(j, "fraction", 0.5, where);
  // Axes are numbered from 1 in configs.
  s.axis = get_or<int>(j, "axis", 1, where) - 1;
  s.smoothing = get_or<double>(j, "smoothing", 0.0, where);
  s.trig_offset = get_or<double>(j, "offset", 0.0, where);
  if (j.contains("terms")) {
    if (!j["terms"].is_array()) throw ConfigError("terms in " + where + " must be an array");
    for (const auto& t : j["terms"]) {
      expect_keys(t, {"amplitude", "fn", "freq"}, where + ".terms");
      TrigTerm term;
      term.amplitude = get<double>(t, "amplitude", where + ".terms");
      const auto fns = get_or<std::vector<std::string>>(t, "fn", {"cos", "cos"}, where + ".terms");
      const auto freq = get_or<std::vector<int>>(t, "freq", {0, 0}, where + ".terms");
      for (std::size_t d = 0; d < 2; ++d) {
        if (d < fns.size()) term.fn[d] = trig_fn(fns[d]);
        if (d < freq.size()) term.freq[d] = freq[d];
      }
      s.terms.push_back(term);
    }
  }
  if (s.kind == PresetKind::tabulated) {
    auto file = std::filesystem::path(get<std::string>(j, "file", where));
    if (file.is_relative()) file = base / file;
    try {
      s.table = read_table_csv(file.string());
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (j.contains("alpha")) s.alpha = get<double>(j, "alpha", where);
  if (j.contains("beta")) s.beta = get<double>(j, "beta", where);
  return s;
}

inline PiecewiseProfile profile(const json& j, const std::string& where) {
  expect_keys(j, {"values", "starts", "fraction"}, where);
  PiecewiseProfile p;
  p.values = get<std::vector<double>>(j, "values", where);
  if (j.contains("starts")) {
    if (j.contains("fraction")) throw ConfigError(where + ": give either starts or fraction");
    if (!j["starts"].is_array()) throw ConfigError("starts in " + where + " must be an array");
    p.starts.clear();
    for (const auto& s : j["starts"])
      p.starts.push_back(s.is_number() && s.get<double>() == 0.0 ? Rational{0, 1} : rational(s, where + ".starts"));
  } else if (p.values.size() == 2) {
    p.starts = {Rational{0, 1}, j.contains("fraction") ? rational(j["fraction"], where + ".fraction") : Rational{1, 2}};
  } else if (p.values.size() == 1) {
    p.starts = {Rational{0, 1}};
  } else {
    throw ConfigError(where + ": profiles with more than two values need explicit starts");
  }
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

inline std::vector<int> cell_list(const json& j, const std::string& key, std::vector<int> fallback,
                                  const std::string& where) {
  auto v = get_or<std::vector<int>>(j, key, std::move(fallback), where);
  for (int m : v)
    if (m < 1) throw ConfigError(key + " in " + where + " must hold positive cell counts");
  return v;
}

}  // namespace detail

/// Parses and validates a configuration. `base` resolves relative file names.
inline RunConfig parse_config(const json& j, Mode mode, const std::filesystem::path& base = ".") {
  using namespace detail;
  expect_keys(j, {"dim", "resolution", "A", "B", "solver", "twoscale", "bounds", "bloch", "transform", "converge_1d",
                  "variational"},
              "config");
  RunConfig c;
  c.mode = mode;
  c.echo = j;
  c.dim = get_or<int>(j, "dim", 2, "config");
  if (c.dim != 1 && c.dim != 2) throw ConfigError("dim must be 1 or 2");
  c.resolution = get_or<int>(j, "resolution", 32, "config");
  if (c.resolution < 4 || c.resolution % 2 != 0) throw ConfigError("resolution must be even and >= 4");
  if (j.contains("A")) c.A = preset(j["A"], "A", base);
  if (j.contains("B")) c.B = preset(j["B"], "B", base);

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    expect_keys(s, {"tol", "max_iterations", "discretization", "dealias"}, "solver");
    c.solver.tol = get_or<double>(s, "tol", c.solver.tol, "solver");
    c.solver.max_iterations = get_or<int>(s, "max_iterations", c.solver.max_iterations, "solver");
    c.solver.dealias = get_or<bool>(s, "dealias", false, "solver");
    if (s.contains("discretization")) {
      try {
        c.solver.mode = parse_discretization(get<std::string>(s, "discretization", "solver"));
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  positive(c.solver.tol, "solver.tol");
  if (c.solver.max_iterations < 1) throw ConfigError("solver.max_iterations must be positive");
  if (c.solver.mode == Discretization::fd_harmonic && c.dim != 1)
    throw ConfigError("the fd-harmonic discretization is 1D only");

  if (j.contains("twoscale")) {
    const auto& t = j["twoscale"];
    expect_keys(t, {"mode", "factor"}, "twoscale");
    TwoscaleSettings ts;
    const auto m = get_or<std::string>(t, "mode", "t-ratio", "twoscale");
    if (m == "t-ratio") ts.mode = TwoscaleMode::t_ratio;
    else if (m == "s-ratio") ts.mode = TwoscaleMode::s_ratio;
    else throw ConfigError("twoscale.mode must be t-ratio or s-ratio");
    if (!t.contains("factor")) throw ConfigError("missing field 'factor' in twoscale");
    ts.factor = rational(t["factor"], "twoscale.factor");
    c.twoscale = ts;
  }

  if (j.contains("bounds")) {
    const auto& b = j["bounds"];
    expect_keys(b, {"a1", "a2", "b1", "b2"}, "bounds");
    for (auto [key, slot] : {std::pair{"a1", &c.bounds.a1}, std::pair{"a2", &c.bounds.a2},
                             std::pair{"b1", &c.bounds.b1}, std::pair{"b2", &c.bounds.b2}})
      if (b.contains(key)) *slot = positive(get<double>(b, key, "bounds"), std::string("bounds.") + key);
  }

  if (j.contains("bloch")) {
    const auto& b = j["bloch"];
    expect_keys(b, {"h", "eig_tol", "dispersion_points"}, "bloch");
    c.bloch.h = positive(get_or<double>(b, "h", c.bloch.h, "bloch"), "bloch.h");
    c.bloch.eig_tol = positive(get_or<double>(b, "eig_tol", c.bloch.eig_tol, "bloch"), "bloch.eig_tol");
    c.bloch.dispersion_points = get_or<int>(b, "dispersion_points", c.bloch.dispersion_points, "bloch");
    if (c.bloch.dispersion_points < 2) throw ConfigError("bloch.dispersion_points must be >= 2");
  }

  if (j.contains("transform")) {
    const auto& t = j["transform"];
    expect_keys(t, {"dim", "A", "cell_resolution", "cells", "eps_cells", "max_frequency", "seed"}, "transform");
    auto& ts = c.transform;
    ts.dim = get_or<int>(t, "dim", 1, "transform");
    if (ts.dim != 1 && ts.dim != 2) throw ConfigError("transform.dim must be 1 or 2");
    if (t.contains("A")) ts.A = preset(t["A"], "transform.A", base);
    ts.cell_resolution = get_or<int>(t, "cell_resolution", ts.cell_resolution, "transform");
    if (ts.cell_resolution < 4 || ts.cell_resolution % 2 != 0)
      throw ConfigError("transform.cell_resolution must be even and >= 4");
    ts.cells = get_or<int>(t, "cells", ts.cells, "transform");
    if (ts.cells < 1) throw ConfigError("transform.cells must be positive");
    ts.eps_cells = cell_list(t, "eps_cells", ts.eps_cells, "transform");
    ts.max_frequency = get_or<int>(t, "max_frequency", ts.max_frequency, "transform");
    if (ts.max_frequency < 0) throw ConfigError("transform.max_frequency must be >= 0");
    for (int m : ts.eps_cells)
      if (ts.max_frequency >= m - m / 2) throw ConfigError("transform.max_frequency exceeds the dual grid");
    ts.seed = get_or<unsigned>(t, "seed", ts.seed, "transform");
  }

  if (j.contains("converge_1d")) {
    const auto& t = j["converge_1d"];
    expect_keys(t, {"a", "b", "t", "cells", "per_cell", "source", "oracle_resolution"}, "converge_1d");
    Converge1dSettings cs;
    if (!t.contains("a")) throw ConfigError("missing field 'a' in converge_1d");
    if (!t.contains("b")) throw ConfigError("missing field 'b' in converge_1d");
    cs.a = profile(t["a"], "converge_1d.a");
    cs.b = profile(t["b"], "converge_1d.b");
    if (t.contains("t")) cs.t = rational(t["t"], "converge_1d.t");
    cs.cells = cell_list(t, "cells", cs.cells, "converge_1d");
    if (cs.cells.size() < 4) throw ConfigError("converge_1d.cells needs at least 4 entries");
    cs.per_cell = get_or<int>(t, "per_cell", cs.per_cell, "converge_1d");
    cs.source = get_or<double>(t, "source", cs.source, "converge_1d");
    cs.oracle_resolution = get_or<int>(t, "oracle_resolution", cs.oracle_resolution, "converge_1d");
    try {
      EpsilonProblem{cs.a, cs.b, cs.t, cs.cells.front(), cs.per_cell}.validate();
      require_grid({1, cs.oracle_resolution});
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("converge_1d: ") + e.what());
    }
    c.converge = cs;
  }

  if (j.contains("variational")) {
    const auto& v = j["variational"];
    expect_keys(v, {"samples", "seed"}, "variational");
    c.variational.samples = get_or<int>(v, "samples", c.variational.samples, "variational");
    if (c.variational.samples < 1) throw ConfigError("variational.samples must be positive");
    c.variational.seed = get_or<unsigned>(v, "seed", c.variational.seed, "variational");
  }

  const bool needs_pair = mode == Mode::tensors || mode == Mode::bounds || mode == Mode::bloch_verify ||
                          mode == Mode::variational || mode == Mode::all;
  if (needs_pair && !c.A) throw ConfigError("missing field 'A'");
  if (needs_pair && !c.B) throw ConfigError("missing field 'B'");
  if (mode == Mode::transform_check && !c.A && !c.transform.A) throw ConfigError("missing field 'A'");
  if (mode == Mode::converge_1d && !c.converge) throw ConfigError("missing field 'converge_1d'");
  if (mode == Mode::bloch_verify && c.dim == 1 && c.solver.mode == Discretization::fd_harmonic)
    c.solver.mode = Discretization::fourier_galerkin;
  return c;
}

/// Applies command-line overrides; the echoed config reflects them.
inline void apply_overrides(RunConfig& c, std::optional<int> resolution, std::optional<double> tol) {
  if (resolution) {
    if (*resolution < 4 || *resolution % 2 != 0) throw ConfigError("--resolution must be even and >= 4");
    c.resolution = *resolution;
    c.echo["resolution"] = *resolution;
  }
  if (tol) {
    c.solver.tol = detail::positive(*tol, "--tol");
    c.echo["solver"]["tol"] = *tol;
  }
}

struct RunReport {
  json report = json::object();
  json timings = json::object();
  std::map<std::string, std::string> csv;
  bool pass = true;

  int exit_code() const { return pass ? 0 : 2; }
};

namespace detail {

inline json tensor_json(const HomogTensor& t) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < t.matrix.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < t.matrix.cols(); ++j) r.push_back(t.matrix(i, j));
    rows.push_back(r);
  }
  return {{"provenance", to_string(t.provenance)}, {"N", t.matrix.rows()}, {"n", t.n},
          {"tol", t.tol},                         {"asymmetry", t.asymmetry}, {"matrix", rows}};
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Shared state for one run: fields, correctors and tensors are built once.
class Pipeline {
 public:
  Pipeline(const RunConfig& cfg, RunReport& out) : cfg_(cfg), out_(out) {}

  void check(const std::string& name, double value, double tol, bool upper = true) {
    const bool ok = upper ? value <= tol : value >= tol;
    out_.report["checks"][name] = {{"value", value}, {"bound", tol}, {"kind", upper ? "<=" : ">="}, {"pass", ok}};
    out_.pass = out_.pass && ok;
  }

  // Slope check, or an exactness check when every error is at roundoff level.
  void rate_check(const std::string& name, const ScaleTable& t) {
    double err = 0.0, ref = 0.0;
    for (const auto& r : t.rows) {
      err = std::max(err, r.error);
      ref = std::max(ref, r.reference);
    }
    if (err <= exact_floor * std::max(1.0, ref))
      check(name + "_exact", err, exact_floor * std::max(1.0, ref));
    else
      check(name + "_slope", t.slope, 0.9, false);
  }

  static constexpr double exact_floor = 1e-12;

  template <typename Fn>
  void timed(const std::string& stage, Fn fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    out_.timings[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  void tensors(SolverConfig solver) {
    if (core_ && core_->mode == solver.mode) return;
    Core c;
    c.mode = solver.mode;
    c.A = build_field(*cfg_.A, cfg_.dim, cfg_.resolution);
    c.B = build_field(*cfg_.B, cfg_.dim, cfg_.resolution);
    c.chi = solve_correctors(c.A, solver, CorrectorKind::chi);
    c.zeta = solve_correctors(c.B, solver, CorrectorKind::zeta);
    c.psi = solve_psi_set(c.A, c.B, c.chi, solver);
    c.astar = assemble_homogenized(c.A, c.chi, Provenance::Astar);
    c.bstar = assemble_homogenized(c.B, c.zeta, Provenance::Bstar);
    c.energy = assemble_bsharp_energy(c.B, c.chi);
    c.flux = assemble_bsharp_flux(c.A, c.B, c.chi, c.psi).tensor;
    c.perturbation = assemble_bsharp_perturbation(c.B, c.chi, c.zeta, c.bstar);
    core_ = std::move(c);
  }

  void run_tensors() {
    timed("tensors", [&] { tensors(cfg_.solver); });
    const auto& c = *core_;
    json& t = out_.report["tensors"];
    t["discretization"] = to_string(c.mode);
    t["Astar"] = tensor_json(c.astar);
    t["Bstar"] = tensor_json(c.bstar);
    t["Bsharp_energy"] = tensor_json(c.energy);
    t["Bsharp_flux"] = tensor_json(c.flux);
    t["Bsharp_perturbation"] = tensor_json(c.perturbation);
    std::vector<std::pair<std::string, const HomogTensor*>> blocks = {
        {"Astar", &c.astar}, {"Bstar", &c.bstar}, {"Bsharp_energy", &c.energy},
        {"Bsharp_flux", &c.flux}, {"Bsharp_perturbation", &c.perturbation}};
    std::optional<HomogTensor> twoscale;
    if (cfg_.twoscale) {
      twoscale = assemble_bsharp_twoscale(c.A, c.B, c.chi, cfg_.twoscale->mode, cfg_.twoscale->factor);
      t["Bsharp_twoscale"] = tensor_json(*twoscale);
      t["Bsharp_twoscale"]["factor"] = cfg_.twoscale->factor.str();
      blocks.emplace_back("Bsharp_twoscale", &*twoscale);
    }
    for (const auto& [name, field] : {std::pair{"A", &c.A}, std::pair{"B", &c.B}}) {
      const auto v = validate_ellipticity(*field, field->alpha(), field->beta());
      t["ellipticity"][name] = {{"alpha", field->alpha()}, {"beta", field->beta()}, {"min_eig", v.min_eig},
                                {"max_eig", v.max_eig}, {"failing_points", v.failing_points}};
      check(std::string("tensors.ellipticity_") + name, static_cast<double>(v.failing_points), 0.0);
    }
    check("tensors.bsharp_energy_vs_flux", rel_diff(c.flux.matrix, c.energy.matrix), 1e-8);
    check("tensors.bsharp_energy_vs_perturbation", rel_diff(c.perturbation.matrix, c.energy.matrix), 1e-8);
    std::string csv;
    for (const auto& [name, tensor] : blocks) {
      csv += "tensor,provenance,N,n\n" + name + "," + to_string(tensor->provenance) + "," +
             std::to_string(tensor->matrix.rows()) + "," + std::to_string(tensor->n) + "\n";
      for (Eigen::Index i = 0; i < tensor->matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < tensor->matrix.cols(); ++j) csv += (j ? "," : "") + fmt(tensor->matrix(i, j));
        csv += "\n";
      }
      csv += "\n";
    }
    out_.csv["tensors.csv"] = csv;
  }

  void run_bounds() {
    timed("bounds", [&] { tensors(cfg_.solver); });
    const auto& c = *core_;
    // Undeclared constants default to the pointwise eigenvalue range.
    const auto ra = validate_ellipticity(c.A, c.A.alpha(), c.A.beta());
    const auto rb = validate_ellipticity(c.B, c.B.alpha(), c.B.beta());
    const double a1 = cfg_.bounds.a1.value_or(ra.min_eig), a2 = cfg_.bounds.a2.value_or(ra.max_eig);
    const double b1 = cfg_.bounds.b1.value_or(rb.min_eig), b2 = cfg_.bounds.b2.value_or(rb.max_eig);
    const auto r = check_bounds(c.A, c.B, c.astar, c.bstar, c.energy, a1, a2, b1, b2);
    json& b = out_.report["bounds"];
    b = {{"a1", a1}, {"a2", a2}, {"b1", b1}, {"b2", b2}, {"B_lower", matrix_json(r.b_lower)},
         {"A_mean", matrix_json(r.a_mean)}, {"Bstar", matrix_json(c.bstar.matrix)},
         {"Bsharp", matrix_json(c.energy.matrix)}, {"Astar", matrix_json(c.astar.matrix)}, {"pass", r.pass}};
    b["links"] = json::array();
    for (std::size_t i = 0; i < r.links.size(); ++i) {
      b["links"].push_back({{"link", r.links[i].name}, {"min_eig", r.links[i].min_eig}, {"pass", r.links[i].pass}});
      check("bounds.link_" + std::to_string(i + 1), r.links[i].min_eig, -psd_tolerance, false);
    }
  }

  void run_bloch() {
    SolverConfig solver = cfg_.solver;
    solver.mode = Discretization::fourier_galerkin;
    timed("bloch_tensors", [&] { tensors(solver); });
    const auto& c = *core_;
    BlochOptions opts;
    opts.eig_tol = cfg_.bloch.eig_tol;
    const double h = cfg_.bloch.h;
    json& b = out_.report["bloch"];
    b["h"] = h;
    timed("bloch_hessians", [&] {
      const auto sr = spectral_representation(c.A, c.B, solver, h, opts);
      b["hessian_lambda1"] = tensor_json(sr.astar);
      b["hessian_mu1"] = tensor_json(sr.bstar);
      b["hessian_nu1"] = tensor_json(sr.bsharp);
      check("bloch.lambda1_vs_Astar", rel_diff(sr.astar.matrix, c.astar.matrix) , 1e-3);
      check("bloch.mu1_vs_Bstar", rel_diff(sr.bstar.matrix, c.bstar.matrix), 1e-3);
      check("bloch.nu1_vs_Bsharp", rel_diff(sr.bsharp.matrix, c.energy.matrix), 1e-3);
    });
    timed("bloch_ground_state", [&] {
      const BlochSolver sa(c.A, solver, opts);
      const ShiftedOperator opB(c.B, solver.dealias);
      const auto m0 = sa.mode({0.0, 0.0});
      check("bloch.lambda1_at_zero", std::abs(m0.eigenvalue), 1e-12);
      check("bloch.nu1_at_zero", std::abs(nu1(opB, m0)), 1e-12);
      const EtaMap lam = [&](const Vec& e) { return sa.mode(e).eigenvalue; };
      const EtaMap nu = [&](const Vec& e) { return nu1(opB, sa.mode(e)); };
      check("bloch.lambda1_gradient_at_zero", gradient_at_zero(lam, c.A.dim(), h).cwiseAbs().maxCoeff(), 1e-8);
      check("bloch.nu1_gradient_at_zero", gradient_at_zero(nu, c.A.dim(), h).cwiseAbs().maxCoeff(), 1e-8);
      const double e1 = eigenvector_derivative_error(sa, c.chi[0], 0, 1e-2);
      const double e2 = eigenvector_derivative_error(sa, c.chi[0], 0, 5e-3);
      b["eigenvector_derivative_error"] = {{"h_1e-2", e1}, {"h_5e-3", e2}};
      if (e1 <= exact_floor) {
        // A constant eigenvector: the difference quotient is exact and no rate exists.
        check("bloch.eigenvector_derivative_exact", e1, exact_floor);
      } else {
        check("bloch.eigenvector_derivative_ratio_min", e1 / e2, 1.5, false);
        check("bloch.eigenvector_derivative_ratio_max", e1 / e2, 2.5);
      }
      const Vec eta{0.3, c.A.dim() == 2 ? 0.2 : 0.0};
      check("bloch.lambda1_symmetry", std::abs(lam(eta) - lam({-eta[0], -eta[1]})), 1e-10);
    });
    timed("bloch_dispersion", [&] {
      const BlochSolver sa(c.A, solver, opts);
      const BlochSolver sb(c.B, solver, opts);
      const int k = cfg_.bloch.dispersion_points;
      std::vector<std::array<double, 4>> rows(static_cast<std::size_t>(k));
      std::vector<int> degenerate(static_cast<std::size_t>(k), 0);
      parallel_for(rows.size(), [&](std::size_t i) {
        const Vec eta{0.75 * std::numbers::pi * static_cast<double>(i) / (k - 1), 0.0};
        const auto m = sa.mode(eta);
        rows[i] = {eta[0], m.eigenvalue, sb.mode(eta).eigenvalue, nu1(sb.op(), m)};
        degenerate[i] = m.near_degenerate ? 1 : 0;
      });
      std::string csv = "eta1,eta2,lambda1,mu1,nu1\n";
      double min_lambda = 0.0;
      json warnings = json::array();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        csv += fmt(rows[i][0]) + ",0," + fmt(rows[i][1]) + "," + fmt(rows[i][2]) + "," + fmt(rows[i][3]) + "\n";
        min_lambda = std::min(min_lambda, rows[i][1]);
        if (degenerate[i]) warnings.push_back("near-degenerate first band at eta1=" + fmt(rows[i][0]));
      }
      b["dispersion_warnings"] = warnings;
      check("bloch.lambda1_nonnegative", min_lambda, -1e-12, false);
      out_.csv["dispersion.csv"] = csv;
    });
  }

  void run_transform() {
    const auto& ts = cfg_.transform;
    const PresetSpec spec = ts.A ? *ts.A : *cfg_.A;
    json& t = out_.report["transform"];
    timed("transform", [&] {
      const auto field = build_field(spec, ts.dim, ts.cell_resolution);
      std::mt19937 rng(ts.seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      ComplexField g(global_grid(field.grid(), ts.cells).size());
      for (auto& x : g) {
        const double re = u(rng);
        x = cplx{re, u(rng)};
      }
      const auto d = bloch_decompose(field, g, ts.cells);
      const auto back = bloch_reconstruct(d);
      double diff = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) diff += std::norm(back[i] - g[i]);
      const double identity = std::sqrt(diff) / norm2(g);
      t["dim"] = ts.dim;
      t["cell_resolution"] = ts.cell_resolution;
      t["cells"] = ts.cells;
      t["parseval_residual"] = d.parseval_residual;
      t["reconstruction_error"] = identity;
      check("transform.parseval", d.parseval_residual, 1e-10);
      check("transform.reconstruct_identity", identity, 1e-10);

      const auto fb = first_band_dominance(field, [](const Vec& x) { return cplx{std::sin(two_pi * x[0]), 0.0}; },
                                           ts.eps_cells);
      const auto bf = bloch_vs_fourier(
          field, [](const Vec& x) { return cplx{std::pow(std::sin(std::numbers::pi * x[0]), 2), 0.0}; },
          ts.eps_cells, ts.max_frequency);
      auto table = [](const ScaleTable& s) {
        json rows = json::array();
        for (const auto& r : s.rows) rows.push_back({{"eps", r.eps}, {"error", r.error}, {"reference", r.reference}});
        return json{{"rows", rows}, {"slope", s.slope}};
      };
      t["first_band_remainder"] = table(fb);
      t["bloch_vs_fourier"] = table(bf);
      rate_check("transform.first_band", fb);
      rate_check("transform.bloch_vs_fourier", bf);
    });
  }

  void run_converge() {
    const auto& cs = *cfg_.converge;
    json& t = out_.report["converge_1d"];
    timed("converge_1d", [&] {
      const double src = cs.source;
      const auto table = flux_convergence(cs.a, cs.b, cs.t, cs.cells, [src](double) { return src; }, cs.per_cell);
      const auto& L = table.limits;
      t["t"] = cs.t.str();
      t["limits"] = {{"astar", L.astar}, {"bstar", L.bstar}, {"bsharp", L.bsharp}};
      t["slopes"] = {{"errU", table.slope_u}, {"errSigma", table.slope_sigma}, {"errZ", table.slope_z},
                     {"energy", table.slope_energy}};
      json rows = json::array();
      double z_dev = 0.0;
      for (const auto& r : table.rows) {
        rows.push_back({{"eps", r.eps}, {"errU", r.err_u}, {"errSigma", r.err_sigma}, {"errZ", r.err_z},
                        {"errP", r.err_p}, {"errZ_bstar", r.err_z_control}, {"energy_error", r.energy_error}});
        z_dev = std::max(z_dev, r.z_deviation);
      }
      t["rows"] = rows;
      check("converge_1d.sigma_slope", table.slope_sigma, 0.9, false);
      check("converge_1d.z_slope", table.slope_z, 0.9, false);
      const auto& last = *std::min_element(table.rows.begin(), table.rows.end(),
                                           [](const auto& x, const auto& y) { return x.eps < y.eps; });
      check("converge_1d.bstar_control_ratio", last.err_z_control / std::max(last.err_z, 1e-300), 10.0, false);
      check("converge_1d.z_constancy", z_dev, 1e-12);
      out_.csv["convergence.csv"] = [&] {
        std::string csv = "eps,errU,errSigma,errZ\n";
        for (const auto& r : table.rows)
          csv += fmt(r.eps) + "," + fmt(r.err_u) + "," + fmt(r.err_sigma) + "," + fmt(r.err_z) + "\n";
        return csv;
      }();

      // Cell-problem route on the exact 1D discretization.
      SolverConfig fd = cfg_.solver;
      fd.mode = Discretization::fd_harmonic;
      const auto fa = profile_field(cs.a, cs.oracle_resolution);
      const auto fbf = profile_field(cs.b, cs.oracle_resolution);
      const auto chi = solve_correctors(fa, fd);
      const auto zeta = solve_correctors(fbf, fd, CorrectorKind::zeta);
      const double astar = assemble_homogenized(fa, chi).matrix(0, 0);
      const double bstar = assemble_homogenized(fbf, zeta, Provenance::Bstar).matrix(0, 0);
      const double bsharp = cs.t == Rational{1, 1}
                                ? assemble_bsharp_energy(fbf, chi).matrix(0, 0)
                                : assemble_bsharp_twoscale(fa, fbf, chi, TwoscaleMode::t_ratio, cs.t).matrix(0, 0);
      t["cell_solver"] = {{"astar", astar}, {"bstar", bstar}, {"bsharp", bsharp}, {"n", cs.oracle_resolution}};
      check("converge_1d.oracle_astar", std::abs(astar - L.astar), 1e-10);
      check("converge_1d.oracle_bstar", std::abs(bstar - L.bstar), 1e-10);
      check("converge_1d.oracle_bsharp", std::abs(bsharp - L.bsharp), 1e-10);
    });
  }

  void run_variational() {
    timed("variational", [&] { tensors(cfg_.solver); });
    const auto& c = *core_;
    std::mt19937 rng(cfg_.variational.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = 0.0, cross = 0.0;
    json samples = json::array();
    for (int s = 0; s < cfg_.variational.samples; ++s) {
      Eigen::VectorXd lambda(c.A.dim());
      for (int i = 0; i < c.A.dim(); ++i) lambda(i) = nd(rng);
      const double quad = lambda.dot(c.energy.matrix * lambda);
      const auto lv = lagrangian_value(c.A, c.B, lambda, c.chi, c.psi);
      worst = std::max(worst, std::abs(quad - lv.value) / std::max(1.0, std::abs(quad)));
      cross = std::max(cross, std::abs(lv.cross_term));
      samples.push_back({{"quadratic_form", quad}, {"lagrangian", lv.value}, {"cross_term", lv.cross_term}});
    }
    out_.report["variational"] = {{"samples", samples}};
    check("variational.lagrangian_vs_bsharp", worst, 1e-8);
    check("variational.cross_term", cross, 1e-8);
  }

 private:
  struct Core {
    Discretization mode = Discretization::fourier_galerkin;
    CoefficientField A, B;
    CorrectorSet chi, zeta, psi;
    HomogTensor astar, bstar, energy, flux, perturbation;
  };

  const RunConfig& cfg_;
  RunReport& out_;
  std::optional<Core> core_;
};

}  // namespace detail

/// Executes the pipelines for cfg.mode. Solver failures propagate as exceptions.
inline RunReport run(const RunConfig& cfg) {
  RunReport out;
  out.report["schema_version"] = schema_version;
  out.report["mode"] = to_string(cfg.mode);
  out.report["config"] = cfg.echo;
  out.report["checks"] = json::object();
  detail::Pipeline p(cfg, out);
  const auto t0 = std::chrono::steady_clock::now();
  const Mode m = cfg.mode;
  const bool all = m == Mode::all;
  if (m == Mode::tensors || all) p.run_tensors();
  if (m == Mode::bounds || all) p.run_bounds();
  if (m == Mode::bloch_verify || all) p.run_bloch();
  if (m == Mode::variational || all) p.run_variational();
  if (m == Mode::transform_check || all) p.run_transform();
  if (m == Mode::converge_1d || (all && cfg.converge)) p.run_converge();
  out.timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.report["pass"] = out.pass;
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot write " + path.string());
  f << text;
  if (!f) throw Error("io", "write failed for " + path.string());
}

/// Writes report.json, timings.json and the CSV artifacts into dir.
inline std::vector<std::string> emit_report(const RunReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::string> written;
  write_file(dir / "report.json", r.report.dump(2) + "\n");
  written.push_back("report.json");
  write_file(dir / "timings.json", r.timings.dump(2) + "\n");
  written.push_back("timings.json");
  for (const auto& [name, text] : r.csv) {
    write_file(dir / name, text);
    written.push_back(name);
  }
  return written;
}

/// Exit code for an exception escaping parse or run.
inline int exit_code_for(const Error& e) {
  if (e.reason() == "non-convergence") return 4;
  if (e.reason() == "config" || e.reason() == "invalid-argument" || e.reason() == "grid-mismatch") return 3;
  return 2;
}

}  // namespace bloch_homog::cli

#endif  // BLOCH_HOMOG_CLI_HPP
