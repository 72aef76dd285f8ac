#pragma once

// Declarative run description. A scenario is a JSON object with a versioned
// schema; every object rejects keys it does not know, and defaults are filled
// in so the resolved form (to_json) is a complete record of the run.

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "tmd/errors.hpp"
#include "tmd/fotoc.hpp"
#include "tmd/ion_trap.hpp"
#include "tmd/model.hpp"

namespace tmd {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct InitialState {
  enum class Kind { basis, spin_coherent };
  Kind kind = Kind::spin_coherent;
  double m = 0.0;  // S_z eigenvalue for Kind::basis
  double theta = 0.0;
  double phi = 0.0;
  int n_a = 0;
  int n_b = 0;

  StateVector build(const BasisSpec& basis) const {
    if (kind == Kind::basis) return basis_state(basis, {basis.offset_of(m), n_a, n_b});
    return spin_coherent_state(basis, theta, phi, n_a, n_b);
  }

  std::string describe() const {
    std::ostringstream os;
    if (kind == Kind::basis)
      os << "|m=" << m << ">|" << n_a << ">_a|" << n_b << ">_b";
    else
      os << "|theta=" << theta << ",phi=" << phi << ">|" << n_a << ">_a|" << n_b << ">_b";
    return os.str();
  }
};

struct TimeGrid {
  double t_max = 10.0;
  int n_samples = 101;
  std::vector<double> times() const { return linspace(0.0, t_max, static_cast<std::size_t>(n_samples)); }
};

struct PropagatorSpec {
  enum class Method { automatic, spectral, krylov };
  Method method = Method::automatic;
  /// Largest Hilbert-space dimension diagonalized densely under Method::automatic.
  Eigen::Index dense_limit = 16000;
  KrylovOptions krylov;
};

struct SpectrumAnalysis {
  int count = 20;
};

struct EvolveAnalysis {
  std::vector<std::string> observables{"s_z"};
};

struct FotocAnalysis {
  std::vector<Mode> generators{Mode::a, Mode::b};
  bool variance = true;
  bool echo = false;
  double delta_phi = 1e-3;
  FitPolicy fit;
};

struct ThermalizationAnalysis {
  std::string observable = "s_z";
  std::vector<double> delta_e_grid{0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0};
  double rel_tol = 0.01;
  /// Thermalization time: first sample with |O(t) - O_diag| <= settle_fraction |O(0) - O_diag|.
  double settle_fraction = 0.1;
};

struct SemiclassicalAnalysis {
  std::vector<double> g_b_grid;    // scan at the model's g_a
  std::vector<double> equal_grid;  // scan along g_a = g_b
};

struct CompareAnalysis {
  Mode generator = Mode::b;
  double tolerance = 0.2;
  FitPolicy fit;
};

using Analysis = std::variant<SpectrumAnalysis, EvolveAnalysis, FotocAnalysis, ThermalizationAnalysis,
                              SemiclassicalAnalysis, CompareAnalysis>;

inline const char* analysis_name(const Analysis& a) {
  static constexpr const char* names[] = {"spectrum", "evolve", "fotoc", "thermalization", "semiclassical", "compare"};
  return names[a.index()];
}

struct SweepSpec {
  std::string axis;
  std::vector<double> values;
  std::map<std::string, std::vector<double>> linked;
};

struct Scenario {
  std::string name = "scenario";
  std::string description;
  ModelParams model;
  std::optional<IonTrapParams> ion_trap;
  int cutoff_a = 10;
  int cutoff_b = 10;
  InitialState initial_state;
  TimeGrid time_grid;
  PropagatorSpec propagator;
  std::vector<Analysis> analyses;
  double leakage_tolerance = 1e-6;
  std::string output_directory = "out";
  std::optional<SweepSpec> sweep;

  BasisSpec basis() const { return BasisSpec(model.n_spins, cutoff_a, cutoff_b); }
};

namespace detail {

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ValidationError(where() + "must be an object");
  }

  /// Rejects every key outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j_.items())
      if (!ok.count(key)) throw ValidationError("unknown key '" + prefix() + key + "'");
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string child(const char* key) const { return prefix() + key; }

  double number(const char* key, std::optional<double> fallback = std::nullopt) const {
    if (!j_.contains(key)) return require(key, fallback);
    const json& v = j_.at(key);
    if (!v.is_number()) throw ValidationError("'" + prefix() + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError("'" + prefix() + key + "' must be finite");
    return x;
  }

  int integer(const char* key, std::optional<int> fallback = std::nullopt) const {
    if (!j_.contains(key)) return require(key, fallback);
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ValidationError("'" + prefix() + key + "' must be an integer");
    return v.get<int>();
  }

  std::string text(const char* key, std::optional<std::string> fallback = std::nullopt) const {
    if (!j_.contains(key)) return require(key, fallback);
    const json& v = j_.at(key);
    if (!v.is_string()) throw ValidationError("'" + prefix() + key + "' must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key, std::optional<std::vector<double>> fallback = std::nullopt) const {
    if (!j_.contains(key)) return require(key, fallback);
    const json& v = j_.at(key);
    if (!v.is_array()) throw ValidationError("'" + prefix() + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const json& x : v) {
      if (!x.is_number()) throw ValidationError("'" + prefix() + key + "' must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const char* key, std::vector<std::string> fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array()) throw ValidationError("'" + prefix() + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const json& x : v) {
      if (!x.is_string()) throw ValidationError("'" + prefix() + key + "' must be an array of strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }

 private:
  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }
  std::string where() const { return path_.empty() ? "scenario " : "'" + path_ + "' "; }

  template <class T>
  T require(const char* key, const std::optional<T>& fallback) const {
    if (!fallback) throw ValidationError("missing required key '" + prefix() + key + "'");
    return *fallback;
  }

  const json& j_;
  std::string path_;
};

inline Mode parse_mode(const std::string& s, const std::string& path) {
  if (s == "a") return Mode::a;
  if (s == "b") return Mode::b;
  throw ValidationError("'" + path + "' must be \"a\" or \"b\"");
}

inline FitPolicy parse_fit(const json& j, const std::string& path) {
  const Fields f(j, path);
  f.only({"start_factor", "end_fraction", "min_samples", "min_r_squared", "saturation_fraction"});
  FitPolicy p;
  p.start_factor = f.number("start_factor", p.start_factor);
  p.end_fraction = f.number("end_fraction", p.end_fraction);
  const int min_samples = f.integer("min_samples", static_cast<int>(p.min_samples));
  if (min_samples < 2) throw ValidationError("'" + path + ".min_samples' must be >= 2");
  p.min_samples = static_cast<std::size_t>(min_samples);
  p.min_r_squared = f.number("min_r_squared", p.min_r_squared);
  p.saturation_fraction = f.number("saturation_fraction", p.saturation_fraction);
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return p;
}

inline json fit_to_json(const FitPolicy& p) {
  return {{"start_factor", p.start_factor},
          {"end_fraction", p.end_fraction},
          {"min_samples", p.min_samples},
          {"min_r_squared", p.min_r_squared},
          {"saturation_fraction", p.saturation_fraction}};
}

inline const std::set<std::string>& observable_names() {
  static const std::set<std::string> names{"s_x", "s_y", "s_z", "s_z2", "n_a", "n_b", "x_a", "x_b", "parity"};
  return names;
}

inline void require_observable(const std::string& name, const std::string& path) {
  if (!observable_names().count(name)) throw ValidationError("'" + path + "': unknown observable '" + name + "'");
}

inline Analysis parse_analysis(const json& j, const std::string& path) {
  const Fields f(j, path);
  const std::string type = f.text("type");
  if (type == "spectrum") {
    f.only({"type", "count"});
    SpectrumAnalysis a;
    a.count = f.integer("count", a.count);
    if (a.count < 1) throw ValidationError("'" + path + ".count' must be >= 1");
    return a;
  }
  if (type == "evolve") {
    f.only({"type", "observables"});
    EvolveAnalysis a;
    a.observables = f.strings("observables", a.observables);
    if (a.observables.empty()) throw ValidationError("'" + path + ".observables' must not be empty");
    for (const auto& o : a.observables) require_observable(o, path + ".observables");
    return a;
  }
  if (type == "fotoc") {
    f.only({"type", "generators", "modes", "delta_phi", "fit"});
    FotocAnalysis a;
    const auto gens = f.strings("generators", {"a", "b"});
    if (gens.empty()) throw ValidationError("'" + path + ".generators' must not be empty");
    a.generators.clear();
    for (const auto& g : gens) a.generators.push_back(parse_mode(g, path + ".generators"));
    const auto modes = f.strings("modes", {"variance"});
    a.variance = a.echo = false;
    for (const auto& m : modes) {
      if (m == "variance")
        a.variance = true;
      else if (m == "echo")
        a.echo = true;
      else
        throw ValidationError("'" + path + ".modes' entries must be \"variance\" or \"echo\"");
    }
    if (!a.variance && !a.echo) throw ValidationError("'" + path + ".modes' must not be empty");
    a.delta_phi = f.number("delta_phi", a.delta_phi);
    if (!(a.delta_phi > 0.0 && a.delta_phi <= 0.1))
      throw ValidationError("'" + path + ".delta_phi' must lie in (0, 0.1]");
    if (f.has("fit")) a.fit = parse_fit(f.raw("fit"), f.child("fit"));
    return a;
  }
  if (type == "thermalization") {
    f.only({"type", "observable", "delta_e_grid", "rel_tol", "settle_fraction"});
    ThermalizationAnalysis a;
    a.observable = f.text("observable", a.observable);
    require_observable(a.observable, path + ".observable");
    a.delta_e_grid = f.numbers("delta_e_grid", a.delta_e_grid);
    if (a.delta_e_grid.empty()) throw ValidationError("'" + path + ".delta_e_grid' must not be empty");
    for (std::size_t i = 0; i < a.delta_e_grid.size(); ++i) {
      if (!(a.delta_e_grid[i] > 0.0)) throw ValidationError("'" + path + ".delta_e_grid' entries must be positive");
      if (i > 0 && !(a.delta_e_grid[i] > a.delta_e_grid[i - 1]))
        throw ValidationError("'" + path + ".delta_e_grid' must be increasing");
    }
    a.rel_tol = f.number("rel_tol", a.rel_tol);
    a.settle_fraction = f.number("settle_fraction", a.settle_fraction);
    if (!(a.rel_tol > 0.0)) throw ValidationError("'" + path + ".rel_tol' must be positive");
    if (!(a.settle_fraction > 0.0 && a.settle_fraction < 1.0))
      throw ValidationError("'" + path + ".settle_fraction' must lie in (0, 1)");
    return a;
  }
  if (type == "semiclassical") {
    f.only({"type", "g_b_grid", "equal_grid"});
    SemiclassicalAnalysis a;
    a.g_b_grid = f.numbers("g_b_grid", std::vector<double>{});
    a.equal_grid = f.numbers("equal_grid", std::vector<double>{});
    return a;
  }
  if (type == "compare") {
    f.only({"type", "generator", "tolerance", "fit"});
    CompareAnalysis a;
    a.generator = parse_mode(f.text("generator", "b"), path + ".generator");
    a.tolerance = f.number("tolerance", a.tolerance);
    if (!(a.tolerance > 0.0)) throw ValidationError("'" + path + ".tolerance' must be positive");
    if (f.has("fit")) a.fit = parse_fit(f.raw("fit"), f.child("fit"));
    return a;
  }
  throw ValidationError("'" + path + ".type': unknown analysis '" + type + "'");
}

inline json analysis_to_json(const Analysis& analysis) {
  json j{{"type", analysis_name(analysis)}};
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, SpectrumAnalysis>) {
          j["count"] = a.count;
        } else if constexpr (std::is_same_v<T, EvolveAnalysis>) {
          j["observables"] = a.observables;
        } else if constexpr (std::is_same_v<T, FotocAnalysis>) {
          json gens = json::array();
          for (Mode m : a.generators) gens.push_back(to_string(m));
          json modes = json::array();
          if (a.variance) modes.push_back("variance");
          if (a.echo) modes.push_back("echo");
          j["generators"] = gens;
          j["modes"] = modes;
          j["delta_phi"] = a.delta_phi;
          j["fit"] = fit_to_json(a.fit);
        } else if constexpr (std::is_same_v<T, ThermalizationAnalysis>) {
          j["observable"] = a.observable;
          j["delta_e_grid"] = a.delta_e_grid;
          j["rel_tol"] = a.rel_tol;
          j["settle_fraction"] = a.settle_fraction;
        } else if constexpr (std::is_same_v<T, SemiclassicalAnalysis>) {
          j["g_b_grid"] = a.g_b_grid;
          j["equal_grid"] = a.equal_grid;
        } else {
          j["generator"] = to_string(a.generator);
          j["tolerance"] = a.tolerance;
          j["fit"] = fit_to_json(a.fit);
        }
      },
      analysis);
  return j;
}

inline IonTrapParams parse_ion_trap(const json& j, const std::string& path) {
  const Fields f(j, path);
  f.only({"eta_x", "eta_y", "rabi_x_khz", "rabi_y_khz", "delta_x_khz", "delta_y_khz", "spin_detuning_khz",
          "n_ions"});
  IonTrapParams p;
  p.eta_x = f.number("eta_x");
  p.eta_y = f.number("eta_y");
  p.rabi_x_khz = f.number("rabi_x_khz");
  p.rabi_y_khz = f.number("rabi_y_khz");
  p.delta_x_khz = f.number("delta_x_khz");
  p.delta_y_khz = f.number("delta_y_khz");
  p.spin_detuning_khz = f.number("spin_detuning_khz");
  p.n_ions = f.integer("n_ions");
  p.validate();
  return p;
}

inline json ion_trap_to_json(const IonTrapParams& p) {
  return {{"eta_x", p.eta_x},
          {"eta_y", p.eta_y},
          {"rabi_x_khz", p.rabi_x_khz},
          {"rabi_y_khz", p.rabi_y_khz},
          {"delta_x_khz", p.delta_x_khz},
          {"delta_y_khz", p.delta_y_khz},
          {"spin_detuning_khz", p.spin_detuning_khz},
          {"n_ions", p.n_ions}};
}

/// Walks a dotted path ("model.g_b", "analyses.0.delta_phi") to an existing numeric leaf.
inline json& numeric_leaf(json& root, const std::string& path) {
  json* node = &root;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (node->is_object() && node->contains(part)) {
      node = &(*node)[part];
    } else if (node->is_array() && !part.empty() &&
               part.find_first_not_of("0123456789") == std::string::npos &&
               std::stoul(part) < node->size()) {
      node = &(*node)[std::stoul(part)];
    } else {
      throw ValidationError("invalid sweep axis '" + path + "'");
    }
  }
  if (!node->is_number()) throw ValidationError("sweep axis '" + path + "' does not name a numeric field");
  return *node;
}

inline void assign_leaf(json& leaf, double value, const std::string& path) {
  if (leaf.is_number_integer()) {
    if (value != std::round(value)) throw ValidationError("sweep axis '" + path + "' takes integer values");
    leaf = static_cast<long long>(std::llround(value));
  } else {
    leaf = value;
  }
}

}  // namespace detail

inline Scenario sweep_point(const Scenario& s, std::size_t index);

inline Scenario parse_scenario(const json& j) {
  using detail::Fields;
  const Fields top(j, "");
  top.only({"schema_version", "name", "description", "model", "ion_trap", "basis", "initial_state", "time_grid",
            "propagator", "analyses", "tolerances", "output", "sweep"});
  const int version = top.integer("schema_version");
  if (version != kSchemaVersion)
    throw ValidationError("unsupported schema_version " + std::to_string(version) + " (expected " +
                          std::to_string(kSchemaVersion) + ")");
  Scenario s;
  s.name = top.text("name", s.name);
  s.description = top.text("description", "");

  if (top.has("model") == top.has("ion_trap"))
    throw ValidationError("exactly one of 'model' and 'ion_trap' must be given");
  if (top.has("model")) {
    const Fields m(top.raw("model"), "model");
    m.only({"omega_a", "omega_b", "delta", "g_a", "g_b", "n_spins"});
    s.model = {m.number("omega_a"), m.number("omega_b"), m.number("delta"),
               m.number("g_a"),     m.number("g_b"),     m.integer("n_spins")};
  } else {
    s.ion_trap = detail::parse_ion_trap(top.raw("ion_trap"), "ion_trap");
    s.model = map_ion_trap(*s.ion_trap).params;
  }
  try {
    s.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }

  {
    const Fields b(top.raw("basis"), "basis");
    b.only({"cutoff_a", "cutoff_b"});
    s.cutoff_a = b.integer("cutoff_a");
    s.cutoff_b = b.integer("cutoff_b");
    if (s.cutoff_a < 1 || s.cutoff_b < 1) throw ValidationError("basis cutoffs must be >= 1");
  }

  {
    const Fields i(top.raw("initial_state"), "initial_state");
    const std::string kind = i.text("kind");
    if (kind == "basis") {
      i.only({"kind", "m", "n_a", "n_b"});
      s.initial_state.kind = InitialState::Kind::basis;
      s.initial_state.m = i.number("m");
    } else if (kind == "spin_coherent") {
      i.only({"kind", "direction", "theta", "phi", "n_a", "n_b"});
      s.initial_state.kind = InitialState::Kind::spin_coherent;
      if (i.has("direction")) {
        if (i.has("theta") || i.has("phi"))
          throw ValidationError("initial_state: give either 'direction' or 'theta'/'phi', not both");
        const std::string d = i.text("direction");
        if (d == "-z") {
          s.initial_state.theta = 0.0;
        } else if (d == "-x") {
          s.initial_state.theta = std::numbers::pi / 2;
        } else if (d == "-y") {
          s.initial_state.theta = std::numbers::pi / 2;
          s.initial_state.phi = std::numbers::pi / 2;
        } else {
          throw ValidationError("initial_state.direction must be \"-z\", \"-x\" or \"-y\"");
        }
      } else {
        s.initial_state.theta = i.number("theta");
        s.initial_state.phi = i.number("phi", 0.0);
      }
    } else {
      throw ValidationError("initial_state.kind must be \"basis\" or \"spin_coherent\"");
    }
    s.initial_state.n_a = i.integer("n_a", 0);
    s.initial_state.n_b = i.integer("n_b", 0);
    if (s.initial_state.n_a < 0 || s.initial_state.n_a > s.cutoff_a || s.initial_state.n_b < 0 ||
        s.initial_state.n_b > s.cutoff_b)
      throw ValidationError("initial_state Fock numbers must lie within the basis cutoffs");
    if (s.initial_state.kind == InitialState::Kind::basis) {
      try {
        (void)s.basis().offset_of(s.initial_state.m);
      } catch (const std::out_of_range&) {
        throw ValidationError("initial_state.m is not an S_z eigenvalue for n_spins = " +
                              std::to_string(s.model.n_spins));
      }
    }
  }

  {
    const Fields t(top.raw("time_grid"), "time_grid");
    t.only({"t_max", "n_samples"});
    s.time_grid.t_max = t.number("t_max");
    s.time_grid.n_samples = t.integer("n_samples");
    if (!(s.time_grid.t_max > 0.0)) throw ValidationError("time_grid.t_max must be positive");
    if (s.time_grid.n_samples < 2) throw ValidationError("time_grid.n_samples must be >= 2");
  }

  if (top.has("propagator")) {
    const Fields p(top.raw("propagator"), "propagator");
    p.only({"method", "dense_limit", "krylov_dim", "krylov_tol"});
    const std::string m = p.text("method", "auto");
    if (m == "auto")
      s.propagator.method = PropagatorSpec::Method::automatic;
    else if (m == "spectral")
      s.propagator.method = PropagatorSpec::Method::spectral;
    else if (m == "krylov")
      s.propagator.method = PropagatorSpec::Method::krylov;
    else
      throw ValidationError("propagator.method must be \"auto\", \"spectral\" or \"krylov\"");
    s.propagator.dense_limit = p.integer("dense_limit", static_cast<int>(s.propagator.dense_limit));
    s.propagator.krylov.max_dim = p.integer("krylov_dim", s.propagator.krylov.max_dim);
    s.propagator.krylov.tolerance = p.number("krylov_tol", s.propagator.krylov.tolerance);
    if (s.propagator.krylov.max_dim < 2) throw ValidationError("propagator.krylov_dim must be >= 2");
    if (!(s.propagator.krylov.tolerance > 0.0)) throw ValidationError("propagator.krylov_tol must be positive");
  }

  if (!top.has("analyses") || !top.raw("analyses").is_array())
    throw ValidationError("'analyses' must be an array");
  const json& list = top.raw("analyses");
  if (list.empty()) throw ValidationError("'analyses' must not be empty");
  for (std::size_t i = 0; i < list.size(); ++i)
    s.analyses.push_back(detail::parse_analysis(list[i], "analyses." + std::to_string(i)));

  if (top.has("tolerances")) {
    const Fields t(top.raw("tolerances"), "tolerances");
    t.only({"leakage"});
    s.leakage_tolerance = t.number("leakage", s.leakage_tolerance);
    if (!(s.leakage_tolerance > 0.0)) throw ValidationError("tolerances.leakage must be positive");
  }

  if (top.has("output")) {
    const Fields o(top.raw("output"), "output");
    o.only({"directory"});
    s.output_directory = o.text("directory", s.output_directory);
  }

  if (top.has("sweep")) {
    const Fields w(top.raw("sweep"), "sweep");
    w.only({"axis", "values", "linked"});
    SweepSpec sw;
    sw.axis = w.text("axis");
    sw.values = w.numbers("values");
    if (sw.values.empty()) throw ValidationError("sweep.values must not be empty");
    if (w.has("linked")) {
      const json& linked = w.raw("linked");
      if (!linked.is_object()) throw ValidationError("sweep.linked must be an object");
      for (const auto& [key, arr] : linked.items()) {
        const detail::Fields holder(linked, "sweep.linked");
        auto vals = holder.numbers(key.c_str());
        if (vals.size() != sw.values.size())
          throw ValidationError("sweep.linked." + key + " must have as many entries as sweep.values");
        sw.linked[key] = std::move(vals);
      }
    }
    s.sweep = std::move(sw);
    // Every point must itself be a valid scenario.
    for (std::size_t i = 0; i < s.sweep->values.size(); ++i) sweep_point(s, i);
  }
  return s;
}

/// Resolved form: every default made explicit. parse_scenario(to_json(s)) == s.
inline json to_json(const Scenario& s) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = s.name;
  j["description"] = s.description;
  if (s.ion_trap) {
    j["ion_trap"] = detail::ion_trap_to_json(*s.ion_trap);
  } else {
    j["model"] = {{"omega_a", s.model.omega_a}, {"omega_b", s.model.omega_b}, {"delta", s.model.delta},
                  {"g_a", s.model.g_a},         {"g_b", s.model.g_b},         {"n_spins", s.model.n_spins}};
  }
  j["basis"] = {{"cutoff_a", s.cutoff_a}, {"cutoff_b", s.cutoff_b}};
  const InitialState& i = s.initial_state;
  if (i.kind == InitialState::Kind::basis)
    j["initial_state"] = {{"kind", "basis"}, {"m", i.m}, {"n_a", i.n_a}, {"n_b", i.n_b}};
  else
    j["initial_state"] = {{"kind", "spin_coherent"}, {"theta", i.theta}, {"phi", i.phi}, {"n_a", i.n_a}, {"n_b", i.n_b}};
  j["time_grid"] = {{"t_max", s.time_grid.t_max}, {"n_samples", s.time_grid.n_samples}};
  static constexpr const char* methods[] = {"auto", "spectral", "krylov"};
  j["propagator"] = {{"method", methods[static_cast<int>(s.propagator.method)]},
                     {"dense_limit", s.propagator.dense_limit},
                     {"krylov_dim", s.propagator.krylov.max_dim},
                     {"krylov_tol", s.propagator.krylov.tolerance}};
  json analyses = json::array();
  for (const auto& a : s.analyses) analyses.push_back(detail::analysis_to_json(a));
  j["analyses"] = analyses;
  j["tolerances"] = {{"leakage", s.leakage_tolerance}};
  j["output"] = {{"directory", s.output_directory}};
  if (s.sweep) {
    json linked = json::object();
    for (const auto& [k, v] : s.sweep->linked) linked[k] = v;
    j["sweep"] = {{"axis", s.sweep->axis}, {"values", s.sweep->values}, {"linked", linked}};
  }
  return j;
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(parse_json_text(buffer.str(), path));
}

/// The scenario at sweep point `index`: the sweep block removed, the axis and
/// every linked path set, and the result validated afresh.
inline Scenario sweep_point(const Scenario& s, std::size_t index) {
  if (!s.sweep) throw ValidationError("scenario has no sweep block");
  if (index >= s.sweep->values.size()) throw std::out_of_range("sweep_point: index out of range");
  json j = to_json(s);
  j.erase("sweep");
  detail::assign_leaf(detail::numeric_leaf(j, s.sweep->axis), s.sweep->values[index], s.sweep->axis);
  for (const auto& [path, values] : s.sweep->linked)
    detail::assign_leaf(detail::numeric_leaf(j, path), values[index], path);
  return parse_scenario(j);
}

}  // namespace tmd
