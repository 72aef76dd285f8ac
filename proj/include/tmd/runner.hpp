#pragma once

// Executes a Scenario and writes its artifact bundle:
//   <out>/summary.json           resolved scenario, scalar results, leakage, warnings
//   <out>/<analysis>_*.csv       one table per series; '#' lines carry the scenario
// Exit status: 0 ok, 1 validation error, 2 numerical warning (e.g. leakage above
// tolerance). The run always completes when only warnings occur.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tmd/fotoc.hpp"
#include "tmd/scenario.hpp"
#include "tmd/semiclassical.hpp"
#include "tmd/spectral.hpp"
#include "tmd/thermo.hpp"

namespace tmd {

enum ExitStatus : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

/// Named observables available to evolve and thermalization analyses.
/// Spin observables are normalised by S (s_z2 by S^2).
inline OperatorMatrix observable(const std::string& name, const BasisSpec& basis) {
  const double s = basis.spin();
  const auto spin_scaled = [&](OperatorMatrix op, double scale) {
    op.entries *= scale;
    op.hermitian = true;
    return op;
  };
  if (name == "s_x") return spin_scaled(build_spin_operators(basis).x, 1.0 / s);
  if (name == "s_y") return spin_scaled(build_spin_operators(basis).y, 1.0 / s);
  if (name == "s_z") return spin_scaled(build_spin_operators(basis).z, 1.0 / s);
  if (name == "s_z2") {
    const OperatorMatrix z = build_spin_operators(basis).z;
    return spin_scaled(z * z, 1.0 / (s * s));
  }
  if (name == "n_a") return build_boson_operators(basis, Mode::a).number();
  if (name == "n_b") return build_boson_operators(basis, Mode::b).number();
  if (name == "x_a") return quadrature(basis, Mode::a);
  if (name == "x_b") return quadrature(basis, Mode::b);
  if (name == "parity") return build_parity(basis);
  throw ValidationError("unknown observable '" + name + "'");
}

/// Projector onto the top Fock layers; its expectation is the leakage.
inline OperatorMatrix boundary_projector(const BasisSpec& basis) {
  std::vector<Eigen::Triplet<cplx>> t;
  for (Eigen::Index i = 0; i < basis.dim(); ++i) {
    const BasisIndex idx = basis.unflatten(i);
    if (idx.n_a == basis.cutoff_a() || idx.n_b == basis.cutoff_b()) t.emplace_back(i, i, 1.0);
  }
  SparseOp p(basis.dim(), basis.dim());
  p.setFromTriplets(t.begin(), t.end());
  return {basis, std::move(p), true};
}

struct RunOptions {
  std::optional<std::string> out_dir;
  int workers = 1;
  std::optional<double> leakage_tolerance;
  /// Restrict the run to analyses of this type ("fotoc", "spectrum", ...).
  std::optional<std::string> only;
  bool write_files = true;
};

struct RunResult {
  json summary;
  int status = kExitOk;
  std::vector<std::string> warnings;
  std::vector<std::string> files;
  std::string directory;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Column-oriented table with a units-bearing header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  void add(std::string name, std::vector<double> values) {
    header.push_back(std::move(name));
    columns.push_back(std::move(values));
  }

  std::string render(const std::vector<std::string>& comments) const {
    std::string out;
    for (const auto& c : comments) out += "# " + c + "\n";
    for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + header[k];
    out += "\n";
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns)
      if (c.size() != rows) throw std::logic_error("Table: ragged columns");
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < columns.size(); ++k) out += (k ? "," : "") + format_double(columns[k][r]);
      out += "\n";
    }
    return out;
  }
};

/// Writes via a temporary file and rename, so readers never see a partial file.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline json cplx_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline json fit_json(const LyapunovFit& fit) {
  json j{{"found", fit.found},
         {"lambda_q", fit.lambda_q},
         {"t_start", fit.t_start},
         {"t_end", fit.t_end},
         {"samples", fit.samples},
         {"r_squared", fit.r_squared},
         {"slope_stderr", fit.slope_stderr},
         {"saturation_value", fit.saturation_value}};
  if (!fit.found) j["reason"] = fit.reason;
  return j;
}

inline json stability_json(const StabilityReport& r) {
  json ev = json::array();
  for (cplx mu : r.eigenvalues) ev.push_back(cplx_json(mu));
  return {{"lambda_cl", r.lambda_cl},
          {"max_real_part", r.max_real_part},
          {"positive_real_count", r.positive_real_count},
          {"classification", to_string(r.classification)},
          {"pairing_defect", r.pairing_defect},
          {"eigenvalues", ev}};
}

/// First sample at which |O(t) - target| <= fraction |O(0) - target|, if any.
inline std::optional<double> settle_time(const std::vector<double>& t, const std::vector<double>& v, double target,
                                         double fraction) {
  const double initial = std::abs(v.front() - target);
  if (initial == 0.0) return 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::abs(v[i] - target) <= fraction * initial) return t[i];
  return std::nullopt;
}

class Run {
 public:
  Run(const Scenario& s, const RunOptions& opt)
      : s_(s),
        opt_(opt),
        basis_(s.basis()),
        h_(build_hamiltonian(s.model, basis_)),
        psi0_(s.initial_state.build(basis_)),
        times_(s.time_grid.times()),
        tol_(opt.leakage_tolerance.value_or(s.leakage_tolerance)) {
    const std::filesystem::path dir = opt.out_dir ? *opt.out_dir : s.output_directory;
    result_.directory = dir.string();
    scenario_json_ = to_json(s);
    if (s.ion_trap) mapping_ = map_ion_trap(*s.ion_trap);
  }

  RunResult execute() {
    json results = json::object();
    std::map<std::string, int> seen;
    for (std::size_t i = 0; i < s_.analyses.size(); ++i) {
      const Analysis& a = s_.analyses[i];
      const std::string type = analysis_name(a);
      if (opt_.only && *opt_.only != type) continue;
      const int n = seen[type]++;
      const std::string key = n == 0 ? type : type + "_" + std::to_string(n);
      results[key] = std::visit([&](const auto& x) { return analyse(x, key); }, a);
    }
    if (results.empty()) throw ValidationError("no analysis of type '" + opt_.only.value_or("") + "' in scenario");

    json& sum = result_.summary;
    sum["scenario"] = scenario_json_;
    sum["dimension"] = basis_.dim();
    sum["initial_state"] = s_.initial_state.describe();
    sum["propagator"] = propagator_used_.empty() ? "none" : propagator_used_;
    sum["leakage_initial"] = leakage(psi0_);
    sum["leakage_max"] = leakage_max_;
    sum["leakage_tolerance"] = tol_;
    if (mapping_) {
      sum["ion_trap"] = {{"time_unit_us", mapping_->time_unit_us},
                         {"energy_unit_khz", mapping_->energy_unit_khz},
                         {"g_a_khz", mapping_->g_a_khz},
                         {"g_b_khz", mapping_->g_b_khz},
                         {"model", {{"omega_a", s_.model.omega_a},
                                    {"omega_b", s_.model.omega_b},
                                    {"delta", s_.model.delta},
                                    {"g_a", s_.model.g_a},
                                    {"g_b", s_.model.g_b},
                                    {"n_spins", s_.model.n_spins}}}};
      for (const auto& w : mapping_->warnings) warn(w, false);
    }
    if (leakage_max_ > tol_) {
      warn("leakage " + format_double(leakage_max_) + " exceeds tolerance " + format_double(tol_), true);
    }
    sum["results"] = results;
    sum["warnings"] = result_.warnings;
    sum["status"] = result_.status == kExitOk ? "ok" : "numerical-warning";
    if (opt_.write_files) {
      const std::filesystem::path path = std::filesystem::path(result_.directory) / "summary.json";
      write_atomically(path, sum.dump(2) + "\n");
      result_.files.push_back(path.string());
    }
    return result_;
  }

 private:
  // Shared state -------------------------------------------------------------

  const SpectralDecomposition& spectrum() {
    if (!spec_) spec_.emplace(diagonalize(h_, s_.model));
    return *spec_;
  }

  bool use_spectral() const {
    switch (s_.propagator.method) {
      case PropagatorSpec::Method::spectral:
        return true;
      case PropagatorSpec::Method::krylov:
        return false;
      default:
        return spec_.has_value() || basis_.dim() <= s_.propagator.dense_limit;
    }
  }

  /// visit(i, psi(t_i)) through the configured propagator.
  template <class Visit>
  void propagate(Visit&& visit) {
    if (use_spectral()) {
      propagator_used_ = "spectral";
      SpectralPropagator(spectrum(), opt_.workers).sample(psi0_, times_, visit);
    } else {
      propagator_used_ = "krylov";
      KrylovPropagator(h_, s_.propagator.krylov).sample(psi0_, times_, visit);
    }
  }

  void note_leakage(const std::vector<double>& leak) {
    for (double l : leak) leakage_max_ = std::max(leakage_max_, l);
  }

  void warn(const std::string& message, bool numerical) {
    result_.warnings.push_back(message);
    if (numerical) result_.status = kExitNumerical;
  }

  std::vector<std::string> comments() const {
    return {"scenario " + scenario_json_.dump(), "leakage_tolerance " + format_double(tol_)};
  }

  void write_table(const std::string& name, const Table& table, std::vector<std::string> extra = {}) {
    if (!opt_.write_files) return;
    std::vector<std::string> c = comments();
    c.insert(c.end(), extra.begin(), extra.end());
    const std::filesystem::path path = std::filesystem::path(result_.directory) / (name + ".csv");
    write_atomically(path, table.render(c));
    result_.files.push_back(path.string());
  }

  Table time_table() const {
    Table t;
    t.add("t[1/energy]", times_);
    if (mapping_) {
      std::vector<double> us(times_.size());
      for (std::size_t i = 0; i < us.size(); ++i) us[i] = mapping_->physical_time_us(times_[i]);
      t.add("t[us]", us);
    }
    return t;
  }

  const TimeSeries& variance_series(Mode m) {
    auto it = variance_cache_.find(m);
    if (it != variance_cache_.end()) return it->second;
    const OperatorMatrix g = quadrature(basis_, m);
    TimeSeries series;
    series.label = std::string("G_") + to_string(m);
    series.times = times_;
    series.values.resize(times_.size());
    series.leakage.resize(times_.size());
    propagate([&](std::size_t i, const Eigen::VectorXcd& psi) {
      const Eigen::VectorXcd gpsi = g.entries * psi;
      const double mean = psi.dot(gpsi).real();
      series.values[i] = (gpsi - mean * psi).squaredNorm();
      series.leakage[i] = leakage(basis_, psi);
    });
    note_leakage(series.leakage);
    return variance_cache_.emplace(m, std::move(series)).first->second;
  }

  // Analyses ------------------------------------------------------------------

  json analyse(const SpectrumAnalysis& a, const std::string& key) {
    const SpectralDecomposition& spec = spectrum();
    const Eigen::Index count = std::min<Eigen::Index>(a.count, spec.dim());
    Table t;
    std::vector<double> idx(count), energy(count), parity(count);
    for (Eigen::Index k = 0; k < count; ++k) {
      idx[k] = static_cast<double>(k);
      energy[k] = spec.eigenvalues()(k);
      const Eigen::VectorXcd v = spec.eigenvector(k);
      Eigen::Index peak;
      v.cwiseAbs2().maxCoeff(&peak);
      parity[k] = parity_of(basis_, peak);
    }
    t.add("index", idx);
    t.add("energy[energy]", energy);
    t.add("parity", parity);
    write_table(key, t);

    const Eigen::VectorXcd ground = spec.eigenvector(0);
    const double s = basis_.spin();
    json j{{"dimension", spec.dim()},
           {"ground_energy", spec.eigenvalues()(0)},
           {"ground_s_z", observable("s_z", basis_).expectation(ground).real()},
           {"ground_n_a_per_s", observable("n_a", basis_).expectation(ground).real() / s},
           {"ground_n_b_per_s", observable("n_b", basis_).expectation(ground).real() / s},
           {"ground_leakage", leakage(basis_, ground)},
           {"g_c_a", critical_coupling(s_.model, Mode::a)},
           {"g_c_b", critical_coupling(s_.model, Mode::b)}};
    if (s_.model.omega_a == s_.model.omega_b) {
      const MeanFieldSolution mf = order_parameters(s_.model);
      j["mean_field"] = {{"phase", to_string(mf.phase)},
                         {"density_a", mf.density_a},
                         {"density_b", mf.density_b},
                         {"s_z", mf.spin_z}};
    }
    return j;
  }

  json analyse(const EvolveAnalysis& a, const std::string& key) {
    std::vector<OperatorMatrix> ops;
    for (const auto& name : a.observables) ops.push_back(observable(name, basis_));
    std::vector<std::vector<double>> values(ops.size(), std::vector<double>(times_.size()));
    std::vector<double> leak(times_.size()), norm(times_.size());
    propagate([&](std::size_t i, const Eigen::VectorXcd& psi) {
      for (std::size_t k = 0; k < ops.size(); ++k) values[k][i] = ops[k].expectation(psi).real();
      leak[i] = leakage(basis_, psi);
      norm[i] = psi.norm();
    });
    note_leakage(leak);
    Table t = time_table();
    json j = json::object();
    for (std::size_t k = 0; k < ops.size(); ++k) {
      t.add(a.observables[k], values[k]);
      const auto& v = values[k];
      j[a.observables[k]] = {{"initial", v.front()},
                             {"final", v.back()},
                             {"time_average", std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size())}};
    }
    t.add("leakage", leak);
    write_table(key, t);
    double drift = 0.0;
    for (double n : norm) drift = std::max(drift, std::abs(n - 1.0));
    j["norm_drift"] = drift;
    return j;
  }

  json analyse(const FotocAnalysis& a, const std::string& key) {
    Table t = time_table();
    json j = json::object();
    std::vector<double> leak;
    j["fit_policy"] = fit_to_json(a.fit);
    j["delta_phi"] = a.delta_phi;
    for (Mode m : a.generators) {
      const std::string name = std::string("G_") + to_string(m);
      json g = json::object();
      std::optional<TimeSeries> fitted;
      if (a.variance) {
        const TimeSeries& v = variance_series(m);
        t.add(name, v.real_values());
        t.add(name + "/G(0)", normalized(v).real_values());
        fitted = v;
        if (leak.empty()) leak = v.leakage;
      }
      if (a.echo) {
        const OperatorMatrix gen = quadrature(basis_, m);
        TimeSeries e;
        e.label = name + "_echo";
        e.times = times_;
        e.values.resize(times_.size());
        e.leakage.resize(times_.size());
        propagate([&](std::size_t i, const Eigen::VectorXcd& psi) {
          e.values[i] = echo_deficit(gen.entries, psi, a.delta_phi) / (a.delta_phi * a.delta_phi);
          e.leakage[i] = leakage(basis_, psi);
        });
        note_leakage(e.leakage);
        t.add(name + "_echo", e.real_values());
        if (!fitted) fitted = e;
        if (leak.empty()) leak = e.leakage;
      }
      const std::vector<double> gv = fitted->real_values();
      const double g0 = gv.front();
      const double gmax = *std::max_element(gv.begin(), gv.end());
      g["G0"] = g0;
      g["G_max"] = gmax;
      g["growth_factor"] = gmax / g0;
      g["fit"] = fit_json(fit_lyapunov(*fitted, a.fit));
      j[name] = g;
    }
    t.add("leakage", leak);
    write_table(key, t, {"fit_policy " + fit_to_json(a.fit).dump()});
    return j;
  }

  json analyse(const ThermalizationAnalysis& a, const std::string& key) {
    const SpectralDecomposition& spec = spectrum();
    const OperatorMatrix op = observable(a.observable, basis_);
    const ThermalizationReport r = thermalization_report(spec, h_, psi0_, op, a.delta_e_grid, a.rel_tol);

    std::vector<double> values(times_.size()), leak(times_.size());
    propagate([&](std::size_t i, const Eigen::VectorXcd& psi) {
      values[i] = op.expectation(psi).real();
      leak[i] = leakage(basis_, psi);
    });
    note_leakage(leak);
    Table series = time_table();
    series.add(a.observable, values);
    series.add("leakage", leak);
    write_table(key + "_series", series);

    Table scan;
    std::vector<double> de, count, avg;
    for (const auto& row : r.shell_scan.rows) {
      de.push_back(row.delta_e);
      count.push_back(static_cast<double>(row.count));
      avg.push_back(row.average.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    scan.add("delta_e[energy]", de);
    scan.add("count", count);
    scan.add("micro_average", avg);
    write_table(key + "_shells", scan);

    // Time-averaged leakage: diagonal-ensemble expectation of the boundary projector.
    const double leak_diag = diagonal_average(spec, psi0_, boundary_projector(basis_));
    leakage_max_ = std::max(leakage_max_, leak_diag);

    const std::size_t half = values.size() / 2;
    double late_mean = 0.0, late_var = 0.0;
    for (std::size_t i = half; i < values.size(); ++i) late_mean += values[i];
    late_mean /= static_cast<double>(values.size() - half);
    for (std::size_t i = half; i < values.size(); ++i) late_var += (values[i] - late_mean) * (values[i] - late_mean);
    late_var /= static_cast<double>(values.size() - half);

    json j{{"observable", a.observable},
           {"e0", r.e0},
           {"diag_avg", r.diag_avg},
           {"micro_avg", r.micro_avg},
           {"micro_count", r.micro_count},
           {"micro_delta_e", r.micro_delta_e},
           {"relative_difference", std::abs(r.diag_avg - r.micro_avg) / std::abs(r.micro_avg)},
           {"plateau_begin_delta_e", r.shell_scan.rows[*r.shell_scan.plateau_begin].delta_e},
           {"plateau_end_delta_e", r.shell_scan.rows[*r.shell_scan.plateau_end].delta_e},
           {"plateau_span", r.shell_scan.plateau_span()},
           {"fluctuation", r.fluctuation},
           {"d_eff", r.d_eff},
           {"late_time_mean", late_mean},
           {"late_time_std", std::sqrt(late_var)},
           {"leakage_diagonal_ensemble", leak_diag},
           {"settle_fraction", a.settle_fraction}};
    const auto t_th = settle_time(times_, values, r.diag_avg, a.settle_fraction);
    if (t_th) {
      j["thermalization_time"] = *t_th;
      if (mapping_) j["thermalization_time_us"] = mapping_->physical_time_us(*t_th);
    } else {
      j["thermalization_time"] = nullptr;
      warn(a.observable + " did not settle within the time grid", false);
    }
    return j;
  }

  json analyse(const SemiclassicalAnalysis& a, const std::string& key) {
    const StabilityScanRow origin = stability_point(s_.model);
    json j{{"origin", stability_json(origin.report)},
           {"jacobian_fd_error", origin.jacobian_fd_error},
           {"g_c_a", critical_coupling(s_.model, Mode::a)},
           {"g_c_b", critical_coupling(s_.model, Mode::b)}};
    try {
      const NormalPhaseMatrix np = normal_phase_matrix(s_.model);
      json ev = json::array();
      for (int k = 0; k < 3; ++k) ev.push_back(cplx_json(np.eigenvalues(k)));
      j["normal_phase"] = {{"stable", np.stable}, {"in_validity_region", np.in_validity_region}, {"eigenvalues", ev}};
    } catch (const NumericalError& e) {
      j["normal_phase"] = {{"error", e.what()}};
    }
    if (s_.model.omega_a == s_.model.omega_b) {
      const MeanFieldSolution mf = order_parameters(s_.model);
      j["mean_field"] = {{"phase", to_string(mf.phase)},
                         {"density_a", mf.density_a},
                         {"density_b", mf.density_b},
                         {"s_z", mf.spin_z},
                         {"alpha_a", mf.alpha_a},
                         {"alpha_b", mf.alpha_b},
                         {"alpha_c", mf.alpha_c}};
    }
    const auto scan_table = [&](const std::vector<StabilityScanRow>& rows, const std::string& name) {
      Table t;
      std::vector<std::vector<double>> cols(6 + 12);
      for (const auto& row : rows) {
        cols[0].push_back(row.g_a);
        cols[1].push_back(row.g_b);
        cols[2].push_back(row.report.lambda_cl);
        cols[3].push_back(row.report.max_real_part);
        cols[4].push_back(static_cast<double>(static_cast<int>(row.report.classification)));
        cols[5].push_back(row.jacobian_fd_error);
        for (int k = 0; k < 6; ++k) {
          cols[6 + 2 * k].push_back(row.report.eigenvalues[k].real());
          cols[7 + 2 * k].push_back(row.report.eigenvalues[k].imag());
        }
      }
      const char* names[] = {"g_a", "g_b", "lambda_cl", "max_real_part", "class", "jacobian_fd_error"};
      for (int k = 0; k < 6; ++k) t.add(names[k], cols[k]);
      for (int k = 0; k < 6; ++k) {
        t.add("mu" + std::to_string(k) + "_re", cols[6 + 2 * k]);
        t.add("mu" + std::to_string(k) + "_im", cols[7 + 2 * k]);
      }
      write_table(name, t, {"class 0=stable-center 1=unstable-real-saddle 2=complex-quartet"});
      double worst = 0.0;
      for (const auto& row : rows) worst = std::max(worst, row.jacobian_fd_error);
      return worst;
    };
    if (!a.g_b_grid.empty())
      j["g_b_scan_max_fd_error"] = scan_table(stability_scan(s_.model, a.g_b_grid, s_.model.g_a), key + "_g_b_scan");
    if (!a.equal_grid.empty())
      j["equal_scan_max_fd_error"] = scan_table(stability_scan_equal(s_.model, a.equal_grid), key + "_equal_scan");
    return j;
  }

  json analyse(const CompareAnalysis& a, const std::string&) {
    const TimeSeries& v = variance_series(a.generator);
    const LyapunovFit fit = fit_lyapunov(v, a.fit);
    const QuantumClassicalComparison c = compare_quantum_classical(s_.model, fit, a.tolerance);
    json j{{"generator", to_string(a.generator)},
           {"lambda_cl", c.lambda_cl},
           {"lambda_q", c.lambda_q},
           {"fit", fit_json(fit)},
           {"flag", c.flag},
           {"tolerance", a.tolerance},
           {"classification", to_string(c.stability.classification)}};
    if (c.ratio) {
      j["ratio"] = *c.ratio;
      j["ratio_uncertainty"] = c.ratio_uncertainty;
    } else {
      j["ratio"] = nullptr;
    }
    return j;
  }

  const Scenario& s_;
  const RunOptions& opt_;
  BasisSpec basis_;
  OperatorMatrix h_;
  StateVector psi0_;
  std::vector<double> times_;
  double tol_;
  json scenario_json_;
  std::optional<IonTrapMapping> mapping_;
  std::optional<SpectralDecomposition> spec_;
  std::map<Mode, TimeSeries> variance_cache_;
  std::string propagator_used_;
  double leakage_max_ = 0.0;
  RunResult result_;
};

/// Numeric leaves of a JSON tree as dotted keys, in document order.
inline void flatten_numbers(const json& j, const std::string& prefix, std::vector<std::pair<std::string, double>>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten_numbers(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_number()) {
    out.emplace_back(prefix, j.get<double>());
  } else if (j.is_boolean()) {
    out.emplace_back(prefix, j.get<bool>() ? 1.0 : 0.0);
  }
}

}  // namespace detail

inline RunResult run(const Scenario& scenario, const RunOptions& options = {}) {
  if (scenario.sweep) throw ValidationError("scenario declares a sweep; use sweep() or the sweep subcommand");
  detail::Run r(scenario, options);
  return r.execute();
}

struct SweepResult {
  std::vector<RunResult> points;
  json summary;
  int status = kExitOk;
  std::string directory;
};

/// Runs every sweep point into <out>/point_NNN and writes <out>/sweep.csv with
/// one row per point (axis value, then every scalar result).
inline SweepResult sweep(const Scenario& scenario, const RunOptions& options = {}) {
  if (!scenario.sweep) throw ValidationError("scenario has no sweep block");
  const SweepSpec& sw = *scenario.sweep;
  const std::size_t n = sw.values.size();
  std::vector<Scenario> points;
  for (std::size_t i = 0; i < n; ++i) points.push_back(sweep_point(scenario, i));

  SweepResult out;
  out.directory = options.out_dir.value_or(scenario.output_directory);
  out.points.resize(n);
  // Points run concurrently; each point's own sampling stays serial.
  detail::parallel_for(n, options.workers, [&](std::size_t i) {
    RunOptions po = options;
    po.workers = 1;
    char name[32];
    std::snprintf(name, sizeof name, "point_%03zu", i);
    po.out_dir = (std::filesystem::path(out.directory) / name).string();
    out.points[i] = run(points[i], po);
  });

  std::vector<std::string> keys;
  std::vector<std::map<std::string, double>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<std::string, double>> flat;
    detail::flatten_numbers(out.points[i].summary["results"], "", flat);
    flat.emplace_back("leakage_max", out.points[i].summary["leakage_max"].get<double>());
    for (const auto& [k, v] : flat) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
      rows[i][k] = v;
    }
    out.status = std::max(out.status, out.points[i].status);
  }
  detail::Table t;
  t.add(sw.axis, sw.values);
  for (const auto& [path, values] : sw.linked) t.add(path, values);
  for (const auto& k : keys) {
    std::vector<double> col(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i)
      if (auto it = rows[i].find(k); it != rows[i].end()) col[i] = it->second;
    t.add(k, col);
  }
  const json resolved = to_json(scenario);
  json points_json = json::array();
  for (std::size_t i = 0; i < n; ++i)
    points_json.push_back({{"value", sw.values[i]},
                           {"directory", out.points[i].directory},
                           {"status", out.points[i].summary["status"]}});
  out.summary = {{"scenario", resolved}, {"points", points_json}, {"status", out.status == kExitOk ? "ok" : "numerical-warning"}};
  if (options.write_files) {
    detail::write_atomically(std::filesystem::path(out.directory) / "sweep.csv",
                             t.render({"scenario " + resolved.dump()}));
    detail::write_atomically(std::filesystem::path(out.directory) / "summary.json", out.summary.dump(2) + "\n");
  }
  return out;
}

}  // namespace tmd
