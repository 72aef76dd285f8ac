// Command-line front end: scenario runs, sweeps and the ion-trap parameter map.

#include <CLI11.hpp>

#include <iostream>

#include "tmd/runner.hpp"
#include "tmd/runtime.hpp"

namespace {

struct Common {
  std::string scenario;
  std::string out;
  int workers = 1;
  double leakage_tol = 0.0;
  long long seed = 0;  // reserved: nothing stochastic yet
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--scenario", c.scenario, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory (overrides output.directory)");
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--leakage-tol", c.leakage_tol, "Leakage tolerance (overrides tolerances.leakage)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Reserved; there are no stochastic components");
}

tmd::RunOptions options_from(const Common& c) {
  tmd::RunOptions o;
  if (!c.out.empty()) o.out_dir = c.out;
  o.workers = c.workers;
  if (c.leakage_tol > 0.0) o.leakage_tolerance = c.leakage_tol;
  return o;
}

/// Subcommand name -> analysis type; a default analysis is added when the
/// scenario lists none of that type.
tmd::Analysis default_analysis(const std::string& type) {
  if (type == "spectrum") return tmd::SpectrumAnalysis{};
  if (type == "evolve") return tmd::EvolveAnalysis{};
  if (type == "fotoc") return tmd::FotocAnalysis{};
  if (type == "thermalization") return tmd::ThermalizationAnalysis{};
  if (type == "semiclassical") return tmd::SemiclassicalAnalysis{};
  return tmd::CompareAnalysis{};
}

int report(const tmd::RunResult& r) {
  std::cout << r.summary["results"].dump(2) << "\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "wrote " << r.directory << "\n";
  return r.status;
}

int run_subcommand(const std::string& type, const Common& c) {
  tmd::Scenario s = tmd::load_scenario(c.scenario);
  s.sweep.reset();
  tmd::RunOptions o = options_from(c);
  if (!type.empty()) {
    const bool present = std::any_of(s.analyses.begin(), s.analyses.end(),
                                     [&](const tmd::Analysis& a) { return tmd::analysis_name(a) == type; });
    if (!present) s.analyses.push_back(default_analysis(type));
    o.only = type;
  }
  return report(tmd::run(s, o));
}

}  // namespace

int main(int argc, char** argv) {
  tmd::ensure_working_lapack(argv);

  CLI::App app{"Two-mode Dicke model: exact dynamics, scrambling and thermalization"};
  app.require_subcommand(1);

  Common common;
  const std::vector<std::pair<std::string, std::string>> runs{
      {"run", ""},
      {"spectrum", "spectrum"},
      {"evolve", "evolve"},
      {"fotoc", "fotoc"},
      {"thermalize", "thermalization"},
      {"semiclassical", "semiclassical"},
      {"compare", "compare"}};
  std::map<CLI::App*, std::string> run_types;
  for (const auto& [name, type] : runs) {
    auto* cmd = app.add_subcommand(name, type.empty() ? "Run every analysis in the scenario"
                                                      : "Run the scenario's " + type + " analyses");
    add_common(cmd, common);
    run_types[cmd] = type;
  }

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the scenario's sweep block, one bundle per point");
  add_common(sweep_cmd, common);

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario and print its resolved form");
  validate_cmd->add_option("--scenario", validate_path, "Scenario file (JSON)")->required();

  tmd::IonTrapParams ion;
  std::string ion_scenario;
  double ion_time = -1.0;
  auto* ion_cmd = app.add_subcommand("ion-map", "Map trapped-ion parameters (kHz) to model parameters");
  ion_cmd->add_option("--scenario", ion_scenario, "Scenario file with an ion_trap block");
  ion_cmd->add_option("--eta-x", ion.eta_x, "Lamb-Dicke parameter, x mode");
  ion_cmd->add_option("--eta-y", ion.eta_y, "Lamb-Dicke parameter, y mode");
  ion_cmd->add_option("--rabi-x", ion.rabi_x_khz, "Peak Rabi frequency Omega_x/2pi [kHz]");
  ion_cmd->add_option("--rabi-y", ion.rabi_y_khz, "Peak Rabi frequency Omega_y/2pi [kHz]");
  ion_cmd->add_option("--delta-x", ion.delta_x_khz, "Detuning delta_x/2pi [kHz]");
  ion_cmd->add_option("--delta-y", ion.delta_y_khz, "Detuning delta_y/2pi [kHz]");
  ion_cmd->add_option("--spin-detuning", ion.spin_detuning_khz, "Spin detuning Delta/2pi [kHz]");
  ion_cmd->add_option("--n-ions", ion.n_ions, "Number of ions");
  ion_cmd->add_option("--time", ion_time, "Dimensionless time to convert to microseconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? tmd::kExitOk : tmd::kExitValidation;
  }

  try {
    for (const auto& [cmd, type] : run_types)
      if (cmd->parsed()) return run_subcommand(type, common);

    if (sweep_cmd->parsed()) {
      const tmd::Scenario s = tmd::load_scenario(common.scenario);
      const tmd::SweepResult r = tmd::sweep(s, options_from(common));
      std::cout << r.summary["points"].dump(2) << "\n";
      std::cerr << "wrote " << r.directory << "\n";
      return r.status;
    }

    if (validate_cmd->parsed()) {
      const tmd::Scenario s = tmd::load_scenario(validate_path);
      std::cout << tmd::to_json(s).dump(2) << "\n";
      return tmd::kExitOk;
    }

    if (ion_cmd->parsed()) {
      if (!ion_scenario.empty()) {
        const tmd::Scenario s = tmd::load_scenario(ion_scenario);
        if (!s.ion_trap) throw tmd::ValidationError("scenario has no ion_trap block");
        ion = *s.ion_trap;
      }
      const tmd::IonTrapMapping m = tmd::map_ion_trap(ion);
      tmd::json j{{"model",
                   {{"omega_a", m.params.omega_a},
                    {"omega_b", m.params.omega_b},
                    {"delta", m.params.delta},
                    {"g_a", m.params.g_a},
                    {"g_b", m.params.g_b},
                    {"n_spins", m.params.n_spins}}},
                  {"g_a_khz", m.g_a_khz},
                  {"g_b_khz", m.g_b_khz},
                  {"energy_unit_khz", m.energy_unit_khz},
                  {"time_unit_us", m.time_unit_us},
                  {"warnings", m.warnings}};
      if (ion_time >= 0.0) j["time_us"] = m.physical_time_us(ion_time);
      std::cout << j.dump(2) << "\n";
      return tmd::kExitOk;
    }
  } catch (const tmd::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return tmd::kExitValidation;
  } catch (const tmd::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return tmd::kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return tmd::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return tmd::kExitNumerical;
  }
  return tmd::kExitOk;
}
