#include "spincool/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "spincool/cooling.hpp"
#include "spincool/dynamics.hpp"
#include "spincool/text.hpp"

namespace spincool::runner {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  fs::path p(path);
  if (base_dir.empty() || p.is_absolute()) return path;
  return (fs::path(base_dir) / p).string();
}

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_artifact(const fs::path& path, const std::string& content,
                    std::vector<std::string>& files) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
  out.close();
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  files.push_back(path.string());
}

std::string stamp(const std::string& kind, std::uint64_t hash) {
  return "# spincool " + kind + "\n# spec-hash " + config::hash_string(hash) + "\n";
}

// The doped-t1 summary appended to report.txt when the relaxation-agent
// override is active.  Concentrations other than the 0.05 mM calibration
// point are linear-model extrapolations and say so.
std::string gd_report_lines(const core::SpinSystem& system, double gd_mm) {
  std::string out;
  out += "gd_mm " + text::format_double(gd_mm) + "\n";
  out += "relaxivity_source fitted from the undoped and 0.05 mM glutamate samples\n";
  const bool calibration = gd_mm == 0.05;
  for (int i = 0; i < system.size(); ++i) {
    out += "t1_with_agent " + system.nucleus(i).label + " " +
           text::format_double(system.t1_s(i)) + " " +
           (calibration ? "calibration-concentration" : "derived") + "\n";
  }
  return out;
}

struct Resolved {
  config::MoleculeSpec molecule;
  core::SpinSystem system;
  std::uint64_t hash = 0;  // experiment + physical molecule content
};

Resolved resolve(const config::ExperimentSpec& spec, const RunOptions& options) {
  config::MoleculeSpec molecule;
  if (const config::MoleculeSpec* builtin = config::find_builtin_molecule(spec.molecule)) {
    molecule = *builtin;
  } else {
    const std::string path = resolve_path(options.base_dir, spec.molecule);
    try {
      molecule = config::parse_molecule(read_file(path));
    } catch (const text::ParseError& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
  }
  if (spec.gamma_rel_h1 > 0.0) {
    for (core::SpinDef& s : molecule.spins) {
      if (s.species == core::Species::H1) s.gamma_rel = spec.gamma_rel_h1;
    }
  }
  core::SpinSystem system = config::build_system(molecule);
  if (spec.gd_mm > 0.0) {
    // The linear relaxivity model is calibrated on the glutamate pair, so
    // the override only means something for that spin set.
    const config::MoleculeSpec* base = config::find_builtin_molecule("glutamate");
    const config::MoleculeSpec* doped = config::find_builtin_molecule("glutamate_gd");
    bool compatible = molecule.spins.size() == base->spins.size();
    for (std::size_t i = 0; compatible && i < molecule.spins.size(); ++i) {
      compatible = molecule.spins[i].label == base->spins[i].label &&
                   molecule.spins[i].species == base->spins[i].species;
    }
    if (!compatible) {
      fail("gd_mm override needs the glutamate spin set; molecule '" + molecule.name +
           "' does not match");
    }
    analysis::RelaxivityModel model = analysis::relaxivity_from_pair(
        config::build_system(*base), config::build_system(*doped), 0.05);
    system = analysis::apply_relaxivity(system, model, spec.gd_mm);
  }
  std::uint64_t hash = fnv1a64(config::serialize_experiment(spec), 14695981039346656037ull);
  hash = fnv1a64(config::hash_string(config::spec_hash(molecule)), hash);
  return Resolved{std::move(molecule), std::move(system), hash};
}

std::string report_txt_header(const config::ExperimentSpec& spec, const Resolved& r) {
  std::string out = stamp("report", r.hash);
  out += "experiment " + spec.name + "\n";
  out += "molecule " + r.molecule.name + "\n";
  out += "sequence " + (spec.sequence.empty() ? spec.sequence_file : spec.sequence) + "\n";
  return out;
}

RunResult run_recovery(const config::ExperimentSpec& spec, const RunOptions& options,
                       const Resolved& r) {
  if (spec.outputs.count("spectra") || spec.outputs.count("trajectory")) {
    fail("inversion_recovery writes a curve and a report; spectra/trajectory do not apply");
  }
  config::RecoveryDesign design = config::resolve_recovery(r.system, spec.params);
  std::vector<std::pair<double, double>> curve = sequences::inversion_recovery(
      r.system, design.spin, design.tau_count, design.tau_min_s, design.tau_max_s);
  if (spec.noise_pct > 0.0) {
    const int idx = r.system.index_of(design.spin);
    const double sigma = spec.noise_pct / 100.0 * std::abs(r.system.nucleus(idx).gamma_rel);
    std::mt19937 rng(options.seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& [tau, y] : curve) y += noise(rng);
  }
  RunResult result;
  result.hash = r.hash;
  result.fit = analysis::fit_t1(curve);

  fs::create_directories(options.out_dir);
  const fs::path out_dir(options.out_dir);
  std::string csv = stamp("recovery curve", r.hash);
  csv += "tau_s,polarization\n";
  for (const auto& [tau, y] : curve) {
    csv += text::format_double(tau) + "," + text::format_double(y) + "\n";
  }
  write_artifact(out_dir / "curve.csv", csv, result.files);

  if (spec.outputs.count("report")) {
    std::string txt = report_txt_header(spec, r);
    txt += "recovery_spin " + design.spin + "\n";
    txt += "tau_count " + std::to_string(design.tau_count) + "\n";
    txt += "tau_min_s " + text::format_double(design.tau_min_s) + "\n";
    txt += "tau_max_s " + text::format_double(design.tau_max_s) + "\n";
    if (spec.noise_pct > 0.0) {
      txt += "noise_pct " + text::format_double(spec.noise_pct) + "\n";
      txt += "seed " + std::to_string(options.seed) + "\n";
    }
    txt += "fit_t1_s " + text::format_double(result.fit->t1_s) + "\n";
    txt += "fit_amplitude " + text::format_double(result.fit->amplitude) + "\n";
    txt += "fit_equilibrium " + text::format_double(result.fit->equilibrium) + "\n";
    txt += "fit_residual " + text::format_double(result.fit->residual) + "\n";
    txt += std::string("fit_converged ") + (result.fit->converged ? "true" : "false") + "\n";
    txt += "fit_iterations " + std::to_string(result.fit->iterations) + "\n";
    if (spec.gd_mm > 0.0) txt += gd_report_lines(r.system, spec.gd_mm);
    write_artifact(out_dir / "report.txt", txt, result.files);
  }
  return result;
}

RunResult run_program_experiment(const config::ExperimentSpec& spec, const RunOptions& options,
                                 const Resolved& r) {
  if (spec.noise_pct > 0.0) {
    fail("noise_pct applies to inversion_recovery experiments only");
  }
  sequences::SequenceProgram program;
  std::uint64_t hash = r.hash;
  if (!spec.sequence.empty()) {
    program = config::instantiate_sequence(spec.sequence, r.system, spec.params);
  } else {
    const std::string path = resolve_path(options.base_dir, spec.sequence_file);
    try {
      program = sequences::parse_sequence(read_file(path));
    } catch (const text::ParseError& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
    hash = fnv1a64(sequences::serialize_sequence(program), hash);
  }

  core::SpinState initial = core::thermal_state(r.system);
  sequences::ExecOptions exec;
  exec.evolve.step_override_s =
      options.step_override_s > 0.0 ? options.step_override_s : spec.step_s;
  exec.record_trajectory = spec.outputs.count("trajectory") != 0;
  sequences::ExecResult run = sequences::run_program(r.system, program, initial, exec);

  RunResult result;
  result.hash = hash;
  const core::VectorXd eq_factors = analysis::enhancement_factors(run.final_state, r.system);
  cooling::ShannonCheck entropy = cooling::shannon_bound_check(initial, run.final_state, r.system);
  result.report.factors = eq_factors;
  result.report.entropy_before = entropy.entropy_before;
  result.report.entropy_after = entropy.entropy_after;
  result.report.bypassed_shannon = entropy.bypassed;
  result.report.spin_temperatures.resize(r.system.size());
  for (int i = 0; i < r.system.size(); ++i) {
    result.report.spin_temperatures(i) =
        eq_factors(i) > 0.0 ? cooling::spin_temperature(eq_factors(i), r.system.temperature_k())
                            : std::numeric_limits<double>::quiet_NaN();
  }

  fs::create_directories(options.out_dir);
  const fs::path out_dir(options.out_dir);
  if (spec.outputs.count("report")) {
    std::string csv = stamp("report", hash);
    csv += "spin,factor,temperature_K\n";
    for (int i = 0; i < r.system.size(); ++i) {
      csv += r.system.nucleus(i).label + "," + text::format_double(result.report.factors(i)) +
             "," + text::format_double(result.report.spin_temperatures(i)) + "\n";
    }
    write_artifact(out_dir / "report.csv", csv, result.files);

    std::string txt = report_txt_header(spec, r);
    txt += "entropy_proxy_before " + text::format_double(entropy.entropy_before) + "\n";
    txt += "entropy_proxy_after " + text::format_double(entropy.entropy_after) + "\n";
    txt += std::string("bypassed_shannon ") + (entropy.bypassed ? "true" : "false") + "\n";
    if (spec.gd_mm > 0.0) txt += gd_report_lines(r.system, spec.gd_mm);
    write_artifact(out_dir / "report.txt", txt, result.files);
  }
  if (spec.outputs.count("spectra")) {
    // Spectra read the acquisition snapshot when the program set one, the
    // final state otherwise.
    const core::SpinState& at =
        run.acquisition.has_value() ? run.acquisition->state : run.final_state;
    for (core::Species species : {core::Species::C13, core::Species::H1}) {
      if (r.system.spins_of(species).empty()) continue;
      std::vector<analysis::SpectrumLine> lines = analysis::stick_spectrum(at, r.system, species);
      std::sort(lines.begin(), lines.end(),
                [](const analysis::SpectrumLine& a, const analysis::SpectrumLine& b) {
                  if (a.frequency_hz != b.frequency_hz) return a.frequency_hz < b.frequency_hz;
                  return a.spin < b.spin;
                });
      std::string csv = stamp("spectrum " + core::to_string(species), hash);
      csv += "frequency_hz,amplitude\n";
      for (const analysis::SpectrumLine& line : lines) {
        csv += text::format_double(line.frequency_hz) + "," +
               text::format_double(line.amplitude) + "\n";
      }
      write_artifact(out_dir / ("spectrum_" + core::to_string(species) + ".csv"), csv,
                     result.files);
    }
  }
  if (spec.outputs.count("trajectory")) {
    std::string csv = stamp("trajectory", hash);
    csv += "event_index,label";
    for (int i = 0; i < r.system.size(); ++i) csv += "," + r.system.nucleus(i).label;
    csv += "\n";
    for (const sequences::TrajectoryPoint& point : run.trajectory) {
      csv += std::to_string(point.event_index) + "," + point.label;
      for (int i = 0; i < point.polarizations.size(); ++i) {
        csv += "," + text::format_double(point.polarizations(i));
      }
      csv += "\n";
    }
    write_artifact(out_dir / "trajectory.csv", csv, result.files);
  }
  return result;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw std::runtime_error("cannot read file: " + path);
  return buffer.str();
}

RunResult run_experiment(const config::ExperimentSpec& spec, const RunOptions& options) {
  Resolved r = resolve(spec, options);
  if (spec.sequence == "inversion_recovery") {
    return run_recovery(spec, options, r);
  }
  return run_program_experiment(spec, options, r);
}

core::SpinSystem resolve_system(const config::ExperimentSpec& spec, const RunOptions& options) {
  return resolve(spec, options).system;
}

ScanResult scan_d7_experiment(const config::ExperimentSpec& spec, const RunOptions& options,
                              double halfwidth_hz, double step_hz) {
  Resolved r = resolve(spec, options);
  sequences::DelayPlan plan = config::resolve_plan(r.system, spec.params);
  ScanResult result;
  result.hash = r.hash;
  result.scan = sequences::scan_d7(r.system, plan, halfwidth_hz, step_hz);
  fs::create_directories(options.out_dir);
  std::string csv = stamp("d7 scan", r.hash);
  csv += "j_hz,d7_s,c1_polarization\n";
  for (const sequences::D7Candidate& candidate : result.scan.candidates) {
    csv += text::format_double(candidate.j_hz) + "," + text::format_double(candidate.d7_s) +
           "," + text::format_double(candidate.c1_polarization) + "\n";
  }
  write_artifact(fs::path(options.out_dir) / "scan.csv", csv, result.files);
  return result;
}

RunResult run_experiment_file(const std::string& path, const RunOptions& options) {
  std::string body;
  try {
    body = read_file(path);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("cannot open experiment file: " + path);
  }
  config::ExperimentSpec spec;
  try {
    spec = config::parse_experiment(body);
  } catch (const text::ParseError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  RunOptions local = options;
  if (local.base_dir.empty()) {
    local.base_dir = fs::path(path).parent_path().string();
  }
  return run_experiment(spec, local);
}

}  // namespace spincool::runner
