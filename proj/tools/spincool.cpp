// Command-line front end: run experiment files, fit recovery curves, scan
// the carbon-carbon refocusing delay, and list the builtin library.  All
// failures exit 1 with a single `error: ...` line on stderr.

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "spincool/analysis.hpp"
#include "spincool/config.hpp"
#include "spincool/runner.hpp"
#include "spincool/text.hpp"

namespace {

namespace fs = std::filesystem;
using spincool::text::format_double;

std::string describe(const spincool::runner::RunResult& result,
                     const spincool::config::ExperimentSpec& spec,
                     const spincool::core::SpinSystem& system) {
  std::ostringstream out;
  out << "run " << spec.name << "\n";
  out << "spec-hash " << spincool::config::hash_string(result.hash) << "\n";
  if (result.fit.has_value()) {
    out << "fit_t1_s " << format_double(result.fit->t1_s) << "\n";
    out << "fit_converged " << (result.fit->converged ? "true" : "false") << "\n";
  } else {
    for (int i = 0; i < system.size(); ++i) {
      out << "factor " << system.nucleus(i).label << " "
          << format_double(result.report.factors(i)) << "\n";
    }
    out << "bypassed_shannon " << (result.report.bypassed_shannon ? "true" : "false") << "\n";
  }
  for (const std::string& file : result.files) out << "wrote " << file << "\n";
  return out.str();
}

int do_run(const std::vector<std::string>& specs, const std::string& out_dir, unsigned seed,
           double step_s, int jobs) {
  spincool::runner::RunOptions base;
  base.seed = seed;
  base.step_override_s = step_s;
  std::vector<std::string> outputs(specs.size());
  std::vector<std::string> errors(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < specs.size(); i = next.fetch_add(1)) {
      try {
        spincool::runner::RunOptions options = base;
        // Several specs sharing one directory would clobber each other's
        // report.csv, so each gets a subdirectory named after its file.
        options.out_dir = specs.size() == 1
                              ? out_dir
                              : (fs::path(out_dir) / fs::path(specs[i]).stem()).string();
        spincool::config::ExperimentSpec spec =
            spincool::config::parse_experiment(spincool::runner::read_file(specs[i]));
        options.base_dir = fs::path(specs[i]).parent_path().string();
        spincool::core::SpinSystem system = spincool::runner::resolve_system(spec, options);
        spincool::runner::RunResult result = spincool::runner::run_experiment(spec, options);
        outputs[i] = describe(result, spec, system);
      } catch (const std::exception& e) {
        const std::string what = e.what();
        errors[i] = what.find(specs[i]) != std::string::npos ? what : specs[i] + ": " + what;
      }
    }
  };
  const int n_workers = std::min<std::size_t>(jobs, specs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  bool failed = false;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "error: " << errors[i] << "\n";
      failed = true;
    } else {
      std::cout << outputs[i];
    }
  }
  return failed ? 1 : 0;
}

int do_fit(const std::string& path) {
  std::string body = spincool::runner::read_file(path);
  std::vector<std::pair<double, double>> curve;
  std::istringstream in(body);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::size_t cut = line.find('#');
    if (cut != std::string::npos) line = line.substr(0, cut);
    std::string a, b;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      std::istringstream fields(line);
      fields >> a >> b;
    } else {
      a = line.substr(0, comma);
      b = line.substr(comma + 1);
    }
    auto strip = [](std::string& s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(0, 1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    };
    strip(a);
    strip(b);
    if (a.empty() && b.empty()) continue;
    double tau = 0.0, y = 0.0;
    if (!spincool::text::parse_double(a, tau) || !spincool::text::parse_double(b, y)) {
      if (curve.empty()) continue;  // header row
      throw std::invalid_argument(path + ": line " + std::to_string(number) +
                                  " is not a tau,polarization pair");
    }
    curve.emplace_back(tau, y);
  }
  spincool::analysis::T1Fit fit = spincool::analysis::fit_t1(curve);
  std::cout << "points " << curve.size() << "\n";
  std::cout << "t1_s " << format_double(fit.t1_s) << "\n";
  std::cout << "amplitude " << format_double(fit.amplitude) << "\n";
  std::cout << "equilibrium " << format_double(fit.equilibrium) << "\n";
  std::cout << "residual " << format_double(fit.residual) << "\n";
  std::cout << "converged " << (fit.converged ? "true" : "false") << "\n";
  std::cout << "iterations " << fit.iterations << "\n";
  return 0;
}

int do_scan(const std::string& spec_path, const std::string& out_dir, double halfwidth_hz,
            double grid_hz) {
  spincool::config::ExperimentSpec spec =
      spincool::config::parse_experiment(spincool::runner::read_file(spec_path));
  spincool::runner::RunOptions options;
  options.out_dir = out_dir;
  options.base_dir = fs::path(spec_path).parent_path().string();
  spincool::runner::ScanResult result =
      spincool::runner::scan_d7_experiment(spec, options, halfwidth_hz, grid_hz);
  std::cout << "spec-hash " << spincool::config::hash_string(result.hash) << "\n";
  std::cout << "candidates " << result.scan.candidates.size() << "\n";
  std::cout << "best_j_hz " << format_double(result.scan.best_j_hz) << "\n";
  std::cout << "best_d7_s " << format_double(result.scan.best_d7_s) << "\n";
  for (const std::string& file : result.files) std::cout << "wrote " << file << "\n";
  return 0;
}

int do_list() {
  std::size_t width = 0;
  for (const auto& m : spincool::config::builtin_molecules()) {
    width = std::max(width, m.name.size());
  }
  std::cout << "molecules:\n";
  for (const auto& m : spincool::config::builtin_molecules()) {
    std::cout << "  " << m.name << std::string(width - m.name.size() + 2, ' ')
              << m.spins.size() << " spins  " << format_double(m.temperature_k) << " K\n";
  }
  std::cout << "sequences:\n";
  for (const std::string& name : spincool::config::builtin_sequence_names()) {
    std::cout << "  " << name << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heat-bath cooling protocol laboratory"};
  app.require_subcommand(1);

  std::vector<std::string> specs;
  std::string out_dir = ".";
  unsigned seed = 0;
  double step_s = 0.0;
  int jobs = 1;
  CLI::App* run = app.add_subcommand("run", "execute experiment files");
  run->add_option("specs", specs, "experiment files")->required();
  run->add_option("--out", out_dir, "output directory (default: current)");
  run->add_option("--seed", seed, "noise realization for recovery curves");
  run->add_option("--step", step_s, "integrator step override in seconds")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--jobs", jobs, "worker threads when given several specs")
      ->check(CLI::Range(1, 64));

  std::string curve_path;
  CLI::App* fit = app.add_subcommand("fit", "fit a recovery curve CSV (tau_s,polarization)");
  fit->add_option("curve", curve_path, "curve file")->required();

  std::string scan_spec;
  std::string scan_out = ".";
  double halfwidth_hz = 3.0;
  double grid_hz = 0.25;
  CLI::App* scan =
      app.add_subcommand("scan-d7", "scan the carbon-carbon refocusing delay for a spec");
  scan->add_option("spec", scan_spec, "experiment file supplying molecule and plan")->required();
  scan->add_option("--out", scan_out, "output directory (default: current)");
  scan->add_option("--halfwidth-hz", halfwidth_hz, "scan halfwidth around the nominal coupling")
      ->check(CLI::PositiveNumber);
  scan->add_option("--grid-hz", grid_hz, "scan grid step")->check(CLI::PositiveNumber);

  CLI::App* list = app.add_subcommand("list", "builtin molecules and sequences");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(specs, out_dir, seed, step_s, jobs);
    if (fit->parsed()) return do_fit(curve_path);
    if (scan->parsed()) return do_scan(scan_spec, scan_out, halfwidth_hz, grid_hz);
    if (list->parsed()) return do_list();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
