#pragma once

// Executes an experiment end to end: resolve the molecule (builtin or
// file), apply the overrides, run the pulse program or recovery sweep from
// thermal equilibrium, and write the requested artifacts into an output
// directory.  Every artifact starts with a `# spec-hash` comment computed
// from the resolved physical content, and reruns of the same spec produce
// byte-identical files.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spincool/analysis.hpp"
#include "spincool/config.hpp"
#include "spincool/report.hpp"

namespace spincool::runner {

struct RunOptions {
  std::string out_dir = ".";
  std::string base_dir;            // resolves relative molecule/sequence paths
  unsigned seed = 0;               // noise realization for recovery curves
  double step_override_s = 0.0;    // beats the spec's step_s when positive
};

struct RunResult {
  CoolingReport report;                // program runs; default for sweeps
  std::optional<analysis::T1Fit> fit;  // recovery sweeps only
  std::vector<std::string> files;      // artifact paths, in write order
  std::uint64_t hash = 0;              // the hash stamped on every artifact
};

// Throws std::invalid_argument or std::runtime_error with a single-line
// message; file errors name the offending path.
RunResult run_experiment(const config::ExperimentSpec& spec, const RunOptions& options = {});

// The spin system an experiment would run on: builtin lookup or molecule
// file load, with the gamma and relaxation-agent overrides applied.
core::SpinSystem resolve_system(const config::ExperimentSpec& spec,
                                const RunOptions& options = {});

struct ScanResult {
  sequences::D7Scan scan;
  std::uint64_t hash = 0;
  std::vector<std::string> files;  // scan.csv
};

// Scans the carbon-carbon refocusing delay for the experiment's molecule
// and plan parameters (the spec's sequence itself is not executed) and
// writes scan.csv into the output directory.
ScanResult scan_d7_experiment(const config::ExperimentSpec& spec, const RunOptions& options,
                              double halfwidth_hz, double step_hz);

// Reads and parses `path`, then runs it with base_dir defaulted to the
// file's own directory so relative molecule/sequence references work.
RunResult run_experiment_file(const std::string& path, const RunOptions& options = {});

// Whole-file read; throws std::runtime_error naming the path on failure.
std::string read_file(const std::string& path);

}  // namespace spincool::runner
