#pragma once

// Molecule and experiment descriptions as human-editable text.
//
// Both formats are line-oriented brace-block files: '#' starts a comment
// anywhere, blank lines are ignored, sections nest with `keyword name {`
// ... `}`.  Parsers reject unknown keys with line/column positions, and
// parse(serialize(x)) == x holds bit-exactly for every valid structure.
//
// The builtin library ships four sample molecules (a two-proton glycine
// backbone and an undoped/doped/warmed glutamate series) and six named
// pulse programs.  Every builtin lifetime carries a provenance note saying
// how the number was obtained.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "spincool/core.hpp"
#include "spincool/sequences.hpp"

namespace spincool::config {

// A spin table plus couplings and temperature.  `notes` holds free-form
// provenance text keyed by "molecule", "spin <label>", or "j <a> <b>"
// (labels in file order).  Notes may not contain '#' or newlines.
struct MoleculeSpec {
  std::string name;
  double temperature_k = 297.0;
  std::vector<core::SpinDef> spins;
  std::vector<core::JCoupling> couplings;
  std::map<std::string, std::string> notes;
  bool operator==(const MoleculeSpec&) const = default;
};

// Throws text::ParseError (with position) on malformed input, unknown or
// duplicate keys, duplicate spin labels, or couplings that name absent
// spins.  Throws std::invalid_argument on non-physical values the core
// layer would reject anyway (checked here for better messages).
MoleculeSpec parse_molecule(const std::string& body);

// Canonical text form; parse_molecule(serialize_molecule(m)) == m.
// Throws std::invalid_argument if a note contains '#' or a newline.
std::string serialize_molecule(const MoleculeSpec& molecule);

// Instantiates the spin system (this is where core validation runs).
core::SpinSystem build_system(const MoleculeSpec& molecule);

// One runnable experiment: a molecule reference (builtin name or path to a
// .mol file), a sequence (builtin name with parameter overrides, or a path
// to a .seq file), the artifact set to write, and model overrides.
// Parameter values are stored as canonicalized tokens: anything that parses
// as a number is reformatted to the shortest round-trip form, so "3.00" and
// "3" produce identical specs; non-numeric tokens (spin labels) pass
// through verbatim.
struct ExperimentSpec {
  std::string name;
  std::string molecule;
  std::string sequence;                        // builtin name; empty when file-based
  std::string sequence_file;                   // .seq path; empty when builtin
  std::map<std::string, std::string> params;   // sequence parameters
  std::set<std::string> outputs;               // subset of {"report","spectra","trajectory"}
  double gd_mm = 0.0;                          // relaxation-agent concentration (mM)
  double gamma_rel_h1 = 0.0;                   // proton gamma ratio override (0 = default)
  double step_s = 0.0;                         // integrator step override (0 = automatic)
  double noise_pct = 0.0;                      // recovery-curve noise, percent of equilibrium
  bool operator==(const ExperimentSpec&) const = default;
};

ExperimentSpec parse_experiment(const std::string& body);
std::string serialize_experiment(const ExperimentSpec& spec);

// 64-bit FNV-1a over the canonical serialization with provenance notes
// stripped: comment/whitespace/formatting edits never move the hash, any
// physically meaningful field change does.  Note text is documentation,
// not physics, so it does not participate.
std::uint64_t spec_hash(const MoleculeSpec& molecule);
std::uint64_t spec_hash(const ExperimentSpec& spec);
std::string hash_string(std::uint64_t hash);  // 16 lowercase hex digits

// Builtin sample library: glycine, glutamate, glutamate_gd,
// glutamate_gd_310.  Returned by reference to a process-lifetime catalog.
const std::vector<MoleculeSpec>& builtin_molecules();

// nullptr when the name is not a builtin.
const MoleculeSpec* find_builtin_molecule(const std::string& name);

// inept, hcc, hcc_wait, potent, potent_plus, inversion_recovery.
const std::vector<std::string>& builtin_sequence_names();

// Delay plan from sequence parameters with molecule-derived defaults:
// j_ch_hz defaults to the one-bond proton-carbon coupling (error when the
// molecule carries several distinct magnitudes), j_cc_hz to the
// carbon-carbon coupling (falls back to j_ch_hz when the molecule has
// none), k to the number of protons coupled to the protonated carbon, and
// t_s to 1 ms.  Throws std::invalid_argument on unusable values.
sequences::DelayPlan resolve_plan(const core::SpinSystem& system,
                                  const std::map<std::string, std::string>& params);

// Builds a builtin pulse program.  Accepted parameters beyond the plan
// keys (j_ch_hz, j_cc_hz, k, t_s): `target` for inept (defaults to the
// protonated carbon), `d3_s` for hcc_wait (required), `d2_s` and `d3_s`
// for potent/potent_plus (required).  Unknown names and unknown parameter
// keys throw std::invalid_argument; inversion_recovery is a sweep, not a
// program, and is rejected here (see resolve_recovery).
sequences::SequenceProgram instantiate_sequence(const std::string& name,
                                                const core::SpinSystem& system,
                                                const std::map<std::string, std::string>& params);

// Recovery-sweep design for the inversion_recovery builtin: `spin` is
// required; tau_count defaults to 17 samples, tau_min_s/tau_max_s to
// 0.03 and 6 times the swept spin's longitudinal lifetime (log-spaced
// points across that window keep a 1%-noise fit inside a 3% error budget).
struct RecoveryDesign {
  std::string spin;
  int tau_count = 17;
  double tau_min_s = 0.0;
  double tau_max_s = 0.0;
  bool operator==(const RecoveryDesign&) const = default;
};

RecoveryDesign resolve_recovery(const core::SpinSystem& system,
                                const std::map<std::string, std::string>& params);

}  // namespace spincool::config
