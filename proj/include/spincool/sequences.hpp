#pragma once

// Pulse programs as data: an event IR with named delay parameters, builders
// for the protocol family (refocused INEPT, HCC relay, HCC+WAIT, POTENT and
// its + variant, inversion recovery), a text serialization with bit-exact
// round-trip, and the executor that drives dynamics.
//
// Phase conventions baked into the builders (verified against the
// product-operator algebra and pinned by the test oracles):
//   excitation 90deg @ 0 (x) on the source,
//   echo inversions 180deg @ 0 on source and target,
//   transfer 90deg @ 90 (y) on source plus 90deg @ 0 (x) on the target,
//   storage 90deg @ 270 on the target.
// At exact delays this stores +gamma(source) on the target, leaves the
// source with zero longitudinal polarization, and maps the target's own
// starting polarization into non-observable terms.
//
// Selective 180deg pulses model their finite duration t as two coherent
// (relaxation-free) t/2 windows around the instantaneous rotation; this is
// what makes the -t/2 shortening in the delay formulas land the refocusing
// optimum where the formulas say it is.  Selective 90deg pulses carry no
// window: the formulas only compensate for the inversions.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spincool/core.hpp"
#include "spincool/dynamics.hpp"

namespace spincool::sequences {

using core::SpinState;
using core::SpinSystem;
using core::VectorXd;

struct TargetSelector {
  enum class Kind { Labels, SpeciesAll, All };
  Kind kind = Kind::All;
  std::vector<std::string> labels;          // Kind::Labels
  core::Species species = core::Species::H1;  // Kind::SpeciesAll

  static TargetSelector all();
  static TargetSelector of_species(core::Species s);
  static TargetSelector of_labels(std::vector<std::string> labels);

  // Resolved spin indices, in system order.  Throws std::invalid_argument on
  // unknown labels or an empty resolution.
  std::vector<int> resolve(const SpinSystem& system) const;

  std::string to_token() const;  // "ALL", species name, or comma-joined labels
  bool operator==(const TargetSelector&) const = default;
};

struct PulseEvent {
  TargetSelector targets;
  double angle_deg = 0.0;
  double phase_deg = 0.0;
  bool selective = false;
  bool operator==(const PulseEvent&) const = default;
};

struct DelayEvent {
  std::string param;     // named duration; empty means `seconds` is literal
  double seconds = 0.0;  // used when param is empty
  std::optional<core::Species> decouple;
  bool relaxation = true;
  bool operator==(const DelayEvent&) const = default;
};

struct AcquireEvent {
  core::Species species = core::Species::C13;
  bool operator==(const AcquireEvent&) const = default;
};

using Event = std::variant<PulseEvent, DelayEvent, AcquireEvent>;

struct SequenceProgram {
  std::vector<Event> events;
  std::map<std::string, double> params;  // named durations in seconds
  bool operator==(const SequenceProgram&) const = default;
};

struct DelayPlan {
  double j_ch_hz = 0.0;
  double j_cc_hz = 0.0;
  int k = 1;           // equivalent protons on the protonated carbon
  double t_s = 0.0;    // selective-pulse duration
  double d4_s = 0.0;   // 1/(4 j_ch)
  double d5_s = 0.0;   // d4/k - t/2
  double d7_s = 0.0;   // 1/(4 j_cc)
  double d14_s = 0.0;  // d4 - t/2
};

// Throws std::invalid_argument on non-positive couplings, k outside {1, 2},
// negative t, or a derived delay that is not positive.
DelayPlan compute_delays(double j_ch_hz, double j_cc_hz, int k, double t_s);

enum class RefocusDelay { D5, D14 };

// Standard refocused INEPT from a proton-like source to a single target of a
// different species.  selective_on_target makes every target pulse
// selective (inversions acquire duration windows of plan.t_s).
// Throws std::invalid_argument when the source resolves empty or spans
// species, the target is unknown, shares the source species, or has zero J
// to every source spin.
SequenceProgram refocused_inept(const SpinSystem& system, const TargetSelector& source,
                                const std::string& target, const DelayPlan& plan,
                                bool selective_on_target,
                                RefocusDelay refocus = RefocusDelay::D5);

// H -> C2 -> C1 relay: INEPT(H, C2) then INEPT(C2, C1) with selective carbon
// pulses and proton decoupling during the carbon-carbon leg.  Requires
// labels C1 and C2, at least one proton coupled to C2, and J(C1,C2) != 0.
SequenceProgram hcc_relay(const SpinSystem& system, const DelayPlan& plan);

// Two chained transfers from one named source spin through an intermediate:
// source -> via uses the d4/d5 echoes, via -> target uses d7 echoes with the
// source species decoupled when it differs from both ends.  All pulses are
// selective (single-spin addressing).  Same coupling requirements as the
// individual legs.
SequenceProgram relayed_inept(const SpinSystem& system, const std::string& source,
                              const std::string& via, const std::string& target,
                              const DelayPlan& plan);

// Relay followed by a repolarization delay d3 (relaxation on).
SequenceProgram hcc_wait(const SpinSystem& system, const DelayPlan& plan, double d3_s);

// Relay; delay d2; optional selective 90 on C2 (the + variant); second
// proton->C2 INEPT refocused with d14; delay d3.
SequenceProgram potent(const SpinSystem& system, const DelayPlan& plan, double d2_s,
                       double d3_s, bool plus_variant);

struct D7Candidate {
  double j_hz = 0.0;
  double d7_s = 0.0;
  double c1_polarization = 0.0;
};

struct D7Scan {
  double best_d7_s = 0.0;
  double best_j_hz = 0.0;
  std::vector<D7Candidate> candidates;
};

// Scans candidate J(C1,C2) values on the grid j_cc +/- m*step (|m*step| <=
// halfwidth), simulating the relay per candidate with relaxation on, and
// returns the scan; ties resolve to the smallest d7.
D7Scan scan_d7(const SpinSystem& system, const DelayPlan& plan, double halfwidth_hz,
               double step_hz);

// The d7 that maximizes C1 polarization after the relay.
double optimize_d7(const SpinSystem& system, const DelayPlan& plan, double halfwidth_hz,
                   double step_hz);

// 180 - tau - read on one spin from thermal start, tau log-spaced.
std::vector<std::pair<double, double>> inversion_recovery(const SpinSystem& system,
                                                          const std::string& spin,
                                                          int tau_count, double tau_min_s,
                                                          double tau_max_s);

struct TrajectoryPoint {
  std::size_t event_index = 0;
  std::string label;
  VectorXd polarizations;
};

struct Acquisition {
  core::Species species = core::Species::C13;
  SpinState state;  // snapshot at the acquire marker
};

struct ExecOptions {
  dynamics::EvolveOptions evolve;
  bool record_trajectory = false;
  dynamics::PropagatorCache* cache = nullptr;  // optional shared cache
};

struct ExecResult {
  SpinState final_state;
  std::optional<Acquisition> acquisition;
  std::vector<TrajectoryPoint> trajectory;
};

// Executes the program from `initial`.  Throws std::invalid_argument on
// unbound delay parameters, unresolvable pulse targets, negative delays, or
// more than one acquire marker.
ExecResult run_program(const SpinSystem& system, const SequenceProgram& program,
                       const SpinState& initial, const ExecOptions& options = {});

// Text form, one event per line:
//   SET <name> <seconds>
//   PULSE <targets> <angle_deg> <phase_deg> [SELECTIVE]
//   DELAY <name|seconds> [DECOUPLE <species>] [NORELAX]
//   ACQUIRE <species>
// '#' starts a comment.  parse(serialize(p)) == p, bit-exact.
SequenceProgram parse_sequence(const std::string& body);
std::string serialize_sequence(const SequenceProgram& program);

}  // namespace spincool::sequences
