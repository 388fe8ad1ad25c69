#include "spincool/sequences.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "spincool/text.hpp"

namespace spincool::sequences {

namespace {

using text::ParseError;

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

double deg2rad(double deg) { return deg * kPi / 180.0; }

}  // namespace

TargetSelector TargetSelector::all() { return TargetSelector{Kind::All, {}, core::Species::H1}; }

TargetSelector TargetSelector::of_species(core::Species s) {
  return TargetSelector{Kind::SpeciesAll, {}, s};
}

TargetSelector TargetSelector::of_labels(std::vector<std::string> labels) {
  return TargetSelector{Kind::Labels, std::move(labels), core::Species::H1};
}

std::vector<int> TargetSelector::resolve(const SpinSystem& system) const {
  std::vector<int> out;
  switch (kind) {
    case Kind::All:
      for (int i = 0; i < system.size(); ++i) out.push_back(i);
      break;
    case Kind::SpeciesAll:
      out = system.spins_of(species);
      if (out.empty()) fail("no " + core::to_string(species) + " spins in the system");
      break;
    case Kind::Labels: {
      std::set<int> seen;
      for (const std::string& label : labels) {
        int idx = system.index_of(label);
        if (!seen.insert(idx).second) fail("duplicate pulse target '" + label + "'");
      }
      out.assign(seen.begin(), seen.end());
      break;
    }
  }
  if (out.empty()) fail("pulse target selector resolves to no spins");
  return out;
}

std::string TargetSelector::to_token() const {
  switch (kind) {
    case Kind::All:
      return "ALL";
    case Kind::SpeciesAll:
      return core::to_string(species);
    case Kind::Labels: {
      std::string out;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) out += ',';
        out += labels[i];
      }
      return out;
    }
  }
  fail("unreachable selector kind");
}

DelayPlan compute_delays(double j_ch_hz, double j_cc_hz, int k, double t_s) {
  if (!(j_ch_hz > 0.0)) fail("j_ch must be positive");
  if (!(j_cc_hz > 0.0)) fail("j_cc must be positive");
  if (k != 1 && k != 2) fail("k must be 1 or 2 equivalent protons");
  if (t_s < 0.0 || !std::isfinite(t_s)) fail("selective-pulse duration must be >= 0");
  DelayPlan plan;
  plan.j_ch_hz = j_ch_hz;
  plan.j_cc_hz = j_cc_hz;
  plan.k = k;
  plan.t_s = t_s;
  plan.d4_s = 1.0 / (4.0 * j_ch_hz);
  plan.d7_s = 1.0 / (4.0 * j_cc_hz);
  plan.d5_s = plan.d4_s / k - t_s / 2.0;
  plan.d14_s = plan.d4_s - t_s / 2.0;
  if (!(plan.d5_s > 0.0)) fail("d5 = d4/k - t/2 is not positive: t too long for j_ch");
  if (!(plan.d14_s > 0.0)) fail("d14 = d4 - t/2 is not positive: t too long for j_ch");
  return plan;
}

namespace {

struct IneptLeg {
  TargetSelector source;
  bool selective_source = false;
  std::string target;
  bool selective_target = false;
  std::string defocus_param;
  std::string refocus_param;
  std::optional<core::Species> decouple;
  bool require_distinct_species = true;
};

// Spin echo: [half][window][180 pair][window][half].  The coherent windows
// model the duration of selective inversions and appear only when one of the
// echo pulses is selective.
void append_echo(SequenceProgram& prog, const std::string& half_param,
                 std::vector<PulseEvent> mid, double window_s,
                 std::optional<core::Species> decouple) {
  bool any_selective = false;
  for (const PulseEvent& p : mid) any_selective |= p.selective;
  const bool windows = any_selective && window_s > 0.0;
  prog.events.push_back(DelayEvent{half_param, 0.0, decouple, true});
  if (windows) prog.events.push_back(DelayEvent{"", window_s / 2.0, decouple, false});
  for (PulseEvent& p : mid) prog.events.push_back(std::move(p));
  if (windows) prog.events.push_back(DelayEvent{"", window_s / 2.0, decouple, false});
  prog.events.push_back(DelayEvent{half_param, 0.0, decouple, true});
}

void append_inept(SequenceProgram& prog, const SpinSystem& system, const IneptLeg& leg,
                  const DelayPlan& plan, double defocus_s, double refocus_s) {
  std::vector<int> source_spins = leg.source.resolve(system);
  core::Species source_species = system.nucleus(source_spins.front()).species;
  for (int s : source_spins) {
    if (system.nucleus(s).species != source_species) {
      fail("INEPT source spins must share a species");
    }
  }
  int target = system.index_of(leg.target);
  if (leg.require_distinct_species && system.nucleus(target).species == source_species) {
    fail("INEPT target '" + leg.target + "' must be a different species than the source");
  }
  bool coupled = false;
  for (int s : source_spins) {
    if (s == target) fail("INEPT target '" + leg.target + "' is part of the source");
    coupled |= system.j_hz(s, target) != 0.0;
  }
  if (!coupled) fail("no J coupling between the INEPT source and target '" + leg.target + "'");
  if (defocus_s < 0.0 || refocus_s < 0.0) fail("INEPT echo delays must be non-negative");

  prog.params[leg.defocus_param] = defocus_s;
  prog.params[leg.refocus_param] = refocus_s;

  TargetSelector tgt = TargetSelector::of_labels({leg.target});

  // Excitation.
  prog.events.push_back(PulseEvent{leg.source, 90.0, 0.0, leg.selective_source});
  // Defocusing echo: antiphase builds up under the source-target J.
  append_echo(prog, leg.defocus_param,
              {PulseEvent{leg.source, 180.0, 0.0, leg.selective_source},
               PulseEvent{tgt, 180.0, 0.0, leg.selective_target}},
              plan.t_s, leg.decouple);
  // Transfer pulses.
  prog.events.push_back(PulseEvent{leg.source, 90.0, 90.0, leg.selective_source});
  prog.events.push_back(PulseEvent{tgt, 90.0, 0.0, leg.selective_target});
  // Refocusing echo: target antiphase becomes observable in-phase.
  append_echo(prog, leg.refocus_param,
              {PulseEvent{leg.source, 180.0, 0.0, leg.selective_source},
               PulseEvent{tgt, 180.0, 0.0, leg.selective_target}},
              plan.t_s, leg.decouple);
  // Storage: put the transferred component along +z.
  prog.events.push_back(PulseEvent{tgt, 90.0, 270.0, leg.selective_target});
}

}  // namespace

SequenceProgram refocused_inept(const SpinSystem& system, const TargetSelector& source,
                                const std::string& target, const DelayPlan& plan,
                                bool selective_on_target, RefocusDelay refocus) {
  SequenceProgram prog;
  prog.params["t"] = plan.t_s;
  IneptLeg leg;
  leg.source = source;
  leg.target = target;
  leg.selective_target = selective_on_target;
  leg.defocus_param = "d4";
  leg.refocus_param = refocus == RefocusDelay::D5 ? "d5" : "d14";
  double refocus_s = refocus == RefocusDelay::D5 ? plan.d5_s : plan.d14_s;
  append_inept(prog, system, leg, plan, plan.d4_s, refocus_s);
  return prog;
}

SequenceProgram hcc_relay(const SpinSystem& system, const DelayPlan& plan) {
  if (!system.find("C1") || !system.find("C2")) {
    fail("the relay needs spins labeled C1 and C2");
  }
  SequenceProgram prog;
  prog.params["t"] = plan.t_s;

  IneptLeg leg1;
  leg1.source = TargetSelector::of_species(core::Species::H1);
  leg1.target = "C2";
  leg1.selective_target = true;
  leg1.defocus_param = "d4";
  leg1.refocus_param = "d5";
  append_inept(prog, system, leg1, plan, plan.d4_s, plan.d5_s);

  IneptLeg leg2;
  leg2.source = TargetSelector::of_labels({"C2"});
  leg2.selective_source = true;
  leg2.target = "C1";
  leg2.selective_target = true;
  leg2.defocus_param = "d7";
  leg2.refocus_param = "d7";
  leg2.decouple = core::Species::H1;
  leg2.require_distinct_species = false;  // carbon-to-carbon transfer
  append_inept(prog, system, leg2, plan, plan.d7_s, plan.d7_s);

  return prog;
}

SequenceProgram relayed_inept(const SpinSystem& system, const std::string& source,
                              const std::string& via, const std::string& target,
                              const DelayPlan& plan) {
  SequenceProgram prog;
  prog.params["t"] = plan.t_s;

  IneptLeg leg1;
  leg1.source = TargetSelector::of_labels({source});
  leg1.selective_source = true;
  leg1.target = via;
  leg1.selective_target = true;
  leg1.defocus_param = "d4";
  leg1.refocus_param = "d5";
  leg1.require_distinct_species = false;
  append_inept(prog, system, leg1, plan, plan.d4_s, plan.d5_s);

  core::Species src_species = system.nucleus(system.index_of(source)).species;
  core::Species via_species = system.nucleus(system.index_of(via)).species;
  core::Species tgt_species = system.nucleus(system.index_of(target)).species;

  IneptLeg leg2;
  leg2.source = TargetSelector::of_labels({via});
  leg2.selective_source = true;
  leg2.target = target;
  leg2.selective_target = true;
  leg2.defocus_param = "d7";
  leg2.refocus_param = "d7";
  if (src_species != via_species && src_species != tgt_species) {
    leg2.decouple = src_species;
  }
  leg2.require_distinct_species = false;
  append_inept(prog, system, leg2, plan, plan.d7_s, plan.d7_s);
  return prog;
}

SequenceProgram hcc_wait(const SpinSystem& system, const DelayPlan& plan, double d3_s) {
  if (d3_s < 0.0) fail("d3 must be non-negative");
  SequenceProgram prog = hcc_relay(system, plan);
  prog.params["d3"] = d3_s;
  prog.events.push_back(DelayEvent{"d3", 0.0, std::nullopt, true});
  return prog;
}

SequenceProgram potent(const SpinSystem& system, const DelayPlan& plan, double d2_s,
                       double d3_s, bool plus_variant) {
  if (d2_s < 0.0 || d3_s < 0.0) fail("POTENT delays must be non-negative");
  SequenceProgram prog = hcc_relay(system, plan);
  prog.params["d2"] = d2_s;
  prog.params["d3"] = d3_s;
  prog.events.push_back(DelayEvent{"d2", 0.0, std::nullopt, true});
  if (plus_variant) {
    // Converts leftover C2 terms into non-observable coherences so the
    // second transfer lands on uniform multiplet lines.
    prog.events.push_back(PulseEvent{TargetSelector::of_labels({"C2"}), 90.0, 0.0, true});
  }
  IneptLeg pt2;
  pt2.source = TargetSelector::of_species(core::Species::H1);
  pt2.target = "C2";
  pt2.selective_target = true;
  pt2.defocus_param = "d4";
  pt2.refocus_param = "d14";
  append_inept(prog, system, pt2, plan, plan.d4_s, plan.d14_s);
  prog.events.push_back(DelayEvent{"d3", 0.0, std::nullopt, true});
  return prog;
}

D7Scan scan_d7(const SpinSystem& system, const DelayPlan& plan, double halfwidth_hz,
               double step_hz) {
  if (!(step_hz > 0.0)) fail("d7 scan step must be positive");
  if (halfwidth_hz < 0.0) fail("d7 scan halfwidth must be non-negative");
  const int half_points = static_cast<int>(std::floor(halfwidth_hz / step_hz + 1e-9));

  D7Scan scan;
  dynamics::PropagatorCache cache;
  const int c1 = system.index_of("C1");
  bool have_best = false;
  double best_pol = 0.0;
  for (int m = -half_points; m <= half_points; ++m) {
    double j = plan.j_cc_hz + m * step_hz;
    if (!(j > 0.0)) continue;
    DelayPlan candidate = plan;
    candidate.j_cc_hz = j;
    candidate.d7_s = 1.0 / (4.0 * j);
    SequenceProgram prog = hcc_relay(system, candidate);
    ExecOptions options;
    options.cache = &cache;
    ExecResult res = run_program(system, prog, core::thermal_state(system), options);
    double pol = core::polarizations(system, res.final_state)(c1);
    scan.candidates.push_back({j, candidate.d7_s, pol});
    if (!have_best || pol > best_pol ||
        (pol == best_pol && candidate.d7_s < scan.best_d7_s)) {
      scan.best_d7_s = candidate.d7_s;
      scan.best_j_hz = j;
      best_pol = pol;
      have_best = true;
    }
  }
  if (scan.candidates.empty()) fail("d7 scan range contains no valid J candidates");
  return scan;
}

double optimize_d7(const SpinSystem& system, const DelayPlan& plan, double halfwidth_hz,
                   double step_hz) {
  return scan_d7(system, plan, halfwidth_hz, step_hz).best_d7_s;
}

std::vector<std::pair<double, double>> inversion_recovery(const SpinSystem& system,
                                                          const std::string& spin,
                                                          int tau_count, double tau_min_s,
                                                          double tau_max_s) {
  int index = system.index_of(spin);
  if (tau_count < 3) fail("inversion recovery needs at least 3 tau values");
  if (!(tau_min_s > 0.0) || !(tau_min_s < tau_max_s)) {
    fail("inversion recovery needs 0 < tau_min < tau_max");
  }
  std::vector<std::pair<double, double>> curve;
  curve.reserve(static_cast<std::size_t>(tau_count));
  const double ratio = tau_max_s / tau_min_s;
  for (int i = 0; i < tau_count; ++i) {
    double frac = static_cast<double>(i) / static_cast<double>(tau_count - 1);
    double tau = tau_min_s * std::pow(ratio, frac);
    SpinState state = core::thermal_state(system);
    dynamics::apply_pulse(state, system, dynamics::Pulse{{index}, kPi, 0.0, false});
    dynamics::evolve_delay(state, system, dynamics::Delay{tau, true, std::nullopt});
    curve.emplace_back(tau, core::polarizations(system, state)(index));
  }
  return curve;
}

namespace {

std::string describe(const Event& event) {
  if (const auto* p = std::get_if<PulseEvent>(&event)) {
    std::ostringstream os;
    os << "pulse " << p->targets.to_token() << " " << p->angle_deg << "@" << p->phase_deg;
    if (p->selective) os << " sel";
    return os.str();
  }
  if (const auto* d = std::get_if<DelayEvent>(&event)) {
    std::string out = "delay " + (d->param.empty() ? text::format_double(d->seconds) : d->param);
    if (d->decouple) out += " dec-" + core::to_string(*d->decouple);
    if (!d->relaxation) out += " norelax";
    return out;
  }
  return "acquire " + core::to_string(std::get<AcquireEvent>(event).species);
}

}  // namespace

ExecResult run_program(const SpinSystem& system, const SequenceProgram& program,
                       const SpinState& initial, const ExecOptions& options) {
  core::validate_state(initial, system.dim());
  int acquires = 0;
  for (const Event& e : program.events) acquires += std::holds_alternative<AcquireEvent>(e);
  if (acquires > 1) fail("a program may contain at most one acquire marker");

  ExecResult result;
  result.final_state = initial;
  SpinState& state = result.final_state;

  dynamics::PropagatorCache local_cache;
  dynamics::PropagatorCache* cache = options.cache ? options.cache : &local_cache;

  if (options.record_trajectory) {
    result.trajectory.push_back({0, "start", core::polarizations(system, state)});
  }

  for (std::size_t i = 0; i < program.events.size(); ++i) {
    const Event& event = program.events[i];
    if (const auto* p = std::get_if<PulseEvent>(&event)) {
      dynamics::Pulse pulse{p->targets.resolve(system), deg2rad(p->angle_deg),
                            deg2rad(p->phase_deg), p->selective};
      dynamics::apply_pulse(state, system, pulse);
    } else if (const auto* d = std::get_if<DelayEvent>(&event)) {
      double seconds = d->seconds;
      if (!d->param.empty()) {
        auto it = program.params.find(d->param);
        if (it == program.params.end()) fail("unbound delay parameter '" + d->param + "'");
        seconds = it->second;
      }
      dynamics::evolve_delay(state, system, dynamics::Delay{seconds, d->relaxation, d->decouple},
                             options.evolve, cache);
    } else {
      result.acquisition = Acquisition{std::get<AcquireEvent>(event).species, state};
    }
    if (options.record_trajectory) {
      result.trajectory.push_back({i + 1, describe(event), core::polarizations(system, state)});
    }
  }
  return result;
}

namespace {

struct Token {
  std::string text;
  int col = 0;  // 1-based
};

std::vector<Token> tokenize_line(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    if (line[i] == '#') break;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.push_back(Token{line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

double parse_number(const Token& token, int line_no, const char* what) {
  double value = 0.0;
  if (!text::parse_double(token.text, value)) {
    throw ParseError(std::string("expected ") + what + ", got '" + token.text + "'", line_no,
                     token.col);
  }
  return value;
}

TargetSelector parse_targets(const Token& token, int line_no) {
  if (token.text == "ALL") return TargetSelector::all();
  if (token.text == "H1") return TargetSelector::of_species(core::Species::H1);
  if (token.text == "C13") return TargetSelector::of_species(core::Species::C13);
  std::vector<std::string> labels;
  std::size_t start = 0;
  const std::string& t = token.text;
  while (start <= t.size()) {
    std::size_t comma = t.find(',', start);
    std::string label = t.substr(start, comma == std::string::npos ? comma : comma - start);
    if (label.empty()) {
      throw ParseError("empty spin label in pulse target list", line_no, token.col);
    }
    labels.push_back(std::move(label));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return TargetSelector::of_labels(std::move(labels));
}

core::Species parse_species(const Token& token, int line_no) {
  try {
    return core::species_from_string(token.text);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), line_no, token.col);
  }
}

}  // namespace

SequenceProgram parse_sequence(const std::string& body) {
  SequenceProgram prog;
  std::istringstream in(body);
  std::string line;
  int line_no = 0;
  int acquires = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<Token> toks = tokenize_line(line);
    if (toks.empty()) continue;
    const std::string& kw = toks[0].text;

    if (kw == "SET") {
      if (toks.size() != 3) {
        throw ParseError("SET takes a parameter name and a value", line_no, toks[0].col);
      }
      double ignored = 0.0;
      if (text::parse_double(toks[1].text, ignored)) {
        throw ParseError("parameter name '" + toks[1].text + "' would be ambiguous with a "
                         "literal duration", line_no, toks[1].col);
      }
      if (prog.params.count(toks[1].text)) {
        throw ParseError("parameter '" + toks[1].text + "' set twice", line_no, toks[1].col);
      }
      prog.params[toks[1].text] = parse_number(toks[2], line_no, "a duration in seconds");
    } else if (kw == "PULSE") {
      if (toks.size() < 4 || toks.size() > 5) {
        throw ParseError("PULSE takes targets, angle, phase, and optional SELECTIVE", line_no,
                         toks[0].col);
      }
      PulseEvent p;
      p.targets = parse_targets(toks[1], line_no);
      p.angle_deg = parse_number(toks[2], line_no, "an angle in degrees");
      p.phase_deg = parse_number(toks[3], line_no, "a phase in degrees");
      if (toks.size() == 5) {
        if (toks[4].text != "SELECTIVE") {
          throw ParseError("unexpected token '" + toks[4].text + "'", line_no, toks[4].col);
        }
        p.selective = true;
      }
      prog.events.emplace_back(std::move(p));
    } else if (kw == "DELAY") {
      if (toks.size() < 2) {
        throw ParseError("DELAY takes a duration or parameter name", line_no, toks[0].col);
      }
      DelayEvent d;
      double literal = 0.0;
      if (text::parse_double(toks[1].text, literal)) {
        d.seconds = literal;
      } else {
        d.param = toks[1].text;
      }
      std::size_t i = 2;
      while (i < toks.size()) {
        if (toks[i].text == "DECOUPLE") {
          if (d.decouple) throw ParseError("DECOUPLE given twice", line_no, toks[i].col);
          if (i + 1 >= toks.size()) {
            throw ParseError("DECOUPLE needs a species", line_no, toks[i].col);
          }
          d.decouple = parse_species(toks[i + 1], line_no);
          i += 2;
        } else if (toks[i].text == "NORELAX") {
          if (!d.relaxation) throw ParseError("NORELAX given twice", line_no, toks[i].col);
          d.relaxation = false;
          ++i;
        } else {
          throw ParseError("unexpected token '" + toks[i].text + "'", line_no, toks[i].col);
        }
      }
      prog.events.emplace_back(std::move(d));
    } else if (kw == "ACQUIRE") {
      if (toks.size() != 2) throw ParseError("ACQUIRE takes a species", line_no, toks[0].col);
      if (++acquires > 1) {
        throw ParseError("a program may contain at most one ACQUIRE", line_no, toks[0].col);
      }
      prog.events.emplace_back(AcquireEvent{parse_species(toks[1], line_no)});
    } else {
      throw ParseError("unknown directive '" + kw + "'", line_no, toks[0].col);
    }
  }
  return prog;
}

std::string serialize_sequence(const SequenceProgram& program) {
  std::string out;
  for (const auto& [name, value] : program.params) {
    out += "SET " + name + " " + text::format_double(value) + "\n";
  }
  for (const Event& event : program.events) {
    if (const auto* p = std::get_if<PulseEvent>(&event)) {
      out += "PULSE " + p->targets.to_token() + " " + text::format_double(p->angle_deg) + " " +
             text::format_double(p->phase_deg);
      if (p->selective) out += " SELECTIVE";
    } else if (const auto* d = std::get_if<DelayEvent>(&event)) {
      out += "DELAY " + (d->param.empty() ? text::format_double(d->seconds) : d->param);
      if (d->decouple) out += " DECOUPLE " + core::to_string(*d->decouple);
      if (!d->relaxation) out += " NORELAX";
    } else {
      out += "ACQUIRE " + core::to_string(std::get<AcquireEvent>(event).species);
    }
    out += "\n";
  }
  return out;
}

}  // namespace spincool::sequences
