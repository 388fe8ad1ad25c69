#include "spincool/cooling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "spincool/dynamics.hpp"
#include "spincool/text.hpp"

namespace spincool::cooling {

namespace {

using text::ParseError;

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

// Coupling path from reset to computation: direct (via = -1) or through a
// single intermediate, picking the lowest-index intermediate for
// determinism.
int find_via(const SpinSystem& system, int reset, int computation) {
  if (system.j_hz(reset, computation) != 0.0) return -1;
  for (int m = 0; m < system.size(); ++m) {
    if (m == reset || m == computation) continue;
    if (system.j_hz(reset, m) != 0.0 && system.j_hz(m, computation) != 0.0) return m;
  }
  fail("no coupling path from '" + system.nucleus(reset).label + "' to '" +
       system.nucleus(computation).label + "'");
}

}  // namespace

double t1_ratio(double t1_c_s, double t1_r_s) {
  if (!(t1_c_s > 0.0) || !(t1_r_s > 0.0)) fail("lifetimes must be positive");
  return t1_c_s / t1_r_s;
}

double spin_temperature(double factor, double t_equilibrium_k) {
  if (!(factor > 0.0)) fail("cooling factor must be positive");
  if (!(t_equilibrium_k > 0.0)) fail("equilibrium temperature must be positive");
  return t_equilibrium_k / factor;
}

double ac_ideal_limit(int n_computation, double pt_factor) {
  if (n_computation < 1) fail("need at least one computation spin");
  return std::ldexp(pt_factor, n_computation - 1);
}

SpinState selective_reset(const SpinState& state, const SpinSystem& system,
                          const std::string& computation, const std::string& reset,
                          const sequences::DelayPlan& plan, double delay_s) {
  core::validate_state(state, system.dim());
  int c = system.index_of(computation);
  int r = system.index_of(reset);
  if (c == r) fail("computation and reset spins must differ");
  if (delay_s < 0.0) fail("reset delay must be non-negative");

  int via = find_via(system, r, c);
  sequences::SequenceProgram transfer =
      via < 0 ? sequences::refocused_inept(system, sequences::TargetSelector::of_labels({reset}),
                                           computation, plan, true)
              : sequences::relayed_inept(system, reset, system.nucleus(via).label, computation,
                                         plan);

  // The transfer itself is unitary; relaxation acts during the delay.
  sequences::ExecOptions unitary;
  unitary.evolve.relaxation_enabled = false;
  SpinState out = sequences::run_program(system, transfer, state, unitary).final_state;
  dynamics::evolve_delay(out, system, dynamics::Delay{delay_s, true, std::nullopt});
  return out;
}

SpinState three_bit_compression(const SpinState& state, const SpinSystem& system,
                                const std::array<std::string, 3>& labels, int pump_index) {
  core::validate_state(state, system.dim());
  if (pump_index < 0 || pump_index > 2) fail("pump index must be 0, 1, or 2");
  std::array<int, 3> idx{};
  for (int i = 0; i < 3; ++i) idx[i] = system.index_of(labels[i]);
  if (idx[0] == idx[1] || idx[0] == idx[2] || idx[1] == idx[2]) {
    fail("compression needs three distinct spins");
  }

  // Group-bit order: pump first, then the other two in the given order.
  std::array<int, 3> ordered{idx[pump_index], 0, 0};
  for (int i = 0, k = 1; i < 3; ++i) {
    if (i != pump_index) ordered[k++] = idx[i];
  }
  const int dim = system.dim();
  auto group_of = [&](int r) {
    return (system.bit_of(r, ordered[0]) << 2) | (system.bit_of(r, ordered[1]) << 1) |
           system.bit_of(r, ordered[2]);
  };

  std::array<double, 8> pop{};
  for (int r = 0; r < dim; ++r) pop[group_of(r)] += state.deviation(r, r).real();

  // Rank groups by population, largest first, stable on ties; group src[k]
  // moves to slot k (slots 0..3 are the pump's "up" half).
  std::array<int, 8> src{};
  std::iota(src.begin(), src.end(), 0);
  std::stable_sort(src.begin(), src.end(), [&](int a, int b) { return pop[a] > pop[b]; });
  std::array<int, 8> dest{};
  for (int k = 0; k < 8; ++k) dest[src[k]] = k;

  unsigned trio_mask =
      system.mask_of(ordered[0]) | system.mask_of(ordered[1]) | system.mask_of(ordered[2]);
  std::vector<int> map(dim);
  for (int r = 0; r < dim; ++r) {
    int slot = dest[group_of(r)];
    unsigned out = static_cast<unsigned>(r) & ~trio_mask;
    if (slot & 4) out |= system.mask_of(ordered[0]);
    if (slot & 2) out |= system.mask_of(ordered[1]);
    if (slot & 1) out |= system.mask_of(ordered[2]);
    map[r] = static_cast<int>(out);
  }

  SpinState result = state;
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      result.deviation(map[r], map[c]) = state.deviation(r, c);
    }
  }
  return result;
}

namespace {

sequences::DelayPlan plan_for_reset(const SpinSystem& system, const ResetSpec& step) {
  int c = system.index_of(step.computation);
  int r = system.index_of(step.reset);
  if (c == r) fail("computation and reset spins must differ");
  int via = find_via(system, r, c);
  double j_first = via < 0 ? system.j_hz(r, c) : system.j_hz(r, via);
  double j_second = via < 0 ? j_first : system.j_hz(via, c);
  return sequences::compute_delays(std::abs(j_first), std::abs(j_second), 1, 0.0);
}

double vn_entropy(const SpinState& state, double eps0) {
  const auto dim = state.deviation.rows();
  Eigen::MatrixXcd rho =
      (Eigen::MatrixXcd::Identity(dim, dim) + eps0 * state.deviation) / static_cast<double>(dim);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (double lambda : es.eigenvalues()) {
    if (lambda > 0.0) s -= lambda * std::log(lambda);
  }
  return s;
}

}  // namespace

CoolingReport run_ac(const SpinSystem& system, const Schedule& schedule, int rounds) {
  if (schedule.empty()) fail("schedule must contain at least one step");
  if (rounds < 1) fail("round count must be at least 1");

  SpinState state = core::thermal_state(system);
  const SpinState initial = state;
  const Eigen::VectorXd equilibrium = core::polarizations(system, initial);

  CoolingReport report;
  report.trajectory.reserve(static_cast<std::size_t>(rounds));
  for (int round = 0; round < rounds; ++round) {
    for (const ScheduleStep& step : schedule) {
      if (const auto* reset = std::get_if<ResetSpec>(&step)) {
        state = selective_reset(state, system, reset->computation, reset->reset,
                                plan_for_reset(system, *reset), reset->delay_s);
      } else {
        const auto& comp = std::get<CompressSpec>(step);
        state = three_bit_compression(state, system, comp.labels, comp.pump_index);
      }
    }
    report.trajectory.push_back(
        core::polarizations(system, state).cwiseQuotient(equilibrium));
  }

  report.factors = report.trajectory.back();
  ShannonCheck check = shannon_bound_check(initial, state, system);
  report.entropy_before = check.entropy_before;
  report.entropy_after = check.entropy_after;
  report.bypassed_shannon = check.bypassed;
  report.spin_temperatures.resize(system.size());
  for (int i = 0; i < system.size(); ++i) {
    double f = report.factors(i);
    report.spin_temperatures(i) =
        f > 0.0 ? system.temperature_k() / f : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

ShannonCheck shannon_bound_check(const SpinState& before, const SpinState& after,
                                 const SpinSystem& system, double eps0) {
  core::validate_state(before, system.dim());
  core::validate_state(after, system.dim());
  if (!(eps0 > 0.0)) fail("polarization scale must be positive");

  ShannonCheck out;
  out.entropy_before = core::polarizations(system, before).squaredNorm();
  out.entropy_after = core::polarizations(system, after).squaredNorm();
  out.vn_entropy_before = vn_entropy(before, eps0);
  out.vn_entropy_after = vn_entropy(after, eps0);
  out.bypassed = out.entropy_after > out.entropy_before;
  return out;
}

namespace {

struct Token {
  std::string text;
  int col = 0;
};

struct Line {
  int number = 0;
  std::vector<Token> tokens;
};

std::vector<Line> tokenize_schedule(const std::string& body) {
  std::vector<Line> lines;
  std::istringstream in(body);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    Line line;
    line.number = number;
    std::size_t i = 0;
    while (i < raw.size()) {
      if (std::isspace(static_cast<unsigned char>(raw[i]))) {
        ++i;
        continue;
      }
      if (raw[i] == '#') break;
      std::size_t start = i;
      while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
      line.tokens.push_back(Token{raw.substr(start, i - start), static_cast<int>(start) + 1});
    }
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

// Parses steps until the end of input (depth 0) or a closing brace.
void parse_block(const std::vector<Line>& lines, std::size_t& pos, int depth, Schedule& out) {
  while (pos < lines.size()) {
    const Line& line = lines[pos];
    const std::string& kw = line.tokens[0].text;
    if (kw == "}") {
      if (line.tokens.size() != 1) {
        throw ParseError("unexpected token after '}'", line.number, line.tokens[1].col);
      }
      if (depth == 0) throw ParseError("'}' without a matching REPEAT", line.number, 1);
      ++pos;
      return;
    }
    if (kw == "RESET") {
      if (line.tokens.size() != 4) {
        throw ParseError("RESET takes computation, reset, and a delay in seconds", line.number,
                         line.tokens[0].col);
      }
      ResetSpec step;
      step.computation = line.tokens[1].text;
      step.reset = line.tokens[2].text;
      if (step.computation == step.reset) {
        throw ParseError("computation and reset spins must differ", line.number,
                         line.tokens[2].col);
      }
      if (!text::parse_double(line.tokens[3].text, step.delay_s) || step.delay_s < 0.0) {
        throw ParseError("expected a non-negative delay in seconds, got '" +
                             line.tokens[3].text + "'",
                         line.number, line.tokens[3].col);
      }
      out.push_back(std::move(step));
      ++pos;
    } else if (kw == "COMPRESS") {
      if (line.tokens.size() != 6 || line.tokens[4].text != "PUMP") {
        throw ParseError("COMPRESS takes three spins then PUMP <one of them>", line.number,
                         line.tokens[0].col);
      }
      CompressSpec step;
      for (int i = 0; i < 3; ++i) step.labels[i] = line.tokens[i + 1].text;
      const std::string& pump = line.tokens[5].text;
      auto it = std::find(step.labels.begin(), step.labels.end(), pump);
      if (it == step.labels.end()) {
        throw ParseError("pump spin '" + pump + "' is not one of the compressed spins",
                         line.number, line.tokens[5].col);
      }
      step.pump_index = static_cast<int>(it - step.labels.begin());
      out.push_back(std::move(step));
      ++pos;
    } else if (kw == "REPEAT") {
      if (line.tokens.size() != 3 || line.tokens[2].text != "{") {
        throw ParseError("REPEAT takes a count followed by '{'", line.number, line.tokens[0].col);
      }
      long n = 0;
      if (!text::parse_int(line.tokens[1].text, n) || n < 1) {
        throw ParseError("expected a positive repeat count, got '" + line.tokens[1].text + "'",
                         line.number, line.tokens[1].col);
      }
      ++pos;
      Schedule block;
      parse_block(lines, pos, depth + 1, block);
      for (long i = 0; i < n; ++i) out.insert(out.end(), block.begin(), block.end());
    } else {
      throw ParseError("unknown directive '" + kw + "'", line.number, line.tokens[0].col);
    }
  }
  if (depth != 0) throw ParseError("REPEAT block never closed", lines.empty() ? 1 : lines.back().number, 1);
}

}  // namespace

Schedule parse_schedule(const std::string& body) {
  std::vector<Line> lines = tokenize_schedule(body);
  Schedule schedule;
  std::size_t pos = 0;
  parse_block(lines, pos, 0, schedule);
  return schedule;
}

std::string serialize_schedule(const Schedule& schedule) {
  std::string out;
  for (const ScheduleStep& step : schedule) {
    if (const auto* reset = std::get_if<ResetSpec>(&step)) {
      out += "RESET " + reset->computation + " " + reset->reset + " " +
             text::format_double(reset->delay_s) + "\n";
    } else {
      const auto& comp = std::get<CompressSpec>(step);
      out += "COMPRESS " + comp.labels[0] + " " + comp.labels[1] + " " + comp.labels[2] +
             " PUMP " + comp.labels[comp.pump_index] + "\n";
    }
  }
  return out;
}

}  // namespace spincool::cooling
