#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "spincool/cooling.hpp"
#include "spincool/core.hpp"
#include "spincool/dynamics.hpp"
#include "spincool/sequences.hpp"
#include "spincool/text.hpp"

using namespace spincool;
using namespace spincool::cooling;
using core::SpinState;
using core::SpinSystem;
using core::Species;

namespace {

constexpr double kGammaH = core::kDefaultGammaRelH1;

// Three-spin chain for compression studies: two carbons sharing one proton.
SpinSystem trio(double t1_carbon_s) {
  std::vector<core::SpinDef> spins = {
      {"Ca", Species::C13, 120.0, t1_carbon_s, t1_carbon_s / 3.0, 0.0},
      {"Cb", Species::C13, -120.0, t1_carbon_s, t1_carbon_s / 3.0, 0.0},
      {"Hr", Species::H1, 0.0, 0.5, 0.5 / 3.0, 0.0},
  };
  std::vector<core::JCoupling> js = {{"Hr", "Ca", 140.0}, {"Hr", "Cb", 130.0}};
  return core::build_spin_system(spins, js, 297.0);
}

SpinSystem plain_trio() {
  std::vector<core::SpinDef> spins = {
      {"Sa", Species::C13, 0.0, 10.0, 10.0 / 3.0, 0.0},
      {"Sb", Species::C13, 50.0, 10.0, 10.0 / 3.0, 0.0},
      {"Sc", Species::C13, -50.0, 10.0, 10.0 / 3.0, 0.0},
  };
  return core::build_spin_system(spins, {}, 297.0);
}

// Diagonal 3-spin state with the given per-basis-state populations (made
// traceless internally).
SpinState diagonal_state(const std::array<double, 8>& pops) {
  double mean = std::accumulate(pops.begin(), pops.end(), 0.0) / 8.0;
  Eigen::MatrixXcd dev = Eigen::MatrixXcd::Zero(8, 8);
  for (int r = 0; r < 8; ++r) dev(r, r) = pops[r] - mean;
  return core::make_state(dev, 8);
}

double sorted_pump_maximum(const SpinState& state) {
  // Best pump polarization any permutation of the 8 populations can reach:
  // the four largest populations up, the four smallest down.
  std::array<double, 8> pops{};
  for (int r = 0; r < 8; ++r) pops[r] = state.deviation(r, r).real();
  std::sort(pops.begin(), pops.end(), std::greater<>());
  double up = pops[0] + pops[1] + pops[2] + pops[3];
  double down = pops[4] + pops[5] + pops[6] + pops[7];
  return (up - down) / 4.0;  // 2^{n-1} = 4 for three spins
}

std::vector<double> sorted_eigenvalues(const SpinState& state) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(state.deviation, Eigen::EigenvaluesOnly);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("lifetime ratio") {
  CHECK(std::abs(t1_ratio(31.6, 2.72) - 11.6) <= 0.3);
  CHECK(std::abs(t1_ratio(1.96, 1.29) - 1.52) <= 0.04);
  CHECK(t1_ratio(5.0, 5.0) == 1.0);
  CHECK_THROWS_AS(t1_ratio(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(t1_ratio(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("spin temperature is equilibrium over the cooling factor") {
  CHECK(spin_temperature(1.0, 297.0) == 297.0);
  double t19 = spin_temperature(1.9, 297.0);
  CHECK(t19 == 297.0 / 1.9);
  CHECK(t19 >= 156.0);
  CHECK(t19 <= 158.0);
  double t245 = spin_temperature(2.45, 297.0);
  CHECK(t245 == 297.0 / 2.45);
  CHECK(t245 >= 120.0);
  CHECK(t245 <= 130.0);
  CHECK_THROWS_AS(spin_temperature(0.0, 297.0), std::invalid_argument);
  CHECK_THROWS_AS(spin_temperature(-1.9, 297.0), std::invalid_argument);
  CHECK_THROWS_AS(spin_temperature(1.9, 0.0), std::invalid_argument);
}

TEST_CASE("ideal cooling limit doubles per added computation spin") {
  CHECK(ac_ideal_limit(3, 1.0) == 4.0);
  CHECK(ac_ideal_limit(6, 1.0) == 32.0);
  CHECK(ac_ideal_limit(7, 1.0) == 64.0);
  CHECK(ac_ideal_limit(1, 3.977) == 3.977);
  for (int n = 1; n <= 6; ++n) {
    CHECK(ac_ideal_limit(n + 1, 1.0) == 2.0 * ac_ideal_limit(n, 1.0));
  }
  CHECK_THROWS_AS(ac_ideal_limit(0, 1.0), std::invalid_argument);
}

TEST_CASE("selective reset transfers then repolarizes") {
  SpinSystem sys = testutil::hc_pair(140.0, 2.0, 10.0);
  sequences::DelayPlan plan = sequences::compute_delays(140.0, 140.0, 1, 0.0);
  SpinState thermal = core::thermal_state(sys);
  const int h = sys.index_of("Ha");
  const int c = sys.index_of("Cx");

  SUBCASE("zero delay: full factor on the computation spin, source spent") {
    SpinState out = selective_reset(thermal, sys, "Cx", "Ha", plan, 0.0);
    Eigen::VectorXd pol = core::polarizations(sys, out);
    CHECK(std::abs(pol(c) - kGammaH) < 1e-10);
    CHECK(std::abs(pol(h)) < 1e-10);
  }
  SUBCASE("the transfer stage is unitary") {
    SpinState out = selective_reset(thermal, sys, "Cx", "Ha", plan, 0.0);
    auto before = sorted_eigenvalues(thermal);
    auto after = sorted_eigenvalues(out);
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(std::abs(before[i] - after[i]) < 1e-10);
    }
  }
  SUBCASE("half-life delay: source halfway back") {
    SpinState out = selective_reset(thermal, sys, "Cx", "Ha", plan, 2.0 * std::log(2.0));
    Eigen::VectorXd pol = core::polarizations(sys, out);
    CHECK(std::abs(pol(h) - 0.5 * kGammaH) < 1e-9);
  }
  SUBCASE("long delay: source fully repolarized") {
    SpinState out = selective_reset(thermal, sys, "Cx", "Ha", plan, 40.0);
    Eigen::VectorXd pol = core::polarizations(sys, out);
    CHECK(std::abs(pol(h) - kGammaH) < 1e-4);
  }
  SUBCASE("rejections") {
    CHECK_THROWS_AS(selective_reset(thermal, sys, "Ha", "Ha", plan, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(selective_reset(thermal, sys, "Cx", "Ha", plan, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(selective_reset(thermal, sys, "Qx", "Ha", plan, 0.0), std::invalid_argument);
  }
}

TEST_CASE("selective reset routes through an intermediate when needed") {
  SpinSystem g = testutil::glycine_like();
  sequences::DelayPlan plan = sequences::compute_delays(139.7, 52.72, 1, 0.0);
  SpinState thermal = core::thermal_state(g);

  // H2a is not coupled to C1; the path goes H2a -> C2 -> C1.
  SpinState out = selective_reset(thermal, g, "C1", "H2a", plan, 0.0);
  Eigen::VectorXd pol = core::polarizations(g, out);
  CHECK(std::abs(pol(g.index_of("C1")) - kGammaH) < 1e-9);

  SUBCASE("no path at all") {
    std::vector<core::SpinDef> spins = {
        {"Hx", Species::H1, 0.0, 2.0, 2.0 / 3.0, 0.0},
        {"Cy", Species::C13, 0.0, 10.0, 10.0 / 3.0, 0.0},
        {"Cz", Species::C13, 50.0, 10.0, 10.0 / 3.0, 0.0},
    };
    std::vector<core::JCoupling> js = {{"Hx", "Cy", 140.0}};
    SpinSystem disconnected = core::build_spin_system(spins, js, 297.0);
    CHECK_THROWS_AS(selective_reset(core::thermal_state(disconnected), disconnected, "Cz", "Hx",
                                    plan, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("compression concentrates populations onto the pump spin") {
  SpinSystem sys = plain_trio();

  SUBCASE("equal polarizations boost the pump by half") {
    SpinState thermal = core::thermal_state(sys);
    SpinState out =
        three_bit_compression(thermal, sys, {"Sa", "Sb", "Sc"}, 0);
    Eigen::VectorXd pol = core::polarizations(sys, out);
    CHECK(std::abs(pol(0) - 1.5) < 1e-12);
    CHECK(std::abs(pol(1) - 0.5) < 1e-12);
    CHECK(std::abs(pol(2) - 0.5) < 1e-12);
  }

  SUBCASE("tiny equal polarizations: exact 1.5x in deviation units") {
    const double eps = 1e-4;
    Eigen::MatrixXcd dev = Eigen::MatrixXcd::Zero(8, 8);
    for (int i = 0; i < 3; ++i) {
      dev += eps * core::single_spin_operator(3, i, 'z');
    }
    SpinState state = core::make_state(dev, 8);
    SpinState out = three_bit_compression(state, sys, {"Sa", "Sb", "Sc"}, 1);
    double pump = core::polarizations(sys, out)(1);
    CHECK(std::abs(pump - 1.5 * eps) < 1e-6 * 1.5 * eps);
  }

  SUBCASE("nothing to compress leaves the lone polarized pump alone") {
    std::array<double, 8> pops{};
    for (int r = 0; r < 8; ++r) pops[r] = (r & 4) ? -0.125 : 0.125;  // spin 0 at +1
    SpinState state = diagonal_state(pops);
    SpinState out = three_bit_compression(state, sys, {"Sa", "Sb", "Sc"}, 0);
    CHECK((out.deviation - state.deviation).norm() == 0.0);
  }

  SUBCASE("matches the sorting oracle on random diagonal states") {
    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
      std::array<double, 8> pops{};
      for (double& p : pops) p = uni(rng);
      SpinState state = diagonal_state(pops);
      for (int pump = 0; pump < 3; ++pump) {
        SpinState out = three_bit_compression(state, sys, {"Sa", "Sb", "Sc"}, pump);
        double got = core::polarizations(sys, out)(pump);
        CHECK(std::abs(got - sorted_pump_maximum(state)) < 1e-12);
      }
    }
  }

  SUBCASE("no permutation beats it (exhaustive, smaller sample)") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::array<int, 8> perm{};
    for (int trial = 0; trial < 40; ++trial) {
      std::array<double, 8> pops{};
      for (double& p : pops) p = uni(rng);
      SpinState state = diagonal_state(pops);
      SpinState out = three_bit_compression(state, sys, {"Sa", "Sb", "Sc"}, 0);
      double got = core::polarizations(sys, out)(0);

      std::iota(perm.begin(), perm.end(), 0);
      double best = -1e300;
      do {
        double pol = 0.0;
        for (int slot = 0; slot < 8; ++slot) {
          double p = state.deviation(perm[slot], perm[slot]).real();
          pol += (slot & 4) ? -p : p;
        }
        best = std::max(best, pol / 4.0);
      } while (std::next_permutation(perm.begin(), perm.end()));
      CHECK(std::abs(got - best) < 1e-12);
    }
  }

  SUBCASE("acts as a permutation: spectrum and population multiset survive") {
    SpinState thermal = core::thermal_state(sys);
    SpinState state = thermal;
    dynamics::apply_pulse(state, sys, dynamics::Pulse{{0}, 1.1, 0.4, false});
    dynamics::apply_pulse(state, sys, dynamics::Pulse{{1, 2}, 0.7, 2.1, false});
    SpinState out = three_bit_compression(state, sys, {"Sa", "Sb", "Sc"}, 2);

    auto before = sorted_eigenvalues(state);
    auto after = sorted_eigenvalues(out);
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(std::abs(before[i] - after[i]) < 1e-10);
    }
    CHECK(std::abs(out.deviation.trace().real()) < 1e-12);
  }

  SUBCASE("spectators are untouched") {
    SpinSystem g = testutil::glycine_like();
    SpinState thermal = core::thermal_state(g);
    SpinState out = three_bit_compression(thermal, g, {"C1", "C2", "H2a"}, 0);
    Eigen::VectorXd pol = core::polarizations(g, out);
    // H2b is not part of the trio.
    CHECK(std::abs(pol(g.index_of("H2b")) - kGammaH) < 1e-12);
    // The trio holds protons and carbons at different polarizations; the
    // pump still gets the best four populations.
    CHECK(pol(g.index_of("C1")) > 1.4);
  }

  SUBCASE("rejections") {
    SpinState thermal = core::thermal_state(sys);
    CHECK_THROWS_AS(three_bit_compression(thermal, sys, {"Sa", "Sa", "Sc"}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(three_bit_compression(thermal, sys, {"Sa", "Sb", "Sq"}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(three_bit_compression(thermal, sys, {"Sa", "Sb", "Sc"}, 3),
                    std::invalid_argument);
    CHECK_THROWS_AS(three_bit_compression(thermal, sys, {"Sa", "Sb", "Sc"}, -1),
                    std::invalid_argument);
  }
}

TEST_CASE("cooling loop: resets then compression approach the ideal boost") {
  SpinSystem frozen = trio(1e12);  // computation spins effectively never relax
  Schedule schedule = {
      ResetSpec{"Ca", "Hr", 10.0},  // 20 proton lifetimes
      ResetSpec{"Cb", "Hr", 10.0},
      CompressSpec{{"Ca", "Cb", "Hr"}, 0},
  };

  CoolingReport rep = run_ac(frozen, schedule, 1);
  const int ca = frozen.index_of("Ca");
  // Equilibrium carbon polarization is 1, so factors equal polarizations.
  CHECK(std::abs(rep.factors(ca) - 1.5 * kGammaH) < 1e-6);
  CHECK(rep.trajectory.size() == 1);
  CHECK(rep.bypassed_shannon);
  CHECK(rep.entropy_after > rep.entropy_before);
  CHECK(std::abs(rep.spin_temperatures(ca) - 297.0 / rep.factors(ca)) < 1e-12);

  SUBCASE("single reset step reproduces the primitive") {
    Schedule one = {ResetSpec{"Ca", "Hr", 0.25}};
    CoolingReport r = run_ac(frozen, one, 1);
    sequences::DelayPlan plan = sequences::compute_delays(140.0, 140.0, 1, 0.0);
    SpinState direct =
        selective_reset(core::thermal_state(frozen), frozen, "Ca", "Hr", plan, 0.25);
    Eigen::VectorXd pol = core::polarizations(frozen, direct);
    CHECK(std::abs(r.factors(ca) - pol(ca)) < 1e-12);
  }

  SUBCASE("pump factor ratchets up round over round") {
    // A reset transfers first and refills the proton afterwards, so a round
    // needs two of them: the first one's delay restores the proton that the
    // second one actually transfers.  The compression then sees (P, g, g)
    // and sorts to P' = P/2 + g, climbing toward the 2g ceiling.
    Schedule rounds_schedule = {
        ResetSpec{"Cb", "Hr", 10.0},
        ResetSpec{"Cb", "Hr", 10.0},
        CompressSpec{{"Ca", "Cb", "Hr"}, 0},
    };
    CoolingReport r = run_ac(frozen, rounds_schedule, 5);
    REQUIRE(r.trajectory.size() == 5);
    for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
      CHECK(r.trajectory[i](ca) >= r.trajectory[i - 1](ca) - 1e-9);
    }
    CHECK(std::abs(r.trajectory.front()(ca) - (1.0 + 2.0 * kGammaH) / 2.0) < 1e-6);
    CHECK(r.trajectory.back()(ca) > 6.0);
    CHECK(r.trajectory.back()(ca) < 2.0 * kGammaH);
  }

  SUBCASE("finite lifetimes land strictly below the frozen-spin result") {
    SpinSystem real = trio(10.0);
    CoolingReport frozen_rep = run_ac(frozen, schedule, 1);
    CoolingReport real_rep = run_ac(real, schedule, 1);
    CHECK(real_rep.factors(ca) < frozen_rep.factors(ca));
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(run_ac(frozen, {}, 1), std::invalid_argument);
    CHECK_THROWS_AS(run_ac(frozen, schedule, 0), std::invalid_argument);
    Schedule bad = {ResetSpec{"Ca", "Qq", 1.0}};
    CHECK_THROWS_AS(run_ac(frozen, bad, 1), std::invalid_argument);
  }
}

TEST_CASE("entropy bookkeeping and the closed-system bound") {
  SpinSystem g = testutil::glycine_like();
  SpinState thermal = core::thermal_state(g);

  SUBCASE("a stored cooling factor increases the information proxy") {
    // C1 boosted to 1.9, everything else at its own equilibrium.
    Eigen::VectorXd eq = core::polarizations(g, thermal);
    Eigen::MatrixXcd dev = Eigen::MatrixXcd::Zero(g.dim(), g.dim());
    for (int r = 0; r < g.dim(); ++r) {
      double v = 0.0;
      for (int i = 0; i < g.size(); ++i) {
        double target = (i == g.index_of("C1")) ? 1.9 : eq(i);
        v += 0.5 * target * g.sign_of(r, i);
      }
      dev(r, r) = v;
    }
    SpinState after = core::make_state(dev, g.dim());

    ShannonCheck chk = shannon_bound_check(thermal, after, g);
    double delta = chk.entropy_after - chk.entropy_before;
    CHECK(std::abs(delta - (1.9 * 1.9 - 1.0)) < 1e-9);
    CHECK(std::abs(delta - 2.6) < 0.05);
    CHECK(chk.bypassed);
    // Lower proxy entropy of the bath-cooled state shows up as lower exact
    // entropy too.
    CHECK(chk.vn_entropy_after < chk.vn_entropy_before);
  }

  SUBCASE("identical states never flag a bypass") {
    ShannonCheck chk = shannon_bound_check(thermal, thermal, g);
    CHECK(chk.entropy_after == chk.entropy_before);
    CHECK_FALSE(chk.bypassed);
  }

  SUBCASE("unitary-only evolution from equilibrium never flags a bypass") {
    std::mt19937 rng(991);
    std::uniform_real_distribution<double> angle(0.0, 3.14159);
    std::uniform_int_distribution<int> pick(0, g.size() - 1);
    std::uniform_int_distribution<int> len(3, 8);
    sequences::ExecOptions unitary;
    unitary.evolve.relaxation_enabled = false;
    for (int trial = 0; trial < 100; ++trial) {
      sequences::SequenceProgram prog;
      int steps = len(rng);
      for (int s = 0; s < steps; ++s) {
        if (s % 2 == 0) {
          prog.events.push_back(sequences::PulseEvent{
              sequences::TargetSelector::of_labels({g.nucleus(pick(rng)).label}), angle(rng) * 180.0 / 3.14159,
              angle(rng) * 180.0 / 3.14159, false});
        } else {
          prog.events.push_back(sequences::DelayEvent{"", angle(rng) * 1e-3, std::nullopt, true});
        }
      }
      SpinState out = sequences::run_program(g, prog, thermal, unitary).final_state;
      ShannonCheck chk = shannon_bound_check(thermal, out, g);
      CHECK_FALSE(chk.bypassed);
      CHECK(std::abs(chk.vn_entropy_after - chk.vn_entropy_before) < 1e-10);
    }
  }

  SUBCASE("dimension mismatch is rejected") {
    SpinSystem pair = testutil::hc_pair();
    CHECK_THROWS_AS(shannon_bound_check(core::thermal_state(pair), thermal, g),
                    std::invalid_argument);
    CHECK_THROWS_AS(shannon_bound_check(thermal, thermal, g, 0.0), std::invalid_argument);
  }
}

TEST_CASE("schedule text round-trips and validates") {
  SUBCASE("flat parse") {
    Schedule s = parse_schedule(
        "# cool the carbonyl\n"
        "RESET C1 H2a 8.4\n"
        "COMPRESS C1 C2 H2a PUMP C1\n");
    REQUIRE(s.size() == 2);
    const auto& reset = std::get<ResetSpec>(s[0]);
    CHECK(reset.computation == "C1");
    CHECK(reset.reset == "H2a");
    CHECK(reset.delay_s == 8.4);
    const auto& comp = std::get<CompressSpec>(s[1]);
    CHECK(comp.pump_index == 0);
    CHECK(comp.labels == std::array<std::string, 3>{"C1", "C2", "H2a"});
  }

  SUBCASE("repeat blocks expand, including nesting") {
    Schedule s = parse_schedule(
        "REPEAT 3 {\n"
        "  RESET Cb Hr 1.0\n"
        "  REPEAT 2 {\n"
        "    COMPRESS Ca Cb Hr PUMP Ca\n"
        "  }\n"
        "}\n"
        "RESET Ca Hr 0.5\n");
    REQUIRE(s.size() == 3 * (1 + 2) + 1);
    CHECK(std::holds_alternative<ResetSpec>(s.back()));
    int compress_count = 0;
    for (const auto& step : s) compress_count += std::holds_alternative<CompressSpec>(step);
    CHECK(compress_count == 6);
  }

  SUBCASE("round-trip") {
    Schedule s = parse_schedule(
        "RESET C1 H2a 8.4\n"
        "REPEAT 2 {\n"
        "COMPRESS C1 C2 H2a PUMP C2\n"
        "}\n");
    std::string text = serialize_schedule(s);
    CHECK(parse_schedule(text) == s);
    CHECK(serialize_schedule(parse_schedule(text)) == text);
  }

  SUBCASE("parse errors carry position") {
    auto check_error = [](const std::string& body, int line) {
      try {
        parse_schedule(body);
        FAIL_CHECK("expected a parse error for: " << body);
      } catch (const text::ParseError& e) {
        CHECK(e.line() == line);
      }
    };
    check_error("WAIT 1\n", 1);
    check_error("RESET C1 C1 1.0\n", 1);
    check_error("RESET C1 H2a\n", 1);
    check_error("RESET C1 H2a -2\n", 1);
    check_error("COMPRESS C1 C2 H2a PUMP H9\n", 1);
    check_error("COMPRESS C1 C2 PUMP C1\n", 1);
    check_error("REPEAT 0 {\n}\n", 1);
    check_error("REPEAT x {\n}\n", 1);
    check_error("REPEAT 2\nRESET C1 H2a 1\n", 1);
    check_error("RESET C1 H2a 1.0\n}\n", 2);
  }

  SUBCASE("unclosed repeat is reported") {
    CHECK_THROWS_AS(parse_schedule("REPEAT 2 {\nRESET C1 H2a 1.0\n"), text::ParseError);
  }
}
