#include "spincool/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "spincool/dynamics.hpp"

namespace spincool::analysis {

namespace {

constexpr double kPi = 3.14159265358979323846;

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

double sum_squared_misfit(const std::vector<std::pair<double, double>>& pts,
                          const Eigen::Vector3d& p) {
  // p = (equilibrium, amplitude, t1)
  double s = 0.0;
  for (const auto& [tau, y] : pts) {
    double e = std::exp(-tau / p(2));
    double r = p(0) * (1.0 - 2.0 * p(1) * e) - y;
    s += r * r;
  }
  return s;
}

}  // namespace

T1Fit fit_t1(const std::vector<std::pair<double, double>>& curve) {
  if (curve.size() < 3) {
    fail("lifetime fit needs at least 3 samples, got " + std::to_string(curve.size()));
  }
  std::vector<std::pair<double, double>> pts = curve;
  std::sort(pts.begin(), pts.end());
  double max_abs_y = 0.0;
  for (const auto& [tau, y] : pts) {
    if (!std::isfinite(tau) || !std::isfinite(y)) fail("lifetime fit given a non-finite sample");
    if (tau < 0.0) fail("negative recovery time in lifetime fit");
    max_abs_y = std::max(max_abs_y, std::abs(y));
  }
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].first == pts[i - 1].first) fail("duplicate recovery time in lifetime fit");
  }
  double min_y = pts.front().second;
  double max_y = min_y;
  for (const auto& [tau, y] : pts) {
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  }
  if (max_y - min_y <= 1e-12 * std::max(1.0, max_abs_y)) {
    fail("constant recovery curve; the lifetime is undetermined");
  }

  // Starting point: the latest sample approximates the equilibrium value, the
  // sign change locates the lifetime, the inversion is assumed complete.
  double einf = pts.back().second;
  if (std::abs(einf) < 1e-12 * max_abs_y) einf = -pts.front().second;
  if (einf == 0.0) einf = max_abs_y;
  double t1 = pts[pts.size() / 2].first;
  double first = pts.front().second;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].second * first < 0.0) {
      t1 = pts[i].first;
      break;
    }
  }
  Eigen::Vector3d p(einf, 1.0, t1);

  double lambda = 1e-3;
  double current = sum_squared_misfit(pts, p);
  bool converged = false;
  int iterations = 0;
  while (iterations < 200 && !converged) {
    ++iterations;
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (const auto& [tau, y] : pts) {
      double e = std::exp(-tau / p(2));
      double f = 1.0 - 2.0 * p(1) * e;
      double r = p(0) * f - y;
      Eigen::Vector3d j(f, -2.0 * p(0) * e, -2.0 * p(0) * p(1) * e * tau / (p(2) * p(2)));
      jtj += j * j.transpose();
      jtr += j * r;
    }
    Eigen::Matrix3d damped = jtj;
    for (int k = 0; k < 3; ++k) {
      damped(k, k) += lambda * std::max(jtj(k, k), 1e-30);
    }
    Eigen::Vector3d step = damped.ldlt().solve(-jtr);
    Eigen::Vector3d trial = p + step;
    if (!(trial(2) > 0.0) || !trial.allFinite()) {
      lambda = std::min(lambda * 10.0, 1e100);
      continue;
    }
    double trial_misfit = sum_squared_misfit(pts, trial);
    if (trial_misfit <= current) {
      double rel_change = 0.0;
      for (int k = 0; k < 3; ++k) {
        rel_change = std::max(rel_change, std::abs(step(k)) / (std::abs(p(k)) + 1e-30));
      }
      p = trial;
      current = trial_misfit;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (rel_change < 1e-10) converged = true;
    } else {
      lambda = std::min(lambda * 10.0, 1e100);
    }
  }

  T1Fit out;
  out.equilibrium = p(0);
  out.amplitude = p(1);
  out.t1_s = p(2);
  out.residual = std::sqrt(current / static_cast<double>(pts.size()));
  out.converged = converged;
  out.iterations = iterations;
  return out;
}

VectorXd enhancement_factors(const SpinState& state, const SpinSystem& system) {
  core::validate_state(state, system.dim());
  VectorXd pol = core::polarizations(system, state);
  VectorXd eq = core::polarizations(system, core::thermal_state(system));
  return pol.cwiseQuotient(eq);
}

SpinSystem apply_relaxivity(const SpinSystem& system, const RelaxivityModel& model,
                            double concentration_mm) {
  if (!std::isfinite(concentration_mm) || concentration_mm < 0.0) {
    fail("dopant concentration must be non-negative");
  }
  if (model.r1.size() != system.size() || model.base_t1.size() != system.size()) {
    fail("relaxivity model size does not match the spin system");
  }
  std::vector<core::SpinDef> defs;
  for (int i = 0; i < system.size(); ++i) {
    if (!(model.r1(i) >= 0.0)) fail("relaxivity must be non-negative");
    if (!(model.base_t1(i) > 0.0)) fail("base lifetime must be positive");
    double t1p = model.base_t1(i) / (1.0 + model.base_t1(i) * model.r1(i) * concentration_mm);
    double factor = t1p / system.t1_s(i);
    const core::Nucleus& nuc = system.nucleus(i);
    defs.push_back({nuc.label, nuc.species, system.shift_hz(i), t1p, system.t2_s(i) * factor,
                    nuc.gamma_rel});
  }
  std::vector<core::JCoupling> js;
  for (int i = 0; i < system.size(); ++i) {
    for (int j = i + 1; j < system.size(); ++j) {
      if (system.j_hz(i, j) != 0.0) {
        js.push_back({system.nucleus(i).label, system.nucleus(j).label, system.j_hz(i, j)});
      }
    }
  }
  return core::build_spin_system(defs, js, system.temperature_k());
}

RelaxivityModel relaxivity_from_pair(const SpinSystem& base, const SpinSystem& doped,
                                     double concentration_mm) {
  if (!(concentration_mm > 0.0) || !std::isfinite(concentration_mm)) {
    fail("dopant concentration must be positive");
  }
  if (base.size() != doped.size()) fail("doped and undoped systems differ in size");
  RelaxivityModel model;
  model.r1 = VectorXd::Zero(base.size());
  model.base_t1 = VectorXd::Zero(base.size());
  for (int i = 0; i < base.size(); ++i) {
    if (base.nucleus(i).label != doped.nucleus(i).label) {
      fail("doped and undoped systems list different spins");
    }
    double r1 = (1.0 / doped.t1_s(i) - 1.0 / base.t1_s(i)) / concentration_mm;
    if (r1 < 0.0) {
      fail("spin '" + base.nucleus(i).label +
           "' relaxes slower when doped; linear relaxivity cannot hold");
    }
    model.r1(i) = r1;
    model.base_t1(i) = base.t1_s(i);
  }
  return model;
}

RatioTable ratio_table(const SpinSystem& system, const std::string& reset) {
  int r = system.index_of(reset);
  RatioTable out;
  for (int i = 0; i < system.size(); ++i) {
    if (i == r) continue;
    out.entries[{system.nucleus(i).label, reset}] = system.t1_s(i) / system.t1_s(r);
  }
  return out;
}

std::vector<SpectrumLine> stick_spectrum(const SpinState& state, const SpinSystem& system,
                                         core::Species species) {
  core::validate_state(state, system.dim());
  std::vector<int> read = system.spins_of(species);
  if (read.empty()) fail("no spins of the requested species to read");

  SpinState work = state;
  dynamics::apply_pulse(work, system, dynamics::Pulse{read, kPi / 2.0, 0.0, false});

  const int dim = system.dim();
  std::vector<SpectrumLine> lines;
  for (int i : read) {
    std::vector<int> partners;
    for (int j = 0; j < system.size(); ++j) {
      if (j != i && system.j_hz(i, j) != 0.0) partners.push_back(j);
    }
    const int k = static_cast<int>(partners.size());
    const int combos = 1 << k;

    // Read-axis coefficient per partner-spin configuration.  Lines keyed by
    // the J offset (not the absolute frequency) so equal-coupling patterns
    // cancel exactly and merge.
    std::vector<double> amp(combos, 0.0);
    const std::uint32_t mask = system.mask_of(i);
    for (int u = 0; u < dim; ++u) {
      if (system.bit_of(u, i) != 0) continue;
      int m = 0;
      for (int b = 0; b < k; ++b) m |= system.bit_of(u, partners[b]) << b;
      amp[m] += work.deviation(u, static_cast<int>(u | mask)).imag();
    }
    const double scale = 2.0 / (dim / 2);
    std::map<double, double> merged;
    for (int m = 0; m < combos; ++m) {
      double offset = 0.0;
      for (int b = 0; b < k; ++b) {
        double half = system.j_hz(i, partners[b]) / 2.0;
        offset += ((m >> b) & 1) ? -half : half;
      }
      merged[offset] += amp[m] * scale;
    }
    for (const auto& [offset, a] : merged) {
      if (std::abs(a) < 1e-12) continue;
      lines.push_back({i, system.nucleus(i).label, system.shift_hz(i) + offset, a});
    }
  }
  return lines;
}

}  // namespace spincool::analysis
