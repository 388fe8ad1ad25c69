#include "spincool/dynamics.hpp"

#include <bit>
#include <cmath>
#include <set>
#include <stdexcept>

namespace spincool::dynamics {

namespace {

using core::complexd;

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Per-basis-index-mask rate sums, e.g. sum of 1/T2 over the spins whose bits
// are set in the mask.  rates[i] is indexed by spin.
std::vector<double> rate_by_mask(const SpinSystem& system, const VectorXd& inverse_times) {
  const int n = system.size();
  const int dim = system.dim();
  std::vector<double> out(static_cast<size_t>(dim), 0.0);
  for (int m = 1; m < dim; ++m) {
    int low_bit = std::countr_zero(static_cast<unsigned>(m));
    int spin = n - 1 - low_bit;
    out[m] = out[m & (m - 1)] + inverse_times(spin);
  }
  return out;
}

// Unnormalized Walsh-Hadamard transform of the population vector; index bit
// p of the output selects the sigma_z factor of spin (n-1-p).  Applying it
// twice multiplies by 2^n.
void walsh_transform(VectorXd& v) {
  const int dim = static_cast<int>(v.size());
  for (int half = 1; half < dim; half <<= 1) {
    for (int block = 0; block < dim; block += half << 1) {
      for (int r = block; r < block + half; ++r) {
        double a = v(r);
        double b = v(r + half);
        v(r) = a + b;
        v(r + half) = a - b;
      }
    }
  }
}

struct DiagonalRelaxer {
  // Walsh-space decay per coefficient and equilibrium drive for singletons.
  VectorXd decay;            // exp(-h * sum 1/T1 over mask)
  std::vector<int> single_index;  // Walsh index of each spin's lone-z term
  VectorXd drive;            // (2^n * gamma/2) * (1 - exp(-h/T1)) per spin

  DiagonalRelaxer(const SpinSystem& system, double h_s) {
    const int n = system.size();
    const int dim = system.dim();
    VectorXd inv_t1(n);
    for (int i = 0; i < n; ++i) inv_t1(i) = 1.0 / system.t1_s(i);
    std::vector<double> rates = rate_by_mask(system, inv_t1);
    decay.resize(dim);
    for (int m = 0; m < dim; ++m) decay(m) = std::exp(-h_s * rates[m]);
    single_index.resize(n);
    drive.resize(n);
    for (int i = 0; i < n; ++i) {
      single_index[i] = static_cast<int>(system.mask_of(i));
      double d = std::exp(-h_s / system.t1_s(i));
      drive(i) = dim * 0.5 * system.nucleus(i).gamma_rel * (1.0 - d);
    }
  }

  void step(VectorXd& walsh) const {
    walsh.array() *= decay.array();
    for (size_t i = 0; i < single_index.size(); ++i) walsh(single_index[i]) += drive(i);
  }
};

bool is_diagonal(const MatrixXcd& m) {
  const int dim = static_cast<int>(m.rows());
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r < dim; ++r) {
      if (r != c && m(r, c) != complexd(0.0, 0.0)) return false;
    }
  }
  return true;
}

void apply_coherent_phases(MatrixXcd& dev, const VectorXd& theta, double duration_s) {
  const int dim = static_cast<int>(dev.rows());
  Eigen::VectorXcd phase(dim);
  for (int r = 0; r < dim; ++r) {
    phase(r) = std::polar(1.0, -theta(r) * duration_s);
  }
  // dev_rc *= phase_r * conj(phase_c)
  dev = phase.asDiagonal() * dev * phase.conjugate().asDiagonal();
}

// Closed-form population relaxation over a full duration (diagonal sector is
// autonomous, so this equals any composition of smaller steps exactly).
void relax_diagonal(MatrixXcd& dev, const SpinSystem& system, double duration_s) {
  const int dim = system.dim();
  VectorXd diag(dim);
  for (int r = 0; r < dim; ++r) diag(r) = dev(r, r).real();
  walsh_transform(diag);
  DiagonalRelaxer relaxer(system, duration_s);
  relaxer.step(diag);
  walsh_transform(diag);
  diag /= static_cast<double>(dim);
  for (int r = 0; r < dim; ++r) dev(r, r) = complexd(diag(r), 0.0);
}

void check_delay(const Delay& delay) {
  if (!std::isfinite(delay.duration_s) || delay.duration_s < 0.0) {
    fail("delay duration must be finite and non-negative");
  }
}

}  // namespace

VectorXd hamiltonian_diagonal(const SpinSystem& system,
                              std::optional<core::Species> decouple) {
  const int n = system.size();
  const int dim = system.dim();
  VectorXd theta = VectorXd::Zero(dim);
  for (int r = 0; r < dim; ++r) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      v += kTwoPi * system.shift_hz(i) * 0.5 * system.sign_of(r, i);
      for (int j = i + 1; j < n; ++j) {
        double jij = system.j_hz(i, j);
        if (jij == 0.0) continue;
        if (decouple) {
          bool i_dec = system.nucleus(i).species == *decouple;
          bool j_dec = system.nucleus(j).species == *decouple;
          if (i_dec != j_dec) continue;  // heteronuclear to the decoupled species
        }
        v += kTwoPi * jij * 0.25 * system.sign_of(r, i) * system.sign_of(r, j);
      }
    }
    theta(r) = v;
  }
  return theta;
}

MatrixXcd free_hamiltonian(const SpinSystem& system, std::optional<core::Species> decouple) {
  VectorXd theta = hamiltonian_diagonal(system, decouple);
  const int dim = system.dim();
  MatrixXcd h = MatrixXcd::Zero(dim, dim);
  for (int r = 0; r < dim; ++r) h(r, r) = theta(r);
  return h;
}

void apply_pulse(SpinState& state, const SpinSystem& system, const Pulse& pulse) {
  if (pulse.targets.empty()) fail("pulse needs at least one target spin");
  if (!std::isfinite(pulse.angle_rad) || !std::isfinite(pulse.phase_rad)) {
    fail("pulse angle and phase must be finite");
  }
  std::set<int> seen;
  for (int t : pulse.targets) {
    if (t < 0 || t >= system.size()) fail("pulse target index out of range");
    if (!seen.insert(t).second) fail("pulse lists a target spin twice");
  }

  // Trig residue of exactly representable right angles (cos(pi/2) ~ 6e-17)
  // is snapped to zero so inversions keep population-only states exactly
  // diagonal, which the fast relaxation path in evolve_delay keys on.
  auto snap = [](double x) { return std::abs(x) < 1e-15 ? 0.0 : x; };
  const double c = snap(std::cos(0.5 * pulse.angle_rad));
  const double s = snap(std::sin(0.5 * pulse.angle_rad));
  const double ph_re = snap(std::cos(pulse.phase_rad));
  const double ph_im = snap(std::sin(pulse.phase_rad));
  // exp(-i*angle*(cos(phase) Ix + sin(phase) Iy)) on a single spin.
  const complexd u00(c, 0.0);
  const complexd u01 = complexd(0.0, -s) * complexd(ph_re, -ph_im);
  const complexd u10 = complexd(0.0, -s) * complexd(ph_re, ph_im);

  MatrixXcd& dev = state.deviation;
  const int dim = system.dim();
  for (int spin : pulse.targets) {
    const int stride = static_cast<int>(system.mask_of(spin));
    // Left-multiply by u on the target spin's two-dimensional factor.
    for (int r0 = 0; r0 < dim; ++r0) {
      if (r0 & stride) continue;
      const int r1 = r0 | stride;
      for (int col = 0; col < dim; ++col) {
        complexd a = dev(r0, col);
        complexd b = dev(r1, col);
        dev(r0, col) = u00 * a + u01 * b;
        dev(r1, col) = u10 * a + u00 * b;
      }
    }
    // Right-multiply by u^dagger.
    for (int c0 = 0; c0 < dim; ++c0) {
      if (c0 & stride) continue;
      const int c1 = c0 | stride;
      for (int row = 0; row < dim; ++row) {
        complexd a = dev(row, c0);
        complexd b = dev(row, c1);
        dev(row, c0) = a * std::conj(u00) + b * std::conj(u01);
        dev(row, c1) = a * std::conj(u10) + b * std::conj(u00);
      }
    }
  }
}

double default_step_s(const SpinSystem& system) {
  double h = system.min_t2_s() / 100.0;
  double jmax = system.max_abs_j_hz();
  if (jmax > 0.0) h = std::min(h, 1.0 / (100.0 * jmax));
  return h;
}

std::shared_ptr<const PropagatorCache::StepFactors> PropagatorCache::step_factors(
    const SpinSystem& system, double h_s, std::optional<core::Species> decouple) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (bound_system_ == nullptr) bound_system_ = &system;
  if (bound_system_ != &system) {
    fail("a PropagatorCache must be reused only with the system it was built for");
  }
  Key key{std::bit_cast<std::uint64_t>(h_s), decouple ? static_cast<int>(*decouple) : -1};
  auto it = entries_.find(key);
  if (it != entries_.end()) return it->second;

  auto factors = std::make_shared<StepFactors>();
  factors->h_s = h_s;
  const int n = system.size();
  const int dim = system.dim();
  VectorXd theta = hamiltonian_diagonal(system, decouple);
  VectorXd inv_t2(n);
  for (int i = 0; i < n; ++i) inv_t2(i) = 1.0 / system.t2_s(i);
  std::vector<double> r2 = rate_by_mask(system, inv_t2);
  factors->element_factor.resize(dim, dim);
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r < dim; ++r) {
      double damp = r2[static_cast<unsigned>(r) ^ static_cast<unsigned>(c)];
      factors->element_factor(r, c) =
          std::polar(std::exp(-damp * h_s), -(theta(r) - theta(c)) * h_s);
    }
  }
  factors->t1_decay.resize(n);
  for (int i = 0; i < n; ++i) factors->t1_decay(i) = std::exp(-h_s / system.t1_s(i));

  auto shared = std::shared_ptr<const StepFactors>(std::move(factors));
  entries_.emplace(key, shared);
  return shared;
}

void evolve_delay(SpinState& state, const SpinSystem& system, const Delay& delay,
                  const EvolveOptions& options, PropagatorCache* cache) {
  check_delay(delay);
  core::validate_state(state, system.dim());
  if (delay.duration_s == 0.0) return;

  const bool relax = delay.relaxation && options.relaxation_enabled;
  if (!relax) {
    VectorXd theta = hamiltonian_diagonal(system, delay.decouple);
    apply_coherent_phases(state.deviation, theta, delay.duration_s);
    return;
  }

  if (is_diagonal(state.deviation)) {
    // Populations are untouched by the diagonal Hamiltonian; relax exactly.
    relax_diagonal(state.deviation, system, delay.duration_s);
    return;
  }

  double h_bound = options.step_override_s;
  if (h_bound != 0.0 && (!std::isfinite(h_bound) || h_bound <= 0.0)) {
    fail("step override must be positive");
  }
  if (h_bound == 0.0) h_bound = default_step_s(system);
  const long nsteps = static_cast<long>(std::ceil(delay.duration_s / h_bound));
  const double h = delay.duration_s / static_cast<double>(nsteps);

  PropagatorCache local_cache;
  PropagatorCache& use_cache = cache ? *cache : local_cache;
  auto factors = use_cache.step_factors(system, h, delay.decouple);

  MatrixXcd& dev = state.deviation;
  const int dim = system.dim();

  // The diagonal sector steps in Walsh space for the whole delay; the
  // elementwise factor has ones on the diagonal, so the two never mix.
  VectorXd diag(dim);
  for (int r = 0; r < dim; ++r) diag(r) = dev(r, r).real();
  walsh_transform(diag);
  DiagonalRelaxer relaxer(system, h);

  for (long step = 0; step < nsteps; ++step) {
    dev.array() *= factors->element_factor;
    relaxer.step(diag);
  }

  walsh_transform(diag);
  diag /= static_cast<double>(dim);
  for (int r = 0; r < dim; ++r) dev(r, r) = complexd(diag(r), 0.0);
}

}  // namespace spincool::dynamics
