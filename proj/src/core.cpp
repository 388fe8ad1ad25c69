#include "spincool/core.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace spincool::core {

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

}  // namespace

std::string to_string(Species s) {
  switch (s) {
    case Species::H1:
      return "H1";
    case Species::C13:
      return "C13";
  }
  fail("unrecognized species value");
}

Species species_from_string(const std::string& text) {
  if (text == "H1") return Species::H1;
  if (text == "C13") return Species::C13;
  fail("unknown species '" + text + "' (expected H1 or C13)");
}

double default_gamma_rel(Species s) {
  return s == Species::H1 ? kDefaultGammaRelH1 : 1.0;
}

int SpinSystem::index_of(const std::string& label) const {
  if (auto i = find(label)) return *i;
  fail("unknown spin label '" + label + "'");
}

std::optional<int> SpinSystem::find(const std::string& label) const {
  for (int i = 0; i < size(); ++i) {
    if (nuclei_[i].label == label) return i;
  }
  return std::nullopt;
}

std::vector<int> SpinSystem::spins_of(Species s) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (nuclei_[i].species == s) out.push_back(i);
  }
  return out;
}

double SpinSystem::min_t2_s() const { return t2_.minCoeff(); }

double SpinSystem::max_abs_j_hz() const {
  return size() > 1 ? j_.cwiseAbs().maxCoeff() : 0.0;
}

SpinSystem build_spin_system(const std::vector<SpinDef>& spins,
                             const std::vector<JCoupling>& couplings,
                             double temperature_k) {
  if (spins.empty()) fail("spin system needs at least one spin");
  if (static_cast<int>(spins.size()) > kMaxSpins) {
    fail("spin system limited to " + std::to_string(kMaxSpins) + " spins, got " +
         std::to_string(spins.size()));
  }
  if (!(temperature_k > 0.0)) fail("temperature must be positive");

  SpinSystem sys;
  const int n = static_cast<int>(spins.size());
  sys.shift_.resize(n);
  sys.t1_.resize(n);
  sys.t2_.resize(n);
  sys.j_ = Eigen::MatrixXd::Zero(n, n);
  sys.temperature_k_ = temperature_k;

  std::set<std::string> seen;
  for (const SpinDef& def : spins) {
    if (def.label.empty()) fail("spin label must be non-empty");
    // Reserved words would collide with pulse-target tokens in sequence files.
    if (def.label == "H1" || def.label == "C13" || def.label == "ALL") {
      fail("spin label '" + def.label + "' is reserved");
    }
    if (!seen.insert(def.label).second) fail("duplicate spin label '" + def.label + "'");
    if (!std::isfinite(def.shift_hz)) fail("shift of '" + def.label + "' must be finite");
    if (!(def.t1_s > 0.0)) fail("T1 of '" + def.label + "' must be positive");
    if (!(def.t2_s > 0.0)) fail("T2 of '" + def.label + "' must be positive");
    if (def.t2_s > 2.0 * def.t1_s) {
      fail("T2 of '" + def.label + "' exceeds 2*T1, which no relaxation channel allows");
    }
    double gamma = def.gamma_rel == 0.0 ? default_gamma_rel(def.species) : def.gamma_rel;
    if (!(gamma > 0.0)) fail("gamma of '" + def.label + "' must be positive");
    int i = static_cast<int>(sys.nuclei_.size());
    sys.nuclei_.push_back(Nucleus{def.label, def.species, gamma});
    sys.shift_(i) = def.shift_hz;
    sys.t1_(i) = def.t1_s;
    sys.t2_(i) = def.t2_s;
  }

  for (const JCoupling& c : couplings) {
    int a = sys.index_of(c.a);
    int b = sys.index_of(c.b);
    if (a == b) fail("coupling pairs '" + c.a + "' with itself");
    if (!std::isfinite(c.hz)) fail("coupling " + c.a + "-" + c.b + " must be finite");
    if (sys.j_(a, b) != 0.0 && sys.j_(a, b) != c.hz) {
      fail("conflicting values for coupling " + c.a + "-" + c.b);
    }
    sys.j_(a, b) = c.hz;
    sys.j_(b, a) = c.hz;
  }

  return sys;
}

void validate_state(const SpinState& state, int dim) {
  if (state.deviation.rows() != dim || state.deviation.cols() != dim) {
    std::ostringstream os;
    os << "state dimension " << state.deviation.rows() << "x" << state.deviation.cols()
       << " does not match system dimension " << dim;
    fail(os.str());
  }
  if (!(state.epsilon_ref > 0.0)) fail("epsilon_ref must be positive");
  double scale = std::max(1.0, state.deviation.cwiseAbs().maxCoeff());
  double herm = (state.deviation - state.deviation.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-12 * scale) fail("state deviation is not Hermitian");
  if (std::abs(state.deviation.trace()) > 1e-12 * scale * dim) {
    fail("state deviation is not traceless");
  }
}

SpinState make_state(MatrixXcd deviation, int dim, double epsilon_ref) {
  SpinState state{std::move(deviation), epsilon_ref};
  validate_state(state, dim);
  return state;
}

SpinState thermal_state(const SpinSystem& system) {
  const int dim = system.dim();
  MatrixXcd dev = MatrixXcd::Zero(dim, dim);
  for (int r = 0; r < dim; ++r) {
    double v = 0.0;
    for (int i = 0; i < system.size(); ++i) {
      v += system.nucleus(i).gamma_rel * 0.5 * system.sign_of(r, i);
    }
    dev(r, r) = v;
  }
  return SpinState{std::move(dev), 1.0};
}

VectorXd polarizations(const SpinSystem& system, const SpinState& state) {
  const int n = system.size();
  const int dim = system.dim();
  VectorXd eps = VectorXd::Zero(n);
  for (int r = 0; r < dim; ++r) {
    double pop = state.deviation(r, r).real();
    for (int i = 0; i < n; ++i) eps(i) += pop * system.sign_of(r, i);
  }
  // eps_i = 2 tr(dev Iz_i) / 2^(n-1); the sign sum above is 2 tr(dev Iz_i).
  return eps / static_cast<double>(1 << (n - 1));
}

MatrixXcd single_spin_operator(int n_spins, int spin, char axis) {
  if (n_spins < 1 || n_spins > kMaxSpins) fail("n_spins out of range");
  if (spin < 0 || spin >= n_spins) fail("spin index out of range");
  const int dim = 1 << n_spins;
  const int stride = 1 << (n_spins - 1 - spin);
  MatrixXcd op = MatrixXcd::Zero(dim, dim);
  const complexd half(0.5, 0.0);
  const complexd half_i(0.0, 0.5);
  for (int r = 0; r < dim; ++r) {
    bool up = ((r / stride) % 2) == 0;
    switch (axis) {
      case 'x':
        op(r, up ? r + stride : r - stride) = half;
        break;
      case 'y':
        // <up|Iy|down> = -i/2, <down|Iy|up> = +i/2
        op(r, up ? r + stride : r - stride) = up ? -half_i : half_i;
        break;
      case 'z':
        op(r, r) = up ? half : -half;
        break;
      default:
        fail("axis must be one of x, y, z");
    }
  }
  return op;
}

double operator_coefficient(const MatrixXcd& a, const MatrixXcd& op) {
  complexd num = (op.adjoint() * a).trace();
  double den = (op.adjoint() * op).trace().real();
  return num.real() / den;
}

}  // namespace spincool::core
