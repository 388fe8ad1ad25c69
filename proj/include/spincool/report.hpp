#pragma once

// Result records shared by the cooling primitives and the analysis helpers.

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace spincool {

// Outcome of a cooling run.  `factors` are per-spin enhancement factors
// (final polarization over the same spin's equilibrium polarization);
// `spin_temperatures` hold t_equilibrium/factor where the factor is
// positive and NaN elsewhere.  Entropy fields use the quadratic proxy
// (sum of squared per-spin polarizations); `trajectory` carries the
// factors after each completed round.
struct CoolingReport {
  Eigen::VectorXd factors;
  double entropy_before = 0.0;
  double entropy_after = 0.0;
  Eigen::VectorXd spin_temperatures;
  bool bypassed_shannon = false;
  std::vector<Eigen::VectorXd> trajectory;
};

// Lifetime ratios T1(computation)/T1(reset) keyed by (computation, reset).
struct RatioTable {
  std::map<std::pair<std::string, std::string>, double> entries;
};

}  // namespace spincool
