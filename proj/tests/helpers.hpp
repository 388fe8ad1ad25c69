#pragma once

// Small systems shared by the test suites.

#include <vector>

#include "spincool/core.hpp"

namespace testutil {

using spincool::core::JCoupling;
using spincool::core::Species;
using spincool::core::SpinDef;
using spincool::core::SpinSystem;

// Two-spin heteronuclear pair; shifts zero so J is the only coherent term.
inline SpinSystem hc_pair(double j_hz = 140.0, double t1h_s = 2.0, double t1c_s = 10.0) {
  std::vector<SpinDef> spins = {
      {"Ha", Species::H1, 0.0, t1h_s, t1h_s / 3.0, 0.0},
      {"Cx", Species::C13, 0.0, t1c_s, t1c_s / 3.0, 0.0},
  };
  std::vector<JCoupling> js = {{"Ha", "Cx", j_hz}};
  return spincool::core::build_spin_system(spins, js, 297.0);
}

// Four-spin glycine-style topology: two equivalent protons on C2, C2 bonded
// to C1, protons not coupled to C1.
inline SpinSystem glycine_like() {
  std::vector<SpinDef> spins = {
      {"H2a", Species::H1, 0.0, 2.72, 2.72 / 3.0, 0.0},
      {"H2b", Species::H1, 0.0, 2.72, 2.72 / 3.0, 0.0},
      {"C1", Species::C13, 300.0, 31.6, 31.6 / 3.0, 0.0},
      {"C2", Species::C13, -300.0, 3.75, 3.75 / 3.0, 0.0},
  };
  std::vector<JCoupling> js = {
      {"H2a", "C2", 139.7},
      {"H2b", "C2", 139.7},
      {"C1", "C2", 52.72},
  };
  return spincool::core::build_spin_system(spins, js, 297.0);
}

// Five-spin glutamate-style topology: one proton on C2 (plus two bystander
// protons), C2 bonded to C1.
inline SpinSystem glutamate_like() {
  std::vector<SpinDef> spins = {
      {"H2", Species::H1, 0.0, 1.29, 1.29 / 3.0, 0.0},
      {"H3", Species::H1, 0.0, 1.001, 1.001 / 3.0, 0.0},
      {"H4", Species::H1, 0.0, 1.281, 1.281 / 3.0, 0.0},
      {"C1", Species::C13, 300.0, 13.03, 13.03 / 3.0, 0.0},
      {"C2", Species::C13, -300.0, 1.96, 1.96 / 3.0, 0.0},
  };
  std::vector<JCoupling> js = {
      {"H2", "C2", 146.2},
      {"C1", "C2", 53.41},
  };
  return spincool::core::build_spin_system(spins, js, 297.0);
}

inline SpinSystem single_c13(double t1_s = 10.0) {
  return spincool::core::build_spin_system({{"Cx", Species::C13, 0.0, t1_s, t1_s / 3.0, 0.0}},
                                           {}, 297.0);
}

}  // namespace testutil
