#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "gcomp/dgp.hpp"

namespace gcomp {

// Flat key-value scenario document describing one simulation setting.
// Coefficient vectors are drawn once from the stated uniform ranges using
// `seed`, so a scenario file pins its DGP exactly. The lambda/achieved
// fields appear after calibration.
//
//   p = 8
//   delta_t = 0.3
//   meb = -0.1
//   rho_c = 0.3
//   beta0 = -1
//   beta1_range = -2 2
//   beta2_range = -2 2
//   omega_range = -2 2
//   seed = 42
//   lambda0 = ...          (added by calibrate)
//   lambda1 = ...
//   achieved_delta_t = ...
//   achieved_meb = ...
struct ScenarioFile {
  int p = 0;
  double delta_t = 0.3;
  double meb = 0.1;
  double rho_c = 0.3;
  double beta0 = -1.0;
  double beta1_lo = -2.0, beta1_hi = 2.0;
  double beta2_lo = -2.0, beta2_hi = 2.0;
  double omega_lo = -2.0, omega_hi = 2.0;
  std::uint64_t seed = 0;
  std::optional<double> lambda0;
  std::optional<double> lambda1;
  std::optional<double> achieved_delta_t;
  std::optional<double> achieved_meb;

  bool calibrated() const {
    return lambda0.has_value() && lambda1.has_value();
  }
};

ScenarioFile read_scenario(std::istream& in);
void write_scenario(const ScenarioFile& s, std::ostream& out);

// Draws beta1, beta2, omega from the stated ranges with the scenario seed,
// applies lambda (0 when absent), and derives mu1.
DgpSpec build_spec(const ScenarioFile& s);

}  // namespace gcomp
