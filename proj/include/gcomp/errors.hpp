#pragma once

#include <stdexcept>
#include <string>

namespace gcomp {

// Malformed or inconsistent input data (CSV schema, non-binary tokens,
// empty datasets, invalid hyperparameters).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Estimation failures: divergent fits, infeasible posterior requests.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Calibration search exhausted its restarts. Carries the best residuals
// reached so callers can report how close the search got.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, double att_residual,
                   double meb_residual)
      : std::runtime_error(what),
        att_residual(att_residual),
        meb_residual(meb_residual) {}

  double att_residual;
  double meb_residual;
};

}  // namespace gcomp
