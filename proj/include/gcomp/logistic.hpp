#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gcomp/dataset.hpp"

namespace gcomp {

inline double expit(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
inline double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// Main-effects logistic outcome model: logit P(Y=1 | x, c) =
// alpha0 + alpha1*x + psi.c
struct LogisticModel {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  std::vector<double> psi;

  int p() const { return static_cast<int>(psi.size()); }
};

// Cell probability from the model, clamped strictly inside (0, 1) so
// downstream Beta parameters stay positive even for saturated fits.
double predict_cell(const LogisticModel& m, CellKey key);

struct FitOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;  // convergence: max |score component|
  double ridge = 0.0;       // L2 stabilizer
};

struct WeightedCell {
  CellKey key;
  double weight = 0.0;   // >= 0
  double outcome = 0.0;  // fractional success proportion in [0, 1]
};

// Streaming cell source: invokes the visitor once per cell, in a stable
// order, every time it is called. Lets callers fit over enumerated cell
// spaces too large to materialize.
using CellVisitor =
    std::function<void(int x, std::uint32_t code, double weight, double outcome)>;
using CellSource = std::function<void(const CellVisitor&)>;

// IRLS fit of the weighted Bernoulli likelihood
//   sum_cells w * [q log pi + (1-q) log(1-pi)] - ridge/2 |beta|^2
// with step-halving when a step lowers the penalized likelihood.
// A non-convergent ridge-free fit is retried once with ridge = 1e-6
// (quasi-separation); failure after that throws ModelError.
// `init` seeds the coefficients (warm start) when non-null.
LogisticModel fit_cells(int p, const CellSource& source,
                        const FitOptions& opts = {},
                        const LogisticModel* init = nullptr);

LogisticModel fit_main_effects(const BinaryDataset& d,
                               const FitOptions& opts = {});

LogisticModel fit_weighted(std::span<const WeightedCell> cells, int p,
                           const FitOptions& opts = {});

}  // namespace gcomp
