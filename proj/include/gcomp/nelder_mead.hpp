#pragma once

#include <functional>
#include <span>
#include <vector>

namespace gcomp {

struct NelderMeadOptions {
  double diameter_tol = 1e-8;   // stop when the simplex collapses
  // Stop when the best value drops below this; applies to nonnegative
  // (residual-style) objectives only.
  double objective_tol = 1e-10;
  int max_iterations = 2000;
  double initial_step = 0.25;   // simplex edge length around the start
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Downhill simplex minimization with reflection 1, expansion 2,
// contraction 0.5, shrink 0.5. Returns the best point found; `converged`
// is false when the iteration cap is reached first.
NelderMeadResult nelder_mead(
    const std::function<double(std::span<const double>)>& objective,
    std::span<const double> start, const NelderMeadOptions& options = {});

}  // namespace gcomp
