#include "gcomp/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gcomp {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

}  // namespace

NelderMeadResult nelder_mead(
    const std::function<double(std::span<const double>)>& objective,
    std::span<const double> start, const NelderMeadOptions& options) {
  const std::size_t dim = start.size();
  if (dim == 0) throw std::invalid_argument("nelder_mead: empty start point");

  std::vector<std::vector<double>> simplex(dim + 1,
                                           std::vector<double>(start.begin(),
                                                               start.end()));
  for (std::size_t i = 0; i < dim; ++i) {
    simplex[i + 1][i] += options.initial_step;
  }
  std::vector<double> values(dim + 1);
  for (std::size_t i = 0; i <= dim; ++i) values[i] = objective(simplex[i]);

  std::vector<std::size_t> order(dim + 1);
  std::vector<double> centroid(dim), reflected(dim), trial(dim);

  NelderMeadResult result;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter;
    for (std::size_t i = 0; i <= dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order[0];
    const std::size_t second_worst = order[dim - 1];
    const std::size_t worst = order[dim];

    // Target stop for nonnegative (residual-style) objectives; a negative
    // value says nothing about proximity to a minimum.
    if (values[best] >= 0.0 && values[best] < options.objective_tol) {
      result.converged = true;
      break;
    }
    double diameter = 0.0;
    for (std::size_t i = 0; i <= dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        diameter = std::max(diameter,
                            std::abs(simplex[i][j] - simplex[best][j]));
      }
    }
    if (diameter < options.diameter_tol) {
      result.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < dim; ++j) centroid[j] += simplex[i][j];
    }
    for (std::size_t j = 0; j < dim; ++j) centroid[j] /= double(dim);

    for (std::size_t j = 0; j < dim; ++j) {
      reflected[j] = centroid[j] + kReflect * (centroid[j] - simplex[worst][j]);
    }
    const double f_reflected = objective(reflected);

    if (f_reflected < values[best]) {
      for (std::size_t j = 0; j < dim; ++j) {
        trial[j] = centroid[j] + kExpand * (centroid[j] - simplex[worst][j]);
      }
      const double f_expanded = objective(trial);
      if (f_expanded < f_reflected) {
        simplex[worst] = trial;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second_worst]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }

    if (f_reflected < values[worst]) {
      // outside contraction
      for (std::size_t j = 0; j < dim; ++j) {
        trial[j] = centroid[j] + kContract * (reflected[j] - centroid[j]);
      }
      const double f_trial = objective(trial);
      if (f_trial <= f_reflected) {
        simplex[worst] = trial;
        values[worst] = f_trial;
        continue;
      }
    } else {
      // inside contraction
      for (std::size_t j = 0; j < dim; ++j) {
        trial[j] = centroid[j] + kContract * (simplex[worst][j] - centroid[j]);
      }
      const double f_trial = objective(trial);
      if (f_trial < values[worst]) {
        simplex[worst] = trial;
        values[worst] = f_trial;
        continue;
      }
    }

    // shrink toward the best vertex
    for (std::size_t i = 0; i <= dim; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        simplex[i][j] =
            simplex[best][j] + kShrink * (simplex[i][j] - simplex[best][j]);
      }
      values[i] = objective(simplex[i]);
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= dim; ++i) {
    if (values[i] < values[best]) best = i;
  }
  result.x = simplex[best];
  result.value = values[best];
  return result;
}

}  // namespace gcomp
