#pragma once

#include <vector>

namespace gcomp {

// Gauss-Hermite rule: integral of exp(-x^2) f(x) dx ~= sum_i weights[i] *
// f(nodes[i]). Nodes ascending; weights sum to sqrt(pi).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussHermite gauss_hermite(int n);

// Standard normal CDF.
double normal_cdf(double z);

}  // namespace gcomp
