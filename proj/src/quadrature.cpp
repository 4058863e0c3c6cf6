#include "gcomp/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace gcomp {

namespace {

// Evaluates the orthonormal Hermite polynomial of degree n at x (weight
// exp(-x^2)) and the degree n-1 value needed for the derivative.
void hermite_pair(int n, double x, double& pn, double& pn_1) {
  double p0 = 0.7511255444649425;  // pi^{-1/4}
  double p1 = std::sqrt(2.0) * x * p0;
  for (int k = 2; k <= n; ++k) {
    const double p2 = x * std::sqrt(2.0 / k) * p1 -
                      std::sqrt((k - 1.0) / k) * p0;
    p0 = p1;
    p1 = p2;
  }
  pn = p1;
  pn_1 = p0;
}

}  // namespace

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  GaussHermite rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);

  const int m = (n + 1) / 2;
  double z = 0.0;
  double z_prev = 0.0;
  double z_prev2 = 0.0;

  for (int i = 0; i < m; ++i) {
    // Initial guesses (largest root first), standard asymptotics.
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) -
          1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(n, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * z_prev2;
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * z_prev2;
    } else {
      z = 2.0 * z - z_prev2;
    }

    double pn = 0.0;
    double pn_1 = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      hermite_pair(n, z, pn, pn_1);
      const double deriv = std::sqrt(2.0 * n) * pn_1;
      const double dz = pn / deriv;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    hermite_pair(n, z, pn, pn_1);
    const double deriv = std::sqrt(2.0 * n) * pn_1;

    rule.nodes[i] = -z;  // fill ascending: most negative root first
    rule.nodes[n - 1 - i] = z;
    const double w = 2.0 / (deriv * deriv);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;

    z_prev2 = z_prev;
    z_prev = z;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

}  // namespace gcomp
