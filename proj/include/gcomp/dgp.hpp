#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gcomp/dataset.hpp"
#include "gcomp/rng.hpp"

namespace gcomp {

// Simulation truth for correlated binary confounders, a confounded binary
// treatment, and a binary outcome with treatment-confounder interactions:
//
//   C    equicorrelated (rho_c) thresholded latent Gaussians, P(C_j=1)=0.5
//   X|C  logit E(X|C) = omega.C
//   Y|X,C  logit E(Y|X=0,C) = beta0 + beta1.(C-mu1) + (beta2+lambda1).(C-mu1)
//          logit E(Y|X=1,C) = beta0 + lambda0 + beta1.(C-mu1)
//                             + (beta2-lambda1).(C-mu1)
//
// lambda1 is a scalar shift applied to every component of beta2; lambda0
// shifts the treated arm. mu1 = E(C|X=1) is derived, not free.
struct DgpSpec {
  int p = 0;
  double beta0 = 0.0;
  std::vector<double> beta1;
  std::vector<double> beta2;
  std::vector<double> omega;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double rho_c = 0.0;
  std::vector<double> mu1;  // derived; empty until finalized

  void validate(bool require_mu1 = false) const;
};

// Confounder counts beyond this use Monte Carlo truth instead of exact
// enumeration + quadrature.
inline constexpr int kMaxExactTruthP = 24;

// Exact confounder-code distribution. Exchangeability makes f(c) a function
// of popcount(c) alone; the treated conditional f(c | X=1) also needs the
// omega tilt and is exposed per code.
class CellDistribution {
 public:
  CellDistribution(int p, double rho, std::span<const double> omega);

  int p() const { return p_; }
  double f(std::uint32_t code) const {
    return f_count_[static_cast<std::size_t>(std::popcount(code))];
  }
  double f_treated(std::uint32_t code) const {
    return f(code) * expit_omega(code) / treated_prob_;
  }
  double treated_prob() const { return treated_prob_; }
  double omega_dot(std::uint32_t code) const {
    return lut_lo_[code & lo_mask_] + lut_hi_[code >> lo_bits_];
  }
  double expit_omega(std::uint32_t code) const;
  const std::vector<double>& f_by_count() const { return f_count_; }

 private:
  int p_ = 0;
  std::vector<double> f_count_;
  std::vector<double> lut_lo_, lut_hi_;
  int lo_bits_ = 0;
  std::uint32_t lo_mask_ = 0;
  double treated_prob_ = 0.5;
};

// One-factor Gauss-Hermite integration of the thresholded-Gaussian cell
// probabilities; throws ModelError when the 64- vs 128-node check disagrees
// beyond 1e-10 or when p > kMaxExactTruthP.
CellDistribution cell_probabilities(const DgpSpec& spec);

// mu1_j = E(C_j | X = 1). Exact for p <= kMaxExactTruthP, Monte Carlo with a
// fixed internal seed beyond that.
std::vector<double> derive_mu1(const DgpSpec& spec);

// Copy of the spec with mu1 populated.
DgpSpec finalized(DgpSpec spec);

// n draws of the confounder vector, packed little-endian.
std::vector<std::uint32_t> simulate_confounders(const DgpSpec& spec,
                                                std::int64_t n,
                                                RandomStream rng);

// Full (Y, X, C) simulation. Requires mu1 populated. Deterministic for a
// given stream regardless of thread count (fixed-size row blocks).
BinaryDataset simulate_dataset(const DgpSpec& spec, std::int64_t n,
                               RandomStream rng);

// Outcome-model linear predictor for arm x at confounder code c.
double outcome_eta(const DgpSpec& spec, int x, std::uint32_t code);

// Exact (or Monte Carlo beyond kMaxExactTruthP) effect on the treated:
// sum_c f(c|X=1) [expit(eta_1(c)) - expit(eta_0(c))].
double true_att(const DgpSpec& spec);

// Population bias of the best-fitting main-effects logistic model: the
// plug-in treated-arm contrast of g minus the true effect. g maximizes the
// exact expected log-likelihood over the enumerated cell distribution.
double population_meb(const DgpSpec& spec);

struct TruthSummary {
  double delta_t = 0.0;
  double meb = 0.0;
  std::vector<double> f_by_count;  // empty when truth is Monte Carlo
  std::vector<double> mu1;
  double mc_se_delta_t = 0.0;  // zero when exact
  double mc_se_meb = 0.0;
};

TruthSummary truth_summary(const DgpSpec& spec);

struct CalibrationTarget {
  double delta_t = 0.3;
  double meb = 0.1;
  double tolerance = 0.005;
  int max_restarts = 20;
};

struct CalibrationResult {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double achieved_delta_t = 0.0;
  double achieved_meb = 0.0;
  int restarts_used = 0;
};

// Nelder-Mead search for (lambda0, lambda1) hitting the target effect and
// main-effects bias. Starts at (0, 0); on failure restarts from fresh
// uniform(-2, 2)^2 points up to target.max_restarts, then throws
// CalibrationError carrying the best residuals.
CalibrationResult calibrate(const DgpSpec& base, const CalibrationTarget& target,
                            RandomStream rng);

}  // namespace gcomp
