#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gcomp/dataset.hpp"
#include "gcomp/logistic.hpp"
#include "gcomp/rng.hpp"

namespace gcomp {

struct BetaParams {
  double alpha = 0.0;
  double beta = 0.0;

  double mean() const { return alpha / (alpha + beta); }
  double variance() const {
    const double s = alpha + beta;
    return alpha * beta / (s * s * (s + 1.0));
  }
};

enum class OutcomeModelKind {
  kSaturated,           // independent Beta(phi, phi) cell priors
  kPartiallySaturated,  // cell priors carry parametric pseudo-observations
};

// Per-cell Beta posterior over the outcome probabilities theta_{x,c}.
// Observed cells come from the conjugate update; cells absent from the data
// fall back to the prior rule. Immutable after construction.
class OutcomePosterior {
 public:
  static OutcomePosterior saturated(const CellTable& t, double phi);
  static OutcomePosterior partially_saturated(const CellTable& t,
                                              const LogisticModel& g,
                                              const Hyperparams& h);

  OutcomeModelKind kind() const { return kind_; }
  std::int64_t n() const { return n_; }
  int p() const { return p_; }
  std::uint64_t num_codes() const { return std::uint64_t{1} << p_; }
  double phi() const { return phi_; }
  double b() const { return b_; }
  // Pseudo-observation mass per cell: b*n / 2^(p+1).
  double prior_weight() const { return prior_weight_; }

  // Parametric cell estimate; 0.5 in saturated mode.
  double theta_hat(CellKey key) const;

  // Posterior Beta parameters for any of the 2^(p+1) cells.
  BetaParams params(CellKey key) const;
  // Prior-rule parameters, bypassing the observed-cell lookup.
  BetaParams prior_params(CellKey key) const;

  // True when every missing cell shares identical symmetric parameters, so
  // enumeration of the missing set is unnecessary for moments.
  bool missing_cells_symmetric() const {
    return kind_ == OutcomeModelKind::kSaturated || prior_weight_ == 0.0;
  }

  // Confounder codes observed in the data (ascending) and membership.
  const std::vector<std::uint32_t>& observed_codes() const { return m1_; }
  std::uint64_t missing_code_count() const { return num_codes() - m1_.size(); }

  const LogisticModel* model() const {
    return model_.has_value() ? &*model_ : nullptr;
  }

 private:
  OutcomePosterior() = default;
  void build_lut();

  OutcomeModelKind kind_ = OutcomeModelKind::kSaturated;
  std::int64_t n_ = 0;
  int p_ = 0;
  double phi_ = 1.0;
  double b_ = 0.0;
  double prior_weight_ = 0.0;
  std::unordered_map<std::uint64_t, CellCounts> cells_;
  std::vector<std::uint32_t> m1_;
  std::optional<LogisticModel> model_;
  // Split-table lookup for psi.c so theta_hat is O(1) in sampling loops.
  std::vector<double> dot_lo_, dot_hi_;
  int lo_bits_ = 0;
};

OutcomePosterior bsat_posterior(const CellTable& t, double phi);
OutcomePosterior psm_posterior(const CellTable& t, const LogisticModel& g,
                               const Hyperparams& h);

// Total pseudo-data mass (prior pseudo-observations plus the (1-b)-scaled
// likelihood) summed over all cells, net of the Beta(phi, phi) hyperprior.
// Equals n by construction; computed without enumerating cells.
double pseudo_count_identity(const CellTable& t, const Hyperparams& h,
                             const LogisticModel& g);

enum class Estimand { kAtt, kAte };

// Dirichlet posterior over the confounder-code weights gamma: Dir(a + eps)
// with a_c counting treated rows (ATT) or all rows (ATE).
class GammaPosterior {
 public:
  GammaPosterior(int p, double epsilon, Estimand estimand,
                 std::unordered_map<std::uint32_t, std::int64_t> counts);

  Estimand estimand() const { return estimand_; }
  double epsilon() const { return epsilon_; }
  int p() const { return p_; }
  std::uint64_t num_codes() const { return std::uint64_t{1} << p_; }

  // Normalizer: sum_c a_c + 2^p * epsilon.
  double a0() const { return a0_; }
  std::int64_t count(std::uint32_t code) const;
  double concentration(std::uint32_t code) const {
    return static_cast<double>(count(code)) + epsilon_;
  }
  const std::unordered_map<std::uint32_t, std::int64_t>& counts() const {
    return counts_;
  }

 private:
  Estimand estimand_ = Estimand::kAtt;
  double epsilon_ = 1.0;
  int p_ = 0;
  double a0_ = 0.0;
  std::unordered_map<std::uint32_t, std::int64_t> counts_;
};

GammaPosterior dirichlet_posterior(const CellTable& t, double epsilon,
                                   Estimand estimand);

// Posterior summary of the treatment effect.
struct EffectEstimate {
  std::string method;
  std::vector<double> draws;
  double mean = 0.0;  // closed form when available, else sample mean
  double sd = 0.0;
  bool closed_form_moments = false;
  std::int64_t clamped_draws = 0;  // CLT draws pulled back into [-1, 1]

  double sample_mean() const;
  double sample_sd() const;
  double quantile(double q) const;  // empirical quantile of the draws
};

// Cells beyond this confounder count cannot be enumerated directly; use the
// approximations in approx.hpp.
inline constexpr int kMaxEnumerableP = 24;

// Full Monte Carlo sampling of the standardized effect: each draw samples
// the Dirichlet over all 2^p codes and independent Betas for all 2^(p+1)
// cells. Draws are deterministic given (rng, draws) for any thread count.
EffectEstimate sample_effect(const OutcomePosterior& op,
                             const GammaPosterior& gp, std::int64_t draws,
                             RandomStream rng);

// Exact posterior mean of the effect. Missing cells are aggregated in
// closed form when their parameters are cell-constant; otherwise all codes
// are enumerated (p <= kMaxEnumerableP).
double closed_form_mean(const OutcomePosterior& op, const GammaPosterior& gp);

// Exact posterior variance via the variance/covariance decomposition with
// the pairwise Dirichlet covariances collapsed to an O(2^p) pass.
double closed_form_variance(const OutcomePosterior& op,
                            const GammaPosterior& gp);

// Plug-in effect of the parametric model alone, weighting cells by their
// empirical frequencies (treated rows for ATT, all rows for ATE).
double parametric_effect(const CellTable& t, const LogisticModel& g,
                         Estimand estimand);

}  // namespace gcomp
