#pragma once

#include <cstdint>
#include <vector>

#include "gcomp/dataset.hpp"
#include "gcomp/posterior.hpp"
#include "gcomp/rng.hpp"

namespace gcomp {

// Mean and SD of the missing-cell partial sum
// sum_{c in M0} gamma_c (theta_{1,c} - theta_{0,c}).
struct CltMoments {
  double mu = 0.0;
  double sigma = 0.0;
  std::uint64_t m0_size = 0;
};

// Exact moments of the missing-cell partial sum, using the closed-form
// variance algebra restricted to M0 (all a_c = 0 there, so the pairwise
// Dirichlet covariance is the constant -eps^2 / (a0^2 (a0+1))).
CltMoments clt_moments_missing(const OutcomePosterior& op,
                               const GammaPosterior& gp, const CellTable& t);

// Effect sampling with the missing-cell sum replaced by one Normal(mu, sigma)
// draw. Per draw: the Dirichlet over observed codes plus one aggregated
// remainder component with parameter eps*|M0| (whose weight is discarded in
// favor of the Normal term), Betas for observed cells only. Totals outside
// [-1, 1] are clamped and counted in EffectEstimate::clamped_draws.
EffectEstimate sample_effect_clt(const OutcomePosterior& op,
                                 const GammaPosterior& gp, const CellTable& t,
                                 std::int64_t draws, RandomStream rng);

// Uniform sample (without replacement) of missing confounder codes, with the
// Dirichlet mass reweighting that keeps total missing mass at eps*|M0|.
struct MissingSample {
  std::vector<std::uint32_t> codes;  // R, ascending, disjoint from M1
  double epsilon_prime = 0.0;        // eps * |M0| / |R|
  double scale = 1.0;                // |M0| / |R|
};

// r_size above |M0| is clamped to |M0| (the approximation is then exact).
// Codes are drawn by rejection against M1 membership unless M0 is a
// minority of all codes, in which case M0 is enumerated directly.
MissingSample sample_missing_cells(const CellTable& t, std::int64_t r_size,
                                   double epsilon, RandomStream rng);

// Effect sampling over M1 plus the sampled codes R only. R cells use the
// upweighted Dirichlet parameter eps' and Beta parameters scaled by
// |M0|/|R|, which preserves each missing cell's posterior mean. With
// R = M0 the draw sequence is identical to sample_effect under the same
// stream.
EffectEstimate sample_effect_random(const OutcomePosterior& op,
                                    const GammaPosterior& gp,
                                    const CellTable& t,
                                    const MissingSample& ms,
                                    std::int64_t draws, RandomStream rng);

}  // namespace gcomp
