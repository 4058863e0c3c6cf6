#include "gcomp/approx.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "gcomp/errors.hpp"
#include "gcomp/parallel.hpp"
#include "sampling_detail.hpp"

namespace gcomp {

namespace {

void check_inputs(const OutcomePosterior& op, const GammaPosterior& gp,
                  const CellTable& t) {
  if (op.p() != gp.p() || op.p() != t.p()) {
    throw ModelError("posterior components disagree on p");
  }
}

std::uint64_t require_missing(const CellTable& t) {
  const std::uint64_t m0 = t.missing_code_count();
  if (m0 == 0) {
    throw ModelError(
        "no missing confounder codes: nothing to approximate, use the full "
        "sampler");
  }
  return m0;
}

}  // namespace

CltMoments clt_moments_missing(const OutcomePosterior& op,
                               const GammaPosterior& gp, const CellTable& t) {
  check_inputs(op, gp, t);
  const std::uint64_t m0 = require_missing(t);
  if (op.p() > kMaxEnumerableP) {
    throw ModelError("missing-cell enumeration infeasible above p = " +
                     std::to_string(kMaxEnumerableP) +
                     "; use the random-sample approximation");
  }

  const double eps = gp.epsilon();
  const double a0 = gp.a0();
  const double denom = a0 * a0 * (a0 + 1.0);
  const double eg = eps / a0;                    // E[gamma_c], a_c = 0
  const double vg = eps * (a0 - eps) / denom;    // V[gamma_c]

  double mu = 0.0;
  double sum_v = 0.0;
  double s = 0.0;
  double q = 0.0;

  const auto& m1 = t.observed_codes();
  const std::uint64_t codes = t.num_codes();
  std::size_t idx = 0;
  for (std::uint64_t c = 0; c < codes; ++c) {
    const auto code = static_cast<std::uint32_t>(c);
    if (idx < m1.size() && m1[idx] == code) {
      ++idx;
      continue;
    }
    const BetaParams p1 = op.prior_params({1, code});
    const BetaParams p0 = op.prior_params({0, code});
    const double eth = p1.mean() - p0.mean();
    const double vth = p1.variance() + p0.variance();
    mu += eg * eth;
    sum_v += vg * vth + vg * eth * eth + vth * eg * eg;
    const double x = eps * eth;
    s += x;
    q += x * x;
  }

  const double var = sum_v - (s * s - q) / denom;
  return CltMoments{mu, std::sqrt(std::max(0.0, var)), m0};
}

EffectEstimate sample_effect_clt(const OutcomePosterior& op,
                                 const GammaPosterior& gp, const CellTable& t,
                                 std::int64_t draws, RandomStream rng) {
  check_inputs(op, gp, t);
  if (draws < 1) throw DataError("draw count must be positive");
  const CltMoments moments = clt_moments_missing(op, gp, t);

  const auto& m1 = t.observed_codes();
  const double remainder_shape =
      gp.epsilon() * static_cast<double>(moments.m0_size);

  EffectEstimate est;
  est.method = "PSM-CLT";
  est.draws.resize(static_cast<std::size_t>(draws));

  const std::uint64_t n_chunks = static_cast<std::uint64_t>(
      (draws + detail::kDrawChunk - 1) / detail::kDrawChunk);
  std::vector<std::int64_t> chunk_clamped(n_chunks, 0);

  parallel_for_chunks(n_chunks, [&](std::uint64_t k) {
    RandomStream stream = rng.child(k);
    const std::int64_t lo = static_cast<std::int64_t>(k) * detail::kDrawChunk;
    const std::int64_t hi = std::min(draws, lo + detail::kDrawChunk);
    for (std::int64_t d = lo; d < hi; ++d) {
      detail::ContrastAccumulator acc;
      for (const std::uint32_t code : m1) {
        const double lg = stream.log_gamma_variate(gp.concentration(code));
        const BetaParams a1 = op.params({1, code});
        const BetaParams a0p = op.params({0, code});
        const double t1 = sample_beta(a1.alpha, a1.beta, stream);
        const double t0 = sample_beta(a0p.alpha, a0p.beta, stream);
        acc.add(lg, t1 - t0);
      }
      // Aggregated remainder keeps the M1 weights' marginal law; its own
      // weight is replaced by the Normal approximation of the M0 sum.
      acc.add_weight_only(stream.log_gamma_variate(remainder_shape));
      const double z = stream.normal();
      double value = acc.value() + moments.mu + moments.sigma * z;
      if (value < -1.0 || value > 1.0) {
        value = std::clamp(value, -1.0, 1.0);
        ++chunk_clamped[k];
      }
      est.draws[static_cast<std::size_t>(d)] = value;
    }
  });

  for (const std::int64_t c : chunk_clamped) est.clamped_draws += c;
  est.mean = est.sample_mean();
  est.sd = est.sample_sd();
  return est;
}

MissingSample sample_missing_cells(const CellTable& t, std::int64_t r_size,
                                   double epsilon, RandomStream rng) {
  if (!(epsilon > 0.0)) throw DataError("epsilon must be positive");
  const std::uint64_t m0 = require_missing(t);
  if (r_size < 1) throw DataError("sample size must be positive");
  const auto r = static_cast<std::uint64_t>(
      std::min<std::int64_t>(r_size, static_cast<std::int64_t>(m0)));

  MissingSample ms;
  ms.codes.reserve(r);
  const std::uint64_t codes = t.num_codes();

  if (m0 < codes / 2) {
    // Dense data: enumerate M0 and partially shuffle.
    std::vector<std::uint32_t> missing;
    missing.reserve(m0);
    const auto& m1 = t.observed_codes();
    std::size_t idx = 0;
    for (std::uint64_t c = 0; c < codes; ++c) {
      const auto code = static_cast<std::uint32_t>(c);
      if (idx < m1.size() && m1[idx] == code) {
        ++idx;
      } else {
        missing.push_back(code);
      }
    }
    for (std::uint64_t i = 0; i < r; ++i) {
      const std::uint64_t j = i + rng.uniform_below(m0 - i);
      std::swap(missing[i], missing[j]);
      ms.codes.push_back(missing[i]);
    }
  } else {
    // Sparse data: rejection against the observed-code set; expected
    // attempts per draw stay below 2.
    std::unordered_set<std::uint32_t> chosen;
    chosen.reserve(r * 2);
    while (ms.codes.size() < r) {
      const auto code = static_cast<std::uint32_t>(rng.uniform_below(codes));
      if (t.observed(code) || !chosen.insert(code).second) continue;
      ms.codes.push_back(code);
    }
  }

  std::sort(ms.codes.begin(), ms.codes.end());
  ms.scale = static_cast<double>(m0) / static_cast<double>(r);
  ms.epsilon_prime = epsilon * ms.scale;
  return ms;
}

EffectEstimate sample_effect_random(const OutcomePosterior& op,
                                    const GammaPosterior& gp,
                                    const CellTable& t,
                                    const MissingSample& ms,
                                    std::int64_t draws, RandomStream rng) {
  check_inputs(op, gp, t);
  if (draws < 1) throw DataError("draw count must be positive");
  if (ms.codes.empty()) throw DataError("missing-cell sample is empty");

  const auto& m1 = t.observed_codes();
  const double scale = ms.scale;
  const double eps_prime = ms.epsilon_prime;

  // Merged ascending walk over M1 and R; with R = M0 this visits every code
  // exactly as the full sampler does, draw for draw.
  auto for_each = [&](auto&& visit) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < m1.size() || j < ms.codes.size()) {
      detail::MixtureCell cell;
      if (j >= ms.codes.size() || (i < m1.size() && m1[i] < ms.codes[j])) {
        const std::uint32_t code = m1[i++];
        cell.dir_shape = gp.concentration(code);
        cell.arm1 = op.params({1, code});
        cell.arm0 = op.params({0, code});
      } else {
        const std::uint32_t code = ms.codes[j++];
        cell.dir_shape = eps_prime;
        BetaParams p1 = op.prior_params({1, code});
        BetaParams p0 = op.prior_params({0, code});
        cell.arm1 = {scale * p1.alpha, scale * p1.beta};
        cell.arm0 = {scale * p0.alpha, scale * p0.beta};
      }
      visit(cell);
    }
  };

  EffectEstimate est;
  est.method = "PSM-Random";
  est.draws = detail::sample_weighted_contrast(draws, rng, for_each);
  est.mean = est.sample_mean();
  est.sd = est.sample_sd();
  return est;
}

}  // namespace gcomp
