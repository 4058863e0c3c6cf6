#include "gcomp/posterior.hpp"

#include <algorithm>
#include <cmath>

#include "gcomp/errors.hpp"
#include "sampling_detail.hpp"

namespace gcomp {

namespace {

void check_compatible(const OutcomePosterior& op, const GammaPosterior& gp) {
  if (op.p() != gp.p()) {
    throw ModelError("outcome and weight posteriors disagree on p");
  }
}

void check_enumerable(int p) {
  if (p > kMaxEnumerableP) {
    throw ModelError("2^" + std::to_string(p) +
                     " cells cannot be enumerated directly; use the CLT or "
                     "random-sample approximation");
  }
}

}  // namespace

OutcomePosterior OutcomePosterior::saturated(const CellTable& t, double phi) {
  if (!(phi > 0.0)) throw DataError("phi must be positive");
  OutcomePosterior op;
  op.kind_ = OutcomeModelKind::kSaturated;
  op.n_ = t.n();
  op.p_ = t.p();
  op.phi_ = phi;
  op.b_ = 0.0;
  op.prior_weight_ = 0.0;
  op.cells_ = t.cells();
  op.m1_ = t.observed_codes();
  return op;
}

OutcomePosterior OutcomePosterior::partially_saturated(const CellTable& t,
                                                       const LogisticModel& g,
                                                       const Hyperparams& h) {
  h.validate();
  if (g.p() != t.p()) {
    throw ModelError("model p does not match table p");
  }
  OutcomePosterior op;
  op.kind_ = OutcomeModelKind::kPartiallySaturated;
  op.n_ = t.n();
  op.p_ = t.p();
  op.phi_ = h.phi;
  op.b_ = h.b;
  // b*n / 2^(p+1) pseudo data points in every cell
  op.prior_weight_ =
      h.b * static_cast<double>(t.n()) * std::exp2(-(t.p() + 1));
  op.cells_ = t.cells();
  op.m1_ = t.observed_codes();
  op.model_ = g;
  op.build_lut();
  return op;
}

void OutcomePosterior::build_lut() {
  lo_bits_ = (p_ + 1) / 2;
  const std::size_t lo_size = std::size_t{1} << lo_bits_;
  const std::size_t hi_size = std::size_t{1} << (p_ - lo_bits_);
  dot_lo_.assign(lo_size, 0.0);
  dot_hi_.assign(hi_size, 0.0);
  const auto& psi = model_->psi;
  for (std::size_t m = 0; m < lo_size; ++m) {
    double dot = 0.0;
    for (int j = 0; j < lo_bits_; ++j) {
      if ((m >> j) & 1u) dot += psi[j];
    }
    dot_lo_[m] = dot;
  }
  for (std::size_t m = 0; m < hi_size; ++m) {
    double dot = 0.0;
    for (int j = lo_bits_; j < p_; ++j) {
      if ((m >> (j - lo_bits_)) & 1u) dot += psi[j];
    }
    dot_hi_[m] = dot;
  }
}

double OutcomePosterior::theta_hat(CellKey key) const {
  if (!model_.has_value()) return 0.5;
  const std::uint32_t lo_mask = (std::uint32_t{1} << lo_bits_) - 1;
  double eta = model_->alpha0 + (key.x != 0 ? model_->alpha1 : 0.0);
  eta += dot_lo_[key.c & lo_mask] + dot_hi_[key.c >> lo_bits_];
  const double pi = expit(eta);
  static const double kLo = std::nextafter(0.0, 1.0);
  static const double kHi = std::nextafter(1.0, 0.0);
  return std::clamp(pi, kLo, kHi);
}

BetaParams OutcomePosterior::prior_params(CellKey key) const {
  if (kind_ == OutcomeModelKind::kSaturated) return {phi_, phi_};
  const double th = theta_hat(key);
  return {phi_ + prior_weight_ * th, phi_ + prior_weight_ * (1.0 - th)};
}

BetaParams OutcomePosterior::params(CellKey key) const {
  const auto it = cells_.find(key.packed());
  if (it == cells_.end()) return prior_params(key);
  const double y = static_cast<double>(it->second.successes);
  const double m = static_cast<double>(it->second.total);
  if (kind_ == OutcomeModelKind::kSaturated) {
    return {phi_ + y, phi_ + (m - y)};
  }
  const double th = theta_hat(key);
  const double like = 1.0 - b_;
  return {phi_ + prior_weight_ * th + like * y,
          phi_ + prior_weight_ * (1.0 - th) + like * (m - y)};
}

OutcomePosterior bsat_posterior(const CellTable& t, double phi) {
  return OutcomePosterior::saturated(t, phi);
}

OutcomePosterior psm_posterior(const CellTable& t, const LogisticModel& g,
                               const Hyperparams& h) {
  return OutcomePosterior::partially_saturated(t, g, h);
}

double pseudo_count_identity(const CellTable& t, const Hyperparams& h,
                             const LogisticModel& g) {
  h.validate();
  if (g.p() != t.p()) throw ModelError("model p does not match table p");
  const double n = static_cast<double>(t.n());
  // sum over all cells of (alpha + beta - 2 phi): the theta_hat terms pair
  // off, leaving b*n spread over 2^(p+1) cells plus the (1-b)-scaled data.
  return h.b * n + (1.0 - h.b) * n;
}

GammaPosterior::GammaPosterior(
    int p, double epsilon, Estimand estimand,
    std::unordered_map<std::uint32_t, std::int64_t> counts)
    : estimand_(estimand), epsilon_(epsilon), p_(p), counts_(std::move(counts)) {
  if (!(epsilon > 0.0)) throw DataError("epsilon must be positive");
  if (p < 0 || p > BinaryDataset::kMaxConfounders) {
    throw DataError("confounder count out of range");
  }
  std::int64_t total = 0;
  for (const auto& [code, count] : counts_) {
    if (count < 0 || (p < 32 && code >= (std::uint64_t{1} << p))) {
      throw DataError("invalid Dirichlet count entry");
    }
    total += count;
  }
  a0_ = static_cast<double>(total) + std::exp2(p) * epsilon_;
}

std::int64_t GammaPosterior::count(std::uint32_t code) const {
  const auto it = counts_.find(code);
  return it == counts_.end() ? 0 : it->second;
}

GammaPosterior dirichlet_posterior(const CellTable& t, double epsilon,
                                   Estimand estimand) {
  if (estimand == Estimand::kAtt) {
    if (t.treated_total() == 0) {
      throw DataError("ATT is undefined: no treated rows in the data");
    }
    return GammaPosterior(t.p(), epsilon, estimand, t.treated_counts());
  }
  std::unordered_map<std::uint32_t, std::int64_t> counts;
  for (const std::uint32_t code : t.observed_codes()) {
    counts[code] = t.total_count(code);
  }
  return GammaPosterior(t.p(), epsilon, estimand, std::move(counts));
}

double EffectEstimate::sample_mean() const {
  if (draws.empty()) return 0.0;
  double total = 0.0;
  for (const double d : draws) total += d;
  return total / static_cast<double>(draws.size());
}

double EffectEstimate::sample_sd() const {
  if (draws.size() < 2) return 0.0;
  const double m = sample_mean();
  double ss = 0.0;
  for (const double d : draws) ss += (d - m) * (d - m);
  return std::sqrt(ss / static_cast<double>(draws.size() - 1));
}

double EffectEstimate::quantile(double q) const {
  if (draws.empty()) throw ModelError("quantile requested without draws");
  std::vector<double> sorted(draws);
  std::sort(sorted.begin(), sorted.end());
  const double pos = std::clamp(q, 0.0, 1.0) *
                     static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

EffectEstimate sample_effect(const OutcomePosterior& op,
                             const GammaPosterior& gp, std::int64_t draws,
                             RandomStream rng) {
  check_compatible(op, gp);
  check_enumerable(op.p());
  if (draws < 1) throw DataError("draw count must be positive");

  const auto& m1 = op.observed_codes();
  const std::uint64_t codes = op.num_codes();
  const double eps = gp.epsilon();

  auto for_each = [&](auto&& visit) {
    std::size_t idx = 0;
    for (std::uint64_t c = 0; c < codes; ++c) {
      const auto code = static_cast<std::uint32_t>(c);
      detail::MixtureCell cell;
      if (idx < m1.size() && m1[idx] == code) {
        cell.dir_shape = gp.concentration(code);
        cell.arm1 = op.params({1, code});
        cell.arm0 = op.params({0, code});
        ++idx;
      } else {
        cell.dir_shape = eps;
        cell.arm1 = op.prior_params({1, code});
        cell.arm0 = op.prior_params({0, code});
      }
      visit(cell);
    }
  };

  EffectEstimate est;
  est.method =
      op.kind() == OutcomeModelKind::kSaturated ? "BSAT" : "PSM";
  est.draws = detail::sample_weighted_contrast(draws, rng, for_each);
  est.mean = closed_form_mean(op, gp);
  est.sd = std::sqrt(std::max(0.0, closed_form_variance(op, gp)));
  est.closed_form_moments = true;
  return est;
}

double closed_form_mean(const OutcomePosterior& op, const GammaPosterior& gp) {
  check_compatible(op, gp);
  const double a0 = gp.a0();

  if (op.missing_cells_symmetric()) {
    // Missing cells have Beta(phi, phi) in both arms: E[theta*] = 0.
    double total = 0.0;
    for (const std::uint32_t code : op.observed_codes()) {
      total += gp.concentration(code) / a0 *
               (op.params({1, code}).mean() - op.params({0, code}).mean());
    }
    return total;
  }

  check_enumerable(op.p());
  const auto& m1 = op.observed_codes();
  const std::uint64_t codes = op.num_codes();
  const double eps = gp.epsilon();
  double total = 0.0;
  std::size_t idx = 0;
  for (std::uint64_t c = 0; c < codes; ++c) {
    const auto code = static_cast<std::uint32_t>(c);
    if (idx < m1.size() && m1[idx] == code) {
      total += gp.concentration(code) / a0 *
               (op.params({1, code}).mean() - op.params({0, code}).mean());
      ++idx;
    } else {
      total += eps / a0 *
               (op.prior_params({1, code}).mean() -
                op.prior_params({0, code}).mean());
    }
  }
  return total;
}

double closed_form_variance(const OutcomePosterior& op,
                            const GammaPosterior& gp) {
  check_compatible(op, gp);
  const double a0 = gp.a0();
  const double denom = a0 * a0 * (a0 + 1.0);

  double sum_v = 0.0;  // sum of V(gamma_c theta*_c)
  double s = 0.0;      // sum of (a_c + eps) E[theta*_c]
  double q = 0.0;      // sum of ((a_c + eps) E[theta*_c])^2

  auto accumulate = [&](double conc, const BetaParams& p1,
                        const BetaParams& p0) {
    const double eg = conc / a0;
    const double vg = conc * (a0 - conc) / denom;
    const double eth = p1.mean() - p0.mean();
    const double vth = p1.variance() + p0.variance();
    sum_v += vg * vth + vg * eth * eth + vth * eg * eg;
    const double x = conc * eth;
    s += x;
    q += x * x;
  };

  if (op.missing_cells_symmetric()) {
    for (const std::uint32_t code : op.observed_codes()) {
      accumulate(gp.concentration(code), op.params({1, code}),
                 op.params({0, code}));
    }
    // Missing cells share Beta(phi, phi) in both arms, so E[theta*] = 0 and
    // each contributes V(gamma)V(theta*) + V(theta*)E[gamma]^2.
    const double m0 = static_cast<double>(op.missing_code_count());
    if (m0 > 0.0) {
      const double eps = gp.epsilon();
      const BetaParams miss{op.phi(), op.phi()};
      const double vth = 2.0 * miss.variance();
      const double eg = eps / a0;
      const double vg = eps * (a0 - eps) / denom;
      sum_v += m0 * (vg * vth + vth * eg * eg);
    }
  } else {
    check_enumerable(op.p());
    const auto& m1 = op.observed_codes();
    const std::uint64_t codes = op.num_codes();
    const double eps = gp.epsilon();
    std::size_t idx = 0;
    for (std::uint64_t c = 0; c < codes; ++c) {
      const auto code = static_cast<std::uint32_t>(c);
      if (idx < m1.size() && m1[idx] == code) {
        accumulate(gp.concentration(code), op.params({1, code}),
                   op.params({0, code}));
        ++idx;
      } else {
        accumulate(eps, op.prior_params({1, code}),
                   op.prior_params({0, code}));
      }
    }
  }

  // 2 sum_{i<j} Cov terms = -(S^2 - Q) / (a0^2 (a0 + 1))
  return sum_v - (s * s - q) / denom;
}

double parametric_effect(const CellTable& t, const LogisticModel& g,
                         Estimand estimand) {
  if (g.p() != t.p()) throw ModelError("model p does not match table p");
  double total = 0.0;
  if (estimand == Estimand::kAtt) {
    const double denom = static_cast<double>(t.treated_total());
    if (denom == 0.0) {
      throw DataError("ATT is undefined: no treated rows in the data");
    }
    for (const std::uint32_t code : t.observed_codes()) {
      const auto count = t.treated_count(code);
      if (count == 0) continue;
      total += static_cast<double>(count) / denom *
               (predict_cell(g, {1, code}) - predict_cell(g, {0, code}));
    }
  } else {
    const double denom = static_cast<double>(t.n());
    for (const std::uint32_t code : t.observed_codes()) {
      total += static_cast<double>(t.total_count(code)) / denom *
               (predict_cell(g, {1, code}) - predict_cell(g, {0, code}));
    }
  }
  return total;
}

}  // namespace gcomp
