#include "gcomp/dgp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>

#include "gcomp/errors.hpp"
#include "gcomp/logistic.hpp"
#include "gcomp/nelder_mead.hpp"
#include "gcomp/parallel.hpp"
#include "gcomp/quadrature.hpp"

namespace gcomp {

namespace {

constexpr std::int64_t kSimBlock = 4096;
constexpr std::int64_t kMcTruthRows = 10'000'000;
constexpr std::uint64_t kMcTruthSeed = 0x7c3a9d15b64e20f1ULL;

void check_exact_truth(int p) {
  if (p > kMaxExactTruthP) {
    throw ModelError("exact truth enumeration infeasible above p = " +
                     std::to_string(kMaxExactTruthP));
  }
}

std::vector<double> f_by_count_with_rule(int p, double rho,
                                         const GaussHermite& rule) {
  const double slope = std::sqrt(rho / (1.0 - rho));
  const double inv_sqrt_pi = 0.5641895835477562869;  // 1/sqrt(pi)
  std::vector<double> f(p + 1, 0.0);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double w = rule.weights[i] * inv_sqrt_pi;
    const double t = 1.4142135623730950488 * rule.nodes[i];  // sqrt(2) x_i
    const double qv = normal_cdf(slope * t);
    for (int k = 0; k <= p; ++k) {
      f[k] += w * std::pow(qv, k) * std::pow(1.0 - qv, p - k);
    }
  }
  return f;
}

}  // namespace

void DgpSpec::validate(bool require_mu1) const {
  if (p < 1 || p > BinaryDataset::kMaxConfounders) {
    throw DataError("confounder count out of range");
  }
  auto check_vec = [&](const std::vector<double>& v, const char* name) {
    if (static_cast<int>(v.size()) != p) {
      throw DataError(std::string(name) + " must have length p");
    }
    for (const double x : v) {
      if (!std::isfinite(x)) throw DataError(std::string(name) + " not finite");
    }
  };
  check_vec(beta1, "beta1");
  check_vec(beta2, "beta2");
  check_vec(omega, "omega");
  if (!(rho_c >= 0.0 && rho_c < 1.0)) throw DataError("rho_c must lie in [0, 1)");
  if (!std::isfinite(beta0) || !std::isfinite(lambda0) || !std::isfinite(lambda1)) {
    throw DataError("coefficients must be finite");
  }
  if (!mu1.empty()) {
    check_vec(mu1, "mu1");
    for (const double m : mu1) {
      if (!(m > 0.0 && m < 1.0)) throw DataError("mu1 components must lie in (0, 1)");
    }
  } else if (require_mu1) {
    throw DataError("spec requires derived mu1; call finalized() first");
  }
}

CellDistribution::CellDistribution(int p, double rho,
                                   std::span<const double> omega)
    : p_(p) {
  if (p < 1 || p > kMaxExactTruthP) {
    throw ModelError("cell probabilities need 1 <= p <= " +
                     std::to_string(kMaxExactTruthP));
  }
  const auto f64 = f_by_count_with_rule(p, rho, gauss_hermite(64));
  const auto f128 = f_by_count_with_rule(p, rho, gauss_hermite(128));
  for (int k = 0; k <= p; ++k) {
    if (std::abs(f64[k] - f128[k]) > 1e-10) {
      throw ModelError("Gauss-Hermite quadrature did not converge");
    }
  }
  f_count_ = f_by_count_with_rule(p, rho, gauss_hermite(96));

  lo_bits_ = (p + 1) / 2;
  lo_mask_ = (std::uint32_t{1} << lo_bits_) - 1;
  lut_lo_.assign(std::size_t{1} << lo_bits_, 0.0);
  lut_hi_.assign(std::size_t{1} << (p - lo_bits_), 0.0);
  for (std::size_t m = 0; m < lut_lo_.size(); ++m) {
    double dot = 0.0;
    for (int j = 0; j < lo_bits_; ++j) {
      if ((m >> j) & 1u) dot += omega[j];
    }
    lut_lo_[m] = dot;
  }
  for (std::size_t m = 0; m < lut_hi_.size(); ++m) {
    double dot = 0.0;
    for (int j = lo_bits_; j < p; ++j) {
      if ((m >> (j - lo_bits_)) & 1u) dot += omega[j];
    }
    lut_hi_[m] = dot;
  }

  double treated = 0.0;
  const std::uint64_t codes = std::uint64_t{1} << p;
  for (std::uint64_t c = 0; c < codes; ++c) {
    const auto code = static_cast<std::uint32_t>(c);
    treated += f(code) * expit(omega_dot(code));
  }
  treated_prob_ = treated;
}

double CellDistribution::expit_omega(std::uint32_t code) const {
  return expit(omega_dot(code));
}

CellDistribution cell_probabilities(const DgpSpec& spec) {
  spec.validate();
  check_exact_truth(spec.p);
  return CellDistribution(spec.p, spec.rho_c, spec.omega);
}

namespace {

// Draws one confounder code; consumes 1 + p normals.
std::uint32_t draw_code(RandomStream& stream, int p, double sqrt_rho,
                        double sqrt_comp) {
  const double shared = stream.normal();
  std::uint32_t code = 0;
  for (int j = 0; j < p; ++j) {
    const double latent = sqrt_rho * shared + sqrt_comp * stream.normal();
    if (latent > 0.0) code |= std::uint32_t{1} << j;
  }
  return code;
}

std::vector<double> mc_mu1(const DgpSpec& spec) {
  // Exact enumeration is out of reach; estimate E(C|X=1) from a large
  // fixed-seed simulation of (C, X) only.
  const std::int64_t n = 4'000'000;
  const double sqrt_rho = std::sqrt(spec.rho_c);
  const double sqrt_comp = std::sqrt(1.0 - spec.rho_c);
  RandomStream rng(kMcTruthSeed, 1);
  std::vector<double> sums(spec.p, 0.0);
  std::int64_t treated = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint32_t code = draw_code(rng, spec.p, sqrt_rho, sqrt_comp);
    double dot = 0.0;
    for (int j = 0; j < spec.p; ++j) {
      if ((code >> j) & 1u) dot += spec.omega[j];
    }
    if (rng.uniform() < expit(dot)) {
      ++treated;
      for (int j = 0; j < spec.p; ++j) sums[j] += (code >> j) & 1u;
    }
  }
  if (treated == 0) throw ModelError("mu1 estimation found no treated rows");
  for (double& s : sums) s /= static_cast<double>(treated);
  return sums;
}

}  // namespace

std::vector<double> derive_mu1(const DgpSpec& spec) {
  spec.validate();
  if (spec.p > kMaxExactTruthP) return mc_mu1(spec);
  const CellDistribution dist = cell_probabilities(spec);
  std::vector<double> mu1(spec.p, 0.0);
  const std::uint64_t codes = std::uint64_t{1} << spec.p;
  for (std::uint64_t c = 0; c < codes; ++c) {
    const auto code = static_cast<std::uint32_t>(c);
    const double w = dist.f_treated(code);
    for (int j = 0; j < spec.p; ++j) {
      if ((code >> j) & 1u) mu1[j] += w;
    }
  }
  return mu1;
}

DgpSpec finalized(DgpSpec spec) {
  spec.mu1 = derive_mu1(spec);
  return spec;
}

std::vector<std::uint32_t> simulate_confounders(const DgpSpec& spec,
                                                std::int64_t n,
                                                RandomStream rng) {
  spec.validate();
  if (n < 1) throw DataError("row count must be positive");
  const double sqrt_rho = std::sqrt(spec.rho_c);
  const double sqrt_comp = std::sqrt(1.0 - spec.rho_c);
  std::vector<std::uint32_t> codes(static_cast<std::size_t>(n));
  const std::uint64_t blocks =
      static_cast<std::uint64_t>((n + kSimBlock - 1) / kSimBlock);
  parallel_for_chunks(blocks, [&](std::uint64_t b) {
    RandomStream stream = rng.child(b);
    const std::int64_t lo = static_cast<std::int64_t>(b) * kSimBlock;
    const std::int64_t hi = std::min(n, lo + kSimBlock);
    for (std::int64_t i = lo; i < hi; ++i) {
      codes[static_cast<std::size_t>(i)] =
          draw_code(stream, spec.p, sqrt_rho, sqrt_comp);
    }
  });
  return codes;
}

namespace {

double outcome_eta_unchecked(const DgpSpec& spec, int x, std::uint32_t code) {
  double centered = 0.0;  // (beta1 + beta2).(c - mu1)
  double shift = 0.0;     // sum_j (c_j - mu1_j)
  for (int j = 0; j < spec.p; ++j) {
    const double cj = static_cast<double>((code >> j) & 1u) - spec.mu1[j];
    centered += (spec.beta1[j] + spec.beta2[j]) * cj;
    shift += cj;
  }
  return x == 0 ? spec.beta0 + centered + spec.lambda1 * shift
                : spec.beta0 + spec.lambda0 + centered - spec.lambda1 * shift;
}

}  // namespace

double outcome_eta(const DgpSpec& spec, int x, std::uint32_t code) {
  spec.validate(/*require_mu1=*/true);
  return outcome_eta_unchecked(spec, x, code);
}

BinaryDataset simulate_dataset(const DgpSpec& spec, std::int64_t n,
                               RandomStream rng) {
  spec.validate(/*require_mu1=*/true);
  if (n < 1) throw DataError("row count must be positive");

  const double sqrt_rho = std::sqrt(spec.rho_c);
  const double sqrt_comp = std::sqrt(1.0 - spec.rho_c);
  const int p = spec.p;

  std::vector<double> bsum(p);
  double bsum_mu1 = 0.0;
  double sum_mu1 = 0.0;
  for (int j = 0; j < p; ++j) {
    bsum[j] = spec.beta1[j] + spec.beta2[j];
    bsum_mu1 += bsum[j] * spec.mu1[j];
    sum_mu1 += spec.mu1[j];
  }

  std::vector<Observation> rows(static_cast<std::size_t>(n));
  const std::uint64_t blocks =
      static_cast<std::uint64_t>((n + kSimBlock - 1) / kSimBlock);
  parallel_for_chunks(blocks, [&](std::uint64_t b) {
    RandomStream stream = rng.child(b);
    const std::int64_t lo = static_cast<std::int64_t>(b) * kSimBlock;
    const std::int64_t hi = std::min(n, lo + kSimBlock);
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::uint32_t code = draw_code(stream, p, sqrt_rho, sqrt_comp);
      double omega_dot = 0.0;
      double bdot = 0.0;
      int bits = 0;
      for (int j = 0; j < p; ++j) {
        if ((code >> j) & 1u) {
          omega_dot += spec.omega[j];
          bdot += bsum[j];
          ++bits;
        }
      }
      const std::uint8_t x = stream.uniform() < expit(omega_dot) ? 1 : 0;
      const double centered = bdot - bsum_mu1;
      const double shift = static_cast<double>(bits) - sum_mu1;
      const double eta =
          x == 0 ? spec.beta0 + centered + spec.lambda1 * shift
                 : spec.beta0 + spec.lambda0 + centered - spec.lambda1 * shift;
      const std::uint8_t y = stream.uniform() < expit(eta) ? 1 : 0;
      rows[static_cast<std::size_t>(i)] = Observation{y, x, code};
    }
  });
  return BinaryDataset(p, std::move(rows));
}

namespace {

// Caches everything lambda-independent so calibration objectives are cheap:
// the confounder distribution, mu1, and the (beta1+beta2) dot products.
class TruthEvaluator {
 public:
  explicit TruthEvaluator(const DgpSpec& spec)
      : p_(spec.p),
        beta0_(spec.beta0),
        dist_(spec.p, spec.rho_c, spec.omega) {
    mu1_.assign(spec.p, 0.0);
    const std::uint64_t codes = std::uint64_t{1} << p_;
    for (std::uint64_t c = 0; c < codes; ++c) {
      const auto code = static_cast<std::uint32_t>(c);
      const double w = dist_.f_treated(code);
      for (int j = 0; j < p_; ++j) {
        if ((code >> j) & 1u) mu1_[j] += w;
      }
    }
    lo_bits_ = (p_ + 1) / 2;
    lo_mask_ = (std::uint32_t{1} << lo_bits_) - 1;
    bsum_lo_.assign(std::size_t{1} << lo_bits_, 0.0);
    bsum_hi_.assign(std::size_t{1} << (p_ - lo_bits_), 0.0);
    for (std::size_t m = 0; m < bsum_lo_.size(); ++m) {
      double dot = 0.0;
      for (int j = 0; j < lo_bits_; ++j) {
        if ((m >> j) & 1u) dot += spec.beta1[j] + spec.beta2[j];
      }
      bsum_lo_[m] = dot;
    }
    for (std::size_t m = 0; m < bsum_hi_.size(); ++m) {
      double dot = 0.0;
      for (int j = lo_bits_; j < p_; ++j) {
        if ((m >> (j - lo_bits_)) & 1u) dot += spec.beta1[j] + spec.beta2[j];
      }
      bsum_hi_[m] = dot;
    }
    bsum_mu1_ = 0.0;
    sum_mu1_ = 0.0;
    for (int j = 0; j < p_; ++j) {
      bsum_mu1_ += (spec.beta1[j] + spec.beta2[j]) * mu1_[j];
      sum_mu1_ += mu1_[j];
    }
  }

  const std::vector<double>& mu1() const { return mu1_; }
  const CellDistribution& dist() const { return dist_; }

  double eta(int x, std::uint32_t code, double l0, double l1) const {
    const double centered =
        bsum_lo_[code & lo_mask_] + bsum_hi_[code >> lo_bits_] - bsum_mu1_;
    const double shift =
        static_cast<double>(std::popcount(code)) - sum_mu1_;
    return x == 0 ? beta0_ + centered + l1 * shift
                  : beta0_ + l0 + centered - l1 * shift;
  }

  double att(double l0, double l1) const {
    double total = 0.0;
    const std::uint64_t codes = std::uint64_t{1} << p_;
    for (std::uint64_t c = 0; c < codes; ++c) {
      const auto code = static_cast<std::uint32_t>(c);
      total += dist_.f_treated(code) *
               (expit(eta(1, code, l0, l1)) - expit(eta(0, code, l0, l1)));
    }
    return total;
  }

  double meb(double l0, double l1) {
    const std::uint64_t codes = std::uint64_t{1} << p_;
    CellSource source = [&](const CellVisitor& visit) {
      for (std::uint64_t c = 0; c < codes; ++c) {
        const auto code = static_cast<std::uint32_t>(c);
        const double fc = dist_.f(code);
        const double px = dist_.expit_omega(code);
        visit(0, code, fc * (1.0 - px), expit(eta(0, code, l0, l1)));
        visit(1, code, fc * px, expit(eta(1, code, l0, l1)));
      }
    };
    const LogisticModel g =
        fit_cells(p_, source, FitOptions{}, warm_ ? &*warm_ : nullptr);
    warm_ = g;

    double plug_in = 0.0;
    for (std::uint64_t c = 0; c < codes; ++c) {
      const auto code = static_cast<std::uint32_t>(c);
      plug_in += dist_.f_treated(code) *
                 (predict_cell(g, {1, code}) - predict_cell(g, {0, code}));
    }
    return plug_in - att(l0, l1);
  }

 private:
  int p_;
  double beta0_;
  CellDistribution dist_;
  std::vector<double> mu1_;
  std::vector<double> bsum_lo_, bsum_hi_;
  int lo_bits_ = 0;
  std::uint32_t lo_mask_ = 0;
  double bsum_mu1_ = 0.0;
  double sum_mu1_ = 0.0;
  std::optional<LogisticModel> warm_;
};

struct McTruth {
  double att = 0.0;
  double meb = 0.0;
  double se_att = 0.0;
  double se_meb = 0.0;
};

// Monte Carlo truth for p beyond exact enumeration: potential-outcome means
// over simulated treated rows, with block standard errors.
McTruth mc_truth(const DgpSpec& spec) {
  DgpSpec sim = spec;
  if (sim.mu1.empty()) sim.mu1 = mc_mu1(sim);
  const BinaryDataset d =
      simulate_dataset(sim, kMcTruthRows, RandomStream(kMcTruthSeed, 2));

  constexpr int kBlocks = 10;
  const std::int64_t block_rows = kMcTruthRows / kBlocks;
  std::vector<double> att_blocks(kBlocks, 0.0), meb_blocks(kBlocks, 0.0);

  for (int b = 0; b < kBlocks; ++b) {
    const auto begin = d.rows().begin() + b * block_rows;
    const auto end = begin + block_rows;
    double contrast = 0.0;
    std::int64_t treated = 0;
    for (auto it = begin; it != end; ++it) {
      if (it->x != 1) continue;
      ++treated;
      contrast += expit(outcome_eta_unchecked(sim, 1, it->c)) -
                  expit(outcome_eta_unchecked(sim, 0, it->c));
    }
    att_blocks[b] = contrast / static_cast<double>(treated);

    BinaryDataset block(sim.p, std::vector<Observation>(begin, end));
    const LogisticModel g = fit_main_effects(block);
    double plug = 0.0;
    for (auto it = begin; it != end; ++it) {
      if (it->x != 1) continue;
      plug += predict_cell(g, {1, it->c}) - predict_cell(g, {0, it->c});
    }
    meb_blocks[b] = plug / static_cast<double>(treated) - att_blocks[b];
  }

  auto summarize = [](const std::vector<double>& blocks, double& mean,
                      double& se) {
    mean = 0.0;
    for (const double v : blocks) mean += v;
    mean /= static_cast<double>(blocks.size());
    double ss = 0.0;
    for (const double v : blocks) ss += (v - mean) * (v - mean);
    se = std::sqrt(ss / (blocks.size() * (blocks.size() - 1.0)));
  };

  McTruth out;
  summarize(att_blocks, out.att, out.se_att);
  summarize(meb_blocks, out.meb, out.se_meb);
  return out;
}

}  // namespace

double true_att(const DgpSpec& spec) {
  spec.validate();
  if (spec.p > kMaxExactTruthP) return mc_truth(spec).att;
  return TruthEvaluator(spec).att(spec.lambda0, spec.lambda1);
}

double population_meb(const DgpSpec& spec) {
  spec.validate();
  if (spec.p > kMaxExactTruthP) return mc_truth(spec).meb;
  return TruthEvaluator(spec).meb(spec.lambda0, spec.lambda1);
}

TruthSummary truth_summary(const DgpSpec& spec) {
  spec.validate();
  TruthSummary out;
  if (spec.p > kMaxExactTruthP) {
    DgpSpec sim = spec;
    if (sim.mu1.empty()) sim.mu1 = mc_mu1(sim);
    const McTruth mc = mc_truth(sim);
    out.delta_t = mc.att;
    out.meb = mc.meb;
    out.mc_se_delta_t = mc.se_att;
    out.mc_se_meb = mc.se_meb;
    out.mu1 = sim.mu1;
    return out;
  }
  TruthEvaluator eval(spec);
  out.delta_t = eval.att(spec.lambda0, spec.lambda1);
  out.meb = eval.meb(spec.lambda0, spec.lambda1);
  out.f_by_count = eval.dist().f_by_count();
  out.mu1 = eval.mu1();
  return out;
}

CalibrationResult calibrate(const DgpSpec& base, const CalibrationTarget& target,
                            RandomStream rng) {
  base.validate();
  check_exact_truth(base.p);
  if (!(target.tolerance > 0.0)) throw DataError("tolerance must be positive");

  TruthEvaluator eval(base);
  auto objective = [&](std::span<const double> l) {
    const double r_att = eval.att(l[0], l[1]) - target.delta_t;
    const double r_meb = eval.meb(l[0], l[1]) - target.meb;
    return r_att * r_att + r_meb * r_meb;
  };

  NelderMeadOptions nm;
  // Any objective below this puts both residuals inside the tolerance.
  nm.objective_tol = 0.98 * target.tolerance * target.tolerance;

  const int attempts = 1 + std::max(0, target.max_restarts);
  double best_att_res = std::numeric_limits<double>::infinity();
  double best_meb_res = std::numeric_limits<double>::infinity();
  double best_value = std::numeric_limits<double>::infinity();

  for (int attempt = 0; attempt < attempts; ++attempt) {
    double start[2] = {0.0, 0.0};
    if (attempt > 0) {
      start[0] = -2.0 + 4.0 * rng.uniform();
      start[1] = -2.0 + 4.0 * rng.uniform();
    }
    const NelderMeadResult res = nelder_mead(objective, start, nm);
    const double att_value = eval.att(res.x[0], res.x[1]);
    const double meb_value = eval.meb(res.x[0], res.x[1]);
    const double att_res = std::abs(att_value - target.delta_t);
    const double meb_res = std::abs(meb_value - target.meb);
    if (att_res < target.tolerance && meb_res < target.tolerance) {
      CalibrationResult out;
      out.lambda0 = res.x[0];
      out.lambda1 = res.x[1];
      out.achieved_delta_t = att_value;
      out.achieved_meb = meb_value;
      out.restarts_used = attempt;
      return out;
    }
    if (res.value < best_value) {
      best_value = res.value;
      best_att_res = att_res;
      best_meb_res = meb_res;
    }
  }
  throw CalibrationError(
      "calibration failed after " + std::to_string(attempts) +
          " attempts; best residuals: |delta_t| = " + std::to_string(best_att_res) +
          ", |meb| = " + std::to_string(best_meb_res),
      best_att_res, best_meb_res);
}

}  // namespace gcomp
