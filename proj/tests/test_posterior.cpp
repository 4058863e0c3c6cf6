#include <doctest.h>

#include <cmath>
#include <vector>

#include "gcomp/errors.hpp"
#include "gcomp/parallel.hpp"
#include "gcomp/posterior.hpp"
#include "test_helpers.hpp"

using namespace gcomp;

namespace {

LogisticModel model_with(double alpha0, double alpha1,
                         std::vector<double> psi) {
  LogisticModel m;
  m.alpha0 = alpha0;
  m.alpha1 = alpha1;
  m.psi = std::move(psi);
  return m;
}

// O(4^p) direct evaluation of the effect variance: per-cell variance terms
// plus every pairwise Dirichlet covariance, straight from the definitions.
double variance_double_loop(const OutcomePosterior& op,
                            const GammaPosterior& gp) {
  const std::uint64_t codes = op.num_codes();
  const double a0 = gp.a0();
  std::vector<double> e_gamma(codes), v_gamma(codes), e_th(codes), v_th(codes);
  for (std::uint64_t c = 0; c < codes; ++c) {
    const auto code = static_cast<std::uint32_t>(c);
    const double conc = gp.concentration(code);
    e_gamma[c] = conc / a0;
    v_gamma[c] = conc * (a0 - conc) / (a0 * a0 * (a0 + 1.0));
    const BetaParams p1 = op.params({1, code});
    const BetaParams p0 = op.params({0, code});
    e_th[c] = p1.mean() - p0.mean();
    v_th[c] = p1.variance() + p0.variance();
  }
  double total = 0.0;
  for (std::uint64_t c = 0; c < codes; ++c) {
    total += v_gamma[c] * v_th[c] + v_gamma[c] * e_th[c] * e_th[c] +
             v_th[c] * e_gamma[c] * e_gamma[c];
  }
  for (std::uint64_t i = 0; i < codes; ++i) {
    for (std::uint64_t j = i + 1; j < codes; ++j) {
      const double cov = -gp.concentration(static_cast<std::uint32_t>(i)) *
                         gp.concentration(static_cast<std::uint32_t>(j)) /
                         (a0 * a0 * (a0 + 1.0));
      total += 2.0 * cov * e_th[i] * e_th[j];
    }
  }
  return total;
}

}  // namespace

TEST_CASE("saturated posterior: counts shift the prior, empty cells keep it") {
  // One observed cell with y = 3 of n = 4 at phi = 1.
  std::vector<Observation> rows;
  for (int i = 0; i < 4; ++i) rows.push_back(Observation{i < 3, 1, 0});
  const CellTable t = tabulate(BinaryDataset(1, rows));
  const OutcomePosterior op = bsat_posterior(t, 1.0);

  const BetaParams observed = op.params({1, 0});
  CHECK(observed.alpha == 4.0);
  CHECK(observed.beta == 2.0);

  const BetaParams empty = op.params({0, 1});
  CHECK(empty.alpha == 1.0);
  CHECK(empty.beta == 1.0);
}

TEST_CASE("partially saturated parameters match a hand substitution") {
  // phi = 1, b = 0.5, n = 16, p = 1: pseudo-mass per cell = 0.5*16/4 = 2.
  // Cell with theta_hat = 0.25, y = 3 of 4: alpha = 1 + 2(0.25) + 0.5(3) = 3,
  // beta = 1 + 2(0.75) + 0.5(1) = 3.
  std::vector<Observation> rows;
  for (int i = 0; i < 4; ++i) rows.push_back(Observation{i < 3, 0, 0});
  for (int i = 0; i < 12; ++i) rows.push_back(Observation{0, 1, 1});
  const CellTable t = tabulate(BinaryDataset(1, rows));

  // alpha0 = logit(0.25), alpha1 = 0, psi = 0 puts theta_hat at 0.25.
  const LogisticModel g = model_with(std::log(0.25 / 0.75), 0.0, {0.0});
  const OutcomePosterior op = psm_posterior(t, g, {1.0, 1.0, 0.5});

  const BetaParams cell = op.params({0, 0});
  CHECK(cell.alpha == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(cell.beta == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("b = 0 reproduces the saturated posterior bit for bit") {
  RandomStream rng(31, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const int p = 1 + int(rng.uniform_below(8));
    const auto d = testutil::random_dataset(p, 5 + rng.uniform_below(200), rng);
    const CellTable t = tabulate(d);
    const double phi = 0.05 + 3.0 * rng.uniform();

    std::vector<double> psi(p);
    for (auto& v : psi) v = rng.normal();
    const LogisticModel g = model_with(rng.normal(), rng.normal(), psi);

    const OutcomePosterior sat = bsat_posterior(t, phi);
    const OutcomePosterior psm = psm_posterior(t, g, {phi, 1.0, 0.0});
    for (std::uint64_t c = 0; c < t.num_codes(); ++c) {
      for (const std::uint8_t x : {0, 1}) {
        const CellKey key{x, static_cast<std::uint32_t>(c)};
        CHECK(sat.params(key).alpha == psm.params(key).alpha);
        CHECK(sat.params(key).beta == psm.params(key).beta);
      }
    }
  }
}

TEST_CASE("b = 1 ignores the data entirely") {
  std::vector<Observation> rows;
  for (int i = 0; i < 8; ++i) rows.push_back(Observation{i % 2 == 0, 1, 1});
  const CellTable t = tabulate(BinaryDataset(1, rows));
  const LogisticModel g = model_with(0.4, -0.2, {0.3});
  const Hyperparams h{0.7, 1.0, 1.0};
  const OutcomePosterior op = psm_posterior(t, g, h);

  const double w = 1.0 * 8.0 / 4.0;  // b n / 2^(p+1)
  const CellKey key{1, 1};
  const double th = op.theta_hat(key);
  CHECK(op.params(key).alpha == 0.7 + w * th);
  CHECK(op.params(key).beta == 0.7 + w * (1.0 - th));
  // Identical to the prior rule: the likelihood carries weight zero.
  CHECK(op.params(key).alpha == op.prior_params(key).alpha);
}

TEST_CASE("pseudo-data mass totals n") {
  RandomStream rng(32, 0);
  for (const std::int64_t n : {1ll, 16ll, 500ll, 9999ll}) {
    for (const double b : {0.0, 0.37, 1.0}) {
      const int p = 1 + int(rng.uniform_below(10));
      const auto d = testutil::random_dataset(p, n, rng);
      const CellTable t = tabulate(d);
      const LogisticModel g = model_with(0.1, 0.2, std::vector<double>(p, 0.05));
      const double total = pseudo_count_identity(t, {1.0, 1.0, b}, g);
      CHECK(std::abs(total - double(n)) < 1e-9);
    }
  }
}

TEST_CASE("cell enumeration agrees with the pseudo-count identity") {
  RandomStream rng(33, 0);
  const auto d = testutil::random_dataset(5, 120, rng);
  const CellTable t = tabulate(d);
  std::vector<double> psi(5);
  for (auto& v : psi) v = rng.normal();
  const LogisticModel g = model_with(-0.3, 0.8, psi);
  const Hyperparams h{0.4, 1.0, 0.37};
  const OutcomePosterior op = psm_posterior(t, g, h);

  double total = 0.0;
  for (std::uint64_t c = 0; c < t.num_codes(); ++c) {
    for (const std::uint8_t x : {0, 1}) {
      const BetaParams params = op.params({x, static_cast<std::uint32_t>(c)});
      total += params.alpha + params.beta - 2.0 * h.phi;
    }
  }
  CHECK(total == doctest::Approx(pseudo_count_identity(t, h, g)).epsilon(1e-12));
  CHECK(std::abs(total - 120.0) < 1e-9);
}

TEST_CASE("dirichlet posterior counts treated cells") {
  // p = 1, treated rows at codes (0, 0, 1).
  std::vector<Observation> rows{Observation{0, 1, 0}, Observation{1, 1, 0},
                                Observation{0, 1, 1}, Observation{1, 0, 1}};
  const CellTable t = tabulate(BinaryDataset(1, rows));
  const GammaPosterior gp = dirichlet_posterior(t, 0.5, Estimand::kAtt);
  CHECK(gp.count(0) == 2);
  CHECK(gp.count(1) == 1);
  CHECK(gp.a0() == doctest::Approx(3.0 + 2.0 * 0.5));

  const GammaPosterior ate = dirichlet_posterior(t, 0.5, Estimand::kAte);
  CHECK(ate.count(0) == 2);
  CHECK(ate.count(1) == 2);
  CHECK(ate.a0() == doctest::Approx(4.0 + 2.0 * 0.5));
}

TEST_CASE("ATT requires treated rows; the prior-only normalizer is 2^p eps") {
  std::vector<Observation> rows{Observation{1, 0, 0}, Observation{0, 0, 1}};
  const CellTable t = tabulate(BinaryDataset(1, rows));
  CHECK_THROWS_AS(dirichlet_posterior(t, 1.0, Estimand::kAtt), DataError);

  const GammaPosterior prior_only(2, 1.0, Estimand::kAtt, {});
  CHECK(prior_only.a0() == 4.0);
  CHECK(prior_only.concentration(3) == 1.0);
}

TEST_CASE("posterior cell means match a Monte Carlo Beta oracle") {
  RandomStream rng(34, 0);
  const auto d = testutil::random_dataset(2, 50, rng, 0.5, 0.4);
  const CellTable t = tabulate(d);
  const OutcomePosterior op = bsat_posterior(t, 0.8);

  RandomStream mc(35, 0);
  const int n_draws = 1000000;
  for (const std::uint32_t code : t.observed_codes()) {
    const BetaParams params = op.params({1, code});
    double total = 0.0;
    for (int i = 0; i < n_draws; ++i) {
      total += sample_beta(params.alpha, params.beta, mc);
    }
    const double mc_mean = total / n_draws;
    const double se = std::sqrt(params.variance() / n_draws);
    CHECK(std::abs(mc_mean - params.mean()) < 3.5 * se);
  }
}

TEST_CASE("dirichlet posterior means match a Monte Carlo oracle") {
  RandomStream rng(36, 0);
  const auto d = testutil::random_dataset(2, 100, rng, 0.6, 0.5);
  const CellTable t = tabulate(d);
  const GammaPosterior gp = dirichlet_posterior(t, 0.7, Estimand::kAtt);

  std::vector<double> alpha(4);
  for (std::uint32_t c = 0; c < 4; ++c) alpha[c] = gp.concentration(c);

  RandomStream mc(37, 0);
  const int n_draws = 1000000;
  std::vector<double> mean(4, 0.0);
  for (int i = 0; i < n_draws; ++i) {
    const auto w = sample_dirichlet(alpha, mc);
    for (int c = 0; c < 4; ++c) mean[c] += w[c];
  }
  for (std::uint32_t c = 0; c < 4; ++c) {
    const double expected = gp.concentration(c) / gp.a0();
    const double var = expected * (1.0 - expected) / (gp.a0() + 1.0);
    const double se = std::sqrt(var / n_draws);
    CHECK(std::abs(mean[c] / n_draws - expected) < 3.5 * se);
  }
}

TEST_CASE("closed-form mean is exactly zero for symmetric priors") {
  const CellTable empty(3);
  const OutcomePosterior op = bsat_posterior(empty, 1.5);
  const GammaPosterior gp(3, 1.0, Estimand::kAtt, {});
  CHECK(closed_form_mean(op, gp) == 0.0);
}

TEST_CASE("closed-form mean is exactly zero when g carries no treatment effect") {
  RandomStream rng(38, 0);
  const auto d = testutil::random_dataset(3, 60, rng);
  const CellTable t = tabulate(d);
  const LogisticModel g = model_with(-0.4, 0.0, {0.2, -0.6, 0.1});
  const OutcomePosterior op = psm_posterior(t, g, {0.5, 1.0, 1.0});  // b = 1
  const GammaPosterior gp = dirichlet_posterior(t, 1.0, Estimand::kAtt);
  CHECK(closed_form_mean(op, gp) == 0.0);
}

TEST_CASE("closed-form moments match Monte Carlo at p = 4") {
  RandomStream rng(39, 0);
  const auto d = testutil::random_dataset(4, 80, rng, 0.5, 0.35);
  const CellTable t = tabulate(d);
  std::vector<double> psi(4);
  for (auto& v : psi) v = 0.5 * rng.normal();
  const LogisticModel g = model_with(-0.5, 0.7, psi);
  const Hyperparams h{0.3, 0.6, 0.45};
  const OutcomePosterior op = psm_posterior(t, g, h);
  const GammaPosterior gp = dirichlet_posterior(t, h.epsilon, Estimand::kAtt);

  const std::int64_t draws = 200000;
  const EffectEstimate est = sample_effect(op, gp, draws, RandomStream(40, 0));
  const double cf_mean = closed_form_mean(op, gp);
  const double cf_var = closed_form_variance(op, gp);

  const double mc_mean = est.sample_mean();
  const double mc_sd = est.sample_sd();
  const double se = mc_sd / std::sqrt(double(draws));
  CHECK(std::abs(mc_mean - cf_mean) < 4.0 * se);
  CHECK(std::abs(mc_sd * mc_sd - cf_var) < 0.05 * cf_var);
}

TEST_CASE("variance reduction equals the O(4^p) double loop") {
  RandomStream rng(41, 0);
  for (const int p : {2, 4, 6}) {
    const auto d = testutil::random_dataset(p, 30 + p * 10, rng, 0.5, 0.4);
    const CellTable t = tabulate(d);
    std::vector<double> psi(p);
    for (auto& v : psi) v = rng.normal();
    const LogisticModel g = model_with(0.2, -0.5, psi);
    const Hyperparams h{0.8, 0.9, 0.3};

    const OutcomePosterior psm = psm_posterior(t, g, h);
    const OutcomePosterior sat = bsat_posterior(t, h.phi);
    const GammaPosterior gp = dirichlet_posterior(t, h.epsilon, Estimand::kAtt);

    CHECK(std::abs(closed_form_variance(psm, gp) -
                   variance_double_loop(psm, gp)) < 1e-12);
    CHECK(std::abs(closed_form_variance(sat, gp) -
                   variance_double_loop(sat, gp)) < 1e-12);
  }
}

TEST_CASE("degenerate single-code weight: variance reduces to V(theta*)") {
  // p = 0: one confounder code, gamma identically 1.
  std::vector<Observation> rows;
  for (int i = 0; i < 6; ++i) {
    rows.push_back(Observation{i % 2 == 0, std::uint8_t(i % 2), 0});
  }
  const CellTable t = tabulate(BinaryDataset(0, rows));
  const OutcomePosterior op = bsat_posterior(t, 1.0);
  const GammaPosterior gp = dirichlet_posterior(t, 2.0, Estimand::kAtt);

  const BetaParams p1 = op.params({1, 0});
  const BetaParams p0 = op.params({0, 0});
  const double expected = p1.variance() + p0.variance();
  CHECK(closed_form_variance(op, gp) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("prior-only draws are symmetric about zero") {
  const CellTable empty(2);
  const OutcomePosterior op = bsat_posterior(empty, 1.0);
  const GammaPosterior gp(2, 1.0, Estimand::kAtt, {});
  const std::int64_t draws = 50000;
  const EffectEstimate est = sample_effect(op, gp, draws, RandomStream(42, 0));
  const double se = est.sample_sd() / std::sqrt(double(draws));
  CHECK(std::abs(est.sample_mean()) < 4.0 * se);
  CHECK(est.mean == 0.0);  // closed form
}

TEST_CASE("draws are identical for any thread count") {
  RandomStream rng(43, 0);
  const auto d = testutil::random_dataset(3, 40, rng);
  const CellTable t = tabulate(d);
  const OutcomePosterior op = bsat_posterior(t, 0.5);
  const GammaPosterior gp = dirichlet_posterior(t, 0.5, Estimand::kAtt);

  set_max_threads(1);
  const EffectEstimate serial = sample_effect(op, gp, 3000, RandomStream(44, 0));
  set_max_threads(4);
  const EffectEstimate parallel = sample_effect(op, gp, 3000, RandomStream(44, 0));
  set_max_threads(0);

  REQUIRE(serial.draws.size() == parallel.draws.size());
  for (std::size_t i = 0; i < serial.draws.size(); ++i) {
    REQUIRE(serial.draws[i] == parallel.draws[i]);
  }
}

TEST_CASE("all draws live in [-1, 1] and parameters stay positive") {
  RandomStream rng(45, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const int p = 1 + int(rng.uniform_below(5));
    const auto d = testutil::random_dataset(p, 10 + rng.uniform_below(100), rng);
    const CellTable t = tabulate(d);
    std::vector<double> psi(p);
    for (auto& v : psi) v = rng.normal();
    const LogisticModel g = model_with(rng.normal(), rng.normal(), psi);
    const Hyperparams h{0.01 + rng.uniform(), 0.01 + rng.uniform(),
                        rng.uniform()};
    const OutcomePosterior op = psm_posterior(t, g, h);
    const GammaPosterior gp = dirichlet_posterior(t, h.epsilon, Estimand::kAtt);

    for (std::uint64_t c = 0; c < t.num_codes(); ++c) {
      for (const std::uint8_t x : {0, 1}) {
        const BetaParams params = op.params({x, std::uint32_t(c)});
        REQUIRE(params.alpha > 0.0);
        REQUIRE(params.beta > 0.0);
      }
    }
    const EffectEstimate est = sample_effect(op, gp, 2000, RandomStream(46, trial));
    for (const double draw : est.draws) {
      REQUIRE(draw >= -1.0);
      REQUIRE(draw <= 1.0);
    }
  }
}

TEST_CASE("missing-cell mean increases with the parametric prediction") {
  std::vector<Observation> rows{Observation{1, 1, 0}};
  const CellTable t = tabulate(BinaryDataset(3, rows));
  const Hyperparams h{0.5, 1.0, 0.6};

  double last = -1.0;
  for (const double alpha0 : {-2.0, -0.5, 0.5, 2.0}) {
    const LogisticModel g = model_with(alpha0, 0.0, {0.0, 0.0, 0.0});
    const OutcomePosterior op = psm_posterior(t, g, h);
    const double mean = op.params({0, 5}).mean();  // unobserved cell
    CHECK(mean > last);
    last = mean;
  }
}

TEST_CASE("enumeration guard points to the approximations") {
  const BinaryDataset d(25, {Observation{1, 1, 77}});
  const CellTable t = tabulate(d);
  const OutcomePosterior op = bsat_posterior(t, 1.0);
  const GammaPosterior gp = dirichlet_posterior(t, 1.0, Estimand::kAtt);
  CHECK_THROWS_AS(sample_effect(op, gp, 10, RandomStream(47, 0)), ModelError);
}

TEST_CASE("parametric effect weights predictions by treated frequencies") {
  // Treated rows: two at code 0, one at code 1.
  std::vector<Observation> rows{Observation{1, 1, 0}, Observation{0, 1, 0},
                                Observation{1, 1, 1}, Observation{0, 0, 1}};
  const CellTable t = tabulate(BinaryDataset(1, rows));
  const LogisticModel g = model_with(-0.2, 0.9, {0.4});

  auto contrast = [&](std::uint32_t c) {
    return predict_cell(g, {1, c}) - predict_cell(g, {0, c});
  };
  const double expected = (2.0 / 3.0) * contrast(0) + (1.0 / 3.0) * contrast(1);
  CHECK(parametric_effect(t, g, Estimand::kAtt) ==
        doctest::Approx(expected).epsilon(1e-14));

  const double expected_ate = 0.5 * contrast(0) + 0.5 * contrast(1);
  CHECK(parametric_effect(t, g, Estimand::kAte) ==
        doctest::Approx(expected_ate).epsilon(1e-14));
}

TEST_CASE("effect quantiles come from the empirical draw distribution") {
  EffectEstimate est;
  est.draws = {0.5, 0.1, 0.3, 0.2, 0.4};
  CHECK(est.quantile(0.0) == 0.1);
  CHECK(est.quantile(1.0) == 0.5);
  CHECK(est.quantile(0.5) == doctest::Approx(0.3));
}
