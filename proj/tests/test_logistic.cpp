#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "gcomp/errors.hpp"
#include "gcomp/logistic.hpp"
#include "gcomp/rng.hpp"
#include "test_helpers.hpp"

using namespace gcomp;

namespace {

// Independent full-Newton maximizer of the same (ridge-penalized) weighted
// likelihood, with an explicit 3x3 solve. Only used as an oracle for p = 1.
std::array<double, 3> newton_oracle_p1(
    const std::vector<WeightedCell>& cells, double ridge) {
  std::array<double, 3> beta{0.0, 0.0, 0.0};
  for (int iter = 0; iter < 500; ++iter) {
    std::array<double, 3> score{-ridge * beta[0], -ridge * beta[1],
                                -ridge * beta[2]};
    std::array<std::array<double, 3>, 3> hess{};
    for (int a = 0; a < 3; ++a) hess[a][a] = ridge;
    for (const auto& cell : cells) {
      const std::array<double, 3> f{
          1.0, double(cell.key.x), double(cell.key.c & 1u)};
      double eta = 0.0;
      for (int a = 0; a < 3; ++a) eta += beta[a] * f[a];
      const double pi = expit(eta);
      for (int a = 0; a < 3; ++a) {
        score[a] += cell.weight * (cell.outcome - pi) * f[a];
        for (int b = 0; b < 3; ++b) {
          hess[a][b] += cell.weight * pi * (1.0 - pi) * f[a] * f[b];
        }
      }
    }
    // Solve 3x3 via Gaussian elimination.
    std::array<std::array<double, 4>, 3> aug{};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) aug[a][b] = hess[a][b];
      aug[a][3] = score[a];
    }
    for (int col = 0; col < 3; ++col) {
      int pivot = col;
      for (int r = col + 1; r < 3; ++r) {
        if (std::abs(aug[r][col]) > std::abs(aug[pivot][col])) pivot = r;
      }
      std::swap(aug[col], aug[pivot]);
      for (int r = 0; r < 3; ++r) {
        if (r == col) continue;
        const double factor = aug[r][col] / aug[col][col];
        for (int b = col; b < 4; ++b) aug[r][b] -= factor * aug[col][b];
      }
    }
    double max_step = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double step = aug[a][3] / aug[a][a];
      beta[a] += step;
      max_step = std::max(max_step, std::abs(step));
    }
    if (max_step < 1e-12) break;
  }
  return beta;
}

}  // namespace

TEST_CASE("predict_cell basics") {
  {
    LogisticModel m;
    m.psi = {0.0, 0.0};
    for (std::uint32_t c = 0; c < 4; ++c) {
      CHECK(predict_cell(m, {0, c}) == 0.5);
      CHECK(predict_cell(m, {1, c}) == 0.5);
    }
  }
  {
    LogisticModel m;
    m.alpha0 = -1.0;
    m.alpha1 = 1.0;
    m.psi = {0.0};
    CHECK(predict_cell(m, {1, 0}) == 0.5);
    CHECK(predict_cell(m, {1, 1}) == 0.5);
  }
  {
    LogisticModel m;
    m.alpha0 = -1.0;
    m.alpha1 = 1.0;
    m.psi = {0.5, -0.5};
    // cell (x=1, c=(1,0)): eta = -1 + 1 + 0.5
    CHECK(predict_cell(m, {1, 0b01}) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(1e-12));
  }
}

TEST_CASE("predict_cell stays strictly inside (0,1) for huge coefficients") {
  LogisticModel m;
  m.alpha0 = 500.0;
  m.psi = {0.0};
  const double hi = predict_cell(m, {0, 0});
  CHECK(hi < 1.0);
  m.alpha0 = -500.0;
  CHECK(predict_cell(m, {0, 0}) > 0.0);
}

TEST_CASE("perfect separation falls back to ridge without crashing") {
  std::vector<Observation> rows;
  RandomStream rng(21, 0);
  for (int i = 0; i < 40; ++i) {
    const std::uint8_t x = i % 2;
    rows.push_back(Observation{x, x, std::uint32_t(rng.uniform_below(2))});
  }
  const BinaryDataset d(1, std::move(rows));
  const LogisticModel m = fit_main_effects(d);
  CHECK(std::isfinite(m.alpha1));
  CHECK(m.alpha1 > 5.0);  // strongly positive, finite under the ridge
}

TEST_CASE("recovers generating coefficients at n = 100000") {
  LogisticModel truth;
  truth.alpha0 = -1.0;
  truth.alpha1 = 1.0;
  truth.psi = {0.5, -0.5};

  RandomStream rng(22, 0);
  std::vector<Observation> rows(100000);
  for (auto& r : rows) {
    r.x = rng.uniform() < 0.5 ? 1 : 0;
    r.c = std::uint32_t(rng.uniform_below(4));
    r.y = rng.uniform() < predict_cell(truth, {r.x, r.c}) ? 1 : 0;
  }
  const LogisticModel fit = fit_main_effects(BinaryDataset(2, std::move(rows)));
  CHECK(std::abs(fit.alpha0 - truth.alpha0) < 0.05);
  CHECK(std::abs(fit.alpha1 - truth.alpha1) < 0.05);
  CHECK(std::abs(fit.psi[0] - truth.psi[0]) < 0.05);
  CHECK(std::abs(fit.psi[1] - truth.psi[1]) < 0.05);
}

TEST_CASE("four-cell fit matches an independent Newton oracle") {
  // All (x, c) combinations once, y = (1, 0, 1, 0): separated on c, so both
  // paths maximize the same ridge-penalized likelihood.
  std::vector<Observation> rows{
      Observation{1, 0, 0}, Observation{0, 0, 1},
      Observation{1, 1, 0}, Observation{0, 1, 1}};
  const BinaryDataset d(1, rows);
  FitOptions opts;
  opts.ridge = 1e-6;
  const LogisticModel fit = fit_main_effects(d, opts);

  std::vector<WeightedCell> cells;
  for (const auto& r : rows) {
    cells.push_back({CellKey{r.x, r.c}, 1.0, double(r.y)});
  }
  const auto oracle = newton_oracle_p1(cells, 1e-6);

  for (const std::uint8_t x : {0, 1}) {
    for (const std::uint32_t c : {0u, 1u}) {
      const double oracle_pi =
          expit(oracle[0] + x * oracle[1] + double(c) * oracle[2]);
      CHECK(predict_cell(fit, {x, c}) ==
            doctest::Approx(oracle_pi).epsilon(1e-6));
    }
  }
}

TEST_CASE("single symmetric cell pins all coefficients at zero") {
  const std::vector<WeightedCell> cells{{CellKey{0, 0}, 2.0, 0.5}};
  const LogisticModel m = fit_weighted(cells, 1);
  CHECK(std::abs(m.alpha0) < 1e-8);
  CHECK(std::abs(m.alpha1) < 1e-8);
  CHECK(std::abs(m.psi[0]) < 1e-8);
}

TEST_CASE("weighted fit over empirical cells equals the row-level fit") {
  RandomStream rng(23, 0);
  const BinaryDataset d = testutil::random_dataset(3, 2000, rng, 0.5, 0.4);

  FitOptions tight;
  tight.tolerance = 1e-10;
  const LogisticModel row_fit = fit_main_effects(d, tight);

  // Sufficient statistics: weight = cell count, outcome = success fraction.
  std::unordered_map<std::uint64_t, std::pair<double, double>> agg;
  for (const auto& r : d.rows()) {
    auto& [count, succ] = agg[CellKey{r.x, r.c}.packed()];
    count += 1.0;
    succ += r.y;
  }
  std::vector<WeightedCell> cells;
  for (const auto& [packed, cs] : agg) {
    WeightedCell cell;
    cell.key = CellKey{std::uint8_t(packed & 1u), std::uint32_t(packed >> 1)};
    cell.weight = cs.first;
    cell.outcome = cs.second / cs.first;
    cells.push_back(cell);
  }
  const LogisticModel cell_fit = fit_weighted(cells, 3, tight);

  CHECK(std::abs(row_fit.alpha0 - cell_fit.alpha0) < 1e-8);
  CHECK(std::abs(row_fit.alpha1 - cell_fit.alpha1) < 1e-8);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(row_fit.psi[j] - cell_fit.psi[j]) < 1e-8);
  }
}

TEST_CASE("fit recovers a model whose probabilities it is handed") {
  LogisticModel truth;
  truth.alpha0 = 0.3;
  truth.alpha1 = -0.7;
  truth.psi = {0.2};

  std::vector<WeightedCell> cells;
  for (const std::uint8_t x : {0, 1}) {
    for (const std::uint32_t c : {0u, 1u}) {
      cells.push_back({CellKey{x, c}, 0.7 + 0.2 * x + 0.1 * c,
                       predict_cell(truth, {x, c})});
    }
  }
  const LogisticModel fit = fit_weighted(cells, 1);
  CHECK(std::abs(fit.alpha0 - truth.alpha0) < 1e-6);
  CHECK(std::abs(fit.alpha1 - truth.alpha1) < 1e-6);
  CHECK(std::abs(fit.psi[0] - truth.psi[0]) < 1e-6);
}

TEST_CASE("score vanishes at the solution") {
  RandomStream rng(24, 0);
  const BinaryDataset d = testutil::random_dataset(2, 800, rng, 0.5, 0.6);
  const LogisticModel m = fit_main_effects(d);

  std::vector<double> score(4, 0.0);
  for (const auto& r : d.rows()) {
    const double resid = double(r.y) - predict_cell(m, {r.x, r.c});
    score[0] += resid;
    if (r.x) score[1] += resid;
    if (r.c & 1u) score[2] += resid;
    if (r.c & 2u) score[3] += resid;
  }
  for (const double s : score) CHECK(std::abs(s) < 1e-8);
}

TEST_CASE("duplicating every row leaves the fit unchanged") {
  RandomStream rng(25, 0);
  const BinaryDataset d = testutil::random_dataset(2, 400, rng, 0.5, 0.35);
  std::vector<Observation> doubled = d.rows();
  doubled.insert(doubled.end(), d.rows().begin(), d.rows().end());

  const LogisticModel one = fit_main_effects(d);
  const LogisticModel two = fit_main_effects(BinaryDataset(2, std::move(doubled)));
  CHECK(std::abs(one.alpha0 - two.alpha0) < 1e-8);
  CHECK(std::abs(one.alpha1 - two.alpha1) < 1e-8);
  CHECK(std::abs(one.psi[0] - two.psi[0]) < 1e-8);
  CHECK(std::abs(one.psi[1] - two.psi[1]) < 1e-8);
}

TEST_CASE("raising alpha1 moves treated cells only") {
  LogisticModel m;
  m.alpha0 = 0.2;
  m.alpha1 = -0.4;
  m.psi = {0.3, -0.6};
  LogisticModel raised = m;
  raised.alpha1 += 0.5;
  for (std::uint32_t c = 0; c < 4; ++c) {
    CHECK(predict_cell(raised, {1, c}) > predict_cell(m, {1, c}));
    CHECK(predict_cell(raised, {0, c}) == predict_cell(m, {0, c}));
  }
}

TEST_CASE("fit rejects invalid inputs") {
  CHECK_THROWS_AS(fit_weighted({}, 1), DataError);
  const std::vector<WeightedCell> negative{{CellKey{0, 0}, -1.0, 0.5}};
  CHECK_THROWS_AS(fit_weighted(negative, 1), DataError);
  const std::vector<WeightedCell> out_of_range{{CellKey{0, 0}, 1.0, 1.5}};
  CHECK_THROWS_AS(fit_weighted(out_of_range, 1), DataError);
}
