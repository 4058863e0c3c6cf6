#include "gcomp/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gcomp/errors.hpp"

namespace gcomp {

namespace {

constexpr double kFallbackRidge = 1e-6;

// Dense Cholesky solve of the (d x d) SPD system H x = b, lower triangle of
// H in row-major order. Returns false when a pivot is not positive.
bool cholesky_solve(std::vector<double>& h, std::vector<double>& b, int d) {
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = h[i * d + j];
      for (int k = 0; k < j; ++k) sum -= h[i * d + k] * h[j * d + k];
      if (i == j) {
        if (sum <= 0.0) return false;
        h[i * d + i] = std::sqrt(sum);
      } else {
        h[i * d + j] = sum / h[j * d + j];
      }
    }
  }
  // forward substitution
  for (int i = 0; i < d; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k) sum -= h[i * d + k] * b[k];
    b[i] = sum / h[i * d + i];
  }
  // back substitution
  for (int i = d - 1; i >= 0; --i) {
    double sum = b[i];
    for (int k = i + 1; k < d; ++k) sum -= h[k * d + i] * b[k];
    b[i] = sum / h[i * d + i];
  }
  return true;
}

// Linear predictor for coefficient layout [alpha0, alpha1, psi_0..psi_{p-1}].
double eta_of(std::span<const double> beta, int x, std::uint32_t code, int p) {
  double eta = beta[0];
  if (x != 0) eta += beta[1];
  for (int j = 0; j < p; ++j) {
    if ((code >> j) & 1u) eta += beta[2 + j];
  }
  return eta;
}

double penalized_loglik(std::span<const double> beta, int p,
                        const CellSource& source, double ridge) {
  double ll = 0.0;
  source([&](int x, std::uint32_t code, double w, double q) {
    if (w <= 0.0) return;
    const double eta = eta_of(beta, x, code, p);
    // q log(pi) + (1-q) log(1-pi) = q*eta - softplus(eta)
    ll += w * (q * eta - softplus(eta));
  });
  if (ridge > 0.0) {
    double norm2 = 0.0;
    for (const double v : beta) norm2 += v * v;
    ll -= 0.5 * ridge * norm2;
  }
  return ll;
}

// One IRLS attempt. Returns true on score convergence.
bool irls(int p, const CellSource& source, const FitOptions& opts,
          double ridge, std::vector<double>& beta) {
  const int d = p + 2;
  std::vector<double> score(d), hess(d * d), step(d), candidate(d);
  int nz[2 + BinaryDataset::kMaxConfounders];

  double ll = penalized_loglik(beta, p, source, ridge);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    std::fill(score.begin(), score.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);

    source([&](int x, std::uint32_t code, double w, double q) {
      if (w <= 0.0) return;
      const double pi = expit(eta_of(beta, x, code, p));
      const double resid = w * (q - pi);
      const double curv = w * pi * (1.0 - pi);

      int k = 0;
      nz[k++] = 0;
      if (x != 0) nz[k++] = 1;
      for (int j = 0; j < p; ++j) {
        if ((code >> j) & 1u) nz[k++] = 2 + j;
      }
      // All features are 0/1, so every present pair contributes curv.
      for (int a = 0; a < k; ++a) {
        score[nz[a]] += resid;
        for (int b = 0; b <= a; ++b) hess[nz[a] * d + nz[b]] += curv;
      }
    });

    double max_score = 0.0;
    for (int j = 0; j < d; ++j) {
      score[j] -= ridge * beta[j];
      max_score = std::max(max_score, std::abs(score[j]));
    }
    if (max_score < opts.tolerance) return true;

    for (int j = 0; j < d; ++j) hess[j * d + j] += ridge;
    step = score;
    if (!cholesky_solve(hess, step, d)) return false;

    // Step-halving on penalized likelihood decrease. Decreases within
    // rounding noise of the current value still count as progress.
    const double slack = 1e-12 * (1.0 + std::abs(ll));
    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      for (int j = 0; j < d; ++j) candidate[j] = beta[j] + scale * step[j];
      const double cand_ll = penalized_loglik(candidate, p, source, ridge);
      if (cand_ll >= ll - slack || !std::isfinite(ll)) {
        beta = candidate;
        ll = cand_ll;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) return false;  // stalled
  }
  return false;
}

LogisticModel to_model(const std::vector<double>& beta, int p) {
  LogisticModel m;
  m.alpha0 = beta[0];
  m.alpha1 = beta[1];
  m.psi.assign(beta.begin() + 2, beta.end());
  (void)p;
  return m;
}

}  // namespace

double predict_cell(const LogisticModel& m, CellKey key) {
  double eta = m.alpha0;
  if (key.x != 0) eta += m.alpha1;
  for (int j = 0; j < m.p(); ++j) {
    if ((key.c >> j) & 1u) eta += m.psi[j];
  }
  const double pi = expit(eta);
  static const double kLo = std::nextafter(0.0, 1.0);
  static const double kHi = std::nextafter(1.0, 0.0);
  return std::clamp(pi, kLo, kHi);
}

LogisticModel fit_cells(int p, const CellSource& source,
                        const FitOptions& opts, const LogisticModel* init) {
  if (p < 0 || p > BinaryDataset::kMaxConfounders) {
    throw DataError("fit_cells: confounder count out of range");
  }
  if (opts.max_iterations < 1 || !(opts.tolerance > 0.0) || opts.ridge < 0.0) {
    throw DataError("fit_cells: invalid fit options");
  }

  double total_weight = 0.0;
  source([&](int, std::uint32_t, double w, double q) {
    if (w < 0.0) throw DataError("fit_cells: negative weight");
    if (q < 0.0 || q > 1.0) throw DataError("fit_cells: outcome outside [0, 1]");
    total_weight += w;
  });
  if (!(total_weight > 0.0)) throw DataError("fit_cells: total weight is zero");

  std::vector<double> beta(p + 2, 0.0);
  if (init != nullptr && init->p() == p) {
    beta[0] = init->alpha0;
    beta[1] = init->alpha1;
    std::copy(init->psi.begin(), init->psi.end(), beta.begin() + 2);
  }

  if (irls(p, source, opts, opts.ridge, beta)) return to_model(beta, p);

  if (opts.ridge == 0.0) {
    std::fill(beta.begin(), beta.end(), 0.0);
    if (irls(p, source, opts, kFallbackRidge, beta)) return to_model(beta, p);
  }
  throw ModelError(
      "logistic fit did not converge (likely quasi-separation); "
      "tried ridge fallback");
}

LogisticModel fit_main_effects(const BinaryDataset& d, const FitOptions& opts) {
  if (d.n() == 0) throw DataError("fit_main_effects: empty dataset");
  const auto& rows = d.rows();
  CellSource source = [&rows](const CellVisitor& visit) {
    for (const auto& r : rows) {
      visit(r.x, r.c, 1.0, static_cast<double>(r.y));
    }
  };
  return fit_cells(d.p(), source, opts);
}

LogisticModel fit_weighted(std::span<const WeightedCell> cells, int p,
                           const FitOptions& opts) {
  CellSource source = [cells](const CellVisitor& visit) {
    for (const auto& cell : cells) {
      visit(cell.key.x, cell.key.c, cell.weight, cell.outcome);
    }
  };
  return fit_cells(p, source, opts);
}

}  // namespace gcomp
