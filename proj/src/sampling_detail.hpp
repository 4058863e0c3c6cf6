#pragma once

// Internal machinery shared by the full sampler and its approximations.
// A "mixture cell" is one confounder code's contribution to an effect draw:
// a Dirichlet Gamma shape plus the two arm Beta parameters. Enumerators
// must visit cells in the same stable order on every invocation; draw d of
// a run is then a pure function of (rng, d) no matter how work is split
// across threads.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "gcomp/parallel.hpp"
#include "gcomp/posterior.hpp"
#include "gcomp/rng.hpp"

namespace gcomp::detail {

inline constexpr std::int64_t kDrawChunk = 32;

struct MixtureCell {
  double dir_shape;
  BetaParams arm1;
  BetaParams arm0;
};

// Normalized weighted contrast accumulated in log space: cells with tiny
// Dirichlet shapes produce Gamma variates far below double range, so the
// running sum is rescaled against the largest log-weight seen so far.
class ContrastAccumulator {
 public:
  void add(double log_weight, double contrast) {
    if (log_weight > max_log_) {
      const double scale =
          weight_sum_ > 0.0 ? std::exp(max_log_ - log_weight) : 0.0;
      weight_sum_ = weight_sum_ * scale + 1.0;
      contrast_sum_ = contrast_sum_ * scale + contrast;
      max_log_ = log_weight;
    } else {
      const double w = std::exp(log_weight - max_log_);
      weight_sum_ += w;
      contrast_sum_ += w * contrast;
    }
  }
  // Adds mass to the denominator only (a mixture component whose value
  // is supplied through another route).
  void add_weight_only(double log_weight) { add(log_weight, 0.0); }

  double value() const { return contrast_sum_ / weight_sum_; }

 private:
  double max_log_ = -std::numeric_limits<double>::infinity();
  double weight_sum_ = 0.0;
  double contrast_sum_ = 0.0;
};

// Samples one Gamma + two Beta variates per cell, in cell order, and
// returns the normalized contrast sum_c gamma_c (theta_{1,c} - theta_{0,c}).
// ForEachCell: void(visitor) with visitor(const MixtureCell&).
template <typename ForEachCell>
std::vector<double> sample_weighted_contrast(std::int64_t draws,
                                             const RandomStream& rng,
                                             ForEachCell&& cells) {
  std::vector<double> out(static_cast<std::size_t>(draws));
  const std::uint64_t n_chunks =
      static_cast<std::uint64_t>((draws + kDrawChunk - 1) / kDrawChunk);
  parallel_for_chunks(n_chunks, [&](std::uint64_t k) {
    RandomStream stream = rng.child(k);
    const std::int64_t lo = static_cast<std::int64_t>(k) * kDrawChunk;
    const std::int64_t hi = std::min(draws, lo + kDrawChunk);
    for (std::int64_t d = lo; d < hi; ++d) {
      ContrastAccumulator acc;
      cells([&](const MixtureCell& cell) {
        const double lg = stream.log_gamma_variate(cell.dir_shape);
        const double t1 = sample_beta(cell.arm1.alpha, cell.arm1.beta, stream);
        const double t0 = sample_beta(cell.arm0.alpha, cell.arm0.beta, stream);
        acc.add(lg, t1 - t0);
      });
      out[static_cast<std::size_t>(d)] = acc.value();
    }
  });
  return out;
}

}  // namespace gcomp::detail
