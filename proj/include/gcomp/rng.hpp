#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gcomp {

// Seedable random stream with reproducible substreams.
//
// A stream is identified by (seed, substream). The same pair always yields
// the same draw sequence, independent of how many other streams exist or
// which thread consumes them. Parallel code derives one child stream per
// work chunk via child(), so results do not depend on thread count.
//
// All variate generators are implemented here rather than through
// std::*_distribution so sequences are identical across standard library
// implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t substream = 0);

  // Independent stream derived from this one; child(i) != child(j) for i != j.
  RandomStream child(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t substream() const { return substream_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1); safe to take logarithms of.
  double uniform_pos();
  // Uniform integer on [0, bound).
  std::uint64_t uniform_below(std::uint64_t bound);

  // Standard normal via Box-Muller (second variate cached).
  double normal();

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 handled by boosting.
  double gamma(double shape);

  // log of a Gamma(shape, 1) variate. For tiny shapes the variate itself
  // underflows to zero in double precision; the log stays finite.
  double log_gamma_variate(double shape);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  std::uint64_t substream_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Beta(a, b) draw as a ratio of Gamma variates, computed in log space so
// extreme shape parameters (down to ~1e-300) stay well defined.
double sample_beta(double alpha, double beta, RandomStream& rng);

// Dirichlet draw via normalized Gamma variates. out.size() == alpha.size();
// components sum to 1 up to rounding.
void sample_dirichlet(std::span<const double> alpha, std::span<double> out,
                      RandomStream& rng);
std::vector<double> sample_dirichlet(std::span<const double> alpha,
                                     RandomStream& rng);

}  // namespace gcomp
