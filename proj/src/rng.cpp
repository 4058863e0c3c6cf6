#include "gcomp/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "gcomp/errors.hpp"

namespace gcomp {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_key(std::uint64_t seed, std::uint64_t substream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(substream * kGolden + 1));
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t substream)
    : engine_(mix_key(seed, substream)), seed_(seed), substream_(substream) {}

RandomStream RandomStream::child(std::uint64_t index) const {
  return RandomStream(seed_, splitmix64(substream_ ^ kGolden) + index + 1);
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform_pos() {
  double u;
  do {
    u = uniform();
  } while (u <= 0.0);
  return u;
}

std::uint64_t RandomStream::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % bound;
}

double RandomStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 6.283185307179586476925286766559 * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

double RandomStream::gamma(double shape) {
  if (!(shape > 0.0)) throw DataError("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost: Ga(shape) = Ga(shape + 1) * U^{1/shape}.
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform_pos(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RandomStream::log_gamma_variate(double shape) {
  if (!(shape > 0.0)) throw DataError("log_gamma_variate: shape must be positive");
  if (shape < 1.0) {
    return std::log(gamma(shape + 1.0)) + std::log(uniform_pos()) / shape;
  }
  return std::log(gamma(shape));
}

double sample_beta(double alpha, double beta, RandomStream& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw DataError("sample_beta: parameters must be positive");
  }
  // X/(X+Y) = 1/(1 + exp(logY - logX)); stable for tiny shapes where the
  // Gamma variates themselves underflow.
  const double lx = rng.log_gamma_variate(alpha);
  const double ly = rng.log_gamma_variate(beta);
  return 1.0 / (1.0 + std::exp(ly - lx));
}

void sample_dirichlet(std::span<const double> alpha, std::span<double> out,
                      RandomStream& rng) {
  if (alpha.size() != out.size()) {
    throw std::invalid_argument("sample_dirichlet: size mismatch");
  }
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = rng.log_gamma_variate(alpha[i]);
    if (out[i] > max_log) max_log = out[i];
  }
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(out[i] - max_log);
    total += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= total;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha,
                                     RandomStream& rng) {
  std::vector<double> out(alpha.size());
  sample_dirichlet(alpha, out, rng);
  return out;
}

}  // namespace gcomp
