#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcomp/dgp.hpp"
#include "gcomp/posterior.hpp"

namespace gcomp {

enum class Method { kBsat, kPsm, kPsmClt, kPsmRandom, kParametric };

std::string method_label(Method m);
Method parse_method(const std::string& label);  // throws DataError

// One replicate-loop configuration over a calibrated simulation truth.
struct BenchConfig {
  DgpSpec spec;  // mu1 populated, lambda calibrated
  std::vector<std::int64_t> n_grid;
  std::vector<Method> methods;
  int replicates = 10;
  std::int64_t draws = 10'000;
  std::int64_t r_size = 1'000;  // PSM-Random missing-cell sample
  std::uint64_t master_seed = 0;
  std::optional<double> b_override;
  std::optional<double> phi_override;
  std::optional<double> epsilon_override;
};

struct ResultRow {
  std::string method;
  std::int64_t n = 0;
  int replicate = 0;
  double estimate = 0.0;
  double truth = 0.0;
  double sq_error = 0.0;
  double seconds = 0.0;  // estimation only: posterior construction + sampling
};

// Simulates one dataset per (n, replicate) on its own substream, fits the
// parametric model once per dataset, runs every method with its defaults
// (phi = eps = n/2^p, b = clamped missing proportion unless overridden),
// and times each estimation. Per-replicate failures are reported through
// `notes` (when given) and skipped.
std::vector<ResultRow> run_scenario(const BenchConfig& config,
                                    std::vector<std::string>* notes = nullptr);

struct AggregateRow {
  std::string method;
  std::int64_t n = 0;
  double rmse = 0.0;
  double bias = 0.0;
  double mean_seconds = 0.0;
  int count = 0;
};

// Groups rows by (method, n): RMSE = sqrt(mean squared error),
// bias = mean(estimate - truth). Row order does not matter.
std::vector<AggregateRow> aggregate(std::span<const ResultRow> rows);

// CSV schema: method,n,replicate,estimate,truth,sq_error,seconds
void write_rows_csv(std::span<const ResultRow> rows, std::ostream& out);
std::vector<ResultRow> read_rows_csv(std::istream& in);

// Fixed-width text table of the aggregate.
void write_summary(std::span<const AggregateRow> table, std::ostream& out);

// Standalone SVG 1.1 histogram of posterior draws with an optional vertical
// truth line.
void write_histogram_svg(std::span<const double> draws,
                         std::optional<double> truth, std::ostream& out);

}  // namespace gcomp
