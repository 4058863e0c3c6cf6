#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace gcomp {

// One treatment-by-confounder cell. Confounder bits are packed little-endian:
// bit j of `c` is confounder j.
struct CellKey {
  std::uint8_t x = 0;
  std::uint32_t c = 0;

  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(c) << 1) | x;
  }
  friend bool operator==(const CellKey& a, const CellKey& b) {
    return a.x == b.x && a.c == b.c;
  }
};

// Returns bit j of a packed confounder code.
inline int code_bit(std::uint32_t code, int j) { return (code >> j) & 1u; }

struct Observation {
  std::uint8_t y = 0;
  std::uint8_t x = 0;
  std::uint32_t c = 0;  // packed confounder bits
};

// Binary outcome/treatment observations with p binary confounders.
// Immutable after construction.
class BinaryDataset {
 public:
  static constexpr int kMaxConfounders = 30;

  BinaryDataset(int p, std::vector<Observation> rows);

  int p() const { return p_; }
  std::int64_t n() const { return static_cast<std::int64_t>(rows_.size()); }
  const std::vector<Observation>& rows() const { return rows_; }

 private:
  int p_ = 0;
  std::vector<Observation> rows_;
};

struct CellCounts {
  std::int64_t successes = 0;  // y_{x,c}
  std::int64_t total = 0;      // n_{x,c}
};

// Sparse sufficient statistics of a BinaryDataset: per-cell success/total
// counts, treated-row counts per confounder code, and the partition of
// confounder codes into observed (M1) and missing (M0).
class CellTable {
 public:
  explicit CellTable(const BinaryDataset& d);
  // Empty table over 2^p codes; posteriors built on it equal their priors.
  explicit CellTable(int p);

  std::int64_t n() const { return n_; }
  int p() const { return p_; }
  std::uint64_t num_codes() const { return std::uint64_t{1} << p_; }

  // Zero counts for cells never observed.
  CellCounts cell(CellKey key) const;
  const std::unordered_map<std::uint64_t, CellCounts>& cells() const {
    return cells_;
  }

  // a_c: rows with X=1 and C=c. Zero when absent.
  std::int64_t treated_count(std::uint32_t code) const;
  const std::unordered_map<std::uint32_t, std::int64_t>& treated_counts()
      const {
    return treated_;
  }
  std::int64_t treated_total() const { return treated_total_; }

  // Rows with C=c in either arm (for ATE weighting).
  std::int64_t total_count(std::uint32_t code) const;

  // M1: confounder codes present in either arm, ascending.
  const std::vector<std::uint32_t>& observed_codes() const { return m1_; }
  bool observed(std::uint32_t code) const { return m1_set_.count(code) != 0; }
  std::uint64_t missing_code_count() const {
    return num_codes() - m1_.size();
  }

 private:
  std::int64_t n_ = 0;
  int p_ = 0;
  std::int64_t treated_total_ = 0;
  std::unordered_map<std::uint64_t, CellCounts> cells_;
  std::unordered_map<std::uint32_t, std::int64_t> treated_;
  std::unordered_map<std::uint32_t, std::int64_t> totals_;
  std::vector<std::uint32_t> m1_;
  std::unordered_set<std::uint32_t> m1_set_;
};

CellTable tabulate(const BinaryDataset& d);

struct Hyperparams {
  double phi = 1.0;      // Beta prior concentration
  double epsilon = 1.0;  // Dirichlet prior concentration
  double b = 0.0;        // prior/likelihood split in [0, 1]

  void validate() const;
};

// phi = epsilon = n / 2^p. Throws if the ratio underflows to zero.
double default_concentration(std::int64_t n, int p);

// Proportion of confounder codes absent from the data, clamped to [0.1, 0.9].
double default_b(const CellTable& t);

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

// Comma-separated numeric table: header row then rows of decimal or
// scientific-notation reals. No quoting; missing fields rejected.
struct RawTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // column-major

  std::size_t n_rows() const {
    return columns.empty() ? 0 : columns.front().size();
  }
  std::size_t column_index(const std::string& name) const;  // throws DataError
};

RawTable read_raw_table(std::istream& in);

// Reads a strictly binary dataset: the named columns must contain only
// literal 0/1 tokens.
BinaryDataset ingest_csv(std::istream& in, const std::string& outcome_col,
                         const std::string& treatment_col,
                         const std::vector<std::string>& confounder_cols);

// Writes header "y,x,c1,...,cp" followed by one 0/1 row per observation.
// ingest_csv of the output reproduces the dataset exactly.
void write_csv(const BinaryDataset& d, std::ostream& out);

// ---------------------------------------------------------------------------
// Dichotomization
// ---------------------------------------------------------------------------

enum class ColumnRule {
  kAlreadyBinary,  // values must be 0/1, passed through
  kMedianSplit,    // value > column median -> 1, else 0
};

struct DichotomizeSpec {
  std::vector<ColumnRule> rules;  // one per confounder column
};

// MedianSplit for any confounder column with values outside {0,1}.
DichotomizeSpec infer_dichotomize_spec(const RawTable& table,
                                       const std::vector<std::string>& cols);

// Converts a real-valued table to a BinaryDataset. Outcome and treatment
// columns must already be binary. Columns whose median equals every value
// map to all zeros and are reported through `warnings` when given.
BinaryDataset dichotomize(const RawTable& table, const DichotomizeSpec& spec,
                          const std::string& outcome_col,
                          const std::string& treatment_col,
                          const std::vector<std::string>& confounder_cols,
                          std::vector<std::string>* warnings = nullptr);

}  // namespace gcomp
