#include "gcomp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "gcomp/errors.hpp"

namespace gcomp {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

std::uint8_t parse_binary(const std::string& token, std::size_t row,
                          const std::string& column) {
  if (token == "0") return 0;
  if (token == "1") return 1;
  throw DataError("non-binary value '" + token + "' in column '" + column +
                  "' at data row " + std::to_string(row + 1));
}

double parse_real(const std::string& token, std::size_t row,
                  const std::string& column) {
  if (token.empty()) {
    throw DataError("missing value in column '" + column + "' at data row " +
                    std::to_string(row + 1));
  }
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || !std::isfinite(v)) {
    throw DataError("invalid numeric value '" + token + "' in column '" +
                    column + "' at data row " + std::to_string(row + 1));
  }
  return v;
}

}  // namespace

BinaryDataset::BinaryDataset(int p, std::vector<Observation> rows)
    : p_(p), rows_(std::move(rows)) {
  if (p < 0 || p > kMaxConfounders) {
    throw DataError("confounder count " + std::to_string(p) +
                    " outside supported range [0, " +
                    std::to_string(kMaxConfounders) + "]");
  }
  const std::uint32_t limit =
      p < 32 ? (std::uint32_t{1} << p) : 0;  // p <= 30 always
  for (const auto& r : rows_) {
    if (r.y > 1 || r.x > 1 || (p < 32 && r.c >= limit)) {
      throw DataError("observation outside {0,1}^(p+2) domain");
    }
  }
}

CellTable::CellTable(int p) : p_(p) {
  if (p < 0 || p > BinaryDataset::kMaxConfounders) {
    throw DataError("confounder count out of range");
  }
}

CellTable::CellTable(const BinaryDataset& d) : n_(d.n()), p_(d.p()) {
  for (const auto& r : d.rows()) {
    auto& cell = cells_[CellKey{r.x, r.c}.packed()];
    cell.successes += r.y;
    cell.total += 1;
    totals_[r.c] += 1;
    if (r.x == 1) {
      treated_[r.c] += 1;
      ++treated_total_;
    }
  }
  m1_.reserve(totals_.size());
  for (const auto& [code, count] : totals_) m1_.push_back(code);
  std::sort(m1_.begin(), m1_.end());
  m1_set_.insert(m1_.begin(), m1_.end());
}

CellCounts CellTable::cell(CellKey key) const {
  const auto it = cells_.find(key.packed());
  return it == cells_.end() ? CellCounts{} : it->second;
}

std::int64_t CellTable::treated_count(std::uint32_t code) const {
  const auto it = treated_.find(code);
  return it == treated_.end() ? 0 : it->second;
}

std::int64_t CellTable::total_count(std::uint32_t code) const {
  const auto it = totals_.find(code);
  return it == totals_.end() ? 0 : it->second;
}

CellTable tabulate(const BinaryDataset& d) {
  if (d.n() == 0) throw DataError("cannot tabulate an empty dataset");
  return CellTable(d);
}

void Hyperparams::validate() const {
  if (!(phi > 0.0)) throw DataError("phi must be positive");
  if (!(epsilon > 0.0)) throw DataError("epsilon must be positive");
  if (!(b >= 0.0 && b <= 1.0)) throw DataError("b must lie in [0, 1]");
}

double default_concentration(std::int64_t n, int p) {
  if (n < 1 || p < 1) throw DataError("default_concentration requires n >= 1, p >= 1");
  const double value = static_cast<double>(n) * std::exp2(-p);
  if (value <= 0.0) {
    throw DataError("n / 2^p underflows to zero for p = " + std::to_string(p));
  }
  return value;
}

double default_b(const CellTable& t) {
  const double raw = static_cast<double>(t.missing_code_count()) /
                     static_cast<double>(t.num_codes());
  return std::clamp(raw, 0.1, 0.9);
}

std::size_t RawTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw DataError("column '" + name + "' not found in CSV header");
}

RawTable read_raw_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty");
  RawTable table;
  table.names = split_line(line);
  if (table.names.empty() || (table.names.size() == 1 && table.names[0].empty())) {
    throw DataError("CSV header row is empty");
  }
  table.columns.resize(table.names.size());

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_line(line);
    if (fields.size() != table.names.size()) {
      throw DataError("data row " + std::to_string(row + 1) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(table.names.size()));
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      table.columns[j].push_back(parse_real(fields[j], row, table.names[j]));
    }
    ++row;
  }
  if (row == 0) throw DataError("CSV has a header but no data rows");
  return table;
}

BinaryDataset ingest_csv(std::istream& in, const std::string& outcome_col,
                         const std::string& treatment_col,
                         const std::vector<std::string>& confounder_cols) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty");
  const auto header = split_line(line);

  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError("column '" + name + "' not found in CSV header");
  };

  const std::size_t y_idx = find_col(outcome_col);
  const std::size_t x_idx = find_col(treatment_col);
  std::vector<std::size_t> c_idx;
  c_idx.reserve(confounder_cols.size());
  for (const auto& name : confounder_cols) c_idx.push_back(find_col(name));

  const int p = static_cast<int>(confounder_cols.size());
  if (p < 1) throw DataError("at least one confounder column is required");
  if (p > BinaryDataset::kMaxConfounders) {
    throw DataError("too many confounder columns (" + std::to_string(p) +
                    "); limit is " +
                    std::to_string(BinaryDataset::kMaxConfounders));
  }

  std::vector<Observation> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw DataError("data row " + std::to_string(row + 1) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    Observation obs;
    obs.y = parse_binary(fields[y_idx], row, outcome_col);
    obs.x = parse_binary(fields[x_idx], row, treatment_col);
    for (int j = 0; j < p; ++j) {
      obs.c |= static_cast<std::uint32_t>(
                   parse_binary(fields[c_idx[j]], row, confounder_cols[j]))
               << j;
    }
    rows.push_back(obs);
    ++row;
  }
  if (rows.empty()) throw DataError("CSV has a header but no data rows");
  return BinaryDataset(p, std::move(rows));
}

void write_csv(const BinaryDataset& d, std::ostream& out) {
  out << "y,x";
  for (int j = 1; j <= d.p(); ++j) out << ",c" << j;
  out << '\n';
  for (const auto& r : d.rows()) {
    out << int(r.y) << ',' << int(r.x);
    for (int j = 0; j < d.p(); ++j) out << ',' << code_bit(r.c, j);
    out << '\n';
  }
}

DichotomizeSpec infer_dichotomize_spec(const RawTable& table,
                                       const std::vector<std::string>& cols) {
  DichotomizeSpec spec;
  spec.rules.reserve(cols.size());
  for (const auto& name : cols) {
    const auto& col = table.columns[table.column_index(name)];
    const bool binary = std::all_of(col.begin(), col.end(), [](double v) {
      return v == 0.0 || v == 1.0;
    });
    spec.rules.push_back(binary ? ColumnRule::kAlreadyBinary
                                : ColumnRule::kMedianSplit);
  }
  return spec;
}

namespace {

double column_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

BinaryDataset dichotomize(const RawTable& table, const DichotomizeSpec& spec,
                          const std::string& outcome_col,
                          const std::string& treatment_col,
                          const std::vector<std::string>& confounder_cols,
                          std::vector<std::string>* warnings) {
  if (spec.rules.size() != confounder_cols.size()) {
    throw DataError("dichotomize spec covers " +
                    std::to_string(spec.rules.size()) + " columns, expected " +
                    std::to_string(confounder_cols.size()));
  }
  const int p = static_cast<int>(confounder_cols.size());
  if (p < 1) throw DataError("at least one confounder column is required");
  if (p > BinaryDataset::kMaxConfounders) {
    throw DataError("too many confounder columns");
  }
  const std::size_t n = table.n_rows();
  if (n == 0) throw DataError("raw table has no rows");

  auto binary_column = [&](const std::string& name) {
    const auto& col = table.columns[table.column_index(name)];
    for (std::size_t i = 0; i < col.size(); ++i) {
      if (col[i] != 0.0 && col[i] != 1.0) {
        throw DataError("column '" + name + "' must be binary; row " +
                        std::to_string(i + 1) + " holds " +
                        std::to_string(col[i]));
      }
    }
    return &col;
  };

  const auto* y_col = binary_column(outcome_col);
  const auto* x_col = binary_column(treatment_col);

  std::vector<std::vector<std::uint8_t>> c_bits(p);
  for (int j = 0; j < p; ++j) {
    const auto& col =
        table.columns[table.column_index(confounder_cols[j])];
    c_bits[j].resize(n);
    if (spec.rules[j] == ColumnRule::kAlreadyBinary) {
      binary_column(confounder_cols[j]);
      for (std::size_t i = 0; i < n; ++i) {
        c_bits[j][i] = static_cast<std::uint8_t>(col[i]);
      }
    } else {
      const double median = column_median(col);
      bool any_one = false;
      for (std::size_t i = 0; i < n; ++i) {
        c_bits[j][i] = col[i] > median ? 1 : 0;  // ties map to 0
        any_one |= c_bits[j][i] != 0;
      }
      if (!any_one && warnings != nullptr) {
        warnings->push_back("column '" + confounder_cols[j] +
                            "' is degenerate after median split (all zeros)");
      }
    }
  }

  std::vector<Observation> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i].y = static_cast<std::uint8_t>((*y_col)[i]);
    rows[i].x = static_cast<std::uint8_t>((*x_col)[i]);
    for (int j = 0; j < p; ++j) {
      rows[i].c |= static_cast<std::uint32_t>(c_bits[j][i]) << j;
    }
  }
  return BinaryDataset(p, std::move(rows));
}

}  // namespace gcomp
