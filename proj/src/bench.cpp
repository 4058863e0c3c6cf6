#include "gcomp/bench.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "gcomp/approx.hpp"
#include "gcomp/errors.hpp"
#include "gcomp/logistic.hpp"

namespace gcomp {

std::string method_label(Method m) {
  switch (m) {
    case Method::kBsat: return "BSAT";
    case Method::kPsm: return "PSM";
    case Method::kPsmClt: return "PSM-CLT";
    case Method::kPsmRandom: return "PSM-Random";
    case Method::kParametric: return "Parametric";
  }
  return "?";
}

Method parse_method(const std::string& label) {
  std::string key;
  key.reserve(label.size());
  for (const char ch : label) key.push_back(static_cast<char>(std::tolower(ch)));
  if (key == "bsat") return Method::kBsat;
  if (key == "psm") return Method::kPsm;
  if (key == "psm-clt" || key == "psmclt") return Method::kPsmClt;
  if (key == "psm-random" || key == "psmrandom") return Method::kPsmRandom;
  if (key == "parametric") return Method::kParametric;
  throw DataError("unknown method '" + label + "'");
}

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

EffectEstimate run_method(Method method, const CellTable& t,
                          const LogisticModel* g, const Hyperparams& h,
                          std::int64_t draws, std::int64_t r_size,
                          RandomStream rng) {
  switch (method) {
    case Method::kBsat: {
      const OutcomePosterior op = bsat_posterior(t, h.phi);
      const GammaPosterior gp = dirichlet_posterior(t, h.epsilon, Estimand::kAtt);
      return sample_effect(op, gp, draws, rng);
    }
    case Method::kPsm: {
      const OutcomePosterior op = psm_posterior(t, *g, h);
      const GammaPosterior gp = dirichlet_posterior(t, h.epsilon, Estimand::kAtt);
      return sample_effect(op, gp, draws, rng);
    }
    case Method::kPsmClt: {
      const OutcomePosterior op = psm_posterior(t, *g, h);
      const GammaPosterior gp = dirichlet_posterior(t, h.epsilon, Estimand::kAtt);
      if (t.missing_code_count() == 0) {
        // Nothing to approximate; the approximation's exact limit.
        EffectEstimate est = sample_effect(op, gp, draws, rng);
        est.method = method_label(method);
        return est;
      }
      return sample_effect_clt(op, gp, t, draws, rng);
    }
    case Method::kPsmRandom: {
      const OutcomePosterior op = psm_posterior(t, *g, h);
      const GammaPosterior gp = dirichlet_posterior(t, h.epsilon, Estimand::kAtt);
      if (t.missing_code_count() == 0) {
        EffectEstimate est = sample_effect(op, gp, draws, rng.child(1));
        est.method = method_label(method);
        return est;
      }
      const MissingSample ms =
          sample_missing_cells(t, r_size, h.epsilon, rng.child(0));
      return sample_effect_random(op, gp, t, ms, draws, rng.child(1));
    }
    case Method::kParametric: {
      EffectEstimate est;
      est.method = method_label(method);
      est.mean = parametric_effect(t, *g, Estimand::kAtt);
      est.sd = 0.0;
      return est;
    }
  }
  throw ModelError("unhandled method");
}

}  // namespace

std::vector<ResultRow> run_scenario(const BenchConfig& config,
                                    std::vector<std::string>* notes) {
  if (config.replicates < 1) throw DataError("replicates must be >= 1");
  if (config.methods.empty()) throw DataError("no methods selected");
  config.spec.validate(/*require_mu1=*/true);

  const bool needs_model = std::any_of(
      config.methods.begin(), config.methods.end(), [](Method m) {
        return m != Method::kBsat;
      });

  const double truth = true_att(config.spec);
  std::vector<ResultRow> rows;
  rows.reserve(config.n_grid.size() * config.methods.size() *
               static_cast<std::size_t>(config.replicates));

  auto note = [&](const std::string& message) {
    if (notes != nullptr) notes->push_back(message);
  };

  for (const std::int64_t n : config.n_grid) {
    if (n < 1) throw DataError("sample sizes must be positive");
    const double phi = config.phi_override.value_or(
        default_concentration(n, config.spec.p));
    const double eps = config.epsilon_override.value_or(
        default_concentration(n, config.spec.p));

    for (int rep = 0; rep < config.replicates; ++rep) {
      const RandomStream rep_stream =
          RandomStream(config.master_seed, 0)
              .child(static_cast<std::uint64_t>(n))
              .child(static_cast<std::uint64_t>(rep));
      try {
        const BinaryDataset data =
            simulate_dataset(config.spec, n, rep_stream.child(0));
        const CellTable t = tabulate(data);
        const Hyperparams h{phi, eps,
                            config.b_override.value_or(default_b(t))};

        LogisticModel g;
        if (needs_model) g = fit_main_effects(data);

        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
          const Method method = config.methods[mi];
          try {
            const auto start = std::chrono::steady_clock::now();
            const EffectEstimate est =
                run_method(method, t, needs_model ? &g : nullptr, h,
                           config.draws, config.r_size,
                           rep_stream.child(1 + mi));
            const auto stop = std::chrono::steady_clock::now();

            ResultRow row;
            row.method = method_label(method);
            row.n = n;
            row.replicate = rep;
            row.estimate = est.mean;
            row.truth = truth;
            row.sq_error = (est.mean - truth) * (est.mean - truth);
            row.seconds = std::chrono::duration<double>(stop - start).count();
            rows.push_back(std::move(row));
          } catch (const std::exception& e) {
            note("n=" + std::to_string(n) + " replicate " +
                 std::to_string(rep) + " " + method_label(method) +
                 " skipped: " + e.what());
          }
        }
      } catch (const std::exception& e) {
        note("n=" + std::to_string(n) + " replicate " + std::to_string(rep) +
             " skipped: " + e.what());
      }
    }
  }
  return rows;
}

std::vector<AggregateRow> aggregate(std::span<const ResultRow> rows) {
  if (rows.empty()) throw DataError("no rows to aggregate");
  struct Accum {
    double sq_error = 0.0;
    double bias = 0.0;
    double seconds = 0.0;
    int count = 0;
  };
  std::map<std::pair<std::string, std::int64_t>, Accum> groups;
  for (const auto& row : rows) {
    auto& acc = groups[{row.method, row.n}];
    acc.sq_error += row.sq_error;
    acc.bias += row.estimate - row.truth;
    acc.seconds += row.seconds;
    acc.count += 1;
  }
  std::vector<AggregateRow> table;
  table.reserve(groups.size());
  for (const auto& [key, acc] : groups) {
    AggregateRow out;
    out.method = key.first;
    out.n = key.second;
    out.count = acc.count;
    out.rmse = std::sqrt(acc.sq_error / acc.count);
    out.bias = acc.bias / acc.count;
    out.mean_seconds = acc.seconds / acc.count;
    table.push_back(std::move(out));
  }
  return table;
}

void write_rows_csv(std::span<const ResultRow> rows, std::ostream& out) {
  out << "method,n,replicate,estimate,truth,sq_error,seconds\n";
  for (const auto& row : rows) {
    out << row.method << ',' << row.n << ',' << row.replicate << ','
        << format_real(row.estimate) << ',' << format_real(row.truth) << ','
        << format_real(row.sq_error) << ',' << format_real(row.seconds)
        << '\n';
  }
}

std::vector<ResultRow> read_rows_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("result CSV is empty");
  if (line.ends_with("\r")) line.pop_back();
  if (line != "method,n,replicate,estimate,truth,sq_error,seconds") {
    throw DataError("unexpected result CSV header: " + line);
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    ResultRow row;
    std::string field;
    try {
      std::getline(ls, row.method, ',');
      std::getline(ls, field, ',');
      row.n = std::stoll(field);
      std::getline(ls, field, ',');
      row.replicate = std::stoi(field);
      std::getline(ls, field, ',');
      row.estimate = std::stod(field);
      std::getline(ls, field, ',');
      row.truth = std::stod(field);
      std::getline(ls, field, ',');
      row.sq_error = std::stod(field);
      std::getline(ls, field);
      row.seconds = std::stod(field);
    } catch (const std::exception&) {
      throw DataError("malformed result CSV line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_summary(std::span<const AggregateRow> table, std::ostream& out) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %8s %6s %12s %12s %12s\n", "method",
                "n", "reps", "rmse", "bias", "seconds");
  out << buf;
  for (const auto& row : table) {
    std::snprintf(buf, sizeof(buf), "%-12s %8lld %6d %12.6f %12.6f %12.6f\n",
                  row.method.c_str(), static_cast<long long>(row.n), row.count,
                  row.rmse, row.bias, row.mean_seconds);
    out << buf;
  }
}

void write_histogram_svg(std::span<const double> draws,
                         std::optional<double> truth, std::ostream& out) {
  if (draws.empty()) throw DataError("cannot plot an empty draw set");

  double lo = draws[0];
  double hi = draws[0];
  for (const double d : draws) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (truth) {
    lo = std::min(lo, *truth);
    hi = std::max(hi, *truth);
  }
  double span = hi - lo;
  if (span <= 0.0) span = 1e-6;
  lo -= 0.03 * span;
  hi += 0.03 * span;
  span = hi - lo;

  constexpr int kBins = 40;
  std::vector<std::int64_t> counts(kBins, 0);
  for (const double d : draws) {
    int bin = static_cast<int>((d - lo) / span * kBins);
    bin = std::clamp(bin, 0, kBins - 1);
    ++counts[bin];
  }
  const std::int64_t peak = *std::max_element(counts.begin(), counts.end());

  constexpr double kWidth = 640.0, kHeight = 400.0;
  constexpr double kLeft = 50.0, kRight = 620.0, kTop = 20.0, kBottom = 360.0;
  const double plot_w = kRight - kLeft;
  const double plot_h = kBottom - kTop;

  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" fill=\"white\"/>\n";

  for (int b = 0; b < kBins; ++b) {
    if (counts[b] == 0) continue;
    const double x = kLeft + plot_w * b / kBins;
    const double w = plot_w / kBins;
    const double h = plot_h * static_cast<double>(counts[b]) /
                     static_cast<double>(peak);
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                  "fill=\"#4878a8\" stroke=\"white\" stroke-width=\"0.5\"/>\n",
                  x, kBottom - h, w, h);
    out << buf;
  }

  // axis
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                "stroke=\"black\"/>\n",
                kLeft, kBottom, kRight, kBottom);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\">%.4g</text>\n",
                kLeft, kBottom + 16.0, lo);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" "
                "text-anchor=\"end\">%.4g</text>\n",
                kRight, kBottom + 16.0, hi);
  out << buf;

  if (truth) {
    const double x = kLeft + plot_w * (*truth - lo) / span;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                  "stroke=\"#c03030\" stroke-width=\"1.5\"/>\n",
                  x, kTop, x, kBottom);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" "
                  "fill=\"#c03030\">truth %.4g</text>\n",
                  x + 4.0, kTop + 12.0, *truth);
    out << buf;
  }
  out << "</svg>\n";
}

}  // namespace gcomp
