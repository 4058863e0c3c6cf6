#include "gcomp/scenario.hpp"

#include <cinttypes>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "gcomp/errors.hpp"

namespace gcomp {

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ScenarioFile read_scenario(std::istream& in) {
  std::map<std::string, std::vector<double>> values;
  std::map<std::string, std::string> raw;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;  // blank line
    std::string eq;
    if (!(ls >> eq) || eq != "=") {
      throw DataError("scenario line " + std::to_string(line_no) +
                      ": expected 'key = value'");
    }
    std::vector<double> nums;
    std::string token;
    std::ostringstream joined;
    while (ls >> token) {
      joined << (nums.empty() ? "" : " ") << token;
      try {
        nums.push_back(std::stod(token));
      } catch (const std::exception&) {
        throw DataError("scenario line " + std::to_string(line_no) +
                        ": non-numeric value '" + token + "'");
      }
    }
    if (nums.empty()) {
      throw DataError("scenario line " + std::to_string(line_no) +
                      ": key '" + key + "' has no value");
    }
    values[key] = nums;
    raw[key] = joined.str();
  }

  auto scalar = [&](const std::string& key) {
    const auto it = values.find(key);
    if (it == values.end()) throw DataError("scenario is missing key '" + key + "'");
    if (it->second.size() != 1) throw DataError("scenario key '" + key + "' expects one value");
    return it->second[0];
  };
  auto range = [&](const std::string& key, double& lo, double& hi) {
    const auto it = values.find(key);
    if (it == values.end()) throw DataError("scenario is missing key '" + key + "'");
    if (it->second.size() != 2) {
      throw DataError("scenario key '" + key + "' expects two values (lo hi)");
    }
    lo = it->second[0];
    hi = it->second[1];
    if (!(lo <= hi)) throw DataError("scenario key '" + key + "' has lo > hi");
  };
  auto optional_scalar = [&](const std::string& key) -> std::optional<double> {
    const auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    if (it->second.size() != 1) throw DataError("scenario key '" + key + "' expects one value");
    return it->second[0];
  };

  ScenarioFile s;
  s.p = static_cast<int>(scalar("p"));
  s.delta_t = scalar("delta_t");
  s.meb = scalar("meb");
  s.rho_c = scalar("rho_c");
  s.beta0 = scalar("beta0");
  range("beta1_range", s.beta1_lo, s.beta1_hi);
  range("beta2_range", s.beta2_lo, s.beta2_hi);
  range("omega_range", s.omega_lo, s.omega_hi);
  {
    const auto it = raw.find("seed");
    if (it == raw.end()) throw DataError("scenario is missing key 'seed'");
    s.seed = std::strtoull(it->second.c_str(), nullptr, 10);
  }
  s.lambda0 = optional_scalar("lambda0");
  s.lambda1 = optional_scalar("lambda1");
  s.achieved_delta_t = optional_scalar("achieved_delta_t");
  s.achieved_meb = optional_scalar("achieved_meb");
  if (s.lambda0.has_value() != s.lambda1.has_value()) {
    throw DataError("scenario must carry both lambda0 and lambda1 or neither");
  }
  return s;
}

void write_scenario(const ScenarioFile& s, std::ostream& out) {
  out << "p = " << s.p << '\n';
  out << "delta_t = " << format_real(s.delta_t) << '\n';
  out << "meb = " << format_real(s.meb) << '\n';
  out << "rho_c = " << format_real(s.rho_c) << '\n';
  out << "beta0 = " << format_real(s.beta0) << '\n';
  out << "beta1_range = " << format_real(s.beta1_lo) << ' '
      << format_real(s.beta1_hi) << '\n';
  out << "beta2_range = " << format_real(s.beta2_lo) << ' '
      << format_real(s.beta2_hi) << '\n';
  out << "omega_range = " << format_real(s.omega_lo) << ' '
      << format_real(s.omega_hi) << '\n';
  out << "seed = " << s.seed << '\n';
  if (s.lambda0) out << "lambda0 = " << format_real(*s.lambda0) << '\n';
  if (s.lambda1) out << "lambda1 = " << format_real(*s.lambda1) << '\n';
  if (s.achieved_delta_t) {
    out << "achieved_delta_t = " << format_real(*s.achieved_delta_t) << '\n';
  }
  if (s.achieved_meb) {
    out << "achieved_meb = " << format_real(*s.achieved_meb) << '\n';
  }
}

DgpSpec build_spec(const ScenarioFile& s) {
  DgpSpec spec;
  spec.p = s.p;
  spec.beta0 = s.beta0;
  spec.rho_c = s.rho_c;
  spec.lambda0 = s.lambda0.value_or(0.0);
  spec.lambda1 = s.lambda1.value_or(0.0);

  RandomStream rng(s.seed, 0);
  auto draw_vector = [&](double lo, double hi) {
    std::vector<double> v(s.p);
    for (int j = 0; j < s.p; ++j) v[j] = lo + (hi - lo) * rng.uniform();
    return v;
  };
  spec.beta1 = draw_vector(s.beta1_lo, s.beta1_hi);
  spec.beta2 = draw_vector(s.beta2_lo, s.beta2_hi);
  spec.omega = draw_vector(s.omega_lo, s.omega_hi);
  return finalized(std::move(spec));
}

}  // namespace gcomp
