#include "hybrid/run_record.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "hybrid/brackets.hpp"

namespace hybrid {

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols = {
      "t",   "norm",   "energy", "x_mean", "x_var",       "px_mean",          "px2",
      "q_mean", "q_var", "pq2", "separability_defect", "signal_integral", "d2x2_formula"};
  return cols;
}

namespace {

double* field_ptr(Sample& s, const std::string& name) {
  if (name == "t") return &s.t;
  if (name == "norm") return &s.norm;
  if (name == "energy") return &s.energy;
  if (name == "x_mean") return &s.x_mean;
  if (name == "x_var") return &s.x_var;
  if (name == "px_mean") return &s.px_mean;
  if (name == "px2") return &s.px2;
  if (name == "q_mean") return &s.q_mean;
  if (name == "q_var") return &s.q_var;
  if (name == "pq2") return &s.pq2;
  if (name == "separability_defect") return &s.separability_defect;
  if (name == "signal_integral") return &s.signal_integral;
  if (name == "d2x2_formula") return &s.d2x2_formula;
  return nullptr;
}

double parse(const std::string& cell) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc()) throw Error(ErrorCode::IoError, "csv: bad number '" + cell + "'");
  return v;
}

}  // namespace

double column(const Sample& s, const std::string& name) {
  double* p = field_ptr(const_cast<Sample&>(s), name);
  if (!p) throw Error(ErrorCode::RangeError, "unknown column " + name);
  return *p;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Sample measure(const HybridState& s, const HamiltonianParams& params, double t,
               const std::vector<Observable>& probes, double norm) {
  Sample out;
  out.t = t;
  out.norm = norm;
  out.energy = ensemble_energy(s, params, t);
  out.x_mean = classical_expectation(s, obs::x());
  out.x_var = classical_expectation(s, obs::x2()) - out.x_mean * out.x_mean;
  const auto [p1, p2] = classical_momentum_moments(s);
  out.px_mean = p1;
  out.px2 = p2;
  out.q_mean = quantum_expectation(s, obs::q(), params);
  out.q_var = quantum_expectation(s, obs::q2(), params) - out.q_mean * out.q_mean;
  out.pq2 = quantum_expectation(s, obs::p_q2(), params);
  out.separability_defect = separability_defect(s);
  out.signal_integral = signal_integral(s, params);
  const bool free = params.lambda_at(t) == 0.0 && params.potential.V_x.is_flat();
  out.d2x2_formula = free ? 2.0 * p2 / (params.m_x * params.m_x) + out.signal_integral
                          : std::numeric_limits<double>::quiet_NaN();
  for (const auto& o : probes) out.probes.push_back(expectation(s, o, params));
  return out;
}

void write_csv(std::ostream& os, const RunRecord& r) {
  const auto& cols = record_columns();
  for (const auto& c : cols) os << c << ',';
  for (const auto& p : r.probe_labels) os << p << ',';
  os << "solver\n";
  for (const auto& s : r.samples) {
    for (const auto& c : cols) os << format_number(column(s, c)) << ',';
    for (double v : s.probes) os << format_number(v) << ',';
    os << r.solver << '\n';
  }
}

RunRecord read_csv(std::istream& is) {
  RunRecord r;
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::IoError, "csv: empty input");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto& cols = record_columns();
  if (header.size() < cols.size() + 1 || header.back() != "solver")
    throw Error(ErrorCode::IoError, "csv: unexpected header");
  for (std::size_t k = 0; k < cols.size(); ++k)
    if (header[k] != cols[k]) throw Error(ErrorCode::IoError, "csv: expected column " + cols[k]);
  r.probe_labels.assign(header.begin() + static_cast<long>(cols.size()), header.end() - 1);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw Error(ErrorCode::IoError, "csv: ragged row");
    Sample s;
    for (std::size_t k = 0; k < cols.size(); ++k) *field_ptr(s, cols[k]) = parse(cells[k]);
    for (std::size_t k = cols.size(); k + 1 < cells.size(); ++k) s.probes.push_back(parse(cells[k]));
    r.solver = cells.back();
    r.samples.push_back(std::move(s));
  }
  return r;
}

void save_csv(const std::filesystem::path& path, const RunRecord& r) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_csv(os, r);
}

}  // namespace hybrid
