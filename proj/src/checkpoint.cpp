#include "hybrid/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace hybrid {

namespace {

constexpr const char* kMagic = "# hybrid-state v1";
constexpr const char* kColumns = "i,j,q,x,P,S";

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& ctx) {
  double v = 0.0;
  const auto t = trim(s);
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw Error(ErrorCode::IoError, "checkpoint: bad number '" + t + "' in " + ctx);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const HybridState& state) {
  const auto& g = state.grid();
  os << kMagic << '\n';
  os << "q_min = " << fmt(g.q_min) << '\n';
  os << "q_max = " << fmt(g.q_max) << '\n';
  os << "n_q = " << g.n_q << '\n';
  os << "x_min = " << fmt(g.x_min) << '\n';
  os << "x_max = " << fmt(g.x_max) << '\n';
  os << "n_x = " << g.n_x << '\n';
  os << "boundary = " << (g.boundary == Boundary::periodic ? "periodic" : "truncated") << '\n';
  os << kColumns << '\n';
  for (int i = 0; i < g.n_q; ++i)
    for (int j = 0; j < g.n_x; ++j)
      os << i << ',' << j << ',' << fmt(g.q(i)) << ',' << fmt(g.x(j)) << ','
         << fmt(state.P()(i, j)) << ',' << fmt(state.S()(i, j)) << '\n';
}

HybridState read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kMagic)
    throw Error(ErrorCode::IoError, "checkpoint: missing header line");
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line == kColumns) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::IoError, "checkpoint: bad header line '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  const auto need = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error(ErrorCode::IoError, "checkpoint: missing key " + k);
    return it->second;
  };
  GridSpec g;
  g.q_min = parse_double(need("q_min"), "q_min");
  g.q_max = parse_double(need("q_max"), "q_max");
  g.n_q = static_cast<int>(parse_double(need("n_q"), "n_q"));
  g.x_min = parse_double(need("x_min"), "x_min");
  g.x_max = parse_double(need("x_max"), "x_max");
  g.n_x = static_cast<int>(parse_double(need("n_x"), "n_x"));
  const auto b = need("boundary");
  if (b == "periodic")
    g.boundary = Boundary::periodic;
  else if (b == "truncated")
    g.boundary = Boundary::truncated;
  else
    throw Error(ErrorCode::IoError, "checkpoint: unknown boundary " + b);
  g.validate();

  Field P(g), S(g);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell[6];
    for (auto& c : cell)
      if (!std::getline(ss, c, ',')) throw Error(ErrorCode::IoError, "checkpoint: short row '" + line + "'");
    const int i = static_cast<int>(parse_double(cell[0], "i"));
    const int j = static_cast<int>(parse_double(cell[1], "j"));
    if (i < 0 || i >= g.n_q || j < 0 || j >= g.n_x)
      throw Error(ErrorCode::IoError, "checkpoint: cell index out of range in '" + line + "'");
    P(i, j) = parse_double(cell[4], "P");
    S(i, j) = parse_double(cell[5], "S");
    ++rows;
  }
  if (rows != g.size()) throw Error(ErrorCode::IoError, "checkpoint: expected " + std::to_string(g.size()) + " rows");
  return HybridState::unnormalized(g, std::move(P), std::move(S));
}

void save_checkpoint(const std::filesystem::path& path, const HybridState& state) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_checkpoint(os, state);
}

HybridState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return read_checkpoint(is);
}

}  // namespace hybrid
