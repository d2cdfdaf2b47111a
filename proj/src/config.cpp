#include "hybrid/config.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hybrid/checkpoint.hpp"
#include "json.hpp"

namespace hybrid {

using json = nlohmann::json;

namespace {

std::string line_hint(std::string_view text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string_view::npos) return " (from an override)";
  return " (line " + std::to_string(1 + std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n')) + ")";
}

thread_local std::vector<std::string>* g_collect = nullptr;  // set only while listing schema keys
const std::vector<std::string>& all_schema_keys();

// One JSON object of the schema. Reads typed values into defaults that are
// already in place, remembers which keys it knows, and rejects the rest.
class Section {
 public:
  Section(const json* obj, std::string path, std::string_view text)
      : obj_(obj), path_(std::move(path)), text_(text) {
    if (obj_ && !obj_->is_object()) throw Error(ErrorCode::SchemaError, where("") + " must be an object");
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    allowed_.push_back(key);
    if (g_collect) g_collect->push_back(where(key));
    if (!obj_) return nullptr;
    const auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) type_error(key, "a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw Error(ErrorCode::RangeError, where(key) + " must be finite");
    }
  }
  template <class Int>
    requires std::is_integral_v<Int>
  void get(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) type_error(key, "an integer");
      out = v->get<Int>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) type_error(key, "true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) type_error(key, "a string");
      out = v->get<std::string>();
    }
  }

  Section sub(const std::string& key) { return Section(find(key), where(key), text_); }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (std::find(allowed_.begin(), allowed_.end(), key) != allowed_.end()) continue;
      std::string msg = "unknown key '" + where(key) + "'" + line_hint(text_, key);
      std::size_t best = std::numeric_limits<std::size_t>::max();
      std::string suggestion;
      for (const auto& a : allowed_) {
        const std::size_t d = edit_distance(key, a);
        if (d < best) best = d, suggestion = a;
      }
      const std::size_t limit = std::max<std::size_t>(3, key.size() / 2);
      if (!suggestion.empty() && best <= limit) {
        msg += "; did you mean '" + suggestion + "'?";
      } else {
        // Perhaps the key belongs to another section.
        best = std::numeric_limits<std::size_t>::max();
        for (const auto& full : all_schema_keys()) {
          const std::string leaf = full.substr(full.rfind('.') + 1);
          const std::size_t d = edit_distance(key, leaf);
          if (d < best) best = d, suggestion = full;
        }
        if (best <= limit) msg += "; did you mean '" + suggestion + "'?";
      }
      throw Error(ErrorCode::SchemaError, msg);
    }
  }

  [[noreturn]] void type_error(const std::string& key, const char* expected) const {
    throw Error(ErrorCode::SchemaError, where(key) + " must be " + expected + line_hint(text_, key));
  }

  std::string_view text() const { return text_; }

 private:
  const json* obj_;
  std::string path_;
  std::string_view text_;
  std::vector<std::string> allowed_;
};

[[noreturn]] void range(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::RangeError, key + " " + what);
}

void read_quadratic(Section& s, Quadratic& q) {
  s.get("a0", q.a0);
  s.get("a1", q.a1);
  s.get("a2", q.a2);
}

void read_axis_potential(Section& parent, const std::string& key, AxisPotential& V, int points) {
  Section s = parent.sub(key);
  read_quadratic(s, V.poly);
  if (const json* t = s.find("table")) {
    if (!t->is_array()) s.type_error("table", "an array of numbers");
    std::vector<double> values;
    for (const auto& v : *t) {
      if (!v.is_number()) s.type_error("table", "an array of numbers");
      values.push_back(v.get<double>());
    }
    if (static_cast<int>(values.size()) != points)
      range(s.where("table"), "must have " + std::to_string(points) + " entries");
    V.table = std::move(values);
  }
  s.finish();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t k = 0; k <= s.size(); ++k)
    if (k == s.size() || s[k] == sep) {
      out.push_back(s.substr(start, k - start));
      start = k + 1;
    }
  return out;
}

void apply_override(json& root, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorCode::SchemaError, "override '" + item + "' is not of the form key=value");
  const std::vector<std::string> path = split(item.substr(0, eq), '.');
  const std::string text = item.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &root;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const std::string& seg = path[k];
    if (seg.empty()) throw Error(ErrorCode::SchemaError, "override '" + item + "' has an empty key segment");
    const bool last = k + 1 == path.size();
    if (node->is_array()) {
      const bool numeric = std::all_of(seg.begin(), seg.end(), [](char c) { return std::isdigit(c); });
      if (!numeric) throw Error(ErrorCode::SchemaError, "override '" + item + "': '" + seg + "' is not an index");
      const std::size_t idx = std::stoul(seg);
      if (idx >= node->size()) throw Error(ErrorCode::RangeError, "override '" + item + "': index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object())
        throw Error(ErrorCode::SchemaError, "override '" + item + "': '" + seg + "' is not inside an object");
      node = &(*node)[seg];
    }
    if (last) *node = value;
  }
}

SolverKind parse_solver(const std::string& s, const std::string& key) {
  if (s == "grid") return SolverKind::grid;
  if (s == "moments") return SolverKind::moments;
  if (s == "both") return SolverKind::both;
  throw Error(ErrorCode::SchemaError, key + " must be one of grid, moments, both");
}

const std::vector<std::string>& all_schema_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    g_collect = &out;
    parse_config("{}");
    g_collect = nullptr;
    for (const char* k : {"t_start", "t_end", "lambda"}) out.push_back(std::string("hamiltonian.schedule.0.") + k);
    return out;
  }();
  return keys;
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RunConfig default_config() {
  const Protocol p = default_protocol();
  RunConfig c;
  c.grid = p.grid;
  c.params = p.params;
  c.integrator = p.integrator;
  c.moments_dt = p.moments_dt;
  c.initial = p.initial;
  c.t_end = p.t_end;
  c.sample_dt = p.sample_dt;
  c.solver = p.solver;
  c.branch = p.branch;
  c.detect = p.detect;
  return c;
}

RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n');
    throw Error(ErrorCode::SchemaError, "malformed JSON near line " + std::to_string(line) + ": " + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::SchemaError, "configuration must be a JSON object");
  if (!overrides.empty()) {
    // Overrides may address defaults the file leaves out, such as an entry
    // of the default schedule, so they act on the file laid over the
    // defaults.
    static const json defaults = json::parse(resolved_config_text(default_config()));
    json merged = defaults;
    merged.merge_patch(root);
    root = std::move(merged);
    for (const auto& o : overrides) apply_override(root, o);
  }

  RunConfig c = default_config();
  Section top(&root, "", text);

  {
    Section s = top.sub("grid");
    GridSpec& g = c.grid;
    s.get("q_min", g.q_min);
    s.get("q_max", g.q_max);
    s.get("n_q", g.n_q);
    s.get("x_min", g.x_min);
    s.get("x_max", g.x_max);
    s.get("n_x", g.n_x);
    std::string b = g.boundary == Boundary::periodic ? "periodic" : "truncated";
    s.get("boundary", b);
    if (b == "truncated") g.boundary = Boundary::truncated;
    else if (b == "periodic") g.boundary = Boundary::periodic;
    else throw Error(ErrorCode::SchemaError, "grid.boundary must be truncated or periodic");
    s.finish();
    if (!(g.q_max > g.q_min)) range("grid.q_max", "must exceed grid.q_min");
    if (!(g.x_max > g.x_min)) range("grid.x_max", "must exceed grid.x_min");
    if (g.n_q < 8) range("grid.n_q", "must be at least 8");
    if (g.n_x < 8) range("grid.n_x", "must be at least 8");
  }
  {
    Section s = top.sub("hamiltonian");
    HamiltonianParams& h = c.params;
    s.get("m_q", h.m_q);
    s.get("m_x", h.m_x);
    s.get("hbar", h.hbar);
    read_axis_potential(s, "V_q", h.potential.V_q, c.grid.n_q);
    read_axis_potential(s, "V_x", h.potential.V_x, c.grid.n_x);
    if (const json* sched = s.find("schedule")) {
      if (!sched->is_array()) s.type_error("schedule", "an array of windows");
      h.schedule.clear();
      for (std::size_t k = 0; k < sched->size(); ++k) {
        Section w(&(*sched)[k], "hamiltonian.schedule." + std::to_string(k), text);
        InteractionWindow win;
        w.get("t_start", win.t_start);
        w.get("t_end", win.t_end);
        w.get("lambda", win.lambda);
        w.finish();
        h.schedule.push_back(win);
      }
    }
    {
      Section r = s.sub("regularization");
      r.get("floor_rel", h.regularization.floor_rel);
      r.get("mask_rel", h.regularization.mask_rel);
      r.get("enabled", h.regularization.enabled);
      r.finish();
    }
    s.finish();
    if (!(h.m_q > 0.0)) range("hamiltonian.m_q", "must be positive");
    if (!(h.m_x > 0.0)) range("hamiltonian.m_x", "must be positive");
    if (!(h.hbar > 0.0)) range("hamiltonian.hbar", "must be positive");
    if (!(h.regularization.floor_rel >= 0.0)) range("hamiltonian.regularization.floor_rel", "must be non-negative");
    if (!(h.regularization.mask_rel >= 0.0)) range("hamiltonian.regularization.mask_rel", "must be non-negative");
    try {
      h.validate();
    } catch (const Error& e) {
      range("hamiltonian.schedule", std::string("is invalid: ") + e.what());
    }
  }
  {
    Section s = top.sub("integrator");
    IntegratorSpec& in = c.integrator;
    s.get("dt", in.dt);
    std::string scheme = "rk4";
    s.get("scheme", scheme);
    if (scheme != "rk4") throw Error(ErrorCode::SchemaError, "integrator.scheme must be rk4");
    s.get("renormalize_every", in.renormalize_every);
    s.get("max_steps", in.max_steps);
    s.get("c_stab", in.c_stab);
    s.get("stabilize", in.stabilize);
    s.get("filter_gain", in.filter_gain);
    s.get("sponge_depth", in.sponge_depth);
    s.get("moments_dt", c.moments_dt);
    s.finish();
    if (in.dt < 0.0) range("integrator.dt", "must be positive (or 0 for the stability bound)");
    if (in.renormalize_every < 1) range("integrator.renormalize_every", "must be a positive integer");
    if (in.max_steps < 1) range("integrator.max_steps", "must be a positive integer");
    if (!(in.c_stab > 0.0)) range("integrator.c_stab", "must be positive");
    if (!(in.filter_gain >= 0.0)) range("integrator.filter_gain", "must be non-negative");
    if (!(in.sponge_depth > 0.0)) range("integrator.sponge_depth", "must be positive");
    if (!(c.moments_dt > 0.0)) range("integrator.moments_dt", "must be positive");
    const double bound = stability_bound(c.grid, c.params, in.c_stab);
    if (in.dt > bound) range("integrator.dt", "exceeds the stability bound " + format_number(bound));
  }
  {
    Section s = top.sub("initial");
    GaussianMoments& m = c.initial;
    s.get("q_mean", m.mean(0));
    s.get("x_mean", m.mean(1));
    s.get("sigma_qq", m.Sigma(0, 0));
    s.get("sigma_qx", m.Sigma(0, 1));
    s.get("sigma_xx", m.Sigma(1, 1));
    m.Sigma(1, 0) = m.Sigma(0, 1);
    s.get("p_q", m.S_grad(0));
    s.get("p_x", m.S_grad(1));
    s.get("k_qq", m.S_hess(0, 0));
    s.get("k_qx", m.S_hess(0, 1));
    s.get("k_xx", m.S_hess(1, 1));
    m.S_hess(1, 0) = m.S_hess(0, 1);
    if (const json* cp = s.find("checkpoint")) {
      if (cp->is_null()) c.checkpoint.reset();
      else if (cp->is_string()) c.checkpoint = cp->get<std::string>();
      else s.type_error("checkpoint", "a path string or null");
    }
    s.finish();
    if (!(m.Sigma(0, 0) > 0.0)) range("initial.sigma_qq", "must be positive");
    if (!(m.Sigma(1, 1) > 0.0)) range("initial.sigma_xx", "must be positive");
    if (!(m.Sigma.determinant() > 0.0)) range("initial.sigma_qx", "makes the covariance indefinite");
  }
  {
    Section s = top.sub("run");
    s.get("t0", c.t0);
    s.get("t_end", c.t_end);
    s.get("sample_dt", c.sample_dt);
    std::string solver = to_string(c.solver);
    s.get("solver", solver);
    c.solver = parse_solver(solver, "run.solver");
    if (const json* p = s.find("probes")) {
      if (!p->is_array()) s.type_error("probes", "an array of observable labels");
      c.probes.clear();
      for (const auto& v : *p) {
        if (!v.is_string()) s.type_error("probes", "an array of observable labels");
        c.probes.push_back(v.get<std::string>());
        try {
          probe_by_label(c.probes.back());
        } catch (const Error&) {
          range("run.probes", "contains unknown observable '" + c.probes.back() + "'");
        }
      }
    }
    s.finish();
    if (!(c.t_end > c.t0)) range("run.t_end", "must exceed run.t0");
    if (!(c.sample_dt > 0.0)) range("run.sample_dt", "must be positive");
  }
  {
    Section s = top.sub("protocol");
    std::string kind = c.branch.kind == Branch::Kind::none       ? "none"
                       : c.branch.kind == Branch::Kind::scale_mq ? "scale_mq"
                                                                 : "replace_Vq";
    s.get("branch", kind);
    if (kind == "none") c.branch.kind = Branch::Kind::none;
    else if (kind == "scale_mq") c.branch.kind = Branch::Kind::scale_mq;
    else if (kind == "replace_Vq") c.branch.kind = Branch::Kind::replace_Vq;
    else throw Error(ErrorCode::SchemaError, "protocol.branch must be none, scale_mq or replace_Vq");
    s.get("factor", c.branch.factor);
    {
      Section v = s.sub("V_q");
      read_quadratic(v, c.branch.V_q);
      v.finish();
    }
    s.get("detect", c.detect);
    s.get("half_ensemble_samples", c.half_ensemble_samples);
    s.finish();
    if (!(c.branch.factor > 0.0)) range("protocol.factor", "must be positive");
    if (c.half_ensemble_samples < 10) range("protocol.half_ensemble_samples", "must be at least 10");
  }
  {
    Section s = top.sub("bracket_check");
    s.get("states", c.bracket_check.states);
    s.get("n", c.bracket_check.n);
    s.finish();
    if (c.bracket_check.states < 1) range("bracket_check.states", "must be positive");
    if (c.bracket_check.n < 16) range("bracket_check.n", "must be at least 16");
  }
  top.finish();
  return c;
}

std::string resolved_config_text(const RunConfig& c) {
  const auto quad = [](const Quadratic& q) { return json{{"a0", q.a0}, {"a1", q.a1}, {"a2", q.a2}}; };
  const auto axis = [&](const AxisPotential& V) {
    json j = quad(V.poly);
    if (V.table) j["table"] = *V.table;
    return j;
  };
  json sched = json::array();
  for (const auto& w : c.params.schedule)
    sched.push_back({{"t_start", w.t_start}, {"t_end", w.t_end}, {"lambda", w.lambda}});
  const auto& g = c.grid;
  const auto& m = c.initial;
  json j;
  j["grid"] = {{"q_min", g.q_min},
               {"q_max", g.q_max},
               {"n_q", g.n_q},
               {"x_min", g.x_min},
               {"x_max", g.x_max},
               {"n_x", g.n_x},
               {"boundary", g.boundary == Boundary::periodic ? "periodic" : "truncated"}};
  j["hamiltonian"] = {{"m_q", c.params.m_q},
                      {"m_x", c.params.m_x},
                      {"hbar", c.params.hbar},
                      {"V_q", axis(c.params.potential.V_q)},
                      {"V_x", axis(c.params.potential.V_x)},
                      {"schedule", sched},
                      {"regularization",
                       {{"floor_rel", c.params.regularization.floor_rel},
                        {"mask_rel", c.params.regularization.mask_rel},
                        {"enabled", c.params.regularization.enabled}}}};
  j["integrator"] = {{"dt", c.integrator.dt},
                     {"scheme", "rk4"},
                     {"renormalize_every", c.integrator.renormalize_every},
                     {"max_steps", c.integrator.max_steps},
                     {"c_stab", c.integrator.c_stab},
                     {"stabilize", c.integrator.stabilize},
                     {"filter_gain", c.integrator.filter_gain},
                     {"sponge_depth", c.integrator.sponge_depth},
                     {"moments_dt", c.moments_dt}};
  j["initial"] = {{"q_mean", m.mean(0)},    {"x_mean", m.mean(1)},    {"sigma_qq", m.Sigma(0, 0)},
                  {"sigma_qx", m.Sigma(0, 1)}, {"sigma_xx", m.Sigma(1, 1)}, {"p_q", m.S_grad(0)},
                  {"p_x", m.S_grad(1)},     {"k_qq", m.S_hess(0, 0)}, {"k_qx", m.S_hess(0, 1)},
                  {"k_xx", m.S_hess(1, 1)}, {"checkpoint", c.checkpoint ? json(*c.checkpoint) : json(nullptr)}};
  j["run"] = {{"t0", c.t0},
              {"t_end", c.t_end},
              {"sample_dt", c.sample_dt},
              {"solver", to_string(c.solver)},
              {"probes", c.probes}};
  const std::string kind = c.branch.kind == Branch::Kind::none       ? "none"
                           : c.branch.kind == Branch::Kind::scale_mq ? "scale_mq"
                                                                     : "replace_Vq";
  j["protocol"] = {{"branch", kind},
                   {"factor", c.branch.factor},
                   {"V_q", quad(c.branch.V_q)},
                   {"detect", c.detect},
                   {"half_ensemble_samples", c.half_ensemble_samples}};
  j["bracket_check"] = {{"states", c.bracket_check.states}, {"n", c.bracket_check.n}};
  return j.dump(2) + "\n";
}

Observable probe_by_label(const std::string& label) {
  for (const Observable& o : {obs::x(), obs::x2(), obs::p_x(), obs::p_x2(), obs::x_p_x(), obs::q(), obs::q2(),
                              obs::p_q(), obs::p_q2(), obs::kinetic_q(), obs::potential_q()})
    if (o.label == label) return o;
  throw Error(ErrorCode::RangeError, "unknown observable '" + label + "'");
}

std::vector<Observable> probes_of(const RunConfig& c) {
  std::vector<Observable> out;
  for (const auto& l : c.probes) out.push_back(probe_by_label(l));
  return out;
}

HybridState initial_state(const RunConfig& c) {
  if (c.checkpoint) {
    HybridState s = load_checkpoint(*c.checkpoint);
    if (s.grid() != c.grid) throw Error(ErrorCode::RangeError, "initial.checkpoint grid differs from the grid section");
    return normalize(s);
  }
  return moments_to_state(c.initial, c.grid, c.params.hbar);
}

Protocol make_protocol(const RunConfig& c) {
  Protocol p;
  p.initial = c.initial;
  if (c.checkpoint) p.initial_state = initial_state(c);
  p.grid = c.grid;
  p.params = c.params;
  p.branch = c.branch;
  p.t_end = c.t_end;
  p.sample_dt = c.sample_dt;
  p.solver = c.solver;
  p.integrator = c.integrator;
  p.moments_dt = c.moments_dt;
  p.detect = c.detect;
  p.probes = probes_of(c);
  return p;
}

}  // namespace hybrid
