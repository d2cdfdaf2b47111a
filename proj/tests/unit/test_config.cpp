#include <doctest.h>

#include <sstream>
#include <string>

#include "hybrid/config.hpp"
#include "hybrid/run_record.hpp"

using namespace hybrid;

namespace {

ErrorCode code_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("configuration accepted: " << text);
  return ErrorCode::InvalidState;
}

std::string message_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("an empty object yields the defaults") {
  CHECK(parse_config("{}") == default_config());
}

TEST_CASE("resolved configuration round trips") {
  RunConfig c = parse_config(R"({"grid": {"n_q": 48}, "hamiltonian": {"m_q": 2.5, "V_x": {"a2": 0.25},
                                  "schedule": [{"t_start": 0.1, "t_end": 0.4, "lambda": -0.3}]},
                                  "run": {"probes": ["q2", "px"], "solver": "moments"},
                                  "protocol": {"branch": "replace_Vq", "V_q": {"a2": 1}}})");
  CHECK(c.grid.n_q == 48);
  CHECK(c.params.m_q == 2.5);
  CHECK(c.params.potential.V_x.poly.a2 == 0.25);
  CHECK(c.branch.kind == Branch::Kind::replace_Vq);
  CHECK(c.solver == SolverKind::moments);
  CHECK(parse_config(resolved_config_text(c)) == c);
  CHECK(resolved_config_text(parse_config(resolved_config_text(c))) == resolved_config_text(c));
}

TEST_CASE("overrides use dotted keys, array indices and JSON values") {
  const RunConfig c = parse_config("{}", {"hamiltonian.m_x=3", "hamiltonian.schedule.0.lambda=0",
                                          "run.solver=grid", "initial.x_mean=-0.5"});
  CHECK(c.params.m_x == 3.0);
  CHECK(c.params.schedule.at(0).lambda == 0.0);
  CHECK(c.solver == SolverKind::grid);
  CHECK(c.initial.mean(1) == -0.5);
  CHECK(code_of("{}", {"no_equals_sign"}) == ErrorCode::SchemaError);
  CHECK(code_of("{}", {"hamiltonian.schedule.7.lambda=1"}) == ErrorCode::RangeError);
}

TEST_CASE("schema errors name the key and suggest a fix") {
  CHECK(code_of("{ not json") == ErrorCode::SchemaError);
  CHECK(code_of("[1, 2]") == ErrorCode::SchemaError);
  const std::string m = message_of(R"({"hamiltonian": {"mq": 2}})");
  CHECK(m.find("hamiltonian.mq") != std::string::npos);
  CHECK(m.find("did you mean 'm_q'") != std::string::npos);
  CHECK(code_of(R"({"grid": {"n_q": "many"}})") == ErrorCode::SchemaError);
  CHECK(code_of(R"({"grid": {"n_q": 12.5}})") == ErrorCode::SchemaError);
  CHECK(code_of(R"({"run": {"solver": "magic"}})") == ErrorCode::SchemaError);
  CHECK(code_of(R"({"run": {"probes": ["nope"]}})") == ErrorCode::RangeError);
}

TEST_CASE("range errors name the offending key") {
  CHECK(message_of(R"({"hamiltonian": {"m_q": -1}})").find("hamiltonian.m_q") != std::string::npos);
  CHECK(code_of(R"({"hamiltonian": {"hbar": 0}})") == ErrorCode::RangeError);
  CHECK(code_of(R"({"grid": {"q_min": 1, "q_max": 0}})") == ErrorCode::RangeError);
  CHECK(code_of(R"({"grid": {"n_x": 4}})") == ErrorCode::RangeError);
  CHECK(code_of(R"({"integrator": {"filter_gain": -1}})") == ErrorCode::RangeError);
  CHECK(code_of(R"({"hamiltonian": {"schedule": [{"t_start": 1, "t_end": 0, "lambda": 1}]}})") ==
        ErrorCode::RangeError);
}

TEST_CASE("edit distance") {
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("", "abc") == 3);
  CHECK(edit_distance("m_q", "m_q") == 0);
}

TEST_CASE("the default configuration drives the default protocol") {
  const RunConfig c = default_config();
  const Protocol p = make_protocol(c);
  const Protocol d = default_protocol();
  CHECK(p.grid == d.grid);
  CHECK(p.params == d.params);
  CHECK(p.branch == d.branch);
  CHECK(initial_state(c).grid() == c.grid);
  CHECK(probe_by_label("x_px").label == "x_px");
}

TEST_CASE("run records round trip through CSV") {
  RunRecord r;
  r.solver = "moments";
  r.probe_labels = {"q2"};
  Sample s;
  s.t = 0.1;
  s.norm = 1.0;
  s.energy = 0.1 + 0.2;
  s.x_var = 1.0 / 3.0;
  s.d2x2_formula = std::numeric_limits<double>::quiet_NaN();
  s.probes = {std::exp(1.0)};
  r.samples = {s, s};
  std::stringstream ss;
  write_csv(ss, r);
  const RunRecord back = read_csv(ss);
  REQUIRE(back.samples.size() == 2);
  CHECK(back.solver == "moments");
  CHECK(back.probe_labels == r.probe_labels);
  CHECK(back.samples[1].energy == s.energy);
  CHECK(back.samples[1].x_var == s.x_var);
  CHECK(std::isnan(back.samples[1].d2x2_formula));
  CHECK(back.samples[1].probes.at(0) == s.probes[0]);
  CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(column(s, "x_var") == s.x_var);
}
