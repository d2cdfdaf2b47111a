#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybrid/dynamics.hpp"
#include "hybrid/experiments.hpp"
#include "hybrid/gaussian.hpp"
#include "hybrid/grid.hpp"
#include "hybrid/hamiltonian.hpp"
#include "hybrid/observables.hpp"

namespace hybrid {

struct BracketCheckSpec {
  int states = 20;
  int n = 64;

  bool operator==(const BracketCheckSpec&) const = default;
};

/// Fully typed run configuration. Every field has a default; the defaults
/// describe the standard signaling protocol.
struct RunConfig {
  GridSpec grid;
  HamiltonianParams params;
  IntegratorSpec integrator;
  double moments_dt = 1e-3;

  GaussianMoments initial;
  std::optional<std::string> checkpoint;  // replaces the Gaussian initial state

  double t0 = 0.0;
  double t_end = 2.0;
  double sample_dt = 0.01;
  SolverKind solver = SolverKind::grid;
  std::vector<std::string> probes;

  Branch branch;
  bool detect = true;
  int half_ensemble_samples = 1000;

  BracketCheckSpec bracket_check;

  bool operator==(const RunConfig&) const = default;
};

RunConfig default_config();

/// Parse JSON text, apply "dotted.key=value" overrides and validate.
/// Throws SchemaError for malformed text, unknown keys (with the nearest
/// valid key suggested) and wrong types; RangeError naming the key for
/// values that violate an invariant.
RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {});

/// Every field, defaults included, as JSON text that parses back to the same
/// configuration.
std::string resolved_config_text(const RunConfig& c);

/// Levenshtein distance, used for key suggestions.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// The registered observable with this label. Throws RangeError.
Observable probe_by_label(const std::string& label);
std::vector<Observable> probes_of(const RunConfig& c);

/// Protocol for run_signaling; loads the checkpoint if one is configured.
Protocol make_protocol(const RunConfig& c);

/// The initial state on the configured grid.
HybridState initial_state(const RunConfig& c);

}  // namespace hybrid
