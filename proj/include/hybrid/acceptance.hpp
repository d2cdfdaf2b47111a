#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hybrid/experiments.hpp"

namespace hybrid {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;  // measured values against their tolerances
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
  int random_states = 100;  // states per randomized sweep
  int sweep_n = 128;        // grid size for randomized sweeps
  int signaling_n = 256;    // grid size for the signaling reproduction
  int jacobi_triples = 40;
};

/// Randomized bracket identities on smooth random states: the two canonical
/// pairs, the classical-configuration x quantum sweep, antisymmetry and the
/// Jacobi identity. Deterministic for a given seed.
struct BracketSweepReport {
  int states = 0;
  std::uint64_t seed = 0;
  struct Check {
    std::string name;
    double tolerance = 0.0;
    int passed = 0;
    int failed = 0;
    double worst = 0.0;
  };
  std::vector<Check> checks;
  bool all_passed() const;
  /// Fixed-format text, byte-identical for identical inputs.
  std::string text() const;
};

BracketSweepReport bracket_sweep(int states, int n, std::uint64_t seed, int jacobi_triples = 12);

/// The validation suite. Expensive runs shared between criteria are cached,
/// so running all criteria costs less than the sum of running each alone.
class AcceptanceSuite {
 public:
  explicit AcceptanceSuite(AcceptanceOptions options = {});
  ~AcceptanceSuite();

  static constexpr int kCriteria = 12;
  static std::string name(int id);

  /// Never throws for numerical failures; an exception inside a check is a
  /// failed criterion whose detail carries the message.
  CriterionResult run(int id);
  std::vector<CriterionResult> run_all(const std::function<void(const CriterionResult&)>& on_result = {});

 private:
  struct Cache;
  AcceptanceOptions options_;
  std::unique_ptr<Cache> cache_;

  CriterionResult bracket_reductions();
  CriterionResult classical_quantum_sweep();
  CriterionResult first_derivative_immunity();
  CriterionResult second_difference_identity();
  CriterionResult factorized_null();
  CriterionResult displaced_gaussian_closed_form();
  CriterionResult signaling_reproduction();
  CriterionResult mass_scaling();
  CriterionResult pure_limits();
  CriterionResult cross_validation();
  CriterionResult conservation();
  CriterionResult algebra_identities();
};

/// One line per result: "criterion <id> <PASS|FAIL> <name> | <detail> (<s>s)".
std::string format_result(const CriterionResult& r);

}  // namespace hybrid
