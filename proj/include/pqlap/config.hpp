#pragma once

#include "pqlap/estimates.hpp"
#include "pqlap/families.hpp"
#include "pqlap/galerkin.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pqlap {

/// Malformed or ill-typed configuration; the message names the line or key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parsed run configuration. Schema (every key optional unless noted):
///
///   problem:   p, q (required), domain {dim, bounds}, variant, regime,
///              weight {name, params}, convection {name, params}
///   mesh:      base_cells, levels
///   solver:    tolerance, max_iterations, continuation_steps, epsilon, guard_samples
///   estimates: poincare_convention, sobolev_samples, audit_samples, seed
///   output:    solutions, diagnostics
struct RunConfig {
  ProblemSpecd spec;
  std::string weight_name = "constant";
  ParamMap weight_params;
  std::string convection_name = "zero";
  ParamMap convection_params;

  int base_cells = 2;
  int levels = 6;
  SolverConfig solver;
  EstimateOptions estimates;
  std::uint64_t seed = 7;

  bool write_solutions = true;
  bool write_diagnostics = true;

  /// Every field, defaults filled in, as canonical JSON text.
  std::string normalized;

  void set_seed(std::uint64_t s) {
    seed = s;
    solver.seed = s;
    estimates.seed = s;
  }
};

/// Throws ConfigError on syntax, type, range or unknown-key problems, and
/// PreconditionError when the problem violates (H1)-(H3).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace pqlap
