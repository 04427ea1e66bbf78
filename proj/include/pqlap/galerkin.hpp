#pragma once

#include "pqlap/fespace.hpp"
#include "pqlap/operators.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pqlap {

struct OperatorProperties {
  bool bounded = true;
  bool coercive = true;
  bool continuous = true;
};

/// A: E -> E* restricted to finite-dimensional P1 spaces, with the right-hand
/// side folded into the residual.
class AbstractOperator {
 public:
  using Sparse = Eigen::SparseMatrix<double>;

  virtual ~AbstractOperator() = default;

  /// Entry i is <A(u), phi_i> for the hat functions of u's space.
  virtual DualVectord residual(const FeFunctiond& u) const = 0;
  virtual Sparse jacobian(const FeFunctiond& u) const = 0;
  /// <A(u), v>, evaluated independently of residual().
  virtual double pairing(const FeFunctiond& u, const FeFunctiond& v) const = 0;
  /// The norm of E (here ||grad u||_{L^p}).
  virtual double norm(const FeFunctiond& u) const = 0;
  virtual OperatorProperties properties() const = 0;
  virtual std::optional<double> radius_hint() const { return std::nullopt; }
};

/// |pair(residual(u), v) - pairing(u, v)|.
double consistency_gap(const AbstractOperator& op, const FeFunctiond& u, const FeFunctiond& v);

/// The truncated operator A_R of a problem spec. Every space passed in must be
/// coarser than (or equal to) the integration space; residuals are computed
/// there and restricted, so all levels share one quadrature and
/// A_{n,R} is exactly the restriction of A_{N,R}.
class PqOperator : public AbstractOperator {
 public:
  PqOperator(ProblemSpecd spec, TruncatedWeight<double> weight, SpacePtr<double> integration,
             std::optional<double> radius_hint = std::nullopt);

  DualVectord residual(const FeFunctiond& u) const override;
  Sparse jacobian(const FeFunctiond& u) const override;
  double pairing(const FeFunctiond& u, const FeFunctiond& v) const override;
  double norm(const FeFunctiond& u) const override;
  OperatorProperties properties() const override;
  std::optional<double> radius_hint() const override { return hint_; }

  /// <A_R^1(u) -/+ Delta_q u, v>: everything but the convection term.
  double principal_pairing(const FeFunctiond& u, const FeFunctiond& v) const;
  /// int f(x, u, grad u) v.
  double convection_pairing(const FeFunctiond& u, const FeFunctiond& v) const;
  /// Raw parts restricted to u's space.
  OperatorParts<double> parts(const FeFunctiond& u) const;

  const ProblemSpecd& spec() const { return assembler_.spec(); }
  const TruncatedWeight<double>& weight() const { return assembler_.weight(); }
  const SpacePtr<double>& integration_space() const { return integration_; }

  /// Exact embedding of a coarser function into the integration space.
  FeFunctiond lift(const FeFunctiond& u) const;
  const Sparse& prolongation(const FeSpaced& space) const;

 private:
  PqAssembler<double> assembler_;
  SpacePtr<double> integration_;
  std::optional<double> hint_;
  mutable std::map<const MeshLevel<double>*, std::pair<SpacePtr<double>, Sparse>> cache_;
};

struct GuardRecord {
  double radius = 0;
  double initial_radius = 0;
  double min_pairing = 0;
  int samples = 0;
  int doublings = 0;
  bool pass = false;
};

/// min <A(v), v> over quasi-random v with ||v|| = radius; doubles the radius
/// up to `max_doublings` times while the minimum is negative.
GuardRecord brouwer_guard(const AbstractOperator& op, const SpacePtr<double>& space, double radius, int samples,
                          std::uint64_t seed = 7, int max_doublings = 10);

struct SolverConfig {
  double tolerance = 1e-10;
  int max_iterations = 200;  // Newton steps per level, homotopy steps included
  int continuation_steps = 10;
  int guard_samples = 64;
  std::uint64_t seed = 7;
};

enum class SolverPath { newton, continuation };
const char* to_string(SolverPath p);

struct LevelSolve {
  int level = 0;
  FeFunctiond u;
  double residual_sup = 0;
  int iterations = 0;
  GuardRecord guard;
  SolverPath path = SolverPath::newton;
  bool converged = false;
  bool within_guard = true;
  std::string message;
};

/// Damped Newton on the residual (line search on ||F||_2). From a zero start
/// the convex homotopy t A(u) + (1 - t) K u (K the stiffness matrix) is
/// followed first; from a nonzero start Newton runs first and the homotopy is
/// the fallback. `guard_radius` <= 0 skips the guard.
LevelSolve solve_level(const AbstractOperator& op, const SpacePtr<double>& space, const SolverConfig& cfg,
                       const FeFunctiond* warm_start = nullptr, double guard_radius = 0, int level = 0);

/// Tables of the generalized-solution conditions, all with the finest solution u
/// standing in for the weak limit.
struct ConditionTables {
  std::vector<std::string> test_names;
  std::vector<std::vector<double>> b;        // [level][test] <A_R(u_n), v>
  std::vector<std::vector<double>> b_bound;  // tol * ||P_n v||_1
  std::vector<double> c;                     // <A_R(u_n), u_n - u>
  std::vector<double> identity;              // -<A_R(u_n), u>
  std::vector<double> bookkeeping;           // <A_R(u_n), u_n>
  std::vector<double> bookkeeping_bound;     // tol * ||u_n||_1 (coefficients)
  std::vector<double> principal;             // <A_R^1(u_n) -/+ Delta_q u_n, u_n - u>
  std::vector<double> convection;            // int f(x, u_n, grad u_n)(u_n - u)
  std::vector<double> contraction;           // ||grad(u_n - u)||_p
  std::vector<double> grad_norm;
  std::vector<double> sup_norm;
  double residual_scale = 1;  // max(1, sum_i |load_i|) on the finest level
};

/// Level-0 hat functions followed by `random_count` fixed random coarse functions.
std::vector<FeFunctiond> make_test_set(const SpacePtr<double>& coarse, int random_count, std::uint64_t seed,
                                       std::vector<std::string>* names = nullptr);

ConditionTables evaluate_conditions(const PqOperator& op, const std::vector<FeFunctiond>& solutions,
                                    const std::vector<FeFunctiond>& test_set,
                                    const std::vector<std::string>& test_names, double tolerance);

struct HierarchyOptions {
  int base_cells = 2;
  int levels = 6;
  double truncation_radius = 1;  // R
  double guard_radius = 0;       // R1, <= 0 disables the guard
  int random_tests = 5;
  SolverConfig solver;
};

struct GeneralizedSolutionReport {
  std::vector<SpacePtr<double>> spaces;
  std::vector<LevelSolve> levels;
  std::vector<FeFunctiond> test_set;
  ConditionTables tables;
  DualVectord eta;  // finest-level residual, the diagnostic weak limit
  double truncation_radius = 0;
  double guard_radius = 0;
  double tolerance = 0;
  bool completed = false;
  int failed_level = -1;
  std::string message;

  const FeFunctiond& limit() const { return levels.back().u; }
};

/// Solves levels 0..levels-1 with prolongated warm starts, then fills the
/// tables. A failing level stops the loop and leaves a partial report.
GeneralizedSolutionReport run_hierarchy(const ProblemSpecd& spec, const HierarchyOptions& opts);

/// Operator of a hierarchy: A_R integrated on the finest space.
PqOperator hierarchy_operator(const ProblemSpecd& spec, const SpacePtr<double>& finest, double truncation_radius,
                              double guard_radius);

struct SProbe {
  bool pairings_vanish = false;
  bool gradients_contract = false;
  bool monotone = false;
  std::string classification;  // "S-consistent", "generalized only", "inconclusive"
};

/// Classifies a completed report by the last pre-limit level.
SProbe condition_S_probe(const GeneralizedSolutionReport& report, double relative_threshold = 1e-6,
                         double contraction_threshold = 1e-3);

}  // namespace pqlap
