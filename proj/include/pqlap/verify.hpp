#pragma once

#include "pqlap/galerkin.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pqlap {

/// pass <=> measured within threshold. Skipped certificates are not applicable
/// and carry the reason in `note`.
struct Certificate {
  std::string name;
  bool pass = false;
  bool skipped = false;
  double measured = 0;
  double threshold = 0;
  std::string anchor;
  std::string note;
  std::map<std::string, std::vector<double>> artifacts;
};

/// Threshold factor of the condition tables, multiplied by the residual scale.
inline constexpr double kConditionTolerance = 1e-6;

/// sup|u| <= R, then the residual against the untruncated operator must certify
/// at `tolerance`. With `integration` set, residuals are restricted from there
/// (as in a hierarchy run).
Certificate check_truncation_consistency(const ProblemSpecd& spec, const FeFunctiond& u, double radius,
                                         double tolerance, const SpacePtr<double>& integration = nullptr);

/// (b), (c) and the bookkeeping identity. Needs a completed report with >= 3 levels.
/// (b) and (c) are measured at the last level before the limit proxy.
std::vector<Certificate> check_generalized_conditions(const GeneralizedSolutionReport& report);

/// Principal and convection tables of the strong condition plus their
/// recombination into the (c) proxy. Skipped without declared convergence constants.
Certificate check_strong_condition(const GeneralizedSolutionReport& report, const ProblemSpecd& spec);

/// <(-Delta_e u) - (-Delta_e v), u - v> >= 2^{-e} ||grad(u - v)||_e^e over random pairs,
/// for e = p and, when q >= 2, e = q. Needs p >= 2.
Certificate check_monotonicity_inequalities(double p, double q, const SpacePtr<double>& space, int samples,
                                            std::uint64_t seed = 7);

/// The constant sequence u_n = u as a generalized solution. A non-certified u
/// yields a failed certificate whose measured value is its residual sup-norm.
Certificate weak_implies_generalized_demo(const ProblemSpecd& spec, const TruncatedWeight<double>& weight,
                                          const FeFunctiond& u, double tolerance,
                                          const SpacePtr<double>& integration = nullptr);

/// Every certificate for a hierarchy run: truncation at each level, generalized
/// and strong conditions, and the level residual certificates.
std::vector<Certificate> verify_report(const GeneralizedSolutionReport& report, const ProblemSpecd& spec);

bool all_pass(const std::vector<Certificate>& certs);

}  // namespace pqlap
