#pragma once

#include "pqlap/fespace.hpp"
#include "pqlap/operators.hpp"
#include "pqlap/random.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pqlap {

/// Which Poincare constant enters the estimates.
///   standard: ||u||_p <= lambda_1^{-1/p} ||grad u||_p  (what the Rayleigh quotient implies)
///   paper:    ||u||_p <= lambda_1^{-1}    ||grad u||_p  (not a valid constant when lambda_1 > 1)
enum class PoincareConvention { standard, paper };

enum class Provenance { analytic_1d, discrete_rayleigh, discrete_surrogate };

const char* to_string(PoincareConvention c);
const char* to_string(Provenance p);

struct Estimate {
  double value = 0;
  Provenance provenance = Provenance::analytic_1d;
  bool converged = true;
  int iterations = 0;
};

/// lambda_1 = (pi_p / L)^p, pi_p = 2 pi (p-1)^{1/p} / (p sin(pi/p)).
double analytic_lambda1_1d(double length, double p);

struct RayleighOptions {
  double tolerance = 1e-8;  // relative stagnation of the quotient
  int max_iterations = 5000;
};

/// Minimizes int|grad u|^p / int|u|^p over the space by Laplacian-preconditioned
/// descent with normalization. Upper bound for lambda_1 (conforming subspace).
Estimate discrete_rayleigh_lambda1(const SpacePtr<double>& space, double p, const RayleighOptions& opts = {});

/// Rayleigh quotient of one function (quadrature for the denominator).
double rayleigh_quotient(const FeFunctiond& u, double p);

/// Analytic in 1D; 2D halves the discrete Rayleigh minimum and flags it.
Estimate estimate_lambda1(const SpacePtr<double>& space, double p);

/// max|u| <= C_S ||grad u||_p. 1D: (L/2)^{(p-1)/p}. 2D: twice the largest
/// sup/grad ratio seen over `samples` random fields on `space` (a surrogate).
Estimate sobolev_constant(const Domaind& domain, double p, const SpacePtr<double>& space = nullptr,
                          int samples = 1000, std::uint64_t seed = 7);

double poincare_factor(double lambda1, double p, PoincareConvention convention);

/// psi(t) = lead t^p - q_coeff t^q - alpha_coeff t^alpha - constant. Its largest
/// root bounds ||grad u||_p of every solution.
struct CoercivityPolynomial {
  double p = 0, q = 0, alpha = 1;
  double lead = 0, q_coeff = 0, alpha_coeff = 0, constant = 0;

  double operator()(double t) const;
};

CoercivityPolynomial coercivity_polynomial(const ProblemSpecd& spec, double lambda1, PoincareConvention convention);

struct Radii {
  double R1 = 0;
  double R = 0;
};

/// Throws PreconditionError naming the regime when its inequality fails.
Radii apriori_radius(const ProblemSpecd& spec, double lambda1, double sobolev, PoincareConvention convention);

/// Largest positive root of psi by doubling from t = 1 and bisection.
double largest_root(const CoercivityPolynomial& psi, double rel_tol = 1e-12);

/// max(C_S |Omega|^{(r1-1)/r1}, b C_S, c * poincare_factor).
double rhs_estimate_constant(const ProblemSpecd& spec, double lambda1, double sobolev, PoincareConvention convention);

/// ||sigma||_{L^r1} for the constant sigma declared by the family.
double sigma_norm(const ProblemSpecd& spec);

struct SamplingBox {
  double s_max = 10;
  double xi_max = 100;
};

struct HypothesisCheck {
  std::string name;
  bool checked = false;
  bool pass = true;
  double worst_margin = 0;  // relative: (bound - value) / max(1, |bound|, |value|)
  std::vector<double> worst_point;  // x..., s, xi...
  std::string note;
};

struct HypothesisAudit {
  std::vector<HypothesisCheck> checks;  // H1, H2, H3 or H3a, H4
  int samples = 0;
  SamplingBox box;

  const HypothesisCheck* find(const std::string& name) const;
  bool all_pass() const;
};

/// Pointwise sampled check of the declared constants on a Halton sequence.
HypothesisAudit audit_hypotheses(const ProblemSpecd& spec, int samples, const SamplingBox& box);

struct EstimateOptions {
  PoincareConvention convention = PoincareConvention::standard;
  int sobolev_samples = 1000;
  int audit_samples = 10000;
  std::uint64_t seed = 7;
};

struct EstimateReport {
  Estimate lambda1;
  Estimate sobolev;
  double rhs_constant = 0;
  double radius_R1 = 0;
  double radius_R = 0;
  Regime regime = Regime::H3;
  PoincareConvention convention = PoincareConvention::standard;
  CoercivityPolynomial psi;
  HypothesisAudit audit;
};

/// Full pipeline: lambda_1, C_S, (R1, R), C and the hypothesis audit.
/// `space` is only used in 2D; pass nullptr to let a default mesh be built.
EstimateReport compute_estimates(const ProblemSpecd& spec, const EstimateOptions& opts,
                                 const SpacePtr<double>& space = nullptr);

}  // namespace pqlap
