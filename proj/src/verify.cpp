#include "pqlap/verify.hpp"

#include "pqlap/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pqlap {

namespace {

Certificate make(const std::string& name, const std::string& anchor) {
  Certificate c;
  c.name = name;
  c.anchor = anchor;
  return c;
}

double sup(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Certificate check_truncation_consistency(const ProblemSpecd& spec, const FeFunctiond& u, double radius,
                                         double tolerance, const SpacePtr<double>& integration) {
  auto cert = make("truncation_consistency", "truncated and original weak solutions coincide when sup|u| <= R");
  const double s = sup_norm(u);
  cert.artifacts["sup_norm"] = {s};
  cert.artifacts["radius"] = {radius};
  if (s > radius) {
    cert.measured = s;
    cert.threshold = radius;
    cert.note = "sup-norm exceeds R by " + std::to_string(s - radius);
    return cert;
  }
  const auto space = integration ? integration : u.space;
  const PqOperator truncated(spec, truncate_weight(spec.weight, radius), space);
  const PqOperator original(spec, untruncated(spec.weight), space);
  const auto rt = truncated.residual(u).values;
  const auto ro = original.residual(u).values;
  cert.measured = sup(ro);
  // both residuals share the eps-regularization, so the slack only covers rounding
  cert.threshold = tolerance + 1e-14;
  cert.pass = cert.measured <= cert.threshold;
  cert.artifacts["residual_truncated"] = {sup(rt)};
  cert.artifacts["residual_original"] = {cert.measured};
  cert.artifacts["max_difference"] = {sup(rt - ro)};
  return cert;
}

std::vector<Certificate> check_generalized_conditions(const GeneralizedSolutionReport& report) {
  const auto& t = report.tables;
  if (!report.completed || t.c.size() < 3)
    throw std::invalid_argument("check_generalized_conditions: needs a completed report with at least 3 levels");
  const std::size_t n = t.c.size(), last = n - 2;
  const double scale = t.residual_scale;
  const double rounding = 1e-14 * scale;

  auto b = make("condition_b", "lim <A_R(u_n), v> = 0 for each fixed v");
  b.threshold = kConditionTolerance * scale;
  bool per_level = true;
  for (std::size_t k = 0; k < t.test_names.size(); ++k) {
    std::vector<double> column;
    for (std::size_t lvl = 0; lvl < n; ++lvl) {
      const double v = std::abs(t.b[lvl][k]);
      column.push_back(v);
      if (v > t.b_bound[lvl][k] + rounding) per_level = false;
    }
    b.measured = std::max(b.measured, column[last]);
    b.artifacts[t.test_names[k]] = column;
  }
  b.pass = per_level && b.measured <= b.threshold;
  if (!per_level) b.note = "a level exceeds tol * ||v||_1";

  auto c = make("condition_c", "lim <A_R(u_n), u_n - u> = 0 (finest level stands in for u)");
  c.threshold = kConditionTolerance * scale;
  c.measured = std::abs(t.c[last]);
  c.pass = c.measured <= c.threshold;
  c.artifacts["c"] = t.c;
  c.artifacts["contraction"] = t.contraction;

  auto k = make("bookkeeping_identity", "<A_R(u_n), u_n> = 0 at every level, so (c) equals -<A_R(u_n), u>");
  double worst = 0;
  bool ok = true;
  for (std::size_t lvl = 0; lvl < n; ++lvl) {
    const double bound = t.bookkeeping_bound[lvl] + rounding;
    const double gap = std::abs(t.c[lvl] - t.identity[lvl]);
    ok = ok && std::abs(t.bookkeeping[lvl]) <= bound && gap <= bound + 1e-12 * scale;
    worst = std::max(worst, std::max(std::abs(t.bookkeeping[lvl]), gap) / bound);
  }
  k.measured = worst;
  k.threshold = 1;
  k.pass = ok;
  k.artifacts["bookkeeping"] = t.bookkeeping;
  k.artifacts["bookkeeping_bound"] = t.bookkeeping_bound;
  k.artifacts["identity"] = t.identity;
  return {b, c, k};
}

Certificate check_strong_condition(const GeneralizedSolutionReport& report, const ProblemSpecd& spec) {
  auto cert = make("strong_condition", "<A_R^1(u_n) + Delta_q u_n, u_n - u> -> 0 and int f(u_n)(u_n - u) -> 0");
  if (!spec.convection.convergence) {
    cert.skipped = true;
    cert.pass = true;
    cert.note = "convection family declares no (H4) constants";
    return cert;
  }
  const auto& t = report.tables;
  if (!report.completed || t.c.size() < 3)
    throw std::invalid_argument("check_strong_condition: needs a completed report with at least 3 levels");
  const std::size_t last = t.c.size() - 2;
  const double scale = t.residual_scale;
  double recombination = 0;
  for (std::size_t lvl = 0; lvl < t.c.size(); ++lvl)
    recombination = std::max(recombination, std::abs(t.principal[lvl] - t.convection[lvl] - t.c[lvl]));
  cert.measured = std::max(std::abs(t.principal[last]), std::abs(t.convection[last]));
  cert.threshold = kConditionTolerance * scale;
  const bool identity = recombination <= 1e-10 * scale;
  cert.pass = cert.measured <= cert.threshold && identity;
  if (!identity) cert.note = "principal - convection does not recombine into (c)";
  cert.artifacts["principal"] = t.principal;
  cert.artifacts["convection"] = t.convection;
  cert.artifacts["recombination_error"] = {recombination};
  return cert;
}

Certificate check_monotonicity_inequalities(double p, double q, const SpacePtr<double>& space, int samples,
                                            std::uint64_t seed) {
  if (!(p >= 2)) throw std::invalid_argument("check_monotonicity_inequalities: needs p >= 2");
  auto cert = make("monotonicity", "<-Delta_e u + Delta_e v, u - v> >= 2^{-e} ||grad(u - v)||_e^e");
  cert.threshold = 0;

  ProblemSpecd spec;
  spec.p = p;
  spec.q = q;
  spec.domain = space->mesh().domain();
  spec.weight.eval = [](double) { return 1.0; };
  spec.weight.a0 = 1;
  spec.convection.eval = [](const ConvectionFamily<double>::Point&, double, const ConvectionFamily<double>::Point&) {
    return 0.0;
  };
  const PqAssembler<double> assembler(spec, untruncated(spec.weight));

  std::vector<double> exponents{p};
  if (q >= 2) exponents.push_back(q);
  Rng rng(seed);
  int violations = 0;
  std::vector<double> worst_ratio(exponents.size(), std::numeric_limits<double>::infinity());
  for (int s = 0; s < samples; ++s) {
    FeFunctiond u(space), v(space);
    const double su = std::pow(10.0, rng.uniform(-2, 2)), sv = std::pow(10.0, rng.uniform(-2, 2));
    for (int i = 0; i < space->size(); ++i) {
      u.coeffs[i] = su * rng.normal();
      v.coeffs[i] = sv * rng.normal();
    }
    const auto pu = assembler.parts(u), pv = assembler.parts(v);
    const FeFunctiond d = u - v;
    for (std::size_t e = 0; e < exponents.size(); ++e) {
      const double ex = exponents[e];
      const auto& du = e == 0 ? pu.weighted.values : pu.q_flux.values;
      const auto& dv = e == 0 ? pv.weighted.values : pv.q_flux.values;
      const double lhs = (du - dv).dot(d.coeffs);
      const double rhs = std::pow(2.0, -ex) * std::pow(grad_norm_lp(d, ex), ex);
      if (lhs < rhs - 1e-12 * std::max(1.0, std::abs(rhs))) ++violations;
      if (rhs > 0) worst_ratio[e] = std::min(worst_ratio[e], lhs / rhs);
    }
  }
  cert.measured = violations;
  cert.pass = violations == 0;
  cert.artifacts["exponents"] = exponents;
  cert.artifacts["worst_ratio"] = worst_ratio;
  cert.artifacts["samples"] = {double(samples)};
  return cert;
}

Certificate weak_implies_generalized_demo(const ProblemSpecd& spec, const TruncatedWeight<double>& weight,
                                          const FeFunctiond& u, double tolerance,
                                          const SpacePtr<double>& integration) {
  auto cert = make("weak_implies_generalized", "the constant sequence u_n = u satisfies (a)-(c)");
  const PqOperator op(spec, weight, integration ? integration : u.space);
  const auto r = op.residual(u).values;
  cert.threshold = tolerance;
  // (b) against every basis function, (c) for u_n - u = 0
  const double b = sup(r);
  const double c = std::abs(op.pairing(u, u - u));
  cert.measured = std::max(b, c);
  cert.pass = cert.measured <= cert.threshold;
  if (!cert.pass) cert.note = "input is not a certified discrete weak solution";
  cert.artifacts["b"] = std::vector<double>(r.data(), r.data() + r.size());
  cert.artifacts["c"] = {c};
  return cert;
}

std::vector<Certificate> verify_report(const GeneralizedSolutionReport& report, const ProblemSpecd& spec) {
  std::vector<Certificate> out;
  const auto integration = report.spaces.empty() ? nullptr : report.spaces.back();
  for (const auto& lvl : report.levels) {
    auto res = make("level_residual_L" + std::to_string(lvl.level), "<A_{n,R}(u_n), v> = 0 for all v in E_n");
    res.measured = lvl.residual_sup;
    res.threshold = report.tolerance;
    res.pass = lvl.converged && res.measured <= res.threshold;
    out.push_back(res);

    auto bound = make("bound_L" + std::to_string(lvl.level), "||grad u_n||_p <= R1 and sup|u_n| <= R");
    const double g = grad_norm_lp(lvl.u, spec.p), s = sup_norm(lvl.u);
    bound.measured = std::max(g / report.guard_radius, s / report.truncation_radius);
    bound.threshold = 1;
    bound.pass = report.guard_radius > 0 && bound.measured <= 1;
    bound.artifacts["grad_norm"] = {g, report.guard_radius};
    bound.artifacts["sup_norm"] = {s, report.truncation_radius};
    if (report.guard_radius <= 0) bound.note = "no guard radius recorded";
    out.push_back(bound);

    auto trunc = check_truncation_consistency(spec, lvl.u, report.truncation_radius, report.tolerance, integration);
    trunc.name += "_L" + std::to_string(lvl.level);
    out.push_back(trunc);
  }
  if (report.completed && report.tables.c.size() >= 3) {
    for (auto& c : check_generalized_conditions(report)) out.push_back(std::move(c));
    out.push_back(check_strong_condition(report, spec));
  }
  return out;
}

bool all_pass(const std::vector<Certificate>& certs) {
  return std::all_of(certs.begin(), certs.end(), [](const Certificate& c) { return c.skipped || c.pass; });
}

}  // namespace pqlap
