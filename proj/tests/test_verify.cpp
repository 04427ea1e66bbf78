#include "pqlap/estimates.hpp"
#include "pqlap/families.hpp"
#include "pqlap/verify.hpp"

#include <doctest.h>

#include <cmath>

using namespace pqlap;

namespace {

ProblemSpecd example_spec(double forcing = 1) {
  ProblemSpecd s;
  s.p = 3;
  s.q = 2;
  s.weight = make_weight("quadratic", {{"a", 1}, {"b", 1}});
  s.convection = make_convection("paper_example", {{"alpha", 2}, {"h", 1}, {"forcing", forcing}}, 3);
  return s;
}

GeneralizedSolutionReport run(const ProblemSpecd& spec, int levels, int base_cells = 2) {
  const auto est = compute_estimates(spec, EstimateOptions{});
  HierarchyOptions o;
  o.levels = levels;
  o.base_cells = base_cells;
  o.truncation_radius = est.radius_R;
  o.guard_radius = est.radius_R1;
  return run_hierarchy(spec, o);
}

const Certificate& named(const std::vector<Certificate>& certs, const std::string& name) {
  for (const auto& c : certs)
    if (c.name == name) return c;
  throw std::runtime_error("no certificate " + name);
}

}  // namespace

TEST_CASE("truncation consistency") {
  const auto spec = example_spec();
  auto s = make_space(build_mesh(Domaind::interval(0, 1), 16));
  const PqOperator op(spec, truncate_weight(spec.weight, 2.0), s);
  const auto sol = solve_level(op, s, SolverConfig{});
  REQUIRE(sol.converged);
  const double m = sup_norm(sol.u);
  CHECK(check_truncation_consistency(spec, sol.u, 2.0, 1e-10).pass);
  // exactly at the sup-norm the truncation is inactive
  CHECK(check_truncation_consistency(spec, sol.u, m, 1e-10).pass);
  const auto over = check_truncation_consistency(spec, sol.u, 0.5 * m, 1e-10);
  CHECK_FALSE(over.pass);
  CHECK(over.measured == doctest::Approx(m));
  // a non-solution fails even when it fits under R
  auto bumped = sol.u;
  bumped.coeffs[3] += 1e-3;
  CHECK_FALSE(check_truncation_consistency(spec, bumped, 2.0, 1e-10).pass);
}

TEST_CASE("generalized conditions on a converged hierarchy") {
  const auto rep = run(example_spec(), 9);
  REQUIRE(rep.completed);
  const auto certs = check_generalized_conditions(rep);
  REQUIRE(certs.size() == 3);
  CHECK(named(certs, "bookkeeping_identity").pass);
  CHECK(named(certs, "condition_b").pass);
  CHECK(named(certs, "condition_b").artifacts.at("phi_0").size() == 9);
  const auto strong = check_strong_condition(rep, example_spec());
  CHECK_FALSE(strong.skipped);
  CHECK(strong.artifacts.at("recombination_error")[0] <= 1e-10 * rep.tables.residual_scale);
}

TEST_CASE("zero data passes every check trivially") {
  ProblemSpecd spec = example_spec(0);
  spec.convection = make_convection("zero", {}, 3);
  const auto rep = run(spec, 4);
  REQUIRE(rep.completed);
  const auto certs = verify_report(rep, spec);
  CHECK(all_pass(certs));
  CHECK(named(certs, "condition_c").measured == 0);
  CHECK(named(certs, "condition_b").measured == 0);
}

TEST_CASE("too few levels are rejected") {
  const auto rep = run(example_spec(), 2);
  REQUIRE(rep.completed);
  CHECK_THROWS_AS(check_generalized_conditions(rep), std::invalid_argument);
  // verify_report still certifies the levels themselves
  const auto certs = verify_report(rep, example_spec());
  CHECK(certs.size() == 6);
  CHECK(all_pass(certs));
}

TEST_CASE("strong condition is skipped without convergence constants") {
  ProblemSpecd spec = example_spec();
  spec.convection = make_convection("adversarial", {{"a0", 1}}, 3);
  GeneralizedSolutionReport empty;
  const auto c = check_strong_condition(empty, spec);
  CHECK(c.skipped);
  CHECK_FALSE(c.note.empty());
}

TEST_CASE("monotonicity inequalities") {
  auto s = make_space(build_mesh(Domaind::interval(0, 1), 2));
  ProblemSpecd spec;
  spec.p = 4;
  spec.q = 2;
  spec.weight = make_weight("constant", {{"value", 1}});
  spec.convection = make_convection("zero", {}, 4);
  FeFunctiond u(s), v(s);
  u.coeffs[0] = 1;
  // v = 0, p = 4: lhs = int |u'|^4 = 16, rhs = 2^{-4} * 16 = 1
  const PqAssembler<double> a(spec, untruncated(spec.weight));
  const double lhs = (a.parts(u).weighted.values - a.parts(v).weighted.values).dot((u - v).coeffs);
  CHECK(lhs == doctest::Approx(16));
  CHECK(std::pow(2.0, -4) * std::pow(grad_norm_lp(u - v, 4.0), 4) == doctest::Approx(1));
  CHECK(check_monotonicity_inequalities(4, 2, s, 50).pass);
  CHECK_THROWS_AS(check_monotonicity_inequalities(1.5, 1.2, s, 10), std::invalid_argument);

  for (double p : {2.5, 3.0, 4.0})
    for (double q : {2.0, 2.5}) {
      if (q >= p) continue;
      auto s2 = make_space(refine(build_mesh(Domaind::rectangle(0, 1, 0, 1), 3)));
      const auto c = check_monotonicity_inequalities(p, q, s2, 100, 3);
      CHECK(c.pass);
      CHECK(c.measured == 0);
      CHECK(c.artifacts.at("worst_ratio")[0] >= 1);
    }
}

TEST_CASE("weak solutions are generalized solutions") {
  const auto spec = example_spec();
  auto s = make_space(build_mesh(Domaind::interval(0, 1), 16));
  const auto w = truncate_weight(spec.weight, 2.0);
  const PqOperator op(spec, w, s);
  const auto sol = solve_level(op, s, SolverConfig{});
  REQUIRE(sol.converged);
  const auto good = weak_implies_generalized_demo(spec, w, sol.u, 1e-10);
  CHECK(good.pass);
  CHECK(good.artifacts.at("c")[0] == 0);
  auto bumped = sol.u;
  bumped.coeffs[0] += 1e-4;
  const auto bad = weak_implies_generalized_demo(spec, w, bumped, 1e-10);
  CHECK_FALSE(bad.pass);
  CHECK(bad.measured > 1e-10);
}
