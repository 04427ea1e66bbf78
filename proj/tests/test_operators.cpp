#include "pqlap/families.hpp"
#include "pqlap/operators.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pqlap;
using Point = ConvectionFamily<double>::Point;

namespace {

ProblemSpecd unit_spec(double p, double q, double load) {
  ProblemSpecd s;
  s.p = p;
  s.q = q;
  s.domain = Domaind::interval(0, 1);
  s.weight = make_weight("constant", {{"value", 1}});
  s.convection = make_convection("constant", {{"value", load}}, p);
  return s;
}

FeFunctiond random_function(const SpacePtr<double>& s, std::mt19937_64& rng, double scale = 1) {
  std::normal_distribution<double> d(0, scale);
  FeFunctiond u(s);
  for (int i = 0; i < s->size(); ++i) u.coeffs[i] = d(rng);
  return u;
}

// Independent 1D residual for g(t) = a + b t^2 and f = k1 s + k2 xi + k3 x, all
// integrands polynomial so 3-point Gauss is exact.
Eigen::VectorXd oracle_residual_1d(const FeFunctiond& u, double p, double q, double sign, double a, double b,
                                   double k1, double k2, double k3) {
  const auto& m = u.space->mesh();
  const auto vals = u.vertex_values();
  const double gx[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  Eigen::VectorXd r = Eigen::VectorXd::Zero(u.space->size());
  for (int c = 0; c < m.num_cells(); ++c) {
    const int i0 = m.cells()(0, c), i1 = m.cells()(1, c);
    const double x0 = m.vertices()(0, i0), x1 = m.vertices()(0, i1);
    const double h = x1 - x0;
    const double slope = (vals[i1] - vals[i0]) / h;
    double gint = 0;
    double load0 = 0, load1 = 0;
    for (int k = 0; k < 3; ++k) {
      const double x = x0 + gx[k] * h;
      const double uq = vals[i0] + gx[k] * (vals[i1] - vals[i0]);
      const double w = gw[k] * std::abs(h);
      gint += w * (a + b * uq * uq);
      const double f = k1 * uq + k2 * slope + k3 * x;
      load0 += w * f * (1 - gx[k]);
      load1 += w * f * gx[k];
    }
    const double flux = gint * std::pow(std::abs(slope), p - 2) * slope +
                        sign * std::abs(h) * std::pow(std::abs(slope), q - 2) * slope;
    const int d0 = u.space->dof_of_vertex(i0), d1 = u.space->dof_of_vertex(i1);
    if (d0 >= 0) r[d0] += flux * (-1 / h) - load0;
    if (d1 >= 0) r[d1] += flux * (1 / h) - load1;
  }
  return r;
}

ProblemSpecd polynomial_spec(double p, double q, Variant v, double a, double b, double k1, double k2, double k3) {
  ProblemSpecd s;
  s.p = p;
  s.q = q;
  s.variant = v;
  s.domain = Domaind::interval(0, 1);
  s.weight = make_weight("quadratic", {{"a", a}, {"b", b}});
  s.convection.eval = [=](const Point& x, double sv, const Point& xi) { return k1 * sv + k2 * xi[0] + k3 * x[0]; };
  return s;
}

}  // namespace

TEST_CASE("truncated weight") {
  const auto g = make_weight("quadratic", {{"a", 2}, {"b", 1}});
  const auto gr = truncate_weight(g, 1.0);
  CHECK(gr(0.5) == doctest::Approx(2.25));
  CHECK(gr(5) == doctest::Approx(3));
  CHECK(gr(-5) == doctest::Approx(3));
  CHECK(gr.derivative(0.5) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(gr.derivative(3) == doctest::Approx(0).scale(1));
  CHECK(untruncated(g)(5) == doctest::Approx(27));
  CHECK_THROWS_AS(truncate_weight(g, 0.0), std::invalid_argument);
}

TEST_CASE("example convection family values") {
  const auto f0 = make_convection("paper_example", {{"alpha", 2}, {"h", 0}}, 3);
  const auto f1 = make_convection("paper_example", {{"alpha", 2}, {"h", 1}}, 3);
  Point x(1), xi(1);
  x << 0.3;
  xi << 2;
  CHECK(f0(x, 1, xi) == doctest::Approx(3));
  xi << 0;
  CHECK(f1(x, -1, xi) == doctest::Approx(-1.5));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-10, 10);
  for (int i = 0; i < 100; ++i) {
    xi << d(rng);
    CHECK(f1(x, 0, xi) == 0);
    CHECK(make_convection("paper_example", {{"alpha", 1.5}, {"h", d(rng)}}, 3)(x, 0, xi) == 0);
  }
}

TEST_CASE("single-dof residual by hand") {
  auto s = make_space(build_mesh(Domaind::interval(0, 1), 2));
  for (double t : {0.0, 0.3, 1.7, -0.4}) {
    FeFunctiond u(s);
    u.coeffs[0] = t;
    const auto r0 = assemble_residual(unit_spec(3, 2, 0), untruncated(unit_spec(3, 2, 0).weight), u);
    CHECK(r0.values[0] == doctest::Approx(8 * t * std::abs(t) - 4 * t));
    const auto spec = unit_spec(3, 2, 1);
    const auto r1 = assemble_residual(spec, untruncated(spec.weight), u);
    CHECK(r1.values[0] == doctest::Approx(8 * t * std::abs(t) - 4 * t - 0.5));
    CHECK(pairing_with(spec, untruncated(spec.weight), u, u) ==
          doctest::Approx(t * (8 * t * std::abs(t) - 4 * t - 0.5)));
    // the q-part alone for f = 0
    const auto [first, second] = split_residuals(unit_spec(3, 2, 0), untruncated(spec.weight), u);
    CHECK(second.values[0] == doctest::Approx(4 * t));
    CHECK(first.values[0] == doctest::Approx(8 * t * std::abs(t)));
  }
  FeFunctiond zero(s);
  CHECK(assemble_residual(unit_spec(3, 2, 0), untruncated(unit_spec(3, 2, 0).weight), zero).values.isZero(0));
}

TEST_CASE("1D residual matches an independent oracle") {
  std::mt19937_64 rng(11);
  auto s = make_space(refine(build_mesh(Domaind::interval(0, 1), 3)));
  for (auto v : {Variant::competing, Variant::cooperative}) {
    const double sign = v == Variant::competing ? -1 : 1;
    for (double p : {2.5, 3.0, 4.0}) {
      const auto spec = polynomial_spec(p, 2.0, v, 1.5, 0.7, 0.3, -0.2, 1.1);
      const auto u = random_function(s, rng);
      const auto r = assemble_residual(spec, untruncated(spec.weight), u);
      const auto o = oracle_residual_1d(u, p, 2.0, sign, 1.5, 0.7, 0.3, -0.2, 1.1);
      CHECK((r.values - o).cwiseAbs().maxCoeff() < 1e-11 * std::max(1.0, o.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("2D q-flux with q = 2 is the five-point Laplacian") {
  ProblemSpecd spec;
  spec.p = 3;
  spec.q = 2;
  spec.domain = Domaind::rectangle(0, 1, 0, 1);
  spec.weight = make_weight("constant", {{"value", 1}});
  spec.convection = make_convection("zero", {}, 3);
  auto s = make_space(build_mesh(spec.domain, 4));
  std::mt19937_64 rng(4);
  const auto u = random_function(s, rng);
  const auto q_flux = PqAssembler<double>(spec, untruncated(spec.weight)).parts(u).q_flux.values;
  const auto vals = u.vertex_values();
  const auto& m = s->mesh();
  auto at = [&](int i, int j) {
    for (int v = 0; v < m.num_vertices(); ++v)
      if (std::abs(m.vertices()(0, v) - i * 0.25) < 1e-12 && std::abs(m.vertices()(1, v) - j * 0.25) < 1e-12)
        return v;
    return -1;
  };
  for (int i = 1; i < 4; ++i)
    for (int j = 1; j < 4; ++j) {
      const int v = at(i, j);
      const double stencil = 4 * vals[v] - vals[at(i - 1, j)] - vals[at(i + 1, j)] - vals[at(i, j - 1)] - vals[at(i, j + 1)];
      CHECK(q_flux[s->dof_of_vertex(v)] == doctest::Approx(stencil).epsilon(1e-12));
    }
}

TEST_CASE("jacobian matches finite differences") {
  std::mt19937_64 rng(8);
  for (int dim : {1, 2}) {
    ProblemSpecd spec;
    spec.p = 3.5;
    spec.q = 2.5;
    spec.domain = dim == 1 ? Domaind::interval(0, 1) : Domaind::rectangle(0, 1, 0, 1);
    spec.weight = make_weight("quadratic", {{"a", 1}, {"b", 0.5}});
    spec.convection = make_convection("paper_example", {{"alpha", 2.5}, {"h", 0.5}, {"forcing", 1}}, spec.p);
    auto s = make_space(refine(build_mesh(spec.domain, 3)));
    const PqAssembler<double> a(spec, truncate_weight(spec.weight, 2.0));
    const auto u = random_function(s, rng, 0.5);
    const Eigen::MatrixXd j = Eigen::MatrixXd(a.jacobian(u));
    for (int col = 0; col < s->size(); ++col) {
      FeFunctiond up = u, um = u;
      const double h = 1e-6;
      up.coeffs[col] += h;
      um.coeffs[col] -= h;
      const Eigen::VectorXd fd = (a.residual(up).values - a.residual(um).values) / (2 * h);
      CHECK((j.col(col) - fd).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("pairing consistency and split recombination") {
  std::mt19937_64 rng(21);
  for (auto v : {Variant::competing, Variant::cooperative}) {
    ProblemSpecd spec;
    spec.p = 3;
    spec.q = 1.5;
    spec.variant = v;
    spec.domain = Domaind::rectangle(0, 2, 0, 1);
    spec.weight = make_weight("exponential", {{"a", 1}, {"k", 0.3}});
    spec.convection = make_convection("paper_example", {{"alpha", 2}, {"h", 1}, {"forcing", 0.5}}, 3);
    auto s = make_space(refine(build_mesh(spec.domain, 2)));
    const auto w = truncate_weight(spec.weight, 1.0);
    for (int k = 0; k < 10; ++k) {
      const auto u = random_function(s, rng), z = random_function(s, rng);
      const auto r = assemble_residual(spec, w, u);
      CHECK(std::abs(pair(r, z) - pairing_with(spec, w, u, z)) < 1e-12 * std::max(1.0, std::abs(pair(r, z))));
      const auto [first, second] = split_residuals(spec, w, u);
      CHECK((first.values - second.values - r.values).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(pairing_with(spec, w, random_function(s, rng), FeFunctiond(s)) == 0);
  }
}

TEST_CASE("spec validation") {
  auto spec = unit_spec(3, 2, 1);
  CHECK_NOTHROW(spec.validate());
  auto bad = spec;
  bad.q = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.convection.coercivity.c0 = 1;
  try {
    bad.validate();
    FAIL("expected a precondition error");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("(H3)") != std::string::npos);
  }
  bad = spec;
  bad.domain = Domaind::rectangle(0, 1, 0, 1);
  bad.p = 1.8;
  bad.q = 1.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
