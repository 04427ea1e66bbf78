#include "pqlap/fespace.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace pqlap;

namespace {

SpacePtr<double> unit_interval(int cells) { return make_space(build_mesh(Domaind::interval(0, 1), cells)); }

FeFunctiond random_function(const SpacePtr<double>& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1, 1);
  FeFunctiond u(s);
  for (int i = 0; i < s->size(); ++i) u.coeffs[i] = d(rng);
  return u;
}

// P1 interpolant of vertex values evaluated at a point, by locating the cell
double evaluate_1d(const FeFunctiond& u, double x) {
  const auto& m = u.space->mesh();
  const auto vals = u.vertex_values();
  for (int c = 0; c < m.num_cells(); ++c) {
    const int a = m.cells()(0, c), b = m.cells()(1, c);
    double xa = m.vertices()(0, a), xb = m.vertices()(0, b);
    if (xa > xb) std::swap(xa, xb);
    if (x >= xa && x <= xb) {
      const double t = (x - m.vertices()(0, a)) / (m.vertices()(0, b) - m.vertices()(0, a));
      return (1 - t) * vals[a] + t * vals[b];
    }
  }
  return NAN;
}

}  // namespace

TEST_CASE("space dofs are the interior vertices") {
  auto s = unit_interval(4);
  CHECK(s->size() == 3);
  auto s2 = make_space(build_mesh(Domaind::rectangle(0, 1, 0, 1), 3));
  CHECK(s2->size() == 4);
}

TEST_CASE("prolongation of a hat") {
  auto coarse = unit_interval(2);
  auto fine = make_space(refine(coarse->mesh_ptr()));
  FeFunctiond hat(coarse);
  hat.coeffs[0] = 1;
  const auto p = prolongate(hat, fine);
  const auto vals = p.vertex_values();
  const auto& m = fine->mesh();
  for (int v = 0; v < m.num_vertices(); ++v) {
    const double x = m.vertices()(0, v);
    CHECK(vals[v] == doctest::Approx(1 - 2 * std::abs(x - 0.5)));
  }
  CHECK(prolongate(FeFunctiond(coarse), fine).coeffs.isZero(0));
}

TEST_CASE("prolongation reproduces the coarse function") {
  std::mt19937_64 rng(1);
  for (int dim : {1, 2}) {
    const auto dom = dim == 1 ? Domaind::interval(0, 3) : Domaind::rectangle(0, 1, 0, 2);
    auto h = build_hierarchy(dom, 2, 4);
    auto coarse = make_space(h[0]), fine = make_space(h[3]);
    const auto u = random_function(coarse, rng);
    const auto pu = prolongate(u, fine);
    for (double p : {1.5, 2.0, 3.0, 4.5}) CHECK(grad_norm_lp(pu, p) == doctest::Approx(grad_norm_lp(u, p)).epsilon(1e-13));
    CHECK(sup_norm(pu) == doctest::Approx(sup_norm(u)).epsilon(1e-15));
    if (dim == 1)
      for (int v = 0; v < fine->mesh().num_vertices(); ++v)
        CHECK(pu.vertex_values()[v] == doctest::Approx(evaluate_1d(u, fine->mesh().vertices()(0, v))).epsilon(1e-14));
  }
  auto a = unit_interval(2), b = unit_interval(4);
  CHECK_THROWS_AS(prolongate(FeFunctiond(b), a), std::invalid_argument);
}

TEST_CASE("gradient norms by hand") {
  auto s = unit_interval(2);
  FeFunctiond hat(s);
  hat.coeffs[0] = 1;
  for (double p : {1.0, 1.5, 2.0, 3.0, 7.0}) CHECK(grad_norm_lp(hat, p) == doctest::Approx(2));
  CHECK(grad_norm_lp(FeFunctiond(s), 3.0) == 0);

  // height h on cells of width w: h sqrt(2 / w)
  auto s4 = unit_interval(4);
  FeFunctiond u(s4);
  u.coeffs[1] = 0.7;
  CHECK(grad_norm_lp(u, 2.0) == doctest::Approx(0.7 * std::sqrt(2 / 0.25)));
}

TEST_CASE("Lebesgue norms by hand") {
  auto s = unit_interval(2);
  FeFunctiond hat(s);
  hat.coeffs[0] = 1;
  CHECK(lr_norm(hat, 1.0) == doctest::Approx(0.5));
  CHECK(lr_norm(hat, 2.0) == doctest::Approx(std::sqrt(1.0 / 3)));
  CHECK(lr_norm(FeFunctiond(s), 2.5) == 0);
  CHECK(sup_norm(hat) == 1);

  auto s4 = unit_interval(4);
  FeFunctiond u(s4);
  u.coeffs << 0.2, -0.9, 0.4;
  CHECK(sup_norm(u) == doctest::Approx(0.9));
  // L1 of a sign-changing field: sum of exact triangle and trapezoid pieces
  FeFunctiond w(s4);
  w.coeffs << 1, -1, 0;
  // on [0.25, 0.5] the zero crossing is at 0.375
  const double expected = 0.25 * 0.5 + 2 * (0.125 * 0.5) + 0.25 * 0.5;
  CHECK(lr_norm(w, 1.0) == doctest::Approx(expected));

  // 2D: L1 of the center hat on the 2x2 square is its volume 1/3 * area of support
  auto sq = make_space(build_mesh(Domaind::rectangle(0, 1, 0, 1), 2));
  FeFunctiond c(sq);
  c.coeffs[0] = -1;
  CHECK(lr_norm(c, 1.0) == doctest::Approx(6 * 0.125 / 3));
}

TEST_CASE("dual pairing") {
  auto s = unit_interval(3);
  DualVectord f(s);
  FeFunctiond v(s);
  CHECK(pair(f, v) == 0);
  f.values << 1, 2;
  v.coeffs << 3, -1;
  CHECK(pair(f, v) == 1);

  std::mt19937_64 rng(3);
  auto s9 = unit_interval(9);
  DualVectord g(s9);
  g.values = random_function(s9, rng).coeffs;
  const auto a = random_function(s9, rng), b = random_function(s9, rng);
  CHECK(pair(g, 0.3 * a + (-2.0) * b) == doctest::Approx(0.3 * pair(g, a) - 2 * pair(g, b)).epsilon(1e-13));
  CHECK_THROWS_AS(pair(g, FeFunctiond(s)), std::invalid_argument);
}

TEST_CASE("csv round trip") {
  std::mt19937_64 rng(5);
  auto s = make_space(refine(build_mesh(Domaind::rectangle(0, 1, 0, 1), 2)));
  const auto u = random_function(s, rng);
  std::stringstream ss;
  write_csv(u, ss);
  CHECK(ss.str().rfind("x,y,value\n", 0) == 0);
  const auto back = read_csv(s, ss);
  CHECK(back.coeffs == u.coeffs);

  std::stringstream bad("x,y,value\n0,0,1\n");
  CHECK_THROWS(read_csv(s, bad));
}
