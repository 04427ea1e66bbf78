#include "pqlap/families.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pqlap {

namespace {

double get(const ParamMap& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

// max_t (t^{p-1} - c0 t^p) over t >= 0, the Young remainder.
double young_remainder(double p, double c0) {
  const double t = (p - 1) / (p * c0);
  return std::pow(t, p - 1) / p;
}

}  // namespace

WeightFunction<double> make_weight(const std::string& name, const ParamMap& params) {
  WeightFunction<double> w;
  w.tag = name;
  if (name == "constant") {
    const double value = get(params, "value", 1.0);
    w.eval = [value](double) { return value; };
    w.a0 = value;
  } else if (name == "quadratic") {
    const double a = get(params, "a", 1.0), b = get(params, "b", 1.0);
    if (b < 0) throw std::invalid_argument("quadratic weight needs b >= 0");
    w.eval = [a, b](double t) { return a + b * t * t; };
    w.a0 = a;
  } else if (name == "exponential") {
    const double a = get(params, "a", 1.0), k = get(params, "k", 1.0);
    if (k < 0) throw std::invalid_argument("exponential weight needs k >= 0");
    w.eval = [a, k](double t) { return a * std::exp(k * std::abs(t)); };
    w.a0 = a;
  } else {
    throw std::invalid_argument("unknown weight '" + name + "'");
  }
  return w;
}

ConvectionFamily<double> make_convection(const std::string& name, const ParamMap& params, double p) {
  using Point = ConvectionFamily<double>::Point;
  ConvectionFamily<double> f;
  f.name = name;
  f.params = params;

  if (name == "zero") {
    f.eval = [](const Point&, double, const Point&) { return 0.0; };
    f.coercivity = {get(params, "c0", 0.0), 0.0, 1.0};
    f.convergence = ConvergenceConstants<double>{};
  } else if (name == "constant") {
    const double value = get(params, "value", 1.0);
    f.eval = [value](const Point&, double, const Point&) { return value; };
    f.growth = {std::abs(value), 0.0, 0.0, 1.0, 1.0};
    // f s <= |value||s| <= |value|(|s| + 1)
    f.coercivity = {get(params, "c0", 0.0), std::abs(value), 1.0};
    f.convergence = ConvergenceConstants<double>{std::abs(value), 0.0, 0.0, 1.0, 0.0};
  } else if (name == "paper_example") {
    const double alpha = get(params, "alpha", 2.0);
    const double h = get(params, "h", 1.0);
    const double c0 = get(params, "c0", 0.5);
    const double k = get(params, "forcing", 0.0);
    if (!(alpha >= 1)) throw std::invalid_argument("paper_example needs alpha >= 1");
    if (!(c0 > 0)) throw std::invalid_argument("paper_example needs c0 > 0");
    f.eval = [alpha, h, k, p](const Point&, double s, const Point& xi) {
      const double power = s == 0 ? 0.0 : std::copysign(std::pow(std::abs(s), alpha - 1), s);
      return power + s / (1 + s * s) * (std::pow(xi.norm(), p - 1) + h) + k;
    };
    // |s|/(1+s^2) <= 1/2 and |s|^{alpha-1} <= 1 + |s|^{max(1, alpha-1)}
    const double sigma = 1 + std::abs(h) / 2 + std::abs(k);
    f.growth = {sigma, 1.0, 0.5, 1.0, std::max(1.0, alpha - 1)};
    // s^2/(1+s^2) <= 1, t^{p-1} <= c0 t^p + K, |k||s| <= |k|(|s|^alpha + 1)
    const double c1 = std::max(1 + std::abs(k), young_remainder(p, c0) + std::abs(h) + std::abs(k));
    f.coercivity = {c0, c1, alpha};
    f.convergence = ConvergenceConstants<double>{sigma, 1.0, 0.5, std::max(1.0, alpha - 1), p - 1};
  } else if (name == "adversarial") {
    const double a0 = get(params, "a0", 1.0);
    f.eval = [a0, p](const Point&, double s, const Point& xi) {
      const double sign = s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0);
      return 2 * a0 * std::pow(xi.norm(), p) * sign / (1 + std::abs(s));
    };
    f.growth = {0.0, 0.0, 2 * a0, 1.0, 1.0};
    f.coercivity = {get(params, "c0", 0.5 * a0), 1.0, 1.0};
  } else {
    throw std::invalid_argument("unknown convection family '" + name + "'");
  }
  return f;
}

std::vector<std::string> weight_names() { return {"constant", "quadratic", "exponential"}; }

std::vector<std::string> convection_names() { return {"zero", "constant", "paper_example", "adversarial"}; }

std::vector<std::string> weight_param_keys(const std::string& name) {
  if (name == "constant") return {"value"};
  if (name == "quadratic") return {"a", "b"};
  if (name == "exponential") return {"a", "k"};
  return {};
}

std::vector<std::string> convection_param_keys(const std::string& name) {
  if (name == "zero") return {"c0"};
  if (name == "constant") return {"value", "c0"};
  if (name == "paper_example") return {"alpha", "h", "c0", "forcing"};
  if (name == "adversarial") return {"a0", "c0"};
  return {};
}

}  // namespace pqlap
