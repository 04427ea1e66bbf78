#pragma once

#include "pqlap/fespace.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pqlap {

/// A violated structural hypothesis; the message names it, e.g. "(H3)".
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Weight g >= a0 > 0 multiplying the p-flux.
template <typename Scalar>
struct WeightFunction {
  std::function<Scalar(Scalar)> eval;
  Scalar a0 = 1;
  std::string tag;

  Scalar operator()(Scalar t) const { return eval(t); }
};

/// g frozen outside [-R, R]. With `active == false` it is the raw weight,
/// which gives the untruncated operator.
template <typename Scalar>
struct TruncatedWeight {
  WeightFunction<Scalar> base;
  Scalar radius = 0;
  bool active = true;

  Scalar operator()(Scalar t) const { return base(active ? std::clamp(t, -radius, radius) : t); }

  Scalar derivative(Scalar t) const {
    const Scalar h = Scalar(1e-6) * (1 + std::abs(t));
    return ((*this)(t + h) - (*this)(t - h)) / (2 * h);
  }
};

template <typename Scalar>
TruncatedWeight<Scalar> truncate_weight(const WeightFunction<Scalar>& g, Scalar radius) {
  if (!(radius > 0)) throw std::invalid_argument("truncate_weight: radius must be positive");
  return TruncatedWeight<Scalar>{g, radius, true};
}

template <typename Scalar>
TruncatedWeight<Scalar> untruncated(const WeightFunction<Scalar>& g) {
  return TruncatedWeight<Scalar>{g, std::numeric_limits<Scalar>::infinity(), false};
}

/// |f| <= sigma + b|s|^r2 + c|xi|^{p-1}; sigma is a constant here.
template <typename Scalar>
struct GrowthConstants {
  Scalar sigma = 0, b = 0, c = 0, r1 = 1, r2 = 1;
};

/// f s <= c0|xi|^p + c1(|s|^alpha + 1); alpha is replaced by p in the H3a regime.
template <typename Scalar>
struct CoercivityConstants {
  Scalar c0 = 0, c1 = 0, alpha = 1;
};

/// |f| <= sigma + c1|s|^{s_exponent} + c2|xi|^{xi_exponent}.
template <typename Scalar>
struct ConvergenceConstants {
  Scalar sigma = 0, c1 = 0, c2 = 0, s_exponent = 1, xi_exponent = 0;
};

template <typename Scalar>
struct ConvectionFamily {
  using Point = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 2, 1>;

  std::function<Scalar(const Point& x, Scalar s, const Point& xi)> eval;
  std::string name;
  std::map<std::string, double> params;
  GrowthConstants<Scalar> growth;
  CoercivityConstants<Scalar> coercivity;
  std::optional<ConvergenceConstants<Scalar>> convergence;

  Scalar operator()(const Point& x, Scalar s, const Point& xi) const { return eval(x, s, xi); }
};

enum class Variant { competing, cooperative };
enum class Regime { H3, H3a };

inline const char* to_string(Variant v) { return v == Variant::competing ? "competing" : "cooperative"; }
inline const char* to_string(Regime r) { return r == Regime::H3 ? "H3" : "H3a"; }

template <typename Scalar>
struct ProblemSpec {
  Scalar p = 3, q = 2;
  Domain<Scalar> domain = Domain<Scalar>::interval(0, 1);
  WeightFunction<Scalar> weight;
  ConvectionFamily<Scalar> convection;
  Variant variant = Variant::competing;
  Regime regime = Regime::H3;
  /// Gradient floor for exponents below 2, see flux_coefficient().
  Scalar epsilon = Scalar(1e-10);

  Scalar p_conjugate() const { return p / (p - 1); }
  Scalar q_conjugate() const { return q / (q - 1); }

  /// Exponent of |s| in the coercivity bound of the active regime.
  Scalar coercivity_exponent() const { return regime == Regime::H3 ? convection.coercivity.alpha : p; }

  /// Checks everything that does not need lambda_1. The (H3a) eigenvalue gate
  /// lives in the estimates module.
  void validate() const {
    if (!(q > 1) || !(p > q)) throw std::invalid_argument("exponents must satisfy p > q > 1");
    if (!(domain.dim < p)) throw std::invalid_argument("the embedding into continuous functions needs N < p");
    if (!(weight.a0 > 0)) throw PreconditionError("(H1) requires a_0 > 0");
    const auto& h3 = convection.coercivity;
    if (!(h3.c0 < weight.a0))
      throw PreconditionError("(" + std::string(to_string(regime)) + ") requires c_0 < a_0 (c_0 = " +
                              std::to_string(h3.c0) + ", a_0 = " + std::to_string(weight.a0) + ")");
    if (regime == Regime::H3 && !(h3.alpha >= 1 && h3.alpha < p))
      throw PreconditionError("(H3) requires alpha in [1, p) (alpha = " + std::to_string(h3.alpha) + ")");
    if (h3.c1 < 0) throw PreconditionError("(" + std::string(to_string(regime)) + ") requires c_1 >= 0");
  }
};

using ProblemSpecd = ProblemSpec<double>;

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, int cell) : std::runtime_error(what), cell(cell) {}
  int cell;
};

/// |G|^{e-2}, with |G| replaced by sqrt(|G|^2 + eps^2) on flat cells when e < 2.
template <typename Scalar>
Scalar flux_coefficient(Scalar e, Scalar grad_sq, Scalar eps) {
  if (e >= 2 || grad_sq >= eps * eps) return std::pow(std::sqrt(grad_sq), e - 2);
  return std::pow(grad_sq + eps * eps, (e - 2) / 2);
}

/// The three raw integrals against every hat function:
///   weighted: int g_R(u)|grad u|^{p-2} grad u . grad phi_i
///   q_flux:   int |grad u|^{q-2} grad u . grad phi_i
///   load:     int f(x, u, grad u) phi_i
template <typename Scalar>
struct OperatorParts {
  DualVector<Scalar> weighted, q_flux, load;
};

template <typename Scalar>
class PqAssembler {
 public:
  using Point = typename ConvectionFamily<Scalar>::Point;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Sparse = Eigen::SparseMatrix<Scalar>;

  PqAssembler(const ProblemSpec<Scalar>& spec, TruncatedWeight<Scalar> weight)
      : spec_(spec), weight_(std::move(weight)) {}

  const ProblemSpec<Scalar>& spec() const { return spec_; }
  const TruncatedWeight<Scalar>& weight() const { return weight_; }

  /// Sign of the q-term in the residual: -1 competing, +1 cooperative.
  Scalar q_sign() const { return spec_.variant == Variant::competing ? Scalar(-1) : Scalar(1); }

  OperatorParts<Scalar> parts(const FeFunction<Scalar>& u) const {
    OperatorParts<Scalar> out{DualVector<Scalar>(u.space), DualVector<Scalar>(u.space), DualVector<Scalar>(u.space)};
    loop(u, &out, nullptr);
    return out;
  }

  /// weighted + q_sign * q_flux - load
  DualVector<Scalar> residual(const FeFunction<Scalar>& u) const {
    auto pt = parts(u);
    DualVector<Scalar> r(u.space);
    r.values = pt.weighted.values + q_sign() * pt.q_flux.values - pt.load.values;
    return r;
  }

  /// Derivative of residual(). Flux derivatives use the eps-regularized form
  /// everywhere; partial derivatives of f are central differences.
  Sparse jacobian(const FeFunction<Scalar>& u) const {
    Sparse j(u.space->size(), u.space->size());
    loop(u, nullptr, &j);
    return j;
  }

  /// P1 stiffness matrix of the space (the linear Laplacian).
  static Sparse stiffness(const FeSpace<Scalar>& space) {
    const auto& mesh = space.mesh();
    const int d = mesh.dim();
    std::vector<Eigen::Triplet<Scalar>> t;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const auto& bg = mesh.basis_gradients(c);
      for (int a = 0; a <= d; ++a) {
        const int ia = space.dof_of_vertex(mesh.cells()(a, c));
        if (ia < 0) continue;
        for (int b = 0; b <= d; ++b) {
          const int ib = space.dof_of_vertex(mesh.cells()(b, c));
          if (ib < 0) continue;
          t.emplace_back(ia, ib, mesh.cell_measure(c) * bg.col(a).dot(bg.col(b)));
        }
      }
    }
    Sparse k(space.size(), space.size());
    k.setFromTriplets(t.begin(), t.end());
    return k;
  }

 private:
  void loop(const FeFunction<Scalar>& u, OperatorParts<Scalar>* out, Sparse* jac) const {
    const auto& space = *u.space;
    const auto& mesh = space.mesh();
    const int d = mesh.dim();
    const auto quad = quadrature_for<Scalar>(d, spec_.p);
    const auto vals = u.vertex_values();
    const Scalar eps = spec_.epsilon;
    const Scalar sq = q_sign();
    std::vector<Eigen::Triplet<Scalar>> trips;

    Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1> local(d + 1);
    Eigen::Matrix<int, Eigen::Dynamic, 1, 0, 3, 1> dof(d + 1);
    for (int c = 0; c < mesh.num_cells(); ++c) {
      for (int k = 0; k <= d; ++k) {
        const int v = mesh.cells()(k, c);
        local[k] = vals[v];
        dof[k] = space.dof_of_vertex(v);
      }
      const auto& bg = mesh.basis_gradients(c);
      const Scalar meas = mesh.cell_measure(c);
      const Scalar scale = meas / quad.reference_measure();
      const Point grad = bg * local;
      const Scalar gsq = grad.squaredNorm();

      const Scalar cp = flux_coefficient(spec_.p, gsq, eps);
      const Scalar cq = flux_coefficient(spec_.q, gsq, eps);

      Scalar w_int = 0;
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1> load_local = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1>::Zero(d + 1);
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1> dw = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1>::Zero(d + 1);
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3> dload =
          Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>::Zero(d + 1, d + 1);

      for (int i = 0; i < quad.size(); ++i) {
        const auto lam = quad.barycentric(i);
        Point x = Point::Zero(d);
        Scalar uq = 0;
        for (int k = 0; k <= d; ++k) {
          x += lam[k] * mesh.vertices().col(mesh.cells()(k, c));
          uq += lam[k] * local[k];
        }
        const Scalar wq = scale * quad.weights[i];
        w_int += wq * weight_(uq);
        const Scalar fq = spec_.convection(x, uq, grad);
        if (!std::isfinite(fq))
          throw NonFiniteError("non-finite convection value on cell " + std::to_string(c), c);
        load_local += wq * fq * lam;
        if (jac) {
          dw += wq * weight_.derivative(uq) * lam;
          const Scalar hs = Scalar(1e-6) * (1 + std::abs(uq));
          const Scalar fs = (spec_.convection(x, uq + hs, grad) - spec_.convection(x, uq - hs, grad)) / (2 * hs);
          Point fxi(d);
          for (int k = 0; k < d; ++k) {
            Point gp = grad, gm = grad;
            const Scalar hx = Scalar(1e-6) * (1 + std::abs(grad[k]));
            gp[k] += hx;
            gm[k] -= hx;
            fxi[k] = (spec_.convection(x, uq, gp) - spec_.convection(x, uq, gm)) / (2 * hx);
          }
          // d/du_b of f at this point, tested against lambda_a
          for (int a = 0; a <= d; ++a)
            for (int b = 0; b <= d; ++b) dload(a, b) += wq * (fs * lam[b] + fxi.dot(bg.col(b))) * lam[a];
        }
      }
      if (!std::isfinite(w_int) || !std::isfinite(cp) || !std::isfinite(cq))
        throw NonFiniteError("non-finite flux on cell " + std::to_string(c), c);

      if (out) {
        for (int a = 0; a <= d; ++a) {
          if (dof[a] < 0) continue;
          const Scalar gdot = grad.dot(bg.col(a));
          out->weighted.values[dof[a]] += w_int * cp * gdot;
          out->q_flux.values[dof[a]] += meas * cq * gdot;
          out->load.values[dof[a]] += load_local[a];
        }
      }
      if (jac) {
        const Scalar sj = gsq + eps * eps;
        const Scalar jp0 = std::pow(sj, (spec_.p - 2) / 2), jp1 = (spec_.p - 2) * std::pow(sj, (spec_.p - 4) / 2);
        const Scalar jq0 = std::pow(sj, (spec_.q - 2) / 2), jq1 = (spec_.q - 2) * std::pow(sj, (spec_.q - 4) / 2);
        for (int a = 0; a <= d; ++a) {
          if (dof[a] < 0) continue;
          const auto ga = bg.col(a);
          const Scalar fa = cp * grad.dot(ga);
          for (int b = 0; b <= d; ++b) {
            if (dof[b] < 0) continue;
            const auto gb = bg.col(b);
            const Scalar gagb = ga.dot(gb);
            const Scalar proj = grad.dot(ga) * grad.dot(gb);
            const Scalar val = dw[b] * fa + w_int * (jp0 * gagb + jp1 * proj) +
                               sq * meas * (jq0 * gagb + jq1 * proj) - dload(a, b);
            trips.emplace_back(dof[a], dof[b], val);
          }
        }
      }
    }
    if (jac) jac->setFromTriplets(trips.begin(), trips.end());
  }

  ProblemSpec<Scalar> spec_;
  TruncatedWeight<Scalar> weight_;
};

/// F_i = <A_R(u), phi_i>.
template <typename Scalar>
DualVector<Scalar> assemble_residual(const ProblemSpec<Scalar>& spec, const TruncatedWeight<Scalar>& weight,
                                     const FeFunction<Scalar>& u) {
  return PqAssembler<Scalar>(spec, weight).residual(u);
}

/// <A_R(u), v> by direct integration against v (not through the dual vector).
template <typename Scalar>
Scalar pairing_with(const ProblemSpec<Scalar>& spec, const TruncatedWeight<Scalar>& weight,
                    const FeFunction<Scalar>& u, const FeFunction<Scalar>& v) {
  if (!u.space->same_as(*v.space)) throw std::invalid_argument("pairing_with: space mismatch");
  const auto& mesh = u.space->mesh();
  const int d = mesh.dim();
  const auto quad = quadrature_for<Scalar>(d, spec.p);
  const auto uv = u.vertex_values();
  const auto vv = v.vertex_values();
  const Scalar sq = spec.variant == Variant::competing ? Scalar(-1) : Scalar(1);
  Scalar total = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto gu = cell_gradient(mesh, uv, c);
    const auto gv = cell_gradient(mesh, vv, c);
    const Scalar gsq = gu.squaredNorm();
    const Scalar scale = mesh.cell_measure(c) / quad.reference_measure();
    Scalar w_int = 0, load = 0;
    for (int i = 0; i < quad.size(); ++i) {
      const auto lam = quad.barycentric(i);
      typename ConvectionFamily<Scalar>::Point x = ConvectionFamily<Scalar>::Point::Zero(d);
      Scalar uq = 0, vq = 0;
      for (int k = 0; k <= d; ++k) {
        const int vert = mesh.cells()(k, c);
        x += lam[k] * mesh.vertices().col(vert);
        uq += lam[k] * uv[vert];
        vq += lam[k] * vv[vert];
      }
      const Scalar wq = scale * quad.weights[i];
      w_int += wq * weight(uq);
      load += wq * spec.convection(x, uq, gu) * vq;
    }
    const Scalar gdot = gu.dot(gv);
    total += w_int * flux_coefficient(spec.p, gsq, spec.epsilon) * gdot +
             sq * mesh.cell_measure(c) * flux_coefficient(spec.q, gsq, spec.epsilon) * gdot - load;
  }
  return total;
}

/// Principal part and remainder with residual = first - second:
///   competing:   first = weighted,          second = q_flux + load
///   cooperative: first = weighted + q_flux, second = load
template <typename Scalar>
std::pair<DualVector<Scalar>, DualVector<Scalar>> split_residuals(const ProblemSpec<Scalar>& spec,
                                                                  const TruncatedWeight<Scalar>& weight,
                                                                  const FeFunction<Scalar>& u) {
  const auto pt = PqAssembler<Scalar>(spec, weight).parts(u);
  DualVector<Scalar> first(u.space), second(u.space);
  if (spec.variant == Variant::competing) {
    first.values = pt.weighted.values;
    second.values = pt.q_flux.values + pt.load.values;
  } else {
    first.values = pt.weighted.values + pt.q_flux.values;
    second.values = pt.load.values;
  }
  return {first, second};
}

template <typename Scalar>
Scalar eval_convection(const ConvectionFamily<Scalar>& family, const typename ConvectionFamily<Scalar>::Point& x,
                       Scalar s, const typename ConvectionFamily<Scalar>::Point& xi) {
  return family(x, s, xi);
}

}  // namespace pqlap
