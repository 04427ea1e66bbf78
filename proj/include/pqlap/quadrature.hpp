#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace pqlap {

/// Quadrature on the reference simplex: [0,1] in 1D, {x,y >= 0, x+y <= 1} in 2D.
/// Weights sum to the reference measure (1 resp. 1/2).
template <typename Scalar>
struct QuadratureRule {
  int dim = 1;
  int degree = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> points;  // dim x n
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights;

  int size() const { return static_cast<int>(weights.size()); }
  Scalar reference_measure() const { return dim == 1 ? Scalar(1) : Scalar(0.5); }

  /// Barycentric coordinates (lambda_0..lambda_dim) of point i.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1> barycentric(int i) const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1> lam(dim + 1);
    lam.tail(dim) = points.col(i);
    lam[0] = Scalar(1) - points.col(i).sum();
    return lam;
  }
};

using QuadratureRuled = QuadratureRule<double>;

template <typename Scalar>
QuadratureRule<Scalar> gauss_interval(int npoints) {
  QuadratureRule<Scalar> q;
  q.dim = 1;
  q.points.resize(1, npoints);
  q.weights.resize(npoints);
  switch (npoints) {
    case 1:
      q.points << 0.5;
      q.weights << 1;
      break;
    case 2: {
      const Scalar h = Scalar(0.5) / std::sqrt(Scalar(3));
      q.points << Scalar(0.5) - h, Scalar(0.5) + h;
      q.weights << 0.5, 0.5;
      break;
    }
    case 3: {
      const Scalar h = Scalar(0.5) * std::sqrt(Scalar(0.6));
      q.points << Scalar(0.5) - h, Scalar(0.5), Scalar(0.5) + h;
      q.weights << Scalar(5) / 18, Scalar(8) / 18, Scalar(5) / 18;
      break;
    }
    default:
      throw std::invalid_argument("gauss_interval: 1 to 3 points supported");
  }
  q.degree = 2 * npoints - 1;
  return q;
}

/// Symmetric positive-weight triangle rules of degree 1, 2 and 3.
template <typename Scalar>
QuadratureRule<Scalar> triangle_rule(int degree) {
  QuadratureRule<Scalar> q;
  q.dim = 2;
  if (degree <= 1) {
    q.points.resize(2, 1);
    q.points << Scalar(1) / 3, Scalar(1) / 3;
    q.weights.setConstant(1, Scalar(0.5));
    q.degree = 1;
  } else if (degree == 2) {
    q.points.resize(2, 3);
    q.points << Scalar(1) / 6, Scalar(2) / 3, Scalar(1) / 6,  //
        Scalar(1) / 6, Scalar(1) / 6, Scalar(2) / 3;
    q.weights.setConstant(3, Scalar(1) / 6);
    q.degree = 2;
  } else if (degree == 3) {
    // Strang-Fix: all permutations of one barycentric triple, equal weights.
    const Scalar a = Scalar(0.659027622374092), b = Scalar(0.231933368553031), c = Scalar(0.109039009072877);
    q.points.resize(2, 6);
    q.points << b, c, a, c, a, b,  //
        c, b, c, a, b, a;
    q.weights.setConstant(6, Scalar(1) / 12);
    q.degree = 3;
  } else {
    throw std::invalid_argument("triangle_rule: degree must be 1, 2 or 3");
  }
  return q;
}

/// Default rule for all pairings. Gradients of P1 fields are cellwise constant,
/// so |grad u|^{p-2} never enters the integrand polynomially and the exponent
/// only has to be admissible.
template <typename Scalar>
QuadratureRule<Scalar> quadrature_for(int dim, Scalar p_max_exponent) {
  if (!(p_max_exponent >= 1)) throw std::invalid_argument("quadrature_for: exponent must be >= 1");
  return dim == 1 ? gauss_interval<Scalar>(2) : triangle_rule<Scalar>(3);
}

}  // namespace pqlap
