#pragma once

#include "pqlap/mesh.hpp"
#include "pqlap/quadrature.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pqlap {

/// Continuous piecewise-linear functions vanishing on the boundary. Degrees of
/// freedom are the interior vertices in vertex-index order.
template <typename Scalar>
class FeSpace {
 public:
  using Mesh = MeshLevel<Scalar>;

  explicit FeSpace(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
    if (!mesh_) throw std::invalid_argument("FeSpace: null mesh");
    vertex_to_dof_.assign(mesh_->num_vertices(), -1);
    for (int v = 0; v < mesh_->num_vertices(); ++v)
      if (!mesh_->boundary()[v]) {
        vertex_to_dof_[v] = static_cast<int>(dofs_.size());
        dofs_.push_back(v);
      }
  }

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int size() const { return static_cast<int>(dofs_.size()); }
  int dim() const { return mesh_->dim(); }
  const std::vector<int>& dofs() const { return dofs_; }
  int dof_of_vertex(int v) const { return vertex_to_dof_[v]; }

  bool same_as(const FeSpace& other) const { return mesh_.get() == other.mesh_.get(); }

 private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<int> dofs_;
  std::vector<int> vertex_to_dof_;
};

using FeSpaced = FeSpace<double>;

template <typename Scalar>
using SpacePtr = std::shared_ptr<const FeSpace<Scalar>>;

template <typename Scalar>
SpacePtr<Scalar> make_space(std::shared_ptr<const MeshLevel<Scalar>> mesh) {
  return std::make_shared<const FeSpace<Scalar>>(std::move(mesh));
}

template <typename Scalar>
struct FeFunction {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SpacePtr<Scalar> space;
  Vector coeffs;

  FeFunction() = default;
  explicit FeFunction(SpacePtr<Scalar> s) : space(std::move(s)), coeffs(Vector::Zero(space->size())) {}
  FeFunction(SpacePtr<Scalar> s, Vector c) : space(std::move(s)), coeffs(std::move(c)) {
    if (coeffs.size() != space->size()) throw std::invalid_argument("FeFunction: coefficient length mismatch");
  }

  /// Values at every mesh vertex, boundary vertices included (as zero).
  Vector vertex_values() const {
    Vector vals = Vector::Zero(space->mesh().num_vertices());
    const auto& dofs = space->dofs();
    for (std::size_t i = 0; i < dofs.size(); ++i) vals[dofs[i]] = coeffs[static_cast<Eigen::Index>(i)];
    return vals;
  }

  FeFunction& operator+=(const FeFunction& o) {
    check_same(o);
    coeffs += o.coeffs;
    return *this;
  }
  FeFunction& operator-=(const FeFunction& o) {
    check_same(o);
    coeffs -= o.coeffs;
    return *this;
  }
  friend FeFunction operator+(FeFunction a, const FeFunction& b) { return a += b; }
  friend FeFunction operator-(FeFunction a, const FeFunction& b) { return a -= b; }
  friend FeFunction operator*(Scalar s, FeFunction a) {
    a.coeffs *= s;
    return a;
  }

 private:
  void check_same(const FeFunction& o) const {
    if (!space->same_as(*o.space)) throw std::invalid_argument("FeFunction: space mismatch");
  }
};

using FeFunctiond = FeFunction<double>;

/// Element of the dual of a space: entry i is the action on hat function i.
template <typename Scalar>
struct DualVector {
  SpacePtr<Scalar> space;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;

  DualVector() = default;
  explicit DualVector(SpacePtr<Scalar> s)
      : space(std::move(s)), values(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(space->size())) {}

  Scalar sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : Scalar(0); }
};

using DualVectord = DualVector<double>;

/// Constant gradient of a P1 field on cell c, given its vertex values.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 2, 1> cell_gradient(const MeshLevel<Scalar>& mesh,
                                                                 const Eigen::MatrixBase<Derived>& vertex_values,
                                                                 int c) {
  const auto& g = mesh.basis_gradients(c);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 2, 1> grad = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 2, 1>::Zero(mesh.dim());
  for (int k = 0; k <= mesh.dim(); ++k) grad += vertex_values[mesh.cells()(k, c)] * g.col(k);
  return grad;
}

/// Sparse matrix mapping coefficients on `coarse` to coefficients on `fine`.
/// Exact: nested P1 spaces interpolate without loss.
template <typename Scalar>
Eigen::SparseMatrix<Scalar> prolongation_matrix(const FeSpace<Scalar>& coarse, const FeSpace<Scalar>& fine) {
  if (!fine.mesh().descends_from(coarse.mesh()))
    throw std::invalid_argument("prolongate: target mesh is not a refinement of the source mesh");

  std::vector<const MeshLevel<Scalar>*> chain;
  for (const MeshLevel<Scalar>* m = &fine.mesh(); m != &coarse.mesh(); m = m->parent().get()) chain.push_back(m);

  // vertex-level operator, starting from the coarse dofs
  const auto& cm = coarse.mesh();
  Eigen::SparseMatrix<Scalar> op(cm.num_vertices(), coarse.size());
  {
    std::vector<Eigen::Triplet<Scalar>> t;
    for (int i = 0; i < coarse.size(); ++i) t.emplace_back(coarse.dofs()[i], i, Scalar(1));
    op.setFromTriplets(t.begin(), t.end());
  }
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const auto& m = **it;
    Eigen::SparseMatrix<Scalar> step(m.num_vertices(), m.parent()->num_vertices());
    std::vector<Eigen::Triplet<Scalar>> t;
    for (int v = 0; v < m.num_vertices(); ++v) {
      const int a = m.parents()(0, v), b = m.parents()(1, v);
      if (a == b) {
        t.emplace_back(v, a, Scalar(1));
      } else {
        t.emplace_back(v, a, Scalar(0.5));
        t.emplace_back(v, b, Scalar(0.5));
      }
    }
    step.setFromTriplets(t.begin(), t.end());
    op = (step * op).pruned();
  }

  Eigen::SparseMatrix<Scalar> restrict_rows(fine.size(), fine.mesh().num_vertices());
  std::vector<Eigen::Triplet<Scalar>> t;
  for (int i = 0; i < fine.size(); ++i) t.emplace_back(i, fine.dofs()[i], Scalar(1));
  restrict_rows.setFromTriplets(t.begin(), t.end());
  Eigen::SparseMatrix<Scalar> p = restrict_rows * op;
  p.makeCompressed();
  return p;
}

template <typename Scalar>
FeFunction<Scalar> prolongate(const FeFunction<Scalar>& u, const SpacePtr<Scalar>& finer) {
  if (u.space->same_as(*finer)) return FeFunction<Scalar>(finer, u.coeffs);
  const auto p = prolongation_matrix(*u.space, *finer);
  return FeFunction<Scalar>(finer, p * u.coeffs);
}

/// (sum_K |grad u|_K^p |K|)^{1/p}; exact for P1 fields.
template <typename Scalar>
Scalar grad_norm_lp(const FeFunction<Scalar>& u, Scalar p) {
  if (!(p >= 1)) throw std::invalid_argument("grad_norm_lp: p must be >= 1");
  const auto& mesh = u.space->mesh();
  const auto vals = u.vertex_values();
  Scalar acc = 0;
  for (int c = 0; c < mesh.num_cells(); ++c) acc += std::pow(cell_gradient(mesh, vals, c).norm(), p) * mesh.cell_measure(c);
  return std::pow(acc, Scalar(1) / p);
}

namespace detail {

// Exact integral of the positive part of a linear function over a simplex
// with the given vertex values.
template <typename Scalar>
Scalar positive_part_integral(Scalar measure, Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1> v) {
  std::sort(v.data(), v.data() + v.size(), std::greater<Scalar>());
  if (v.size() == 2) {
    const Scalar a = v[0], b = v[1];
    if (a <= 0) return 0;
    if (b >= 0) return measure * (a + b) / 2;
    return measure * a * a / (2 * (a - b));
  }
  const Scalar a = v[0], b = v[1], c = v[2];
  if (a <= 0) return 0;
  if (c >= 0) return measure * (a + b + c) / 3;
  auto single = [measure](Scalar top, Scalar m1, Scalar m2) {
    return measure * top * top * top / (3 * (top - m1) * (top - m2));
  };
  if (b <= 0) return single(a, b, c);
  // two positive vertices: integral of u plus the negative part
  return measure * (a + b + c) / 3 + single(-c, -a, -b);
}

}  // namespace detail

/// L^r norm. r = 1 uses the exact positive/negative split per cell, every
/// other r uses the default degree-3 rule (exact for r = 2).
template <typename Scalar>
Scalar lr_norm(const FeFunction<Scalar>& u, Scalar r) {
  if (!(r >= 1)) throw std::invalid_argument("lr_norm: r must be >= 1");
  const auto& mesh = u.space->mesh();
  const auto vals = u.vertex_values();
  const int d = mesh.dim();
  Scalar acc = 0;
  if (r == 1) {
    for (int c = 0; c < mesh.num_cells(); ++c) {
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, 3, 1> v(d + 1);
      for (int k = 0; k <= d; ++k) v[k] = vals[mesh.cells()(k, c)];
      acc += detail::positive_part_integral<Scalar>(mesh.cell_measure(c), v) +
             detail::positive_part_integral<Scalar>(mesh.cell_measure(c), -v);
    }
    return acc;
  }
  const auto q = quadrature_for<Scalar>(d, r);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Scalar scale = mesh.cell_measure(c) / q.reference_measure();
    for (int i = 0; i < q.size(); ++i) {
      const auto lam = q.barycentric(i);
      Scalar uq = 0;
      for (int k = 0; k <= d; ++k) uq += lam[k] * vals[mesh.cells()(k, c)];
      acc += scale * q.weights[i] * std::pow(std::abs(uq), r);
    }
  }
  return std::pow(acc, Scalar(1) / r);
}

/// max |u| over the closed domain; attained at a vertex for P1 fields.
template <typename Scalar>
Scalar sup_norm(const FeFunction<Scalar>& u) {
  return u.coeffs.size() ? u.coeffs.cwiseAbs().maxCoeff() : Scalar(0);
}

template <typename Scalar>
Scalar pair(const DualVector<Scalar>& f, const FeFunction<Scalar>& v) {
  if (!f.space->same_as(*v.space)) throw std::invalid_argument("pair: space mismatch");
  return f.values.dot(v.coeffs);
}

/// CSV dump with one row per vertex (`x[,y],value`), boundary rows carrying 0.
template <typename Scalar>
void write_csv(const FeFunction<Scalar>& u, std::ostream& os) {
  const auto& mesh = u.space->mesh();
  const auto vals = u.vertex_values();
  os << (mesh.dim() == 1 ? "x,value\n" : "x,y,value\n");
  os << std::setprecision(std::numeric_limits<Scalar>::max_digits10);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    for (int k = 0; k < mesh.dim(); ++k) os << mesh.vertices()(k, v) << ',';
    os << vals[v] << '\n';
  }
}

template <typename Scalar>
void write_csv(const FeFunction<Scalar>& u, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_csv(u, os);
}

/// Inverse of write_csv. Rows must list the space's vertices in order.
template <typename Scalar>
FeFunction<Scalar> read_csv(const SpacePtr<Scalar>& space, std::istream& is) {
  const auto& mesh = space->mesh();
  FeFunction<Scalar> u(space);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_csv: empty input");
  int v = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (v >= mesh.num_vertices()) throw std::runtime_error("read_csv: more rows than vertices");
    std::stringstream ss(line);
    std::string cell;
    std::vector<Scalar> row;
    while (std::getline(ss, cell, ',')) row.push_back(static_cast<Scalar>(std::stod(cell)));
    if (static_cast<int>(row.size()) != mesh.dim() + 1) throw std::runtime_error("read_csv: bad row " + line);
    for (int k = 0; k < mesh.dim(); ++k)
      if (std::abs(row[k] - mesh.vertices()(k, v)) > Scalar(1e-12) * (1 + std::abs(row[k])))
        throw std::runtime_error("read_csv: vertex coordinates do not match the mesh at row " + std::to_string(v));
    const int dof = space->dof_of_vertex(v);
    if (dof >= 0)
      u.coeffs[dof] = row.back();
    else if (row.back() != 0)
      throw std::runtime_error("read_csv: nonzero boundary value at row " + std::to_string(v));
    ++v;
  }
  if (v != mesh.num_vertices()) throw std::runtime_error("read_csv: row count does not match the mesh");
  return u;
}

template <typename Scalar>
FeFunction<Scalar> read_csv(const SpacePtr<Scalar>& space, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_csv(space, is);
}

}  // namespace pqlap
