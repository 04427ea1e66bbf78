#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pqlap {

/// Interval (dim 1) or axis-aligned rectangle (dim 2).
template <typename Scalar>
struct Domain {
  int dim = 1;
  Scalar x0 = 0, x1 = 1;
  Scalar y0 = 0, y1 = 0;

  static Domain interval(Scalar a, Scalar b) {
    if (!(b > a)) throw std::invalid_argument("interval bounds must satisfy b > a");
    return Domain{1, a, b, 0, 0};
  }

  static Domain rectangle(Scalar a, Scalar b, Scalar c, Scalar d) {
    if (!(b > a) || !(d > c)) throw std::invalid_argument("rectangle bounds must satisfy b > a and d > c");
    return Domain{2, a, b, c, d};
  }

  Scalar measure() const { return dim == 1 ? x1 - x0 : (x1 - x0) * (y1 - y0); }
  Scalar width() const { return x1 - x0; }
};

using Domaind = Domain<double>;

/// One level of a nested simplicial hierarchy.
///
/// Vertices are stored column-wise (dim x n_vertices), cells column-wise as
/// vertex indices ((dim+1) x n_cells). A refined level keeps every vertex of
/// its parent at the same index and appends edge midpoints after them, so
/// `parents()` is the identity pair (i, i) for inherited vertices and the
/// endpoints of the bisected parent edge otherwise.
template <typename Scalar>
class MeshLevel {
 public:
  using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Cells = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Gradients = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 3>;

  MeshLevel(Domain<Scalar> domain, int level, Points vertices, Cells cells, std::vector<bool> boundary,
            Eigen::Matrix<int, 2, Eigen::Dynamic> parents, std::shared_ptr<const MeshLevel> parent)
      : domain_(domain),
        level_(level),
        vertices_(std::move(vertices)),
        cells_(std::move(cells)),
        boundary_(std::move(boundary)),
        parents_(std::move(parents)),
        parent_(std::move(parent)) {
    compute_geometry();
  }

  const Domain<Scalar>& domain() const { return domain_; }
  int dim() const { return domain_.dim; }
  int level() const { return level_; }
  int num_vertices() const { return static_cast<int>(vertices_.cols()); }
  int num_cells() const { return static_cast<int>(cells_.cols()); }
  const Points& vertices() const { return vertices_; }
  const Cells& cells() const { return cells_; }
  const std::vector<bool>& boundary() const { return boundary_; }
  const Eigen::Matrix<int, 2, Eigen::Dynamic>& parents() const { return parents_; }
  const std::shared_ptr<const MeshLevel>& parent() const { return parent_; }
  const Vector& cell_measures() const { return measures_; }
  Scalar cell_measure(int c) const { return measures_[c]; }

  /// Gradients of the barycentric coordinates on cell c, one column per local vertex.
  const Gradients& basis_gradients(int c) const { return gradients_[c]; }

  Scalar total_measure() const { return measures_.sum(); }

  /// True when `ancestor` is this level or reachable through the parent chain.
  bool descends_from(const MeshLevel& ancestor) const {
    for (const MeshLevel* m = this; m != nullptr; m = m->parent_.get())
      if (m == &ancestor) return true;
    return false;
  }

 private:
  void compute_geometry() {
    const int nc = num_cells();
    const int d = dim();
    measures_.resize(nc);
    gradients_.resize(nc);
    for (int c = 0; c < nc; ++c) {
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2> jac(d, d);
      for (int k = 0; k < d; ++k) jac.col(k) = vertices_.col(cells_(k + 1, c)) - vertices_.col(cells_(0, c));
      const Scalar det = jac.determinant();
      if (!(std::abs(det) > 0)) throw std::runtime_error("degenerate cell " + std::to_string(c));
      measures_[c] = std::abs(det) / (d == 1 ? Scalar(1) : Scalar(2));
      // rows of jac^{-1} are the gradients of lambda_1..lambda_d
      const auto inv = jac.inverse();
      Gradients g(d, d + 1);
      g.rightCols(d) = inv.transpose();
      g.col(0) = -g.rightCols(d).rowwise().sum();
      gradients_[c] = g;
    }
  }

  Domain<Scalar> domain_;
  int level_;
  Points vertices_;
  Cells cells_;
  std::vector<bool> boundary_;
  Eigen::Matrix<int, 2, Eigen::Dynamic> parents_;
  std::shared_ptr<const MeshLevel> parent_;
  Vector measures_;
  std::vector<Gradients> gradients_;
};

using MeshLeveld = MeshLevel<double>;

/// Uniform level-0 mesh: `base_cells` intervals in 1D, `base_cells` x `base_cells`
/// squares split into two triangles each in 2D.
template <typename Scalar>
std::shared_ptr<const MeshLevel<Scalar>> build_mesh(const Domain<Scalar>& domain, int base_cells) {
  if (base_cells < 2) throw std::invalid_argument("build_mesh: need at least 2 cells (per side)");
  if (!(domain.x1 > domain.x0) || (domain.dim == 2 && !(domain.y1 > domain.y0)))
    throw std::invalid_argument("build_mesh: inverted domain bounds");
  if (domain.dim != 1 && domain.dim != 2) throw std::invalid_argument("build_mesh: dimension must be 1 or 2");

  const int n = base_cells;
  auto coord = [n](Scalar a, Scalar b, int i) { return i == n ? b : a + (b - a) * Scalar(i) / Scalar(n); };

  typename MeshLevel<Scalar>::Points verts;
  typename MeshLevel<Scalar>::Cells cells;
  std::vector<bool> boundary;

  if (domain.dim == 1) {
    verts.resize(1, n + 1);
    boundary.assign(n + 1, false);
    for (int i = 0; i <= n; ++i) verts(0, i) = coord(domain.x0, domain.x1, i);
    boundary[0] = boundary[n] = true;
    cells.resize(2, n);
    for (int i = 0; i < n; ++i) cells.col(i) << i, i + 1;
  } else {
    const int nv = (n + 1) * (n + 1);
    verts.resize(2, nv);
    boundary.assign(nv, false);
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        verts(0, id(i, j)) = coord(domain.x0, domain.x1, i);
        verts(1, id(i, j)) = coord(domain.y0, domain.y1, j);
        boundary[id(i, j)] = (i == 0 || j == 0 || i == n || j == n);
      }
    cells.resize(3, 2 * n * n);
    int c = 0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        cells.col(c++) << id(i, j), id(i + 1, j), id(i + 1, j + 1);
        cells.col(c++) << id(i, j), id(i + 1, j + 1), id(i, j + 1);
      }
  }
  return std::make_shared<const MeshLevel<Scalar>>(domain, 0, std::move(verts), std::move(cells),
                                                   std::move(boundary), Eigen::Matrix<int, 2, Eigen::Dynamic>(2, 0),
                                                   nullptr);
}

/// Uniform refinement: bisection in 1D, red refinement in 2D.
template <typename Scalar>
std::shared_ptr<const MeshLevel<Scalar>> refine(const std::shared_ptr<const MeshLevel<Scalar>>& coarse) {
  if (!coarse) throw std::invalid_argument("refine: null mesh");
  const auto& dom = coarse->domain();
  const auto& cv = coarse->vertices();
  const auto& cc = coarse->cells();
  const int d = coarse->dim();
  const int nv0 = coarse->num_vertices();

  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> new_points;
  std::vector<std::pair<int, int>> new_parents;
  std::vector<bool> boundary = coarse->boundary();
  std::map<std::pair<int, int>, int> edge_mid;

  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = edge_mid.find(key);
    if (it != edge_mid.end()) return it->second;
    const int idx = nv0 + static_cast<int>(new_points.size());
    new_points.push_back((cv.col(a) + cv.col(b)) / Scalar(2));
    new_parents.emplace_back(key.first, key.second);
    bool on_bnd = false;
    if (boundary[a] && boundary[b]) {
      const bool same_x = cv(0, a) == cv(0, b) && (cv(0, a) == dom.x0 || cv(0, a) == dom.x1);
      const bool same_y = d == 2 && cv(1, a) == cv(1, b) && (cv(1, a) == dom.y0 || cv(1, a) == dom.y1);
      on_bnd = d == 2 && (same_x || same_y);
    }
    boundary.push_back(on_bnd);
    edge_mid.emplace(key, idx);
    return idx;
  };

  typename MeshLevel<Scalar>::Cells cells(d + 1, coarse->num_cells() * (d == 1 ? 2 : 4));
  int c = 0;
  for (int k = 0; k < coarse->num_cells(); ++k) {
    if (d == 1) {
      const int a = cc(0, k), b = cc(1, k);
      const int m = midpoint(a, b);
      cells.col(c++) << a, m;
      cells.col(c++) << m, b;
    } else {
      const int v0 = cc(0, k), v1 = cc(1, k), v2 = cc(2, k);
      const int m01 = midpoint(v0, v1), m12 = midpoint(v1, v2), m20 = midpoint(v2, v0);
      cells.col(c++) << v0, m01, m20;
      cells.col(c++) << m01, v1, m12;
      cells.col(c++) << m20, m12, v2;
      cells.col(c++) << m01, m12, m20;
    }
  }

  const int nv = nv0 + static_cast<int>(new_points.size());
  typename MeshLevel<Scalar>::Points verts(d, nv);
  verts.leftCols(nv0) = cv;
  Eigen::Matrix<int, 2, Eigen::Dynamic> parents(2, nv);
  for (int i = 0; i < nv0; ++i) parents.col(i) << i, i;
  for (std::size_t i = 0; i < new_points.size(); ++i) {
    verts.col(nv0 + static_cast<int>(i)) = new_points[i];
    parents.col(nv0 + static_cast<int>(i)) << new_parents[i].first, new_parents[i].second;
  }
  return std::make_shared<const MeshLevel<Scalar>>(dom, coarse->level() + 1, std::move(verts), std::move(cells),
                                                   std::move(boundary), std::move(parents), coarse);
}

/// Level 0 plus `levels - 1` uniform refinements.
template <typename Scalar>
std::vector<std::shared_ptr<const MeshLevel<Scalar>>> build_hierarchy(const Domain<Scalar>& domain, int base_cells,
                                                                       int levels) {
  if (levels < 1) throw std::invalid_argument("build_hierarchy: levels must be >= 1");
  std::vector<std::shared_ptr<const MeshLevel<Scalar>>> out;
  out.push_back(build_mesh(domain, base_cells));
  for (int i = 1; i < levels; ++i) out.push_back(refine(out.back()));
  return out;
}

}  // namespace pqlap
