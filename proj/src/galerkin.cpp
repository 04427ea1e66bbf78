#include "pqlap/galerkin.hpp"

#include "pqlap/random.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace pqlap {

using Vector = Eigen::VectorXd;
using Sparse = Eigen::SparseMatrix<double>;

double consistency_gap(const AbstractOperator& op, const FeFunctiond& u, const FeFunctiond& v) {
  return std::abs(pair(op.residual(u), v) - op.pairing(u, v));
}

PqOperator::PqOperator(ProblemSpecd spec, TruncatedWeight<double> weight, SpacePtr<double> integration,
                       std::optional<double> radius_hint)
    : assembler_(std::move(spec), std::move(weight)), integration_(std::move(integration)), hint_(radius_hint) {
  if (!integration_) throw std::invalid_argument("PqOperator: null integration space");
}

const Sparse& PqOperator::prolongation(const FeSpaced& space) const {
  auto it = cache_.find(&space.mesh());
  if (it == cache_.end()) {
    // keep the mesh alive as long as the cache entry
    auto keep = std::make_shared<const FeSpaced>(space.mesh_ptr());
    it = cache_.emplace(&space.mesh(), std::make_pair(keep, prolongation_matrix(space, *integration_))).first;
  }
  return it->second.second;
}

FeFunctiond PqOperator::lift(const FeFunctiond& u) const {
  if (u.space->same_as(*integration_)) return FeFunctiond(integration_, u.coeffs);
  return FeFunctiond(integration_, prolongation(*u.space) * u.coeffs);
}

DualVectord PqOperator::residual(const FeFunctiond& u) const {
  if (u.space->same_as(*integration_)) {
    auto r = assembler_.residual(FeFunctiond(integration_, u.coeffs));
    r.space = u.space;
    return r;
  }
  const auto& p = prolongation(*u.space);
  const auto fine = assembler_.residual(FeFunctiond(integration_, p * u.coeffs));
  DualVectord r(u.space);
  r.values = p.transpose() * fine.values;
  return r;
}

Sparse PqOperator::jacobian(const FeFunctiond& u) const {
  if (u.space->same_as(*integration_)) return assembler_.jacobian(FeFunctiond(integration_, u.coeffs));
  const auto& p = prolongation(*u.space);
  const Sparse fine = assembler_.jacobian(FeFunctiond(integration_, p * u.coeffs));
  Sparse j = p.transpose() * fine * p;
  j.makeCompressed();
  return j;
}

double PqOperator::pairing(const FeFunctiond& u, const FeFunctiond& v) const {
  if (!u.space->same_as(*v.space)) throw std::invalid_argument("pairing: space mismatch");
  return pairing_with(spec(), weight(), lift(u), lift(v));
}

double PqOperator::norm(const FeFunctiond& u) const { return grad_norm_lp(u, spec().p); }

OperatorProperties PqOperator::properties() const {
  // truncation makes the weight bounded; coercivity is the estimates module's claim
  return OperatorProperties{weight().active, true, true};
}

OperatorParts<double> PqOperator::parts(const FeFunctiond& u) const {
  auto fine = assembler_.parts(lift(u));
  if (u.space->same_as(*integration_)) {
    for (auto* d : {&fine.weighted, &fine.q_flux, &fine.load}) d->space = u.space;
    return fine;
  }
  const auto& p = prolongation(*u.space);
  OperatorParts<double> out{DualVectord(u.space), DualVectord(u.space), DualVectord(u.space)};
  out.weighted.values = p.transpose() * fine.weighted.values;
  out.q_flux.values = p.transpose() * fine.q_flux.values;
  out.load.values = p.transpose() * fine.load.values;
  return out;
}

double PqOperator::principal_pairing(const FeFunctiond& u, const FeFunctiond& v) const {
  if (!u.space->same_as(*v.space)) throw std::invalid_argument("principal_pairing: space mismatch");
  const auto pt = assembler_.parts(lift(u));
  return (pt.weighted.values + assembler_.q_sign() * pt.q_flux.values).dot(lift(v).coeffs);
}

double PqOperator::convection_pairing(const FeFunctiond& u, const FeFunctiond& v) const {
  if (!u.space->same_as(*v.space)) throw std::invalid_argument("convection_pairing: space mismatch");
  return assembler_.parts(lift(u)).load.values.dot(lift(v).coeffs);
}

namespace {

std::vector<Vector> sphere_directions(const FeSpaced& space, int samples, std::uint64_t seed) {
  const auto& mesh = space.mesh();
  const auto& dom = mesh.domain();
  Rng rng(seed);
  std::vector<Vector> out;
  for (int k = 0; k < samples; ++k) {
    Vector v(space.size());
    if (k % 2 == 0) {
      for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
    } else {
      double amp[3][3];
      for (auto& row : amp)
        for (double& a : row) a = rng.normal();
      for (int i = 0; i < v.size(); ++i) {
        const auto x = mesh.vertices().col(space.dofs()[i]);
        const double sx = (x[0] - dom.x0) / (dom.x1 - dom.x0);
        const double sy = mesh.dim() == 2 ? (x[1] - dom.y0) / (dom.y1 - dom.y0) : 0.5;
        double s = 0;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < (mesh.dim() == 2 ? 3 : 1); ++b)
            s += amp[a][b] * std::sin((a + 1) * std::numbers::pi * sx) *
                 (mesh.dim() == 2 ? std::sin((b + 1) * std::numbers::pi * sy) : 1.0);
        v[i] = s;
      }
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

GuardRecord brouwer_guard(const AbstractOperator& op, const SpacePtr<double>& space, double radius, int samples,
                          std::uint64_t seed, int max_doublings) {
  if (!(radius > 0)) throw std::invalid_argument("brouwer_guard: radius must be positive");
  GuardRecord g;
  g.radius = g.initial_radius = radius;
  if (space->size() == 0 || samples <= 0) {
    g.pass = true;
    return g;
  }
  const auto dirs = sphere_directions(*space, samples, seed);
  auto evaluate = [&](double r) {
    double lo = std::numeric_limits<double>::infinity();
    int used = 0;
    for (const auto& d : dirs) {
      FeFunctiond v(space, d);
      const double n = op.norm(v);
      if (!(n > 0)) continue;
      v.coeffs *= r / n;
      lo = std::min(lo, op.pairing(v, v));
      ++used;
    }
    g.samples = used;
    return used ? lo : 0.0;
  };
  g.min_pairing = evaluate(g.radius);
  while (g.min_pairing < 0 && g.doublings < max_doublings) {
    g.radius *= 2;
    ++g.doublings;
    g.min_pairing = evaluate(g.radius);
  }
  g.pass = g.min_pairing >= 0;
  return g;
}

const char* to_string(SolverPath p) { return p == SolverPath::newton ? "newton" : "continuation"; }

namespace {

using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Sparse(const Vector&)>;

double sup(const Vector& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }

bool safe_residual(const ResidualFn& f, const Vector& x, Vector& r) {
  try {
    r = f(x);
  } catch (const NonFiniteError&) {
    return false;
  }
  return r.allFinite();
}

bool linear_solve(const Sparse& j, const Sparse& stiff, const Vector& rhs, Vector& dx) {
  Eigen::SparseLU<Sparse> lu;
  lu.compute(j);
  if (lu.info() == Eigen::Success) {
    dx = lu.solve(rhs);
    if (lu.info() == Eigen::Success && dx.allFinite()) return true;
  }
  // shift towards the Laplacian when the linearization is singular
  auto max_abs = [](const Sparse& m) { return m.nonZeros() ? m.coeffs().cwiseAbs().maxCoeff() : 0.0; };
  const double scale = std::max(1e-300, max_abs(j)) / std::max(1e-300, max_abs(stiff));
  for (double mu = 1e-10; mu <= 1; mu *= 100) {
    Sparse shifted = j + (mu * scale) * stiff;
    lu.compute(shifted);
    if (lu.info() != Eigen::Success) continue;
    dx = lu.solve(rhs);
    if (lu.info() == Eigen::Success && dx.allFinite()) return true;
  }
  return false;
}

bool newton(const ResidualFn& f, const JacobianFn& jac, const Sparse& stiff, Vector& x, double tol, int max_it,
            int& used, std::string& why) {
  Vector r;
  if (!safe_residual(f, x, r)) {
    why = "non-finite residual at the start";
    return false;
  }
  // max_it caps the iterations of the whole level solve, counted in `used`
  for (;;) {
    if (sup(r) <= tol) return true;
    if (used >= max_it) {
      why = "iteration limit reached (residual " + std::to_string(sup(r)) + ")";
      return false;
    }
    ++used;
    Vector dx;
    if (!linear_solve(jac(x), stiff, -r, dx)) {
      why = "linear solve failed";
      return false;
    }
    const double merit = r.norm();
    bool accepted = false;
    Vector xt, rt;
    for (double a = 1; a > 1e-12; a /= 2) {
      xt = x + a * dx;
      if (safe_residual(f, xt, rt) && rt.norm() <= (1 - 1e-4 * a) * merit) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      why = "line search stalled (residual " + std::to_string(sup(r)) + ")";
      return false;
    }
    x = xt;
    r = rt;
  }
}

bool continuation(const ResidualFn& f, const JacobianFn& jac, const Sparse& stiff, Vector& x, const SolverConfig& cfg,
                  int& used, std::string& why) {
  const double max_step = 1.0 / std::max(1, cfg.continuation_steps);
  double tau = 0, step = max_step;
  x.setZero();
  while (tau < 1) {
    const double next = std::min(1.0, tau + step);
    ResidualFn h = [&](const Vector& y) -> Vector { return next * f(y) + (1 - next) * (stiff * y); };
    JacobianFn hj = [&](const Vector& y) -> Sparse {
      Sparse m = next * jac(y) + (1 - next) * stiff;
      return m;
    };
    Vector y = x;
    std::string inner;
    if (newton(h, hj, stiff, y, cfg.tolerance, cfg.max_iterations, used, inner)) {
      x = y;
      tau = next;
      step = std::min(max_step, 2 * step);
    } else {
      step /= 2;
      if (step < 1e-6) {
        why = "continuation stalled at t = " + std::to_string(tau) + ": " + inner;
        return false;
      }
    }
  }
  return true;
}

}  // namespace

LevelSolve solve_level(const AbstractOperator& op, const SpacePtr<double>& space, const SolverConfig& cfg,
                       const FeFunctiond* warm_start, double guard_radius, int level) {
  LevelSolve out;
  out.level = level;
  FeFunctiond start(space);
  if (warm_start) start = prolongate(*warm_start, space);
  if (guard_radius > 0) out.guard = brouwer_guard(op, space, guard_radius, cfg.guard_samples, cfg.seed + level);

  const Sparse stiff = PqAssembler<double>::stiffness(*space);
  ResidualFn f = [&](const Vector& x) { return op.residual(FeFunctiond(space, x)).values; };
  JacobianFn j = [&](const Vector& x) { return op.jacobian(FeFunctiond(space, x)); };

  Vector x = start.coeffs;
  std::string why;
  bool ok = false;
  const bool zero_start = x.size() == 0 || x.isZero(0);
  if (zero_start) {
    out.path = SolverPath::continuation;
    ok = continuation(f, j, stiff, x, cfg, out.iterations, why);
    if (!ok) {
      std::string why2;
      out.path = SolverPath::newton;
      x = start.coeffs;
      ok = newton(f, j, stiff, x, cfg.tolerance, cfg.max_iterations, out.iterations, why2);
      if (!ok) why += "; newton: " + why2;
    }
  } else {
    out.path = SolverPath::newton;
    ok = newton(f, j, stiff, x, cfg.tolerance, cfg.max_iterations, out.iterations, why);
    if (!ok) {
      std::string why2;
      out.path = SolverPath::continuation;
      ok = continuation(f, j, stiff, x, cfg, out.iterations, why2);
      why += "; continuation: " + why2;
    }
  }

  out.u = FeFunctiond(space, x);
  Vector r;
  out.residual_sup = safe_residual(f, x, r) ? sup(r) : std::numeric_limits<double>::infinity();
  out.converged = ok && out.residual_sup <= cfg.tolerance;
  if (!out.converged) out.message = why.empty() ? "residual above tolerance" : why;
  if (guard_radius > 0) out.within_guard = op.norm(out.u) <= out.guard.radius * (1 + 1e-8);
  return out;
}

std::vector<FeFunctiond> make_test_set(const SpacePtr<double>& coarse, int random_count, std::uint64_t seed,
                                       std::vector<std::string>* names) {
  std::vector<FeFunctiond> out;
  if (names) names->clear();
  for (int i = 0; i < coarse->size(); ++i) {
    FeFunctiond v(coarse);
    v.coeffs[i] = 1;
    out.push_back(v);
    if (names) names->push_back("phi_" + std::to_string(i));
  }
  Rng rng(seed ^ 0x5bd1e995ULL);
  for (int k = 0; k < random_count; ++k) {
    FeFunctiond v(coarse);
    for (int i = 0; i < v.coeffs.size(); ++i) v.coeffs[i] = rng.normal();
    const double m = sup_norm(v);
    if (m > 0) v.coeffs /= m;
    out.push_back(v);
    if (names) names->push_back("random_" + std::to_string(k));
  }
  return out;
}

ConditionTables evaluate_conditions(const PqOperator& op, const std::vector<FeFunctiond>& solutions,
                                    const std::vector<FeFunctiond>& test_set,
                                    const std::vector<std::string>& test_names, double tolerance) {
  ConditionTables t;
  t.test_names = test_names;
  if (solutions.empty()) return t;
  const double p = op.spec().p;
  const FeFunctiond u = op.lift(solutions.back());
  t.residual_scale = std::max(1.0, op.parts(u).load.values.lpNorm<1>());

  std::vector<FeFunctiond> lifted_tests;
  for (const auto& v : test_set) lifted_tests.push_back(op.lift(v));

  for (const auto& un_level : solutions) {
    const FeFunctiond un = op.lift(un_level);
    const FeFunctiond diff = un - u;
    std::vector<double> row, bound;
    for (std::size_t k = 0; k < test_set.size(); ++k) {
      row.push_back(pairing_with(op.spec(), op.weight(), un, lifted_tests[k]));
      bound.push_back(tolerance * prolongate(test_set[k], un_level.space).coeffs.lpNorm<1>());
    }
    t.b.push_back(row);
    t.b_bound.push_back(bound);
    t.c.push_back(pairing_with(op.spec(), op.weight(), un, diff));
    t.identity.push_back(-pairing_with(op.spec(), op.weight(), un, u));
    t.bookkeeping.push_back(pairing_with(op.spec(), op.weight(), un, un));
    t.bookkeeping_bound.push_back(tolerance * un_level.coeffs.lpNorm<1>());
    t.principal.push_back(op.principal_pairing(un, diff));
    t.convection.push_back(op.convection_pairing(un, diff));
    t.contraction.push_back(grad_norm_lp(diff, p));
    t.grad_norm.push_back(grad_norm_lp(un_level, p));
    t.sup_norm.push_back(sup_norm(un_level));
  }
  return t;
}

PqOperator hierarchy_operator(const ProblemSpecd& spec, const SpacePtr<double>& finest, double truncation_radius,
                              double guard_radius) {
  return PqOperator(spec, truncate_weight(spec.weight, truncation_radius), finest,
                    guard_radius > 0 ? std::optional<double>(guard_radius) : std::nullopt);
}

GeneralizedSolutionReport run_hierarchy(const ProblemSpecd& spec, const HierarchyOptions& opts) {
  spec.validate();
  if (opts.levels < 2) throw std::invalid_argument("run_hierarchy: needs at least 2 levels");
  GeneralizedSolutionReport rep;
  rep.truncation_radius = opts.truncation_radius;
  rep.guard_radius = opts.guard_radius;
  rep.tolerance = opts.solver.tolerance;
  for (const auto& m : build_hierarchy(spec.domain, opts.base_cells, opts.levels)) rep.spaces.push_back(make_space(m));

  const auto op = hierarchy_operator(spec, rep.spaces.back(), opts.truncation_radius, opts.guard_radius);
  std::vector<std::string> names;
  rep.test_set = make_test_set(rep.spaces.front(), opts.random_tests, opts.solver.seed, &names);

  std::vector<FeFunctiond> solved;
  for (int n = 0; n < opts.levels; ++n) {
    const FeFunctiond* warm = n > 0 ? &rep.levels.back().u : nullptr;
    rep.levels.push_back(solve_level(op, rep.spaces[n], opts.solver, warm, opts.guard_radius, n));
    if (!rep.levels.back().converged) {
      rep.failed_level = n;
      rep.message = "level " + std::to_string(n) + ": " + rep.levels.back().message;
      break;
    }
    solved.push_back(rep.levels.back().u);
  }
  rep.completed = rep.failed_level < 0;
  rep.tables = evaluate_conditions(op, solved, rep.test_set, names, opts.solver.tolerance);
  if (!solved.empty()) rep.eta = op.residual(solved.back());
  return rep;
}

SProbe condition_S_probe(const GeneralizedSolutionReport& report, double relative_threshold,
                         double contraction_threshold) {
  SProbe s;
  const auto& t = report.tables;
  const std::size_t n = t.c.size();
  if (!report.completed || n < 2) {
    s.classification = "inconclusive";
    return s;
  }
  const std::size_t k = n - 2;
  s.pairings_vanish = std::abs(t.c[k]) <= relative_threshold * t.residual_scale;
  s.gradients_contract = t.contraction[k] <= contraction_threshold * t.grad_norm.back();
  s.monotone = true;
  for (std::size_t i = 0; i < k; ++i)
    if (!(t.contraction[i + 1] < t.contraction[i]) && !(t.contraction[i] == 0 && t.contraction[i + 1] == 0))
      s.monotone = false;
  if (s.pairings_vanish && s.gradients_contract)
    s.classification = "S-consistent";
  else if (s.pairings_vanish)
    s.classification = "generalized only";
  else
    s.classification = "inconclusive";
  return s;
}

}  // namespace pqlap
