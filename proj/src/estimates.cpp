#include "pqlap/estimates.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pqlap {

const char* to_string(PoincareConvention c) { return c == PoincareConvention::standard ? "standard" : "paper"; }

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::analytic_1d:
      return "analytic-1D";
    case Provenance::discrete_rayleigh:
      return "discrete-rayleigh";
    case Provenance::discrete_surrogate:
      return "discrete-surrogate";
  }
  return "unknown";
}

double analytic_lambda1_1d(double length, double p) {
  if (!(p > 1)) throw std::invalid_argument("lambda_1 needs p > 1");
  const double pi = std::numbers::pi;
  const double pi_p = 2 * pi * std::pow(p - 1, 1 / p) / (p * std::sin(pi / p));
  return std::pow(pi_p / length, p);
}

namespace {

struct QuotientParts {
  double num = 0, den = 0;
  Eigen::VectorXd dnum, dden;
};

QuotientParts quotient_parts(const FeFunctiond& u, double p) {
  const auto& space = *u.space;
  const auto& mesh = space.mesh();
  const int d = mesh.dim();
  const auto quad = quadrature_for<double>(d, p);
  const auto vals = u.vertex_values();
  QuotientParts out;
  out.dnum = Eigen::VectorXd::Zero(space.size());
  out.dden = Eigen::VectorXd::Zero(space.size());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto grad = cell_gradient(mesh, vals, c);
    const double gn = grad.norm();
    const double meas = mesh.cell_measure(c);
    out.num += std::pow(gn, p) * meas;
    const double coef = gn > 0 ? p * std::pow(gn, p - 2) : 0.0;
    const auto& bg = mesh.basis_gradients(c);
    const double scale = meas / quad.reference_measure();
    for (int i = 0; i < quad.size(); ++i) {
      const auto lam = quad.barycentric(i);
      double uq = 0;
      for (int k = 0; k <= d; ++k) uq += lam[k] * vals[mesh.cells()(k, c)];
      const double wq = scale * quad.weights[i];
      out.den += wq * std::pow(std::abs(uq), p);
      const double du = uq == 0 ? 0.0 : p * std::pow(std::abs(uq), p - 1) * (uq > 0 ? 1 : -1);
      for (int k = 0; k <= d; ++k) {
        const int dof = space.dof_of_vertex(mesh.cells()(k, c));
        if (dof >= 0) out.dden[dof] += wq * du * lam[k];
      }
    }
    for (int k = 0; k <= d; ++k) {
      const int dof = space.dof_of_vertex(mesh.cells()(k, c));
      if (dof >= 0) out.dnum[dof] += meas * coef * grad.dot(bg.col(k));
    }
  }
  return out;
}

}  // namespace

double rayleigh_quotient(const FeFunctiond& u, double p) {
  const auto parts = quotient_parts(u, p);
  return parts.num / parts.den;
}

Estimate discrete_rayleigh_lambda1(const SpacePtr<double>& space, double p, const RayleighOptions& opts) {
  if (!(p > 1)) throw std::invalid_argument("lambda_1 needs p > 1");
  if (space->size() == 0) throw std::invalid_argument("discrete_rayleigh_lambda1: empty space");
  const auto& mesh = space->mesh();
  const auto& dom = mesh.domain();

  // positive bump as the start
  FeFunctiond u(space);
  for (int i = 0; i < space->size(); ++i) {
    const auto x = mesh.vertices().col(space->dofs()[i]);
    double v = (x[0] - dom.x0) * (dom.x1 - x[0]);
    if (mesh.dim() == 2) v *= (x[1] - dom.y0) * (dom.y1 - x[1]);
    u.coeffs[i] = v;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> precond(PqAssembler<double>::stiffness(*space));
  if (precond.info() != Eigen::Success) throw std::runtime_error("discrete_rayleigh_lambda1: stiffness factorization failed");

  auto normalize = [p](FeFunctiond& w) {
    const double den = quotient_parts(w, p).den;
    w.coeffs /= std::pow(den, 1 / p);
  };
  normalize(u);

  Estimate est;
  est.provenance = Provenance::discrete_rayleigh;
  est.converged = false;
  auto parts = quotient_parts(u, p);
  double q = parts.num / parts.den;
  double step = 1;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Eigen::VectorXd grad = (parts.dnum - q * parts.dden) / parts.den;
    const Eigen::VectorXd dir = -precond.solve(grad);
    auto trial = [&](double a) {
      FeFunctiond w(space, u.coeffs + a * dir);
      return rayleigh_quotient(w, p);
    };
    // grow the step while it keeps improving, otherwise shrink until it does
    double best_a = 0, best_q = q;
    double a = step;
    double qa = trial(a);
    if (qa < q) {
      best_a = a;
      best_q = qa;
      for (int k = 0; k < 30; ++k) {
        const double qn = trial(2 * a);
        if (!(qn < best_q)) break;
        a *= 2;
        best_a = a;
        best_q = qn;
      }
    } else {
      for (int k = 0; k < 60 && !(qa < q); ++k) {
        a /= 2;
        qa = trial(a);
      }
      if (qa < q) {
        best_a = a;
        best_q = qa;
      }
    }
    est.iterations = it;
    if (best_a == 0) {
      est.converged = true;
      break;
    }
    step = best_a;
    u.coeffs += best_a * dir;
    normalize(u);
    parts = quotient_parts(u, p);
    const double qn = parts.num / parts.den;
    const bool stagnated = std::abs(q - qn) <= opts.tolerance * qn;
    q = qn;
    if (stagnated) {
      est.converged = true;
      break;
    }
  }
  est.value = q;
  return est;
}

Estimate estimate_lambda1(const SpacePtr<double>& space, double p) {
  const auto& dom = space->mesh().domain();
  if (dom.dim == 1) return Estimate{analytic_lambda1_1d(dom.width(), p), Provenance::analytic_1d, true, 0};
  auto est = discrete_rayleigh_lambda1(space, p);
  est.value *= 0.5;
  return est;
}

Estimate sobolev_constant(const Domaind& domain, double p, const SpacePtr<double>& space, int samples,
                          std::uint64_t seed) {
  if (!(domain.dim < p)) throw std::invalid_argument("sobolev_constant: needs N < p");
  if (domain.dim == 1) return Estimate{std::pow(domain.width() / 2, (p - 1) / p), Provenance::analytic_1d, true, 0};

  SpacePtr<double> sp = space;
  if (!sp) sp = make_space(refine(build_mesh(domain, 8)));
  const auto& mesh = sp->mesh();
  Rng rng(seed);
  auto uni = [&rng](double a, double b) { return rng.uniform(a, b); };
  const double lx = domain.x1 - domain.x0, ly = domain.y1 - domain.y0;
  const double pi = std::numbers::pi;

  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    FeFunctiond u(sp);
    const int kind = s % 3;
    double mode[3][3], cx = uni(domain.x0, domain.x1), cy = uni(domain.y0, domain.y1);
    const double radius = uni(0.05, 1.0) * std::hypot(lx, ly);
    for (auto& row : mode)
      for (double& m : row) m = uni(-1, 1);
    for (int i = 0; i < sp->size(); ++i) {
      const auto x = mesh.vertices().col(sp->dofs()[i]);
      const double sx = (x[0] - domain.x0) / lx, sy = (x[1] - domain.y0) / ly;
      double v = 0;
      if (kind == 0) {
        v = uni(-1, 1);
      } else if (kind == 1) {
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) v += mode[a][b] * std::sin((a + 1) * pi * sx) * std::sin((b + 1) * pi * sy);
      } else {
        v = std::max(0.0, 1 - std::hypot(x[0] - cx, x[1] - cy) / radius);
      }
      u.coeffs[i] = v;
    }
    const double g = grad_norm_lp(u, p);
    if (g > 0) worst = std::max(worst, sup_norm(u) / g);
  }
  return Estimate{2 * worst, Provenance::discrete_surrogate, true, samples};
}

double poincare_factor(double lambda1, double p, PoincareConvention convention) {
  return convention == PoincareConvention::standard ? std::pow(lambda1, -1 / p) : 1 / lambda1;
}

double CoercivityPolynomial::operator()(double t) const {
  return lead * std::pow(t, p) - q_coeff * std::pow(t, q) - alpha_coeff * std::pow(t, alpha) - constant;
}

CoercivityPolynomial coercivity_polynomial(const ProblemSpecd& spec, double lambda1, PoincareConvention convention) {
  const double omega = spec.domain.measure();
  const double a0 = spec.weight.a0;
  const auto& h3 = spec.convection.coercivity;
  const double pf = poincare_factor(lambda1, spec.p, convention);
  CoercivityPolynomial psi;
  psi.p = spec.p;
  psi.q = spec.q;
  psi.q_coeff = std::pow(omega, (spec.p - spec.q) / spec.p);
  psi.constant = h3.c1 * omega;
  if (spec.regime == Regime::H3) {
    psi.alpha = h3.alpha;
    psi.lead = a0 - h3.c0;
    psi.alpha_coeff = h3.c1 * std::pow(omega, (spec.p - h3.alpha) / spec.p) * std::pow(pf, h3.alpha);
  } else {
    // alpha = p folds into the leading coefficient
    psi.alpha = spec.p;
    psi.lead = a0 - h3.c0 - h3.c1 * std::pow(pf, spec.p);
    psi.alpha_coeff = 0;
  }
  return psi;
}

double largest_root(const CoercivityPolynomial& psi, double rel_tol) {
  if (!(psi.lead > 0)) throw std::domain_error("largest_root: leading coefficient must be positive");
  // psi(t)/t^p is increasing, so the sign changes once
  double hi = 1;
  while (!(psi(hi) > 0)) {
    hi *= 2;
    if (!std::isfinite(hi)) throw std::runtime_error("largest_root: no bracket");
  }
  double lo = hi / 2;
  if (hi == 1) {
    lo = 1;
    while (psi(lo) > 0 && lo > 1e-300) lo /= 2;
    if (psi(lo) > 0) return 0;
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (psi(mid) > 0 ? hi : lo) = mid;
  }
  return hi;
}

Radii apriori_radius(const ProblemSpecd& spec, double lambda1, double sobolev, PoincareConvention convention) {
  spec.validate();
  if (spec.regime == Regime::H3a) {
    const auto& h3 = spec.convection.coercivity;
    // c1 * pf^p < a0 - c0, written so the boundary case compares exactly
    const double exponent = convention == PoincareConvention::standard ? 1.0 : spec.p;
    const double threshold = (spec.weight.a0 - h3.c0) * std::pow(lambda1, exponent);
    if (!(h3.c1 < threshold))
      throw PreconditionError(std::string("(H3a) requires c_1/lambda_1^") +
                              (convention == PoincareConvention::standard ? "1" : "p") +
                              " < a_0 - c_0 (c_1 = " + std::to_string(h3.c1) +
                              ", bound = " + std::to_string(threshold) + ")");
  }
  const auto psi = coercivity_polynomial(spec, lambda1, convention);
  Radii r;
  r.R1 = largest_root(psi);
  r.R = sobolev * r.R1;
  return r;
}

double rhs_estimate_constant(const ProblemSpecd& spec, double lambda1, double sobolev, PoincareConvention convention) {
  const auto& h2 = spec.convection.growth;
  const double omega = spec.domain.measure();
  return std::max({sobolev * std::pow(omega, (h2.r1 - 1) / h2.r1), h2.b * sobolev,
                   h2.c * poincare_factor(lambda1, spec.p, convention)});
}

double sigma_norm(const ProblemSpecd& spec) {
  const auto& h2 = spec.convection.growth;
  return h2.sigma * std::pow(spec.domain.measure(), 1 / h2.r1);
}

const HypothesisCheck* HypothesisAudit::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

bool HypothesisAudit::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return !c.checked || c.pass; });
}

namespace {

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

constexpr double kAuditTolerance = 1e-9;

HypothesisCheck make_check(const std::string& name, bool checked) {
  HypothesisCheck c;
  c.name = name;
  c.checked = checked;
  return c;
}

void record(HypothesisCheck& check, double bound, double value, const std::vector<double>& point) {
  const double margin = (bound - value) / std::max({1.0, std::abs(bound), std::abs(value)});
  if (margin < check.worst_margin || check.worst_point.empty()) {
    check.worst_margin = margin;
    check.worst_point = point;
  }
}

}  // namespace

HypothesisAudit audit_hypotheses(const ProblemSpecd& spec, int samples, const SamplingBox& box) {
  if (samples < 1) throw std::invalid_argument("audit_hypotheses: samples must be >= 1");
  using Point = ConvectionFamily<double>::Point;
  const int d = spec.domain.dim;
  const auto& f = spec.convection;
  const double p = spec.p;

  HypothesisAudit audit;
  audit.samples = samples;
  audit.box = box;

  HypothesisCheck h1 = make_check("H1", true);
  for (int i = 0; i < samples; ++i) {
    const double t = -box.s_max + 2 * box.s_max * (samples == 1 ? 0.5 : double(i) / (samples - 1));
    record(h1, spec.weight(t), spec.weight.a0, {t});
  }

  HypothesisCheck h2 = make_check("H2", true), h3 = make_check(to_string(spec.regime), true),
                  h4 = make_check("H4", f.convergence.has_value());
  const double alpha = spec.coercivity_exponent();
  const int primes[] = {2, 3, 5, 7, 11};

  auto visit = [&](const Point& x, double s, const Point& xi) {
    const double val = f(x, s, xi);
    const double gn = xi.norm();
    std::vector<double> point(x.data(), x.data() + d);
    point.push_back(s);
    point.insert(point.end(), xi.data(), xi.data() + d);

    const auto& g2 = f.growth;
    record(h2, g2.sigma + g2.b * std::pow(std::abs(s), g2.r2) + g2.c * std::pow(gn, p - 1), std::abs(val), point);
    const auto& g3 = f.coercivity;
    record(h3, g3.c0 * std::pow(gn, p) + g3.c1 * (std::pow(std::abs(s), alpha) + 1), val * s, point);
    if (f.convergence) {
      const auto& g4 = *f.convergence;
      record(h4, g4.sigma + g4.c1 * std::pow(std::abs(s), g4.s_exponent) + g4.c2 * std::pow(gn, g4.xi_exponent),
             std::abs(val), point);
    }
  };

  for (int i = 1; i <= samples; ++i) {
    Point x(d), xi(d);
    x[0] = spec.domain.x0 + radical_inverse(i, primes[0]) * (spec.domain.x1 - spec.domain.x0);
    if (d == 2) x[1] = spec.domain.y0 + radical_inverse(i, primes[1]) * (spec.domain.y1 - spec.domain.y0);
    const double s = box.s_max * (2 * radical_inverse(i, primes[d]) - 1);
    if (d == 1) {
      xi[0] = box.xi_max * (2 * radical_inverse(i, primes[2]) - 1);
    } else {
      const double r = box.xi_max * std::sqrt(radical_inverse(i, primes[3]));
      const double th = 2 * std::numbers::pi * radical_inverse(i, primes[4]);
      xi << r * std::cos(th), r * std::sin(th);
    }
    visit(x, s, xi);
  }
  // extremes of the box
  for (double s : {-box.s_max, 0.0, box.s_max})
    for (double r : {0.0, box.xi_max}) {
      Point x(d), xi = Point::Zero(d);
      x[0] = 0.5 * (spec.domain.x0 + spec.domain.x1);
      if (d == 2) x[1] = 0.5 * (spec.domain.y0 + spec.domain.y1);
      xi[0] = r;
      visit(x, s, xi);
    }

  for (auto* c : {&h1, &h2, &h3, &h4}) c->pass = !c->checked || c->worst_margin >= -kAuditTolerance;
  if (f.convergence && !(f.convergence->xi_exponent < p - 1))
    h4.note = "gradient exponent p/r2' is not below p-1 (borderline r2 = p)";
  if (!f.convergence) h4.note = "no (H4) constants declared";
  audit.checks = {h1, h2, h3, h4};
  return audit;
}

EstimateReport compute_estimates(const ProblemSpecd& spec, const EstimateOptions& opts, const SpacePtr<double>& space) {
  spec.validate();
  EstimateReport rep;
  rep.regime = spec.regime;
  rep.convention = opts.convention;
  SpacePtr<double> sp = space;
  if (!sp) sp = spec.domain.dim == 1 ? make_space(build_mesh(spec.domain, 2))
                                     : make_space(refine(build_mesh(spec.domain, 8)));
  rep.lambda1 = estimate_lambda1(sp, spec.p);
  rep.sobolev = sobolev_constant(spec.domain, spec.p, spec.domain.dim == 2 ? sp : nullptr, opts.sobolev_samples,
                                 opts.seed);
  const auto radii = apriori_radius(spec, rep.lambda1.value, rep.sobolev.value, opts.convention);
  rep.radius_R1 = radii.R1;
  rep.radius_R = radii.R;
  rep.psi = coercivity_polynomial(spec, rep.lambda1.value, opts.convention);
  rep.rhs_constant = rhs_estimate_constant(spec, rep.lambda1.value, rep.sobolev.value, opts.convention);
  SamplingBox box;
  box.s_max = 10 * rep.radius_R;
  rep.audit = audit_hypotheses(spec, opts.audit_samples, box);
  return rep;
}

}  // namespace pqlap
