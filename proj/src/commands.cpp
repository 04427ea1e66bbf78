#include "pqlap/commands.hpp"

#include "pqlap/config.hpp"
#include "pqlap/verify.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pqlap {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exclusive marker file in the output directory for the lifetime of a command.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".pqlap.lock") {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw IoError("output directory '" + dir.string() + "' is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

void say(const CommandOptions& opts, const std::string& line) {
  if (opts.log) *opts.log << line << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

RunConfig configure(const CommandOptions& opts) {
  RunConfig cfg = load_config(opts.config_path);
  if (opts.seed) {
    cfg.set_seed(*opts.seed);
    auto norm = json::parse(cfg.normalized);
    norm["estimates"]["seed"] = *opts.seed;
    cfg.normalized = norm.dump();
  }
  return cfg;
}

json estimate_json(const Estimate& e) {
  return {{"value", e.value}, {"provenance", to_string(e.provenance)}, {"converged", e.converged},
          {"iterations", e.iterations}};
}

json estimates_json(const EstimateReport& rep, const ProblemSpecd& spec) {
  json checks = json::array();
  for (const auto& c : rep.audit.checks)
    checks.push_back({{"name", c.name},
                      {"checked", c.checked},
                      {"pass", c.pass},
                      {"worst_margin", c.worst_margin},
                      {"worst_point", c.worst_point},
                      {"note", c.note}});
  return {{"lambda1", estimate_json(rep.lambda1)},
          {"sobolev_constant", estimate_json(rep.sobolev)},
          {"poincare_convention", to_string(rep.convention)},
          {"poincare_factor", poincare_factor(rep.lambda1.value, spec.p, rep.convention)},
          {"regime", to_string(rep.regime)},
          {"R1", rep.radius_R1},
          {"R", rep.radius_R},
          {"rhs_constant", rep.rhs_constant},
          {"sigma_norm", sigma_norm(spec)},
          {"psi",
           {{"lead", rep.psi.lead},
            {"q_coeff", rep.psi.q_coeff},
            {"alpha", rep.psi.alpha},
            {"alpha_coeff", rep.psi.alpha_coeff},
            {"constant", rep.psi.constant}}},
          {"audit",
           {{"samples", rep.audit.samples},
            {"s_max", rep.audit.box.s_max},
            {"xi_max", rep.audit.box.xi_max},
            {"all_pass", rep.audit.all_pass()},
            {"checks", checks}}}};
}

// The sampled audit failing means the declared constants do not hold.
std::string audit_failure(const EstimateReport& rep) {
  std::string failed;
  for (const auto& c : rep.audit.checks)
    if (c.checked && !c.pass) failed += (failed.empty() ? "(" : ", (") + c.name + ")";
  return failed;
}

json tables_json(const ConditionTables& t) {
  return {{"label", "proxy: the finest-level solution stands in for the weak limit u"},
          {"test_names", t.test_names},
          {"b", t.b},
          {"b_bound", t.b_bound},
          {"c", t.c},
          {"identity", t.identity},
          {"bookkeeping", t.bookkeeping},
          {"bookkeeping_bound", t.bookkeeping_bound},
          {"principal", t.principal},
          {"convection", t.convection},
          {"contraction", t.contraction},
          {"grad_norm_p", t.grad_norm},
          {"sup_norm", t.sup_norm},
          {"residual_scale", t.residual_scale}};
}

json certificates_json(const std::vector<Certificate>& certs) {
  json out = json::array();
  for (const auto& c : certs)
    out.push_back({{"name", c.name},
                   {"anchor", c.anchor},
                   {"pass", c.pass},
                   {"skipped", c.skipped},
                   {"measured", c.measured},
                   {"threshold", c.threshold},
                   {"note", c.note},
                   {"artifacts", c.artifacts}});
  return out;
}

std::string solution_name(int level) { return "solution_L" + std::to_string(level) + ".csv"; }

std::string diagnostics_csv(const ConditionTables& t) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "level,grad_norm_p,sup_norm,cond_b_max,cond_c,cond_cprime\n";
  for (std::size_t n = 0; n < t.c.size(); ++n) {
    double bmax = 0;
    for (double v : t.b[n]) bmax = std::max(bmax, std::abs(v));
    os << n << ',' << t.grad_norm[n] << ',' << t.sup_norm[n] << ',' << bmax << ',' << t.c[n] << ','
       << t.principal[n] << '\n';
  }
  return os.str();
}

// Runs a command body and maps exceptions onto the exit-code contract.
template <typename Body>
int guarded(const CommandOptions& opts, const char* name, int fallback, Body body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    say(opts, std::string(name) + ": config error: " + e.what());
    return exit_parse;
  } catch (const IoError& e) {
    say(opts, std::string(name) + ": " + e.what());
    return exit_parse;
  } catch (const json::exception& e) {
    say(opts, std::string(name) + ": report error: " + e.what());
    return exit_parse;
  } catch (const PreconditionError& e) {
    say(opts, std::string(name) + ": precondition failed: " + e.what());
    return exit_precondition;
  } catch (const std::exception& e) {
    say(opts, std::string(name) + ": " + e.what());
    return fallback;
  }
}

}  // namespace

int cmd_estimate(const CommandOptions& opts) {
  return guarded(opts, "estimate", exit_precondition, [&] {
    const RunConfig cfg = configure(opts);
    OutputLock lock(opts.out_dir);
    const auto rep = compute_estimates(cfg.spec, cfg.estimates);
    json out = {{"command", "estimate"}, {"config", json::parse(cfg.normalized)},
                {"estimates", estimates_json(rep, cfg.spec)}};
    write_json(fs::path(opts.out_dir) / "estimates.json", out);
    say(opts, "estimate: R1 = " + std::to_string(rep.radius_R1) + ", R = " + std::to_string(rep.radius_R));
    const auto failed = audit_failure(rep);
    if (!failed.empty()) {
      say(opts, "estimate: sampled audit violates " + failed);
      return int(exit_precondition);
    }
    return int(exit_ok);
  });
}

int cmd_solve(const CommandOptions& opts) {
  return guarded(opts, "solve", exit_solve, [&] {
    const RunConfig cfg = configure(opts);
    OutputLock lock(opts.out_dir);
    const fs::path out_dir(opts.out_dir);
    const auto est = compute_estimates(cfg.spec, cfg.estimates);
    const json est_json = estimates_json(est, cfg.spec);
    write_json(out_dir / "estimates.json",
               {{"command", "estimate"}, {"config", json::parse(cfg.normalized)}, {"estimates", est_json}});
    const auto failed_audit = audit_failure(est);
    if (!failed_audit.empty()) {
      say(opts, "solve: sampled audit violates " + failed_audit);
      return int(exit_precondition);
    }

    HierarchyOptions ho;
    ho.base_cells = cfg.base_cells;
    ho.levels = cfg.levels;
    ho.truncation_radius = est.radius_R;
    ho.guard_radius = est.radius_R1;
    ho.solver = cfg.solver;
    const auto rep = run_hierarchy(cfg.spec, ho);

    json levels = json::array();
    for (const auto& l : rep.levels) {
      const std::string file = l.converged && cfg.write_solutions ? solution_name(l.level) : "";
      if (!file.empty()) {
        std::ostringstream os;
        write_csv(l.u, os);
        write_text(out_dir / file, os.str());
      }
      levels.push_back({{"level", l.level},
                        {"dofs", l.u.space->size()},
                        {"path", to_string(l.path)},
                        {"iterations", l.iterations},
                        {"residual_sup", l.residual_sup},
                        {"converged", l.converged},
                        {"within_guard", l.within_guard},
                        {"grad_norm_p", grad_norm_lp(l.u, cfg.spec.p)},
                        {"sup_norm", sup_norm(l.u)},
                        {"guard",
                         {{"radius", l.guard.radius},
                          {"initial_radius", l.guard.initial_radius},
                          {"min_pairing", l.guard.min_pairing},
                          {"samples", l.guard.samples},
                          {"doublings", l.guard.doublings},
                          {"pass", l.guard.pass}}},
                        {"message", l.message},
                        {"solution_file", file.empty() ? json(nullptr) : json(file)}});
    }
    json tests = json::array();
    for (const auto& v : rep.test_set) tests.push_back(std::vector<double>(v.coeffs.data(), v.coeffs.data() + v.coeffs.size()));
    const auto probe = condition_S_probe(rep);
    json hierarchy = {{"completed", rep.completed},
                      {"failed_level", rep.failed_level < 0 ? json(nullptr) : json(rep.failed_level)},
                      {"message", rep.message},
                      {"tolerance", rep.tolerance},
                      {"truncation_radius", rep.truncation_radius},
                      {"guard_radius", rep.guard_radius},
                      {"random_tests", ho.random_tests},
                      {"levels", levels},
                      {"test_coefficients", tests},
                      {"tables", tables_json(rep.tables)},
                      {"eta",
                       {{"sup_norm", rep.eta.values.size() ? rep.eta.sup_norm() : 0.0},
                        {"l1_norm", rep.eta.values.size() ? rep.eta.values.lpNorm<1>() : 0.0}}},
                      {"condition_S_probe",
                       {{"classification", probe.classification},
                        {"pairings_vanish", probe.pairings_vanish},
                        {"gradients_contract", probe.gradients_contract},
                        {"monotone_contraction", probe.monotone}}}};
    json report = {{"command", "solve"},
                   {"config", json::parse(cfg.normalized)},
                   {"estimates", est_json},
                   {"hierarchy", hierarchy}};
    write_json(out_dir / "report.json", report);
    if (cfg.write_diagnostics) write_text(out_dir / "diagnostics.csv", diagnostics_csv(rep.tables));

    if (!rep.completed) {
      say(opts, "solve: " + rep.message);
      return int(exit_solve);
    }
    say(opts, "solve: " + std::to_string(rep.levels.size()) + " levels, ||grad u_N||_p = " +
                  std::to_string(rep.tables.grad_norm.back()) + ", " + probe.classification);
    return int(exit_ok);
  });
}

namespace {

double max_diff(const json& stored, const std::vector<double>& fresh) {
  if (!stored.is_array() || stored.size() != fresh.size()) return std::numeric_limits<double>::infinity();
  double d = 0;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    if (!stored[i].is_number()) return std::numeric_limits<double>::infinity();
    d = std::max(d, std::abs(stored[i].get<double>() - fresh[i]));
  }
  return d;
}

}  // namespace

int cmd_verify(const CommandOptions& opts) {
  return guarded(opts, "verify", exit_certification, [&] {
    const fs::path out_dir(opts.out_dir);
    const fs::path report_path = opts.report_path.empty() ? out_dir / "report.json" : fs::path(opts.report_path);
    if (!fs::exists(report_path)) throw IoError("report not found: " + report_path.string());
    const RunConfig cfg = configure(opts);
    OutputLock lock(out_dir);

    json report;
    {
      std::ifstream is(report_path);
      if (!is) throw IoError("cannot read " + report_path.string());
      report = json::parse(is);
    }
    const json& h = report.at("hierarchy");
    const double tol = h.at("tolerance").get<double>();
    const double radius = h.at("truncation_radius").get<double>();
    const double guard = h.at("guard_radius").get<double>();

    GeneralizedSolutionReport rep;
    rep.tolerance = tol;
    rep.truncation_radius = radius;
    rep.guard_radius = guard;
    rep.completed = h.at("completed").get<bool>();
    for (const auto& m : build_hierarchy(cfg.spec.domain, cfg.base_cells, cfg.levels)) rep.spaces.push_back(make_space(m));
    const auto op = hierarchy_operator(cfg.spec, rep.spaces.back(), radius, guard);

    std::vector<FeFunctiond> solved;
    double residual_gap = 0;
    for (const auto& l : h.at("levels")) {
      if (l.at("solution_file").is_null()) continue;
      const int n = l.at("level").get<int>();
      if (n < 0 || n >= cfg.levels) throw IoError("report level " + std::to_string(n) + " is outside the configured mesh");
      LevelSolve ls;
      ls.level = n;
      ls.u = read_csv(rep.spaces[n], (out_dir / l.at("solution_file").get<std::string>()).string());
      ls.residual_sup = op.residual(ls.u).sup_norm();
      ls.converged = l.at("converged").get<bool>() && ls.residual_sup <= tol;
      residual_gap = std::max(residual_gap, std::abs(ls.residual_sup - l.at("residual_sup").get<double>()));
      rep.levels.push_back(ls);
      solved.push_back(ls.u);
    }
    if (solved.size() != h.at("levels").size()) rep.completed = false;

    std::vector<std::string> names;
    rep.test_set = make_test_set(rep.spaces.front(), h.at("random_tests").get<int>(), cfg.seed, &names);
    rep.tables = evaluate_conditions(op, solved, rep.test_set, names, tol);

    // every stored number must be reproduced from the CSVs alone
    const json& st = h.at("tables");
    const auto& t = rep.tables;
    double gap = residual_gap;
    const std::pair<const char*, const std::vector<double>*> columns[] = {
        {"c", &t.c},           {"identity", &t.identity},     {"bookkeeping", &t.bookkeeping},
        {"principal", &t.principal}, {"convection", &t.convection}, {"contraction", &t.contraction},
        {"grad_norm_p", &t.grad_norm}, {"sup_norm", &t.sup_norm}};
    for (const auto& [key, fresh] : columns) gap = std::max(gap, max_diff(st.at(key), *fresh));
    if (st.at("b").size() != t.b.size()) gap = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < std::min(st.at("b").size(), t.b.size()); ++n) gap = std::max(gap, max_diff(st.at("b")[n], t.b[n]));
    std::size_t k = 0;
    for (const auto& coeffs : h.at("test_coefficients")) {
      if (k >= rep.test_set.size()) {
        gap = std::numeric_limits<double>::infinity();
        break;
      }
      const auto& c = rep.test_set[k++].coeffs;
      gap = std::max(gap, max_diff(coeffs, std::vector<double>(c.data(), c.data() + c.size())));
    }

    std::vector<Certificate> certs;
    Certificate recompute;
    recompute.name = "recomputation";
    recompute.anchor = "all recorded pairings recomputable from the stored solutions";
    recompute.measured = gap;
    recompute.threshold = 1e-10;
    recompute.pass = gap <= recompute.threshold;
    certs.push_back(recompute);

    const auto est = compute_estimates(cfg.spec, cfg.estimates);
    Certificate radii;
    radii.name = "estimate_consistency";
    radii.anchor = "stored R1 and R match a fresh computation";
    radii.measured = std::max(std::abs(est.radius_R1 - guard), std::abs(est.radius_R - radius));
    radii.threshold = 1e-12 * std::max(1.0, est.radius_R1);
    radii.pass = radii.measured <= radii.threshold;
    certs.push_back(radii);

    for (auto& c : verify_report(rep, cfg.spec)) certs.push_back(std::move(c));
    if (cfg.spec.p >= 2) {
      const auto& space = rep.spaces[std::min<std::size_t>(2, rep.spaces.size() - 1)];
      certs.push_back(check_monotonicity_inequalities(cfg.spec.p, cfg.spec.q, space, 200, cfg.seed));
    }
    if (!solved.empty())
      certs.push_back(weak_implies_generalized_demo(cfg.spec, truncate_weight(cfg.spec.weight, radius), solved.back(),
                                                    tol, rep.spaces.back()));

    report["certificates"] = certificates_json(certs);
    report["verified"] = all_pass(certs);
    write_json(report_path, report);

    int failed = 0;
    for (const auto& c : certs)
      if (!c.skipped && !c.pass) {
        ++failed;
        say(opts, "verify: FAIL " + c.name + " (measured " + std::to_string(c.measured) + ", threshold " +
                      std::to_string(c.threshold) + ")" + (c.note.empty() ? "" : ": " + c.note));
      }
    say(opts, "verify: " + std::to_string(certs.size() - failed) + "/" + std::to_string(certs.size()) +
                  " certificates pass");
    return int(failed ? exit_certification : exit_ok);
  });
}

}  // namespace pqlap
