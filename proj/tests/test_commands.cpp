#include "pqlap/commands.hpp"

#include <json.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace pqlap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("pqlap_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

CommandOptions options(const fs::path& dir, const std::string& config_text) {
  std::ofstream(dir / "config.json") << config_text;
  CommandOptions o;
  o.config_path = (dir / "config.json").string();
  o.out_dir = (dir / "out").string();
  fs::create_directories(o.out_dir);
  return o;
}

const char* kExample = R"({"problem": {"p": 3, "q": 2,
  "weight": {"name": "quadratic", "params": {"a": 1, "b": 1}},
  "convection": {"name": "paper_example", "params": {"alpha": 2, "h": 1, "forcing": 1}}},
  "mesh": {"levels": 5}})";

// enough levels for the (c) proxy to certify
std::string fine_example() {
  std::string s = kExample;
  s.replace(s.find("\"levels\": 5"), 11, "\"levels\": 12");
  return s;
}

}  // namespace

TEST_CASE("estimate on the minimal config") {
  const auto dir = scratch("estimate");
  auto o = options(dir, R"({"problem": {"p": 3, "q": 2}})");
  REQUIRE(cmd_estimate(o) == exit_ok);
  const auto j = nlohmann::json::parse(slurp(fs::path(o.out_dir) / "estimates.json"));
  CHECK(j["estimates"]["R1"].get<double>() == doctest::Approx(1).epsilon(1e-10));
  CHECK_FALSE(fs::exists(fs::path(o.out_dir) / ".pqlap.lock"));
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  std::ostringstream log;
  auto o = options(dir, R"({"problem": {"p": 3, "q": 2, "convection": {"name": "zero", "params": {"c0": 2}}}})");
  o.log = &log;
  CHECK(cmd_estimate(o) == exit_precondition);
  CHECK(log.str().find("(H3)") != std::string::npos);

  o = options(dir, "{\"problem\": ");
  CHECK(cmd_solve(o) == exit_parse);
  o = options(dir, R"({"problem": {"p": 3, "q": 2, "typo": 1}})");
  CHECK(cmd_estimate(o) == exit_parse);

  // the sampled audit catches a family whose declared constants are wrong
  o = options(dir, R"({"problem": {"p": 3, "q": 2, "convection": {"name": "adversarial"}}})");
  CHECK(cmd_solve(o) == exit_precondition);

  o = options(dir, R"({"problem": {"p": 3, "q": 2}, "mesh": {"levels": 3}})");
  CHECK(cmd_solve(o) == exit_ok);
  CHECK(cmd_verify(o) == exit_ok);

  CommandOptions missing = o;
  missing.report_path = (dir / "nowhere.json").string();
  CHECK(cmd_verify(missing) == exit_parse);
  fs::remove_all(dir);
}

TEST_CASE("non-convergence leaves a partial report") {
  const auto dir = scratch("partial");
  std::string cfg = kExample;
  cfg.insert(cfg.rfind('}'), R"(, "solver": {"max_iterations": 1, "continuation_steps": 1})");
  auto o = options(dir, cfg);
  CHECK(cmd_solve(o) == exit_solve);
  const auto j = nlohmann::json::parse(slurp(fs::path(o.out_dir) / "report.json"));
  CHECK_FALSE(j["hierarchy"]["completed"].get<bool>());
  CHECK(j["hierarchy"]["failed_level"].is_number());
  fs::remove_all(dir);
}

TEST_CASE("solve, verify and tamper") {
  const auto dir = scratch("solve");
  auto o = options(dir, fine_example());
  REQUIRE(cmd_solve(o) == exit_ok);
  const fs::path out(o.out_dir);
  for (const char* f : {"estimates.json", "report.json", "diagnostics.csv", "solution_L0.csv", "solution_L11.csv"})
    CHECK(fs::exists(out / f));
  const auto diag = slurp(out / "diagnostics.csv");
  CHECK(diag.rfind("level,grad_norm_p,sup_norm,cond_b_max,cond_c,cond_cprime\n", 0) == 0);
  CHECK(std::count(diag.begin(), diag.end(), '\n') == 13);

  REQUIRE(cmd_verify(o) == exit_ok);
  const auto j = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(j["verified"].get<bool>());
  CHECK(j["certificates"].size() > 10);

  // push one nodal value above R
  const double radius = j["hierarchy"]["truncation_radius"].get<double>();
  std::istringstream rows(slurp(out / "solution_L2.csv"));
  std::ostringstream edited;
  std::string line;
  int row = 0;
  while (std::getline(rows, line)) {
    if (row++ == 2) line = line.substr(0, line.rfind(',') + 1) + std::to_string(2 * radius);
    edited << line << '\n';
  }
  std::ofstream(out / "solution_L2.csv") << edited.str();
  CHECK(cmd_verify(o) == exit_certification);
  const auto k = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK_FALSE(k["verified"].get<bool>());
  fs::remove_all(dir);
}

TEST_CASE("deterministic reports and the output lock") {
  const auto dir = scratch("determinism");
  auto a = options(dir, kExample);
  auto b = a;
  b.out_dir = (dir / "out2").string();
  fs::create_directories(b.out_dir);
  REQUIRE(cmd_solve(a) == exit_ok);
  REQUIRE(cmd_solve(b) == exit_ok);
  for (const char* f : {"report.json", "estimates.json", "diagnostics.csv", "solution_L4.csv"})
    CHECK(slurp(fs::path(a.out_dir) / f) == slurp(fs::path(b.out_dir) / f));

  auto c = b;
  c.seed = 99;
  REQUIRE(cmd_solve(c) == exit_ok);
  CHECK(slurp(fs::path(a.out_dir) / "report.json") != slurp(fs::path(c.out_dir) / "report.json"));

  std::ofstream(fs::path(a.out_dir) / ".pqlap.lock") << "held";
  CHECK(cmd_solve(a) == exit_parse);
  fs::remove_all(dir);
}
