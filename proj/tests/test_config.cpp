#include "pqlap/config.hpp"

#include <doctest.h>

using namespace pqlap;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
  const auto cfg = parse_config(R"({"problem": {"p": 3, "q": 2}})");
  CHECK(cfg.spec.p == 3);
  CHECK(cfg.spec.q == 2);
  CHECK(cfg.spec.domain.dim == 1);
  CHECK(cfg.spec.variant == Variant::competing);
  CHECK(cfg.weight_name == "constant");
  CHECK(cfg.convection_name == "zero");
  CHECK(cfg.levels == 6);
  CHECK(cfg.base_cells == 2);
  CHECK(cfg.estimates.convention == PoincareConvention::standard);
  CHECK(cfg.write_solutions);
  CHECK(cfg.normalized.find("\"levels\":6") != std::string::npos);
  // canonical text is stable
  CHECK(parse_config(cfg.normalized).normalized == cfg.normalized);
}

TEST_CASE("full config") {
  const auto cfg = parse_config(R"({
    "problem": {"p": 2.5, "q": 1.5, "domain": {"dim": 2, "bounds": [0, 2, -1, 1]},
                "variant": "cooperative", "regime": "H3",
                "weight": {"name": "quadratic", "params": {"a": 2, "b": 0.5}},
                "convection": {"name": "paper_example", "params": {"alpha": 1.5, "h": 0.25, "forcing": 1}}},
    "mesh": {"base_cells": 3, "levels": 4},
    "solver": {"tolerance": 1e-9, "max_iterations": 50, "continuation_steps": 4, "epsilon": 1e-8, "guard_samples": 8},
    "estimates": {"poincare_convention": "paper", "sobolev_samples": 10, "audit_samples": 100, "seed": 42},
    "output": {"solutions": false, "diagnostics": true}})");
  CHECK(cfg.spec.domain.dim == 2);
  CHECK(cfg.spec.domain.measure() == doctest::Approx(4));
  CHECK(cfg.spec.variant == Variant::cooperative);
  CHECK(cfg.spec.weight.a0 == 2);
  CHECK(cfg.base_cells == 3);
  CHECK(cfg.solver.max_iterations == 50);
  CHECK(cfg.spec.epsilon == 1e-8);
  CHECK(cfg.estimates.convention == PoincareConvention::paper);
  CHECK(cfg.seed == 42);
  CHECK(cfg.solver.seed == 42);
  CHECK(cfg.estimates.seed == 42);
  CHECK_FALSE(cfg.write_solutions);
}

TEST_CASE("syntax and schema errors") {
  const auto bad_json = message_of("{\n  \"problem\": {\"p\": 3,, }\n}");
  CHECK(bad_json.find("line 2") != std::string::npos);
  CHECK_THROWS_AS(parse_config("{\"problem\": {\"p\": 3, \"q\": 2}, \"extra\": 1}"), ConfigError);
  CHECK(message_of(R"({"problem": {"p": 3, "q": 2, "k": 1}})").find("problem.k") != std::string::npos);
  CHECK(message_of(R"({"problem": {"p": 3}})").find("problem.q") != std::string::npos);
  CHECK(message_of(R"({"problem": {"p": "3", "q": 2}})").find("expected a number") != std::string::npos);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"p": 3, "q": 2, "variant": "both"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"p": 3, "q": 2}, "mesh": {"levels": 40}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"p": 3, "q": 2}, "mesh": {"base_cells": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"p": 3, "q": 2, "weight": {"name": "constant", "params": {"b": 1}}}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"p": 2, "q": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"p": 3, "q": 2, "domain": {"bounds": [1, 0]}}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"problem": {"p": 3, "q": 2}, "estimates": {"seed": -1}})"), ConfigError);
}

TEST_CASE("hypothesis violations are preconditions, not parse errors") {
  const auto text =
      R"({"problem": {"p": 3, "q": 2, "weight": {"name": "constant", "params": {"value": 1}},
                      "convection": {"name": "zero", "params": {"c0": 1}}}})";
  CHECK_THROWS_AS(parse_config(text), PreconditionError);
  CHECK(message_of(text).find("(H3)") != std::string::npos);
}

TEST_CASE("missing file") { CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError); }
