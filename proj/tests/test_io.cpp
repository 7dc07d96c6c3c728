#include "hitlq/io.hpp"

#include "hitlq/errors.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace hitlq;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "model": {
      "arrival_rate": 10.0, "n_servers": 5, "service_rate": 1.5,
      "escalation_fee": 2.0, "holding_coeff": 0.5,
      "risk": {"dist_alpha": 2.0, "dist_beta": 5.0,
               "cost_coeffs": [50.0, 100.0], "cost_exponent": 2.0},
      "drift": {"generator": [[-0.05, 0.05], [0.2, -0.2]]}
    },
    "solver": {"queue_cap": 60, "s_grid_size": 256},
    "simulation": {"horizon": 100.0, "warmup": 10.0, "n_replications": 2},
    "safety": {"epsilon": 1.0}
  })");
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("hitlq_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("config parses the full section layout") {
  const ExperimentConfig cfg = parse_config(base_config());
  CHECK(cfg.econ.arrival_rate == 10.0);
  CHECK(cfg.econ.n_servers == 5);
  CHECK(cfg.risk.cost_coeffs[1] == 100.0);
  CHECK(cfg.chain.generator(1, 0) == 0.2);
  CHECK(cfg.solver.queue_cap == 60);
  CHECK(cfg.solver.discount_rate == 0.01);  // default survives
  CHECK(cfg.sim.n_replications == 2);
  CHECK_FALSE(cfg.sweep.has_value());
}

TEST_CASE("unknown keys are rejected with their path") {
  json j = base_config();
  j["model"]["risk"]["shape"] = 1.0;
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.risk.shape") !=
          std::string::npos);
  }
  j = base_config();
  j["typo_section"] = 1;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("invalid values surface as config errors naming the field") {
  json j = base_config();
  j["model"]["arrival_rate"] = -3.0;
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("arrival_rate") != std::string::npos);
  }
  j = base_config();
  j["model"]["risk"]["cost_coeffs"] = json::array({50.0, 100.0, 70.0});
  CHECK_THROWS_AS(parse_config(j), ConfigError);  // K mismatch vs generator
  j = base_config();
  j["model"].erase("service_rate");
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("config hash is stable and key-order independent") {
  const ExperimentConfig a = parse_config(base_config());
  json reordered;
  const json base = base_config();
  reordered["safety"] = base["safety"];
  reordered["simulation"] = base["simulation"];
  reordered["solver"] = base["solver"];
  reordered["model"] = base["model"];
  const ExperimentConfig b = parse_config(reordered);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);

  ExperimentConfig c = a;
  c.sim.seed = 999;
  CHECK(config_hash(c) != config_hash(a));
}

TEST_CASE("format_double round-trips exactly") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456.789, 2.5e17, 0.0}) {
    CHECK(std::stod(format_double(x)) == x);
    CHECK(std::stod(format_double(-x)) == -x);
  }
}

TEST_CASE("solution csv round-trips values, marginals and thresholds") {
  TempDir tmp;
  ValueTable v;
  v.values = Matrix(4, 2);
  v.values << 1.0, 2.0, 1.25, 2.5, 1.3, 2.9, 1.31, 3.0;
  v.marginals = Matrix(3, 2);
  for (int q = 0; q < 3; ++q)
    for (int t = 0; t < 2; ++t)
      v.marginals(q, t) = v.values(q + 1, t) - v.values(q, t);
  ThresholdTable t;
  t.thresholds = Matrix(4, 2);
  t.thresholds << 0.2, 0.15, 0.25, 0.17, 1.0, kNever, kNever, kNever;

  const auto path = tmp.path / "solution.csv";
  write_solution_csv(path, v, t);
  const SolutionData data = read_solution_csv(path);
  CHECK(data.values == v.values);
  CHECK(data.marginals == v.marginals);
  CHECK(data.thresholds == t.thresholds);
}

TEST_CASE("config echo round-trips through the parser") {
  const ExperimentConfig a = parse_config(base_config());
  const ExperimentConfig b = parse_config(json::parse(config_to_json(a).dump()));
  CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("load_config reports unreadable and malformed files") {
  TempDir tmp;
  CHECK_THROWS_AS((void)load_config(tmp.path / "missing.json"), ConfigError);
  const auto bad = tmp.path / "bad.json";
  {
    std::ofstream out(bad);
    out << "{ not json";
  }
  CHECK_THROWS_AS((void)load_config(bad), ConfigError);
}
