#include "hitlq/io.hpp"

#include "hitlq/errors.hpp"

#include <charconv>
#include <cstdint>
#include <iomanip>
#include <fstream>
#include <set>
#include <sstream>

namespace hitlq {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at '" + path + "': " + what);
}

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
}

double get_number(const json& obj, const std::string& path,
                  const std::string& key) {
  if (!obj.contains(key)) fail(path + "." + key, "missing required key");
  const auto& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double get_number_or(const json& obj, const std::string& path,
                     const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

long get_integer_or(const json& obj, const std::string& path,
                    const std::string& key, long fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<long>();
}

std::vector<double> get_array(const json& obj, const std::string& path,
                              const std::string& key) {
  if (!obj.contains(key)) fail(path + "." + key, "missing required key");
  const auto& v = obj.at(key);
  if (!v.is_array() || v.empty())
    fail(path + "." + key, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(path + "." + key, "expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    econ.validate();
    risk.validate();
    chain.validate();
    solver.validate(econ.n_servers);
    sim.validate();
    safety.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (risk.num_regimes() != chain.num_states())
    throw ConfigError(
        "config error: model.risk.cost_coeffs length must match the drift "
        "generator dimension");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  check_keys(j, "$",
             {"model", "solver", "simulation", "safety", "sweep"});
  if (!j.contains("model")) fail("$.model", "missing required section");

  const auto& model = j.at("model");
  check_keys(model, "model",
             {"arrival_rate", "n_servers", "service_rate", "escalation_fee",
              "holding_coeff", "risk", "drift"});
  cfg.econ.arrival_rate = get_number(model, "model", "arrival_rate");
  cfg.econ.n_servers =
      static_cast<int>(get_integer_or(model, "model", "n_servers", 0));
  if (!model.contains("n_servers")) fail("model.n_servers", "missing required key");
  cfg.econ.service_rate = get_number(model, "model", "service_rate");
  cfg.econ.escalation_fee = get_number(model, "model", "escalation_fee");
  cfg.econ.holding_coeff = get_number(model, "model", "holding_coeff");

  if (!model.contains("risk")) fail("model.risk", "missing required section");
  const auto& risk = model.at("risk");
  check_keys(risk, "model.risk",
             {"dist_alpha", "dist_beta", "cost_coeffs", "cost_exponent"});
  cfg.risk.dist_alpha = get_number(risk, "model.risk", "dist_alpha");
  cfg.risk.dist_beta = get_number(risk, "model.risk", "dist_beta");
  const auto coeffs = get_array(risk, "model.risk", "cost_coeffs");
  cfg.risk.cost_coeffs =
      Eigen::Map<const Vector>(coeffs.data(), coeffs.size());
  cfg.risk.cost_exponent = get_number(risk, "model.risk", "cost_exponent");

  if (!model.contains("drift")) fail("model.drift", "missing required section");
  const auto& drift = model.at("drift");
  check_keys(drift, "model.drift", {"generator"});
  if (!drift.contains("generator") || !drift.at("generator").is_array())
    fail("model.drift.generator", "expected an array of rows");
  const auto& rows = drift.at("generator");
  const int k = static_cast<int>(rows.size());
  cfg.chain.generator.resize(k, k);
  for (int i = 0; i < k; ++i) {
    if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != k)
      fail("model.drift.generator", "generator must be square");
    for (int c = 0; c < k; ++c) {
      if (!rows[i][c].is_number())
        fail("model.drift.generator", "expected numeric rates");
      cfg.chain.generator(i, c) = rows[i][c].get<double>();
    }
  }

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    check_keys(s, "solver",
               {"discount_rate", "queue_cap", "s_grid_size",
                "convergence_tol", "max_iterations"});
    cfg.solver.discount_rate =
        get_number_or(s, "solver", "discount_rate", cfg.solver.discount_rate);
    cfg.solver.queue_cap = static_cast<int>(
        get_integer_or(s, "solver", "queue_cap", cfg.solver.queue_cap));
    cfg.solver.s_grid_size = static_cast<int>(
        get_integer_or(s, "solver", "s_grid_size", cfg.solver.s_grid_size));
    cfg.solver.convergence_tol = get_number_or(s, "solver", "convergence_tol",
                                               cfg.solver.convergence_tol);
    cfg.solver.max_iterations = get_integer_or(s, "solver", "max_iterations",
                                               cfg.solver.max_iterations);
  }

  if (j.contains("simulation")) {
    const auto& s = j.at("simulation");
    check_keys(s, "simulation",
               {"horizon", "warmup", "seed", "n_replications",
                "severe_cutoff", "sample_interval"});
    cfg.sim.horizon = get_number_or(s, "simulation", "horizon", cfg.sim.horizon);
    cfg.sim.warmup = get_number_or(s, "simulation", "warmup", cfg.sim.warmup);
    cfg.sim.seed = static_cast<uint64_t>(get_integer_or(
        s, "simulation", "seed", static_cast<long>(cfg.sim.seed)));
    cfg.sim.n_replications = static_cast<int>(get_integer_or(
        s, "simulation", "n_replications", cfg.sim.n_replications));
    cfg.sim.severe_cutoff = get_number_or(s, "simulation", "severe_cutoff",
                                          cfg.sim.severe_cutoff);
    cfg.sim.sample_interval = get_number_or(s, "simulation", "sample_interval",
                                            cfg.sim.sample_interval);
  }

  if (j.contains("safety")) {
    const auto& s = j.at("safety");
    check_keys(s, "safety", {"epsilon"});
    cfg.safety.epsilon =
        get_number_or(s, "safety", "epsilon", cfg.safety.epsilon);
  }

  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, "sweep", {"lambda_grid", "drift_grid", "static_grid"});
    SweepConfig sweep;
    if (s.contains("lambda_grid"))
      sweep.lambda_grid = get_array(s, "sweep", "lambda_grid");
    if (s.contains("drift_grid"))
      sweep.drift_grid = get_array(s, "sweep", "drift_grid");
    if (s.contains("static_grid"))
      sweep.static_grid = get_array(s, "sweep", "static_grid");
    cfg.sweep = std::move(sweep);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " +
                      e.what());
  }
  return parse_config(j);
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  auto& model = j["model"];
  model["arrival_rate"] = cfg.econ.arrival_rate;
  model["n_servers"] = cfg.econ.n_servers;
  model["service_rate"] = cfg.econ.service_rate;
  model["escalation_fee"] = cfg.econ.escalation_fee;
  model["holding_coeff"] = cfg.econ.holding_coeff;
  auto& risk = model["risk"];
  risk["dist_alpha"] = cfg.risk.dist_alpha;
  risk["dist_beta"] = cfg.risk.dist_beta;
  risk["cost_coeffs"] = std::vector<double>(
      cfg.risk.cost_coeffs.data(),
      cfg.risk.cost_coeffs.data() + cfg.risk.cost_coeffs.size());
  risk["cost_exponent"] = cfg.risk.cost_exponent;
  auto gen = nlohmann::ordered_json::array();
  for (int i = 0; i < cfg.chain.num_states(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (int c = 0; c < cfg.chain.num_states(); ++c)
      row.push_back(cfg.chain.generator(i, c));
    gen.push_back(row);
  }
  model["drift"]["generator"] = gen;

  auto& solver = j["solver"];
  solver["discount_rate"] = cfg.solver.discount_rate;
  solver["queue_cap"] = cfg.solver.queue_cap;
  solver["s_grid_size"] = cfg.solver.s_grid_size;
  solver["convergence_tol"] = cfg.solver.convergence_tol;
  solver["max_iterations"] = cfg.solver.max_iterations;

  auto& sim = j["simulation"];
  sim["horizon"] = cfg.sim.horizon;
  sim["warmup"] = cfg.sim.warmup;
  sim["seed"] = cfg.sim.seed;
  sim["n_replications"] = cfg.sim.n_replications;
  sim["severe_cutoff"] = cfg.sim.severe_cutoff;
  sim["sample_interval"] = cfg.sim.sample_interval;

  j["safety"]["epsilon"] = cfg.safety.epsilon;

  if (cfg.sweep) {
    auto& sweep = j["sweep"];
    sweep["lambda_grid"] = cfg.sweep->lambda_grid;
    sweep["drift_grid"] = cfg.sweep->drift_grid;
    sweep["static_grid"] = cfg.sweep->static_grid;
  }
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_solution_csv(const std::filesystem::path& path,
                        const ValueTable& v, const ThresholdTable& t) {
  std::ofstream out(path);
  out << "q,theta,V,deltaV,T\n";
  for (int q = 0; q <= v.queue_cap(); ++q) {
    for (int theta = 0; theta < v.num_regimes(); ++theta) {
      out << q << "," << theta << "," << format_double(v.values(q, theta))
          << ",";
      if (q < v.queue_cap()) out << format_double(v.marginals(q, theta));
      out << ",";
      const double th = t.thresholds(q, theta);
      out << (th == kNever ? "never" : format_double(th)) << "\n";
    }
  }
}

SolutionData read_solution_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open solution file: " + path.string());
  std::string line;
  std::getline(in, line);  // header
  struct Row {
    int q, theta;
    double v, dv, t;
    bool has_dv;
  };
  std::vector<Row> rows;
  int max_q = 0, max_theta = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    Row r{};
    std::getline(ss, field, ',');
    r.q = std::stoi(field);
    std::getline(ss, field, ',');
    r.theta = std::stoi(field);
    std::getline(ss, field, ',');
    r.v = std::stod(field);
    std::getline(ss, field, ',');
    r.has_dv = !field.empty();
    r.dv = r.has_dv ? std::stod(field) : 0.0;
    std::getline(ss, field, ',');
    r.t = field == "never" ? kNever : std::stod(field);
    max_q = std::max(max_q, r.q);
    max_theta = std::max(max_theta, r.theta);
    rows.push_back(r);
  }
  SolutionData data;
  data.values.resize(max_q + 1, max_theta + 1);
  data.marginals.resize(max_q, max_theta + 1);
  data.thresholds.resize(max_q + 1, max_theta + 1);
  for (const auto& r : rows) {
    data.values(r.q, r.theta) = r.v;
    data.thresholds(r.q, r.theta) = r.t;
    if (r.has_dv) data.marginals(r.q, r.theta) = r.dv;
  }
  return data;
}

void write_manifest_json(const std::filesystem::path& path,
                         const ExperimentConfig& cfg, const ValueTable& v) {
  nlohmann::ordered_json j;
  j["config"] = config_to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  j["uniformization_rate"] = v.uniformization_rate;
  j["discrete_discount"] = v.discrete_discount;
  j["iterations"] = v.iterations_used;
  j["final_residual"] = v.final_residual;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_certification_json(const std::filesystem::path& path,
                              const CertReport& convexity,
                              const CertReport& congestion,
                              const DriftMonotonicityReport& drift) {
  nlohmann::ordered_json j;
  j["convexity"] = convexity.to_json();
  j["congestion_shedding"] = congestion.to_json();
  j["drift_monotonicity"] = drift.to_json();
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_metrics_csv(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, const ReplicationStats*>>&
        policies) {
  std::ofstream out(path);
  out << "policy,replication,avg_total_cost,avg_queue_length,"
         "severe_error_rate,escalation_fraction,mean_sojourn\n";
  for (const auto& [name, stats] : policies) {
    for (size_t r = 0; r < stats->reps.size(); ++r) {
      const auto& m = stats->reps[r];
      out << name << "," << r << "," << format_double(m.avg_total_cost)
          << "," << format_double(m.avg_queue_length) << ","
          << format_double(m.severe_error_rate) << ","
          << format_double(m.escalation_fraction) << ","
          << format_double(m.mean_sojourn) << "\n";
    }
  }
}

namespace {

nlohmann::ordered_json stats_json(const ReplicationStats& s) {
  nlohmann::ordered_json j;
  j["avg_total_cost"] = {{"mean", s.mean.avg_total_cost},
                         {"ci95", s.half_width.avg_total_cost}};
  j["avg_queue_length"] = {{"mean", s.mean.avg_queue_length},
                           {"ci95", s.half_width.avg_queue_length}};
  j["severe_error_rate"] = {{"mean", s.mean.severe_error_rate},
                            {"ci95", s.half_width.severe_error_rate}};
  j["escalation_fraction"] = {{"mean", s.mean.escalation_fraction},
                              {"ci95", s.half_width.escalation_fraction}};
  return j;
}

}  // namespace

void write_summary_json(const std::filesystem::path& path,
                        const PolicyComparison& cmp) {
  nlohmann::ordered_json j;
  j["static_threshold"] = cmp.static_threshold;
  j["policies"]["ST"] = stats_json(cmp.st);
  j["policies"]["DB"] = stats_json(cmp.db);
  j["policies"]["ODP"] = stats_json(cmp.odp);
  j["odp_vs_st_savings"] = cmp.savings;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_static_curve_csv(
    const std::filesystem::path& path,
    const std::vector<std::pair<double, double>>& curve) {
  std::ofstream out(path);
  out << "threshold,avg_total_cost\n";
  for (const auto& [t, c] : curve)
    out << format_double(t) << "," << format_double(c) << "\n";
}

void write_phase_csv(const std::filesystem::path& path,
                     const PhaseDiagram& pd) {
  std::ofstream out(path);
  out << "lambda,drift_multiplier,pi_H,Lambda_req,headroom,class\n";
  for (const auto& c : pd.cells) {
    out << format_double(c.lambda) << "," << format_double(c.drift_multiplier)
        << "," << format_double(c.pi_high) << ","
        << format_double(c.lambda_req) << "," << format_double(c.headroom)
        << "," << to_string(c.cls) << "\n";
  }
}

void write_boundary_json(const std::filesystem::path& path,
                         const PhaseDiagram& pd) {
  nlohmann::ordered_json j;
  auto pts = nlohmann::ordered_json::array();
  for (const auto& [lam, mult] : pd.boundary)
    pts.push_back({{"lambda", lam}, {"drift_multiplier", mult}});
  j["boundary"] = pts;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_agility_csv(const std::filesystem::path& path,
                       const std::vector<AgilityPoint>& curve) {
  std::ofstream out(path);
  out << "drift_multiplier,cost_st,cost_st_ci95,cost_odp,cost_odp_ci95,"
         "savings\n";
  for (const auto& p : curve) {
    out << format_double(p.drift_multiplier) << ","
        << format_double(p.cost_st) << "," << format_double(p.cost_st_hw)
        << "," << format_double(p.cost_odp) << ","
        << format_double(p.cost_odp_hw) << "," << format_double(p.savings)
        << "\n";
  }
}

}  // namespace hitlq
