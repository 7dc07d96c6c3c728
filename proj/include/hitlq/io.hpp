#pragma once

#include "hitlq/certify.hpp"
#include "hitlq/sim.hpp"
#include "hitlq/solver.hpp"
#include "hitlq/stability.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hitlq {

struct SweepConfig {
  std::vector<double> lambda_grid;
  std::vector<double> drift_grid;
  std::vector<double> static_grid;  // empty -> default 0.00..1.00 step 0.01
};

struct ExperimentConfig {
  QueueEconomics econ;
  DriftChain chain;
  RiskModel risk;
  SolverConfig solver;
  SimConfig sim;
  SafetySpec safety;
  std::optional<SweepConfig> sweep;

  void validate() const;
};

// Strict parse: unknown keys anywhere are ConfigErrors naming the key path.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const nlohmann::json& j);

// Canonical JSON echo of the effective configuration (used for manifests
// and run-directory hashing).
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

// FNV-1a hash of the canonical config dump, as 16 hex chars.
std::string config_hash(const ExperimentConfig& cfg);

// --- emitters ------------------------------------------------------------

// Columns: q, theta, V, deltaV, T. deltaV is empty on the boundary row and
// T is "never" where escalation is unavailable.
void write_solution_csv(const std::filesystem::path& path,
                        const ValueTable& v, const ThresholdTable& t);

struct SolutionData {
  Matrix values;
  Matrix marginals;
  Matrix thresholds;
};
SolutionData read_solution_csv(const std::filesystem::path& path);

void write_manifest_json(const std::filesystem::path& path,
                         const ExperimentConfig& cfg, const ValueTable& v);

void write_certification_json(const std::filesystem::path& path,
                              const CertReport& convexity,
                              const CertReport& congestion,
                              const DriftMonotonicityReport& drift);

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string,
                                                   const ReplicationStats*>>&
                           policies);

void write_summary_json(const std::filesystem::path& path,
                        const PolicyComparison& cmp);

void write_static_curve_csv(const std::filesystem::path& path,
                            const std::vector<std::pair<double, double>>&
                                curve);

void write_phase_csv(const std::filesystem::path& path,
                     const PhaseDiagram& pd);

void write_boundary_json(const std::filesystem::path& path,
                         const PhaseDiagram& pd);

void write_agility_csv(const std::filesystem::path& path,
                       const std::vector<AgilityPoint>& curve);

// Deterministic shortest-round-trip double formatting shared by all CSV
// emitters.
std::string format_double(double x);

}  // namespace hitlq
