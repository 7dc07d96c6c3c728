#pragma once

#include "hitlq/solver.hpp"
#include "hitlq/stability.hpp"

#include <cstdint>
#include <vector>

namespace hitlq {

// Small splittable PRNG (splitmix64). Every stochastic input of a
// replication comes from its own stream, so the draws are identical no
// matter which policy consumes them.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  uint64_t next_u64();
  double uniform();               // in (0,1)
  double exponential(double rate);

  // Decorrelated substream seed for (seed, replication, stream id).
  static uint64_t substream(uint64_t seed, uint64_t replication,
                            uint64_t stream);

 private:
  uint64_t state_;
};

enum class PolicyKind { optimal, static_threshold, drift_blind, fixed_safety };

struct EscalationPolicy {
  PolicyKind kind = PolicyKind::static_threshold;
  Matrix table;          // optimal: (Q_max+1) x K
  double fixed = 1.0;    // static threshold
  Vector per_q;          // drift-blind
  Vector per_theta;      // fixed-safety

  // Threshold applied in state (q, theta); beyond tabulated queue lengths
  // the truncation boundary rule applies (never escalate).
  double threshold(int q, int theta) const;

  static EscalationPolicy static_policy(double t);
  static EscalationPolicy optimal_policy(const ThresholdTable& t);
  static EscalationPolicy drift_blind_policy(Vector per_q);
  static EscalationPolicy fixed_safety_policy(Vector per_theta);
  const char* name() const;
};

struct SimConfig {
  double horizon = 10000.0;  // minutes
  double warmup = 1000.0;    // minutes discarded from metrics
  uint64_t seed = 1;
  int n_replications = 30;
  // Severe-error cutoff. Negative means "use the per-regime safety
  // threshold at the configured epsilon".
  double severe_cutoff = -1.0;
  // When > 0, the queue length is sampled at this interval for
  // growth-rate diagnostics.
  double sample_interval = 0.0;

  void validate() const;
};

struct SimMetrics {
  double avg_total_cost = 0;    // per minute over [warmup, horizon]
  double avg_queue_length = 0;
  double severe_error_rate = 0; // fraction of all tasks
  double escalation_fraction = 0;
  double mean_sojourn = 0;      // of tasks completing inside the window

  Vector regime_time_share;     // per regime, over the window
  Vector regime_cost;           // decision+holding cost rate while in regime
  Vector regime_queue;          // time-average queue while in regime
  Vector regime_escalation;     // escalated fraction of arrivals in regime

  // Full-horizon event counts (conservation diagnostics).
  long arrivals = 0, escalations = 0, automations = 0, completions = 0;
  long final_queue = 0;
  long window_arrivals = 0, window_escalations = 0;

  std::vector<double> queue_samples;  // at sample_interval, when enabled
};

struct ReplicationStats {
  std::vector<SimMetrics> reps;
  SimMetrics mean;
  SimMetrics half_width;  // normal-approximation 95% CI half-widths
};

// Policy-independent stochastic inputs of one replication.
struct Task {
  double time;
  double score;
  double work;  // exponential(1) service requirement
};

struct DriftPath {
  std::vector<double> times;  // times[0] = 0
  std::vector<int> states;
};

struct ScenarioDraw {
  std::vector<Task> tasks;
  DriftPath drift;
};

ScenarioDraw draw_scenario(const QueueEconomics& econ, const DriftChain& chain,
                           const RiskModel& model, const SimConfig& config,
                           int replication);

// Per-regime severe-error cutoffs per the SimConfig rule.
Vector severe_cutoffs(const SimConfig& config, const SafetySpec& safety,
                      const RiskLaw& law);

// Deterministic next-event simulation of one replication on fixed inputs.
SimMetrics simulate_replication(const EscalationPolicy& policy,
                                const QueueEconomics& econ,
                                const RiskModel& model,
                                const SimConfig& config,
                                const Vector& severe_cut,
                                const ScenarioDraw& draw);

// n_replications runs, each on its own scenario draw.
ReplicationStats simulate(const EscalationPolicy& policy,
                          const QueueEconomics& econ, const DriftChain& chain,
                          const RiskModel& model, const SimConfig& config,
                          const Vector& severe_cut, int threads = 1);

// Independently coded cross-check: simulates the uniformized chain on a
// rate-Lambda event grid with categorical event draws. Used to validate
// the event-driven simulator distributionally.
SimMetrics simulate_uniformized_replication(const EscalationPolicy& policy,
                                            const QueueEconomics& econ,
                                            const DriftChain& chain,
                                            const RiskModel& model,
                                            const SimConfig& config,
                                            int replication);

ReplicationStats simulate_uniformized(const EscalationPolicy& policy,
                                      const QueueEconomics& econ,
                                      const DriftChain& chain,
                                      const RiskModel& model,
                                      const SimConfig& config);

ReplicationStats aggregate(std::vector<SimMetrics> reps);

struct StaticSearchResult {
  double best_threshold = 1.0;
  ReplicationStats best;
  std::vector<std::pair<double, double>> cost_curve;  // (T, mean cost)
};

// Simulates every candidate on common random numbers; ties broken toward
// the larger threshold.
StaticSearchResult grid_search_static(const QueueEconomics& econ,
                                      const DriftChain& chain,
                                      const RiskModel& model,
                                      const SimConfig& config,
                                      const Vector& severe_cut,
                                      const std::vector<double>& grid,
                                      int threads = 1);

std::vector<double> default_static_grid();  // 0.00 .. 1.00 step 0.01

// Single-regime re-solve with the stationary-averaged cost coefficient.
struct DriftBlindPolicy {
  Vector per_q;
  double averaged_coeff = 0;
};

DriftBlindPolicy build_drift_blind(const QueueEconomics& econ,
                                   const DriftChain& chain,
                                   const RiskModel& model,
                                   const SolverConfig& solver);

struct PolicyComparison {
  double static_threshold = 1.0;
  std::vector<std::pair<double, double>> static_curve;
  ReplicationStats st, db, odp;
  ThresholdTable odp_table;
  Vector db_per_q;
  double savings = 0;  // (cost_ST - cost_ODP) / cost_ST
};

// When a previously solved threshold table is supplied the value-iteration
// step is skipped.
PolicyComparison compare_policies(const QueueEconomics& econ,
                                  const DriftChain& chain,
                                  const RiskModel& model,
                                  const SolverConfig& solver,
                                  const SimConfig& sim,
                                  const SafetySpec& safety, int threads = 1,
                                  const ThresholdTable* solved_odp = nullptr);

// Least-squares slope of equally spaced samples, restricted to the tail
// starting at fraction `tail_start` of the series.
double linear_slope(const std::vector<double>& samples, double dt,
                    double tail_start = 0.5);

struct AgilityPoint {
  double drift_multiplier = 0;
  double cost_st = 0, cost_st_hw = 0;
  double cost_odp = 0, cost_odp_hw = 0;
  double savings = 0;
};

std::vector<AgilityPoint> value_of_agility_sweep(
    const std::vector<double>& drift_grid, const QueueEconomics& econ,
    const DriftChain& chain, const RiskModel& model,
    const SolverConfig& solver, const SimConfig& sim,
    const SafetySpec& safety, int threads = 1);

}  // namespace hitlq
