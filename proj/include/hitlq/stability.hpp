#pragma once

#include "hitlq/model.hpp"
#include "hitlq/risk_law.hpp"

#include <utility>
#include <vector>

namespace hitlq {

struct SafetySpec {
  double epsilon = 1.0;  // per-task expected automated-error budget

  void validate() const;
};

enum class Stability { stable, unstable, boundary };

const char* to_string(Stability s);

// Largest threshold whose automated-error budget G(tau) =
// E[1{S < tau} c_auto(S, theta)] stays within epsilon; bisection to 1e-10.
double safety_threshold(int theta, const SafetySpec& spec, const RiskLaw& law);

// Non-discretionary human load lambda * P(S >= safety threshold).
double min_arrival_rate(int theta, double lambda, const RiskLaw& law,
                        const SafetySpec& spec);

// Stationary-weighted mandatory workload sum_theta pi_theta lambda_min.
double required_capacity(const DriftChain& chain, double lambda,
                         const RiskLaw& law, const SafetySpec& spec);

// Relative band default 1e-9: cells too close to the critical case are
// labeled boundary rather than guessed.
Stability classify_stability(double lambda_req, int m, double mu,
                             double band_rel = 1e-9);

struct PhaseCell {
  double lambda = 0;
  double drift_multiplier = 0;
  double pi_high = 0;      // stationary mass of the worst regime
  double lambda_req = 0;
  double headroom = 0;     // m*mu - lambda_req
  Stability cls = Stability::stable;
};

struct PhaseDiagram {
  std::vector<double> lambda_grid;
  std::vector<double> drift_grid;
  std::vector<PhaseCell> cells;  // lambda-major: cells[i*drift + j]
  // Critical arrival rate per drift multiplier, where headroom crosses
  // zero; only points inside the lambda grid range are emitted.
  std::vector<std::pair<double, double>> boundary;  // (lambda*, multiplier)

  const PhaseCell& at(int i_lambda, int j_drift) const {
    return cells[i_lambda * drift_grid.size() + j_drift];
  }
};

PhaseDiagram phase_diagram(const std::vector<double>& lambda_grid,
                           const std::vector<double>& drift_grid,
                           const QueueEconomics& econ, const DriftChain& chain,
                           const RiskLaw& law, const SafetySpec& spec);

}  // namespace hitlq
