#pragma once

#include "hitlq/solver.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace hitlq {

struct Violation {
  int q = 0;
  int theta = 0;
  int theta2 = 0;   // second regime for cross-regime checks
  double gap = 0.0; // magnitude of the violation beyond slack
};

struct CertReport {
  std::string check;
  bool pass = true;
  double slack = 0.0;             // value-space slack absorbed
  std::vector<Violation> violations;
  std::vector<std::string> notes;

  nlohmann::ordered_json to_json() const;
};

// Second differences of V in q must be non-negative up to
// 10 * convergence_tol of fixed-point residual.
CertReport verify_convexity(const ValueTable& v, double convergence_tol);

// Thresholds non-decreasing in q for each regime, with the value-space
// slack propagated through the inversion derivative. kNever counts as
// +infinity.
CertReport verify_congestion_shedding(const ThresholdTable& t,
                                      const RiskLaw& law,
                                      double convergence_tol);

struct DriftMonotonicityReport {
  CertReport thresholds;              // part (b): T non-increasing in theta
  bool assumption_holds = true;       // part (a): immediate-risk dominance
  // Per regime pair (theta, theta'): measured inf_s cost gap and
  // sup_q marginal-value gap.
  struct PairGap {
    int theta_low, theta_high;
    double inf_cost_gap;
    double sup_marginal_gap;
    bool holds;
  };
  std::vector<PairGap> pair_gaps;

  nlohmann::ordered_json to_json() const;
};

DriftMonotonicityReport verify_drift_monotonicity(const ThresholdTable& t,
                                                  const ValueTable& v,
                                                  const RiskLaw& law,
                                                  double convergence_tol,
                                                  int s_grid = 101);

}  // namespace hitlq
