#pragma once

#include "hitlq/model.hpp"
#include "hitlq/risk_law.hpp"

#include <vector>

namespace hitlq {

struct SolverConfig {
  double discount_rate = 0.01;   // alpha, per minute
  int queue_cap = 500;           // Q_max
  int s_grid_size = 4096;        // quadrature cells for E_S
  double convergence_tol = 1e-8; // sup-norm residual threshold
  long max_iterations = 200000;

  void validate(int n_servers) const;
};

// Solved value function on the truncated grid. Rows index q = 0..Q_max,
// columns index the regime.
struct ValueTable {
  Matrix values;     // (Q_max+1) x K
  Matrix marginals;  // Q_max x K, marginals(q,t) = values(q+1,t) - values(q,t)
  double uniformization_rate = 0.0;  // Lambda
  double discrete_discount = 0.0;    // beta = Lambda / (Lambda + alpha)
  long iterations_used = 0;
  double final_residual = 0.0;
  std::vector<double> residual_trace;

  int queue_cap() const { return static_cast<int>(values.rows()) - 1; }
  int num_regimes() const { return static_cast<int>(values.cols()); }
};

// Optimal policy as a lookup table; entries in [0,1] or kNever. Row Q_max
// is kNever: at the truncation boundary escalation is unavailable.
struct ThresholdTable {
  Matrix thresholds;  // (Q_max+1) x K

  int queue_cap() const { return static_cast<int>(thresholds.rows()) - 1; }
  int num_regimes() const { return static_cast<int>(thresholds.cols()); }
};

// Tightest admissible uniformization rate: lambda + m*mu + max_i |q_ii|.
double uniformization_rate(const QueueEconomics& econ, const DriftChain& chain);

// One-sweep Bellman operator for the uniformized chain. apply() is a Jacobi
// sweep: it reads one table and writes a fresh one.
class BellmanOperator {
 public:
  BellmanOperator(const QueueEconomics& econ, const DriftChain& chain,
                  const RiskLaw& law, const SolverConfig& config);

  // E_S min{c_auto(S,theta) + v(q,theta), c_h + v(q+1,theta)}. At
  // q = queue_cap escalation is unavailable and the value is the forced
  // automation branch.
  double intervention_value(const Matrix& v, int q, int theta) const;

  Matrix apply(const Matrix& v) const;

  double rate() const { return lambda_rate_; }
  double discount() const { return beta_; }
  double alpha() const { return alpha_; }

 private:
  const RiskLaw& law_;
  QueueEconomics econ_;
  Matrix gen_;
  std::vector<double> exit_rates_;
  std::vector<double> full_moments_;
  int cap_;
  double lambda_rate_;  // Lambda
  double alpha_;
  double beta_;
};

// Value iteration from V0 = 0 to sup-norm residual <= convergence_tol.
// Throws NumericError on non-convergence, carrying the residual tail.
ValueTable value_iteration(const QueueEconomics& econ, const DriftChain& chain,
                           const RiskLaw& law, const SolverConfig& config);

// T(q,theta) = c_auto^{-1}(c_h + marginal | theta); kNever where the target
// exceeds c_auto(1,theta), and on the boundary row.
ThresholdTable extract_thresholds(const ValueTable& v,
                                  const QueueEconomics& econ,
                                  const RiskLaw& law);

}  // namespace hitlq
