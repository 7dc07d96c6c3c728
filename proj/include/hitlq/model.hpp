#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <vector>

namespace hitlq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Sentinel for "never escalate": the inversion target exceeds the cost of
// the riskiest possible task, so no score clears the bar.
inline constexpr double kNever = std::numeric_limits<double>::infinity();

// Regularized incomplete beta function I_x(a, b).
double beta_reg(double a, double b, double x);

// Beta(a, b) density at x.
double beta_density(double a, double b, double x);

// Risk-score distribution (Beta family) together with the per-regime
// power-law automation cost c_auto(s, theta) = a_theta * s^p.
struct RiskModel {
  double dist_alpha = 2.0;  // Beta shape a
  double dist_beta = 5.0;   // Beta shape b
  Vector cost_coeffs;       // a_theta, one per regime
  double cost_exponent = 2.0;  // p >= 1

  int num_regimes() const { return static_cast<int>(cost_coeffs.size()); }

  // Throws std::invalid_argument on structurally invalid parameters.
  // Monotonicity of cost_coeffs across regimes is a model assumption
  // checked by check_supermodularity(), not a construction-time error.
  void validate() const;

  // c_auto(s, theta). Throws std::domain_error for s outside [0,1] or an
  // unknown regime.
  double cost_auto(double s, int theta) const;

  // inf{s : c_auto(s, theta) >= target}, or kNever when even s = 1 falls
  // short. Throws std::domain_error for negative targets.
  double invert_cost_auto(double target, int theta) const;

  // Derivative of c_auto in s, used to propagate value-space slack into
  // threshold space.
  double cost_auto_slope(double s, int theta) const;

  // F_S(s). Throws std::domain_error outside [0,1].
  double risk_cdf(double s) const;

  // f_S(s) on [0,1].
  double risk_pdf(double s) const;

  // Inverse CDF, monotone in u; bisection plus Newton polish.
  double risk_quantile(double u) const;
};

// Finite CTMC over reliability regimes.
struct DriftChain {
  Matrix generator;  // K x K, rows sum to zero, off-diagonals >= 0

  int num_states() const { return static_cast<int>(generator.rows()); }
  double exit_rate(int theta) const { return -generator(theta, theta); }
  double max_exit_rate() const;

  // Throws std::invalid_argument on a malformed generator; irreducibility
  // is checked by stationary_distribution().
  void validate() const;
};

// Rescale the rates into worse regimes (entries above the diagonal) by
// `multiplier`, leaving recovery rates fixed; diagonals are rebuilt.
DriftChain scale_drift_intensity(const DriftChain& chain, double multiplier);

// Unique stationary distribution of an irreducible chain, by direct linear
// solve of the balance equations with one equation replaced by the
// normalization row. Throws std::invalid_argument naming the disconnected
// classes when the chain is reducible.
Vector stationary_distribution(const DriftChain& chain);

// Arrival/service/cost economics of the human review queue.
struct QueueEconomics {
  double arrival_rate = 10.0;   // lambda, tasks/minute
  int n_servers = 5;            // m
  double service_rate = 1.5;    // mu, tasks/minute per server
  double escalation_fee = 2.0;  // c_h
  double holding_coeff = 0.5;   // h(q) = coeff * q

  double capacity() const { return n_servers * service_rate; }
  double holding(double q) const { return holding_coeff * q; }
  double service_rate_at(int q) const {
    return std::min(q, n_servers) * service_rate;
  }

  void validate() const;
};

struct SupermodularityReport {
  bool pass = true;
  // First violating quadruple, populated when pass == false.
  double s_low = 0, s_high = 0;
  int theta_low = 0, theta_high = 0;
  double deficit = 0;  // amount by which increasing differences fail
  std::string summary() const;
};

// Checks the increasing-differences inequality for c_auto on a uniform
// s-grid across all regime pairs.
SupermodularityReport check_supermodularity(const RiskModel& model,
                                            int grid_size = 101);

}  // namespace hitlq
