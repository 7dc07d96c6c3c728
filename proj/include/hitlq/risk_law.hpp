#pragma once

#include "hitlq/model.hpp"

#include <memory>
#include <vector>

namespace hitlq {

// Expectation primitives over the score distribution needed by the Bellman
// operator and the safety analysis. Tasks with score exactly at the cutoff
// are escalated, so all probabilities/moments are over {S < t}.
class RiskLaw {
 public:
  virtual ~RiskLaw() = default;
  virtual int num_regimes() const = 0;
  // P(S < t).
  virtual double prob_below(double t) const = 0;
  // E[c_auto(S, theta) 1{S < t}].
  virtual double partial_cost_moment(double t, int theta) const = 0;
  // E[c_auto(S, theta)].
  virtual double full_cost_moment(int theta) const = 0;
  virtual double cost(double s, int theta) const = 0;
  // inf{s : cost(s, theta) >= target}, kNever when unattainable.
  virtual double invert(double target, int theta) const = 0;
  virtual double cost_slope(double s, int theta) const = 0;
};

// Beta-distributed scores with power-law costs. The partial cost moment is
// a composite-midpoint quadrature: n_cells uniform panels over [0,1] plus a
// split panel ending exactly at the cutoff, so the kink never sits inside a
// panel. The cumulative panel sums are precomputed, making each evaluation
// O(1); the CDF at the cutoff uses the exact incomplete beta.
class BetaPowerRisk final : public RiskLaw {
 public:
  BetaPowerRisk(RiskModel model, int n_cells);

  int num_regimes() const override { return model_.num_regimes(); }
  double prob_below(double t) const override;
  double partial_cost_moment(double t, int theta) const override;
  double full_cost_moment(int theta) const override;
  double cost(double s, int theta) const override {
    return model_.cost_auto(s, theta);
  }
  double invert(double target, int theta) const override {
    return model_.invert_cost_auto(target, theta);
  }
  double cost_slope(double s, int theta) const override {
    return model_.cost_auto_slope(s, theta);
  }
  const RiskModel& model() const { return model_; }

 private:
  // integral of s^p dF over [0, t]
  double base_moment(double t) const;

  RiskModel model_;
  int n_cells_;
  double cell_;
  std::vector<double> cum_;  // cum_[k] = base moment over first k cells
};

// Finitely supported score distribution with the same power-law cost
// family. Used for small instances where exact policy enumeration is
// tractable.
class DiscreteRisk final : public RiskLaw {
 public:
  DiscreteRisk(std::vector<double> atoms, std::vector<double> probs,
               Vector cost_coeffs, double cost_exponent);

  int num_regimes() const override {
    return static_cast<int>(cost_coeffs_.size());
  }
  double prob_below(double t) const override;
  double partial_cost_moment(double t, int theta) const override;
  double full_cost_moment(int theta) const override;
  double cost(double s, int theta) const override;
  double invert(double target, int theta) const override;
  double cost_slope(double s, int theta) const override;
  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> atoms_, probs_;
  Vector cost_coeffs_;
  double cost_exponent_;
};

}  // namespace hitlq
