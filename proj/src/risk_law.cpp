#include "hitlq/risk_law.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hitlq {

BetaPowerRisk::BetaPowerRisk(RiskModel model, int n_cells)
    : model_(std::move(model)), n_cells_(n_cells) {
  model_.validate();
  if (n_cells_ < 16)
    throw std::invalid_argument("BetaPowerRisk: need at least 16 cells");
  cell_ = 1.0 / n_cells_;
  cum_.resize(n_cells_ + 1);
  cum_[0] = 0.0;
  const double p = model_.cost_exponent;
  for (int k = 0; k < n_cells_; ++k) {
    const double mid = (k + 0.5) * cell_;
    cum_[k + 1] =
        cum_[k] + std::pow(mid, p) * model_.risk_pdf(mid) * cell_;
  }
}

double BetaPowerRisk::prob_below(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return model_.risk_cdf(t);
}

double BetaPowerRisk::base_moment(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return cum_[n_cells_];
  const int k = std::min(n_cells_ - 1, static_cast<int>(t / cell_));
  const double lo = k * cell_;
  const double mid = 0.5 * (lo + t);
  return cum_[k] + std::pow(mid, model_.cost_exponent) *
                       model_.risk_pdf(mid) * (t - lo);
}

double BetaPowerRisk::partial_cost_moment(double t, int theta) const {
  return model_.cost_coeffs[theta] * base_moment(t);
}

double BetaPowerRisk::full_cost_moment(int theta) const {
  return model_.cost_coeffs[theta] * cum_[n_cells_];
}

DiscreteRisk::DiscreteRisk(std::vector<double> atoms,
                           std::vector<double> probs, Vector cost_coeffs,
                           double cost_exponent)
    : atoms_(std::move(atoms)),
      probs_(std::move(probs)),
      cost_coeffs_(std::move(cost_coeffs)),
      cost_exponent_(cost_exponent) {
  if (atoms_.empty() || atoms_.size() != probs_.size())
    throw std::invalid_argument("DiscreteRisk: atoms/probs size mismatch");
  double total = 0.0;
  for (size_t i = 0; i < atoms_.size(); ++i) {
    if (atoms_[i] < 0.0 || atoms_[i] > 1.0)
      throw std::invalid_argument("DiscreteRisk: atom outside [0,1]");
    if (i > 0 && atoms_[i] <= atoms_[i - 1])
      throw std::invalid_argument("DiscreteRisk: atoms must be increasing");
    total += probs_[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteRisk: probabilities must sum to 1");
}

double DiscreteRisk::prob_below(double t) const {
  double p = 0.0;
  for (size_t i = 0; i < atoms_.size(); ++i)
    if (atoms_[i] < t) p += probs_[i];
  return p;
}

double DiscreteRisk::partial_cost_moment(double t, int theta) const {
  double m = 0.0;
  for (size_t i = 0; i < atoms_.size(); ++i)
    if (atoms_[i] < t) m += probs_[i] * cost(atoms_[i], theta);
  return m;
}

double DiscreteRisk::full_cost_moment(int theta) const {
  double m = 0.0;
  for (size_t i = 0; i < atoms_.size(); ++i)
    m += probs_[i] * cost(atoms_[i], theta);
  return m;
}

double DiscreteRisk::cost(double s, int theta) const {
  return cost_coeffs_[theta] * std::pow(s, cost_exponent_);
}

double DiscreteRisk::invert(double target, int theta) const {
  if (target < 0.0) throw std::domain_error("DiscreteRisk: negative target");
  const double a = cost_coeffs_[theta];
  if (target == 0.0) return 0.0;
  if (target > a * (1.0 + 1e-15)) return kNever;
  return std::min(1.0, std::pow(target / a, 1.0 / cost_exponent_));
}

double DiscreteRisk::cost_slope(double s, int theta) const {
  const double p = cost_exponent_;
  if (s <= 0.0) return p == 1.0 ? cost_coeffs_[theta] : 0.0;
  return cost_coeffs_[theta] * p * std::pow(s, p - 1.0);
}

}  // namespace hitlq
