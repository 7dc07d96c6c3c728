#include "hitlq/solver.hpp"

#include "hitlq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hitlq {

void SolverConfig::validate(int n_servers) const {
  if (!(discount_rate > 0.0))
    throw std::invalid_argument("SolverConfig: discount_rate must be > 0");
  if (queue_cap < n_servers)
    throw std::invalid_argument(
        "SolverConfig: queue_cap must be at least n_servers");
  if (s_grid_size < 16)
    throw std::invalid_argument("SolverConfig: s_grid_size must be >= 16");
  if (!(convergence_tol > 0.0))
    throw std::invalid_argument("SolverConfig: convergence_tol must be > 0");
  if (max_iterations < 1)
    throw std::invalid_argument("SolverConfig: max_iterations must be >= 1");
}

double uniformization_rate(const QueueEconomics& econ,
                           const DriftChain& chain) {
  return econ.arrival_rate + econ.capacity() + chain.max_exit_rate();
}

BellmanOperator::BellmanOperator(const QueueEconomics& econ,
                                 const DriftChain& chain, const RiskLaw& law,
                                 const SolverConfig& config)
    : law_(law), econ_(econ), gen_(chain.generator), cap_(config.queue_cap) {
  econ.validate();
  chain.validate();
  config.validate(econ.n_servers);
  alpha_ = config.discount_rate;
  lambda_rate_ = uniformization_rate(econ, chain);
  beta_ = lambda_rate_ / (lambda_rate_ + alpha_);
  const int k = chain.num_states();
  exit_rates_.resize(k);
  full_moments_.resize(k);
  for (int t = 0; t < k; ++t) {
    exit_rates_[t] = chain.exit_rate(t);
    full_moments_[t] = law.full_cost_moment(t);
  }
}

double BellmanOperator::intervention_value(const Matrix& v, int q,
                                           int theta) const {
  if (q >= cap_) return v(q, theta) + full_moments_[theta];
  const double target =
      econ_.escalation_fee + (v(q + 1, theta) - v(q, theta));
  // A non-positive target means escalation dominates for every score.
  double cut = target <= 0.0 ? 0.0 : law_.invert(target, theta);
  if (cut == kNever) return v(q, theta) + full_moments_[theta];
  cut = std::clamp(cut, 0.0, 1.0);
  const double below = law_.prob_below(cut);
  return below * v(q, theta) +
         (1.0 - below) * (econ_.escalation_fee + v(q + 1, theta)) +
         law_.partial_cost_moment(cut, theta);
}

Matrix BellmanOperator::apply(const Matrix& v) const {
  const int k = static_cast<int>(v.cols());
  Matrix out(cap_ + 1, k);
  const double lam = econ_.arrival_rate;
  for (int theta = 0; theta < k; ++theta) {
    for (int q = 0; q <= cap_; ++q) {
      const double mu_q = econ_.service_rate_at(q);
      double drift = 0.0;
      for (int t2 = 0; t2 < k; ++t2)
        if (t2 != theta) drift += gen_(theta, t2) * v(q, t2);
      const double self =
          lambda_rate_ - lam - mu_q - exit_rates_[theta];
      const double val =
          (econ_.holding(q) + lam * intervention_value(v, q, theta) +
           mu_q * v(std::max(q - 1, 0), theta) + drift +
           self * v(q, theta)) /
          (lambda_rate_ + alpha_);
      if (!std::isfinite(val)) {
        std::ostringstream os;
        os << "Bellman sweep produced non-finite value at state (q=" << q
           << ", theta=" << theta << ")";
        throw NumericError(os.str());
      }
      out(q, theta) = val;
    }
  }
  return out;
}

ValueTable value_iteration(const QueueEconomics& econ, const DriftChain& chain,
                           const RiskLaw& law, const SolverConfig& config) {
  BellmanOperator op(econ, chain, law, config);
  const int k = chain.num_states();
  ValueTable table;
  table.uniformization_rate = op.rate();
  table.discrete_discount = op.discount();

  Matrix v = Matrix::Zero(config.queue_cap + 1, k);
  double resid = 0.0;
  long it = 0;
  for (; it < config.max_iterations; ++it) {
    Matrix next = op.apply(v);
    resid = (next - v).cwiseAbs().maxCoeff();
    table.residual_trace.push_back(resid);
    v = std::move(next);
    if (resid <= config.convergence_tol) break;
  }
  if (resid > config.convergence_tol) {
    std::ostringstream os;
    os << "value_iteration did not converge within " << config.max_iterations
       << " iterations; residual tail:";
    const size_t n = table.residual_trace.size();
    for (size_t i = n > 5 ? n - 5 : 0; i < n; ++i)
      os << " " << table.residual_trace[i];
    throw NumericError(os.str());
  }
  table.iterations_used = it + 1;
  table.final_residual = resid;
  table.values = std::move(v);
  table.marginals = table.values.bottomRows(config.queue_cap) -
                    table.values.topRows(config.queue_cap);
  return table;
}

ThresholdTable extract_thresholds(const ValueTable& v,
                                  const QueueEconomics& econ,
                                  const RiskLaw& law) {
  const int cap = v.queue_cap();
  const int k = v.num_regimes();
  ThresholdTable t;
  t.thresholds.resize(cap + 1, k);
  for (int theta = 0; theta < k; ++theta) {
    for (int q = 0; q < cap; ++q) {
      const double target = econ.escalation_fee + v.marginals(q, theta);
      t.thresholds(q, theta) =
          target <= 0.0 ? 0.0 : law.invert(target, theta);
    }
    t.thresholds(cap, theta) = kNever;  // boundary: forced automate
  }
  return t;
}

}  // namespace hitlq
