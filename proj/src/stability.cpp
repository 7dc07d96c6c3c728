#include "hitlq/stability.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hitlq {

void SafetySpec::validate() const {
  if (!(epsilon >= 0.0))
    throw std::invalid_argument("SafetySpec: epsilon must be >= 0");
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    default: return "boundary";
  }
}

double safety_threshold(int theta, const SafetySpec& spec,
                        const RiskLaw& law) {
  spec.validate();
  if (theta < 0 || theta >= law.num_regimes())
    throw std::domain_error("safety_threshold: unknown regime index");
  if (law.partial_cost_moment(1.0, theta) <= spec.epsilon) return 1.0;
  double lo = 0.0, hi = 1.0;  // G(lo) <= eps < G(hi)
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (law.partial_cost_moment(mid, theta) <= spec.epsilon)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double min_arrival_rate(int theta, double lambda, const RiskLaw& law,
                        const SafetySpec& spec) {
  const double tbar = safety_threshold(theta, spec, law);
  return lambda * (1.0 - law.prob_below(tbar));
}

double required_capacity(const DriftChain& chain, double lambda,
                         const RiskLaw& law, const SafetySpec& spec) {
  const Vector pi = stationary_distribution(chain);
  double total = 0.0;
  for (int theta = 0; theta < chain.num_states(); ++theta)
    total += pi[theta] * min_arrival_rate(theta, lambda, law, spec);
  return total;
}

Stability classify_stability(double lambda_req, int m, double mu,
                             double band_rel) {
  const double cap = m * mu;
  const double band = band_rel * cap;
  if (lambda_req < cap - band) return Stability::stable;
  if (lambda_req > cap + band) return Stability::unstable;
  return Stability::boundary;
}

PhaseDiagram phase_diagram(const std::vector<double>& lambda_grid,
                           const std::vector<double>& drift_grid,
                           const QueueEconomics& econ, const DriftChain& chain,
                           const RiskLaw& law, const SafetySpec& spec) {
  if (lambda_grid.empty() || drift_grid.empty())
    throw std::invalid_argument("phase_diagram: grids must be non-empty");
  PhaseDiagram pd;
  pd.lambda_grid = lambda_grid;
  pd.drift_grid = drift_grid;
  pd.cells.reserve(lambda_grid.size() * drift_grid.size());
  const double cap = econ.capacity();
  for (double lam : lambda_grid) {
    for (double mult : drift_grid) {
      const DriftChain scaled = scale_drift_intensity(chain, mult);
      PhaseCell cell;
      cell.lambda = lam;
      cell.drift_multiplier = mult;
      const Vector pi = stationary_distribution(scaled);
      cell.pi_high = pi[pi.size() - 1];
      cell.lambda_req = required_capacity(scaled, lam, law, spec);
      cell.headroom = cap - cell.lambda_req;
      cell.cls =
          classify_stability(cell.lambda_req, econ.n_servers,
                             econ.service_rate);
      pd.cells.push_back(cell);
    }
  }
  // Lambda_req is linear in lambda, so the critical arrival rate per drift
  // multiplier comes from the per-unit mandatory load.
  const double lam_lo =
      *std::min_element(lambda_grid.begin(), lambda_grid.end());
  const double lam_hi =
      *std::max_element(lambda_grid.begin(), lambda_grid.end());
  for (double mult : drift_grid) {
    const DriftChain scaled = scale_drift_intensity(chain, mult);
    const double per_unit = required_capacity(scaled, 1.0, law, spec);
    if (per_unit <= 0.0) continue;
    const double crit = cap / per_unit;
    if (crit >= lam_lo && crit <= lam_hi) pd.boundary.push_back({crit, mult});
  }
  return pd;
}

}  // namespace hitlq
