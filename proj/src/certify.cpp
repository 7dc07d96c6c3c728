#include "hitlq/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hitlq {

namespace {

nlohmann::ordered_json num_or_string(double x) {
  if (std::isfinite(x)) return x;
  return x > 0 ? "inf" : "-inf";
}

nlohmann::ordered_json violations_json(const std::vector<Violation>& vs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& v : vs) {
    arr.push_back({{"q", v.q},
                   {"theta", v.theta},
                   {"theta2", v.theta2},
                   {"gap", num_or_string(v.gap)}});
  }
  return arr;
}

}  // namespace

nlohmann::ordered_json CertReport::to_json() const {
  nlohmann::ordered_json j;
  j["check"] = check;
  j["pass"] = pass;
  j["slack"] = slack;
  j["violations"] = violations_json(violations);
  j["notes"] = notes;
  return j;
}

CertReport verify_convexity(const ValueTable& v, double convergence_tol) {
  CertReport rep;
  rep.check = "convexity_in_q";
  rep.slack = 10.0 * convergence_tol;
  for (int theta = 0; theta < v.num_regimes(); ++theta) {
    for (int q = 0; q + 1 < v.queue_cap(); ++q) {
      const double d =
          v.marginals(q + 1, theta) - v.marginals(q, theta);
      if (d < -rep.slack) {
        rep.pass = false;
        rep.violations.push_back({q, theta, theta, -d - rep.slack});
      }
    }
  }
  return rep;
}

CertReport verify_congestion_shedding(const ThresholdTable& t,
                                      const RiskLaw& law,
                                      double convergence_tol) {
  CertReport rep;
  rep.check = "threshold_nondecreasing_in_q";
  rep.slack = 10.0 * convergence_tol;
  for (int theta = 0; theta < t.num_regimes(); ++theta) {
    for (int q = 0; q + 1 <= t.queue_cap(); ++q) {
      const double lo = t.thresholds(q, theta);
      const double hi = t.thresholds(q + 1, theta);
      if (hi == kNever) continue;
      if (lo == kNever) {
        // A finite threshold above a NEVER state breaks monotonicity.
        rep.pass = false;
        rep.violations.push_back(
            {q, theta, theta, std::numeric_limits<double>::infinity()});
        continue;
      }
      const double slope = law.cost_slope(lo, theta);
      if (slope <= 0.0) continue;  // inversion ill-conditioned near s = 0
      const double eps = rep.slack / slope;
      if (hi < lo - eps) {
        rep.pass = false;
        rep.violations.push_back({q, theta, theta, lo - eps - hi});
      }
    }
  }
  return rep;
}

nlohmann::ordered_json DriftMonotonicityReport::to_json() const {
  nlohmann::ordered_json j;
  j["check"] = "drift_monotonicity";
  j["assumption_immediate_risk_dominance"] = assumption_holds;
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const auto& p : pair_gaps) {
    pairs.push_back({{"theta_low", p.theta_low},
                     {"theta_high", p.theta_high},
                     {"inf_cost_gap", p.inf_cost_gap},
                     {"sup_marginal_gap", p.sup_marginal_gap},
                     {"holds", p.holds}});
  }
  j["pair_gaps"] = pairs;
  j["thresholds"] = thresholds.to_json();
  return j;
}

DriftMonotonicityReport verify_drift_monotonicity(const ThresholdTable& t,
                                                  const ValueTable& v,
                                                  const RiskLaw& law,
                                                  double convergence_tol,
                                                  int s_grid) {
  DriftMonotonicityReport rep;
  const int k = t.num_regimes();
  const double slack = 10.0 * convergence_tol;

  for (int tl = 0; tl < k; ++tl) {
    for (int th = tl + 1; th < k; ++th) {
      DriftMonotonicityReport::PairGap pg{tl, th, 0.0, 0.0, true};
      double inf_cost = std::numeric_limits<double>::infinity();
      for (int i = 0; i < s_grid; ++i) {
        const double s = static_cast<double>(i) / (s_grid - 1);
        inf_cost = std::min(inf_cost, law.cost(s, th) - law.cost(s, tl));
      }
      double sup_marg = -std::numeric_limits<double>::infinity();
      for (int q = 0; q < v.queue_cap(); ++q)
        sup_marg =
            std::max(sup_marg, v.marginals(q, th) - v.marginals(q, tl));
      pg.inf_cost_gap = inf_cost;
      pg.sup_marginal_gap = sup_marg;
      pg.holds = inf_cost >= sup_marg - slack;
      if (!pg.holds) rep.assumption_holds = false;
      rep.pair_gaps.push_back(pg);
    }
  }

  rep.thresholds.check = "threshold_nonincreasing_in_theta";
  rep.thresholds.slack = slack;
  for (int tl = 0; tl < k; ++tl) {
    for (int th = tl + 1; th < k; ++th) {
      for (int q = 0; q <= t.queue_cap(); ++q) {
        const double lo_regime = t.thresholds(q, tl);
        const double hi_regime = t.thresholds(q, th);
        if (lo_regime == kNever) continue;
        if (hi_regime == kNever) {
          rep.thresholds.pass = false;
          rep.thresholds.violations.push_back(
              {q, tl, th, std::numeric_limits<double>::infinity()});
          continue;
        }
        const double slope = law.cost_slope(hi_regime, th);
        const double eps = slope > 0.0
                               ? slack / slope
                               : std::numeric_limits<double>::infinity();
        if (hi_regime > lo_regime + eps) {
          rep.thresholds.pass = false;
          rep.thresholds.violations.push_back(
              {q, tl, th, hi_regime - lo_regime - eps});
        }
      }
    }
  }
  if (!rep.assumption_holds)
    rep.thresholds.notes.push_back(
        "immediate-risk dominance fails empirically; monotonicity in theta "
        "is reported as measured, not guaranteed");
  return rep;
}

}  // namespace hitlq
