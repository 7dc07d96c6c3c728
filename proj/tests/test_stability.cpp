#include "hitlq/stability.hpp"

#include <doctest.h>

#include <cmath>

using namespace hitlq;

namespace {

RiskModel paper_model() {
  RiskModel m;
  m.dist_alpha = 2.0;
  m.dist_beta = 5.0;
  m.cost_coeffs = Vector(2);
  m.cost_coeffs << 50.0, 100.0;
  m.cost_exponent = 2.0;
  return m;
}

DriftChain paper_chain() {
  DriftChain c;
  c.generator = Matrix(2, 2);
  c.generator << -0.05, 0.05, 0.2, -0.2;
  return c;
}

// Riemann-sum search for sup{tau : E[1{S<tau} c_auto(S,theta)] <= eps},
// independent of the bisection in safety_threshold.
double tbar_oracle(const RiskModel& m, int theta, double eps,
                   int n = 2000000) {
  const double h = 1.0 / n;
  double acc = 0.0;
  double tau = 1.0;
  for (int i = 0; i < n; ++i) {
    const double s = (i + 0.5) * h;
    acc += m.cost_auto(s, theta) * m.risk_pdf(s) * h;
    if (acc > eps) {
      tau = i * h;  // last cutoff still within budget
      break;
    }
  }
  return tau;
}

}  // namespace

TEST_CASE("safety threshold matches Riemann oracle and orders by regime") {
  const RiskModel m = paper_model();
  BetaPowerRisk law(m, 4096);
  SafetySpec spec;
  spec.epsilon = 1.0;
  const double tl = safety_threshold(0, spec, law);
  const double th = safety_threshold(1, spec, law);
  CHECK(tl == doctest::Approx(tbar_oracle(m, 0, 1.0)).epsilon(2e-5));
  CHECK(th == doctest::Approx(tbar_oracle(m, 1, 1.0)).epsilon(2e-5));
  CHECK(th < tl);  // the worse regime tolerates less automation
  CHECK(tl > 0.0);
  CHECK(tl < 1.0);

  // a huge budget admits everything
  SafetySpec lax;
  lax.epsilon = 1e6;
  CHECK(safety_threshold(0, lax, law) == 1.0);
  // a zero budget admits nothing with mass
  SafetySpec strict;
  strict.epsilon = 0.0;
  CHECK(safety_threshold(1, strict, law) < 1e-6);
}

TEST_CASE("minimum arrival rate and required capacity") {
  const RiskModel m = paper_model();
  BetaPowerRisk law(m, 4096);
  SafetySpec spec;
  const double lambda = 10.0;
  for (int theta : {0, 1}) {
    const double tbar = safety_threshold(theta, spec, law);
    CHECK(min_arrival_rate(theta, lambda, law, spec) ==
          doctest::Approx(lambda * (1.0 - law.prob_below(tbar)))
              .epsilon(1e-12));
  }
  const double req = required_capacity(paper_chain(), lambda, law, spec);
  const double byhand = 0.8 * min_arrival_rate(0, lambda, law, spec) +
                        0.2 * min_arrival_rate(1, lambda, law, spec);
  CHECK(req == doctest::Approx(byhand).epsilon(1e-12));
  CHECK(req < lambda);
}

TEST_CASE("stability classification with boundary band") {
  CHECK(classify_stability(7.0, 5, 1.5) == Stability::stable);
  CHECK(classify_stability(8.0, 5, 1.5) == Stability::unstable);
  CHECK(classify_stability(7.5, 5, 1.5) == Stability::boundary);
  CHECK(classify_stability(7.5 * (1.0 + 1e-12), 5, 1.5) ==
        Stability::boundary);
  CHECK(to_string(Stability::stable) == std::string("stable"));
}

TEST_CASE("phase diagram cells, monotone headroom and boundary polyline") {
  BetaPowerRisk law(paper_model(), 2048);
  SafetySpec spec;
  const std::vector<double> lgrid{2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  const std::vector<double> dgrid{0.25, 0.5, 1.0, 2.0, 4.0};
  const PhaseDiagram pd = phase_diagram(lgrid, dgrid, QueueEconomics{},
                                        paper_chain(), law, spec);
  REQUIRE(pd.cells.size() == lgrid.size() * dgrid.size());

  // Lambda_req is linear in lambda, so headroom flips sign at most once
  // along each lambda-slice; it must flip on this grid.
  for (size_t j = 0; j < dgrid.size(); ++j) {
    int flips = 0;
    for (size_t i = 0; i + 1 < lgrid.size(); ++i) {
      const double a = pd.at(i, j).headroom, b = pd.at(i + 1, j).headroom;
      if (a > 0.0 && b <= 0.0) ++flips;
      CHECK(b <= a + 1e-12);  // headroom decreases in lambda
    }
    CHECK(flips == 1);
  }
  // faster drift into the bad regime raises the per-unit load
  for (size_t i = 0; i < lgrid.size(); ++i)
    for (size_t j = 0; j + 1 < dgrid.size(); ++j)
      CHECK(pd.at(i, j + 1).lambda_req >= pd.at(i, j).lambda_req - 1e-12);

  REQUIRE(pd.boundary.size() == dgrid.size());
  for (size_t j = 0; j < dgrid.size(); ++j) {
    const auto& [lam_star, mult] = pd.boundary[j];
    CHECK(mult == dgrid[j]);
    CHECK(lam_star >= lgrid.front());
    CHECK(lam_star <= lgrid.back());
    // the critical rate solves lambda* x per-unit load = capacity
    const double per_unit = pd.at(0, j).lambda_req / pd.at(0, j).lambda;
    CHECK(lam_star * per_unit ==
          doctest::Approx(QueueEconomics{}.capacity()).epsilon(1e-9));
  }
}

TEST_CASE("one-by-one sweep gives a single cell") {
  BetaPowerRisk law(paper_model(), 1024);
  const PhaseDiagram pd = phase_diagram({10.0}, {1.0}, QueueEconomics{},
                                        paper_chain(), law, SafetySpec{});
  CHECK(pd.cells.size() == 1);
  CHECK(pd.cells[0].pi_high == doctest::Approx(0.2).epsilon(1e-12));
}
