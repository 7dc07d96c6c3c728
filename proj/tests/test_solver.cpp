#include "hitlq/solver.hpp"

#include "hitlq/sim.hpp"

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

QueueEconomics paper_econ() { return QueueEconomics{}; }

// Composite Simpson of g against the Beta density over [lo, hi],
// independent of the solver's midpoint-panel quadrature.
template <typename G>
double simpson_expect(const RiskModel& m, double lo, double hi, G g,
                      int n = 40000) {
  if (hi <= lo) return 0.0;
  const double h = (hi - lo) / n;
  auto f = [&](double s) {
    s = std::min(std::max(s, 1e-300), 1.0 - 1e-16);
    return g(s) * m.risk_pdf(s);
  };
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("uniformization rate is tight") {
  CHECK(uniformization_rate(paper_econ(), paper_chain()) ==
        doctest::Approx(17.7).epsilon(1e-15));
}

TEST_CASE("partial cost moments match Simpson oracle") {
  const RiskModel m = paper_model();
  BetaPowerRisk law(m, 4096);
  for (double t : {0.05, 0.16, 0.22, 0.5, 0.77, 1.0}) {
    for (int theta : {0, 1}) {
      const double oracle = simpson_expect(
          m, 0.0, t, [&](double s) { return m.cost_auto(s, theta); });
      CHECK(law.partial_cost_moment(t, theta) ==
            doctest::Approx(oracle).epsilon(2e-6));
    }
  }
  const double full = simpson_expect(
      m, 0.0, 1.0, [&](double s) { return m.cost_auto(s, 0); });
  CHECK(law.full_cost_moment(0) == doctest::Approx(full).epsilon(2e-6));
  // exact second moment of Beta(2,5): a(a+1)/((a+b)(a+b+1)) = 6/56
  CHECK(law.full_cost_moment(0) ==
        doctest::Approx(50.0 * 6.0 / 56.0).epsilon(1e-5));
  CHECK(law.prob_below(0.8) == doctest::Approx(0.99840).epsilon(1e-6));
}

TEST_CASE("intervention value matches direct quadrature of the min") {
  const RiskModel m = paper_model();
  BetaPowerRisk law(m, 4096);
  SolverConfig cfg;
  cfg.queue_cap = 40;
  const BellmanOperator op(paper_econ(), paper_chain(), law, cfg);

  Rng rng(12345);
  Matrix v(cfg.queue_cap + 1, 2);
  for (int q = 0; q <= cfg.queue_cap; ++q)
    for (int t = 0; t < 2; ++t) v(q, t) = 40.0 * rng.uniform() + 0.1 * q;

  const QueueEconomics econ = paper_econ();
  for (int q : {0, 3, 17, 39}) {
    for (int theta : {0, 1}) {
      const double oracle = simpson_expect(m, 0.0, 1.0, [&](double s) {
        return std::min(m.cost_auto(s, theta) + v(q, theta),
                        econ.escalation_fee + v(q + 1, theta));
      });
      CHECK(op.intervention_value(v, q, theta) ==
            doctest::Approx(oracle).epsilon(5e-6));
    }
  }
  // at the cap the escalation branch is unavailable
  const int cap = cfg.queue_cap;
  CHECK(op.intervention_value(v, cap, 0) ==
        doctest::Approx(v(cap, 0) + law.full_cost_moment(0)).epsilon(1e-12));
}

TEST_CASE("Bellman operator is a beta-contraction on random pairs") {
  BetaPowerRisk law(paper_model(), 256);
  SolverConfig cfg;
  cfg.queue_cap = 30;
  cfg.s_grid_size = 256;
  const BellmanOperator op(paper_econ(), paper_chain(), law, cfg);
  const double beta = op.discount();

  Rng rng(777);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix v1(cfg.queue_cap + 1, 2), v2(cfg.queue_cap + 1, 2);
    for (int q = 0; q <= cfg.queue_cap; ++q)
      for (int t = 0; t < 2; ++t) {
        v1(q, t) = 200.0 * (rng.uniform() - 0.5);
        v2(q, t) = 200.0 * (rng.uniform() - 0.5);
      }
    const double lhs =
        (op.apply(v1) - op.apply(v2)).lpNorm<Eigen::Infinity>();
    const double rhs = beta * (v1 - v2).lpNorm<Eigen::Infinity>();
    CHECK(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
  }
}

TEST_CASE("value iteration converges geometrically") {
  BetaPowerRisk law(paper_model(), 512);
  SolverConfig cfg;
  cfg.queue_cap = 40;
  cfg.s_grid_size = 512;
  cfg.convergence_tol = 1e-9;
  const ValueTable v =
      value_iteration(paper_econ(), paper_chain(), law, cfg);
  CHECK(v.final_residual <= cfg.convergence_tol);
  CHECK(v.discrete_discount ==
        doctest::Approx(v.uniformization_rate /
                        (v.uniformization_rate + cfg.discount_rate)));
  // mid-run residuals decay at the contraction modulus; the very tail is
  // dominated by rounding noise, so the ratio is measured over windows
  // well above the floating-point floor
  const auto& trace = v.residual_trace;
  REQUIRE(trace.size() >= 1000);
  const size_t lo = trace.size() / 4, hi = 3 * trace.size() / 4;
  for (size_t i = lo; i + 100 < hi; i += 100) {
    const double window_ratio = trace[i + 100] / trace[i];
    CHECK(window_ratio <= std::pow(v.discrete_discount + 1e-7, 100));
  }
}

TEST_CASE("no arrivals: value table matches the birth-death recursion") {
  // With lambda = 0 the queue only drains, so the discounted holding cost
  // solves a one-sided recursion that can be evaluated exactly.
  QueueEconomics econ = paper_econ();
  econ.arrival_rate = 0.0;
  DriftChain still;
  still.generator = Matrix::Zero(1, 1);
  RiskModel m = paper_model();
  m.cost_coeffs = Vector::Constant(1, 50.0);
  BetaPowerRisk law(m, 256);
  SolverConfig cfg;
  cfg.queue_cap = 30;
  cfg.s_grid_size = 256;
  cfg.convergence_tol = 1e-12;
  const ValueTable v = value_iteration(econ, still, law, cfg);

  Vector oracle(cfg.queue_cap + 1);
  oracle[0] = 0.0;
  for (int q = 1; q <= cfg.queue_cap; ++q) {
    const double s = econ.service_rate_at(q);
    oracle[q] = (econ.holding(q) + s * oracle[q - 1]) / (cfg.discount_rate + s);
  }
  for (int q = 0; q <= cfg.queue_cap; ++q)
    CHECK(v.values(q, 0) == doctest::Approx(oracle[q]).epsilon(1e-8));
}

TEST_CASE("zero-cost instance solves to the zero table in one sweep") {
  QueueEconomics econ = paper_econ();
  econ.arrival_rate = 0.0;
  econ.holding_coeff = 0.0;
  econ.escalation_fee = 0.0;
  BetaPowerRisk law(paper_model(), 256);
  SolverConfig cfg;
  cfg.queue_cap = 20;
  cfg.s_grid_size = 256;
  const ValueTable v = value_iteration(econ, paper_chain(), law, cfg);
  CHECK(v.iterations_used == 1);
  CHECK(v.values.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("threshold extraction inverts the marginal value") {
  BetaPowerRisk law(paper_model(), 1024);
  SolverConfig cfg;
  cfg.queue_cap = 60;
  cfg.s_grid_size = 1024;
  const QueueEconomics econ = paper_econ();
  const ValueTable v = value_iteration(econ, paper_chain(), law, cfg);
  const ThresholdTable t = extract_thresholds(v, econ, law);

  REQUIRE(t.queue_cap() == cfg.queue_cap);
  for (int theta : {0, 1}) {
    CHECK(t.thresholds(cfg.queue_cap, theta) == kNever);
    for (int q = 0; q < cfg.queue_cap; ++q) {
      const double target = econ.escalation_fee + v.marginals(q, theta);
      const double expect =
          std::pow(target / paper_model().cost_coeffs[theta], 0.5);
      if (expect <= 1.0)
        CHECK(t.thresholds(q, theta) ==
              doctest::Approx(expect).epsilon(1e-12));
      else
        CHECK(t.thresholds(q, theta) == kNever);
    }
  }
  // Fig. 1 shape: H-curve below L-curve, both non-decreasing in q
  for (int q = 0; q + 1 < cfg.queue_cap; ++q) {
    CHECK(t.thresholds(q, 1) <= t.thresholds(q, 0));
    CHECK(t.thresholds(q + 1, 0) >= t.thresholds(q, 0) - 1e-12);
    CHECK(t.thresholds(q + 1, 1) >= t.thresholds(q, 1) - 1e-12);
  }
}

TEST_CASE("discrete risk law moments by hand") {
  DiscreteRisk law({0.1, 0.3, 0.6, 0.9}, {0.4, 0.3, 0.2, 0.1},
                   Vector::Constant(1, 10.0), 2.0);
  CHECK(law.prob_below(0.3) == doctest::Approx(0.4));    // strict
  CHECK(law.prob_below(0.31) == doctest::Approx(0.7));
  CHECK(law.prob_below(0.0) == 0.0);
  CHECK(law.prob_below(1.0) == doctest::Approx(1.0));
  const double full =
      10.0 * (0.4 * 0.01 + 0.3 * 0.09 + 0.2 * 0.36 + 0.1 * 0.81);
  CHECK(law.full_cost_moment(0) == doctest::Approx(full).epsilon(1e-14));
  CHECK(law.partial_cost_moment(0.6, 0) ==
        doctest::Approx(10.0 * (0.4 * 0.01 + 0.3 * 0.09)).epsilon(1e-14));
  CHECK(law.cost(0.5, 0) == doctest::Approx(2.5));
  CHECK(law.invert(2.5, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(law.invert(11.0, 0) == kNever);
  CHECK_THROWS_AS(
      DiscreteRisk({0.5, 0.2}, {0.5, 0.5}, Vector::Constant(1, 1.0), 2.0),
      std::invalid_argument);
  CHECK_THROWS_AS(
      DiscreteRisk({0.2, 0.5}, {0.5, 0.6}, Vector::Constant(1, 1.0), 2.0),
      std::invalid_argument);
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate(5));
  cfg.queue_cap = 4;
  CHECK_THROWS_AS(cfg.validate(5), std::invalid_argument);
  cfg = SolverConfig{};
  cfg.discount_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(5), std::invalid_argument);
}
