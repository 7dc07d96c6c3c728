#include "hitlq/sim.hpp"

#include "hitlq/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <functional>
#include <queue>
#include <stdexcept>
#include <thread>

namespace hitlq {

namespace {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  // 53-bit mantissa in (0,1); never returns exactly 0.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::exponential(double rate) {
  return -std::log1p(-uniform()) / rate;
}

uint64_t Rng::substream(uint64_t seed, uint64_t replication, uint64_t stream) {
  uint64_t s = seed;
  splitmix64(s);
  s ^= 0xA0761D6478BD642Full * (replication + 1);
  splitmix64(s);
  s ^= 0xE7037ED1A0B428DBull * (stream + 1);
  splitmix64(s);
  return s;
}

double EscalationPolicy::threshold(int q, int theta) const {
  switch (kind) {
    case PolicyKind::optimal:
      return q < table.rows() ? table(q, theta) : kNever;
    case PolicyKind::static_threshold:
      return fixed;
    case PolicyKind::drift_blind:
      return q < per_q.size() ? per_q[q] : kNever;
    case PolicyKind::fixed_safety:
      if (theta >= per_theta.size())
        throw ConfigError("fixed-safety policy undefined at regime " +
                          std::to_string(theta));
      return per_theta[theta];
  }
  return kNever;
}

EscalationPolicy EscalationPolicy::static_policy(double t) {
  EscalationPolicy p;
  p.kind = PolicyKind::static_threshold;
  p.fixed = t;
  return p;
}

EscalationPolicy EscalationPolicy::optimal_policy(const ThresholdTable& t) {
  EscalationPolicy p;
  p.kind = PolicyKind::optimal;
  p.table = t.thresholds;
  return p;
}

EscalationPolicy EscalationPolicy::drift_blind_policy(Vector per_q) {
  EscalationPolicy p;
  p.kind = PolicyKind::drift_blind;
  p.per_q = std::move(per_q);
  return p;
}

EscalationPolicy EscalationPolicy::fixed_safety_policy(Vector per_theta) {
  EscalationPolicy p;
  p.kind = PolicyKind::fixed_safety;
  p.per_theta = std::move(per_theta);
  return p;
}

const char* EscalationPolicy::name() const {
  switch (kind) {
    case PolicyKind::optimal: return "ODP";
    case PolicyKind::static_threshold: return "ST";
    case PolicyKind::drift_blind: return "DB";
    case PolicyKind::fixed_safety: return "FS";
  }
  return "?";
}

void SimConfig::validate() const {
  if (!(horizon > 0.0)) throw std::invalid_argument("SimConfig: horizon must be > 0");
  if (!(warmup >= 0.0) || warmup >= horizon)
    throw std::invalid_argument("SimConfig: warmup must lie in [0, horizon)");
  if (n_replications < 1)
    throw std::invalid_argument("SimConfig: n_replications must be >= 1");
  if (severe_cutoff > 1.0)
    throw std::invalid_argument("SimConfig: severe_cutoff must be <= 1");
}

ScenarioDraw draw_scenario(const QueueEconomics& econ, const DriftChain& chain,
                           const RiskModel& model, const SimConfig& config,
                           int replication) {
  ScenarioDraw draw;
  Rng arrivals(Rng::substream(config.seed, replication, 0));
  Rng scores(Rng::substream(config.seed, replication, 1));
  Rng services(Rng::substream(config.seed, replication, 2));
  Rng drift(Rng::substream(config.seed, replication, 3));

  if (econ.arrival_rate > 0.0) {
    double t = 0.0;
    while (true) {
      t += arrivals.exponential(econ.arrival_rate);
      if (t >= config.horizon) break;
      Task task;
      task.time = t;
      task.score = model.risk_quantile(scores.uniform());
      task.work = services.exponential(1.0);
      draw.tasks.push_back(task);
    }
  }

  const Vector pi = stationary_distribution(chain);
  int state = 0;
  {
    double u = drift.uniform(), acc = 0.0;
    for (int i = 0; i < pi.size(); ++i) {
      acc += pi[i];
      if (u <= acc) {
        state = i;
        break;
      }
    }
  }
  draw.drift.times.push_back(0.0);
  draw.drift.states.push_back(state);
  double t = 0.0;
  while (true) {
    const double rate = chain.exit_rate(state);
    if (rate <= 0.0) break;
    t += drift.exponential(rate);
    if (t >= config.horizon) break;
    double u = drift.uniform() * rate, acc = 0.0;
    int next = state;
    for (int j = 0; j < chain.num_states(); ++j) {
      if (j == state) continue;
      acc += chain.generator(state, j);
      if (u <= acc) {
        next = j;
        break;
      }
    }
    state = next;
    draw.drift.times.push_back(t);
    draw.drift.states.push_back(state);
  }
  return draw;
}

Vector severe_cutoffs(const SimConfig& config, const SafetySpec& safety,
                      const RiskLaw& law) {
  const int k = law.num_regimes();
  if (config.severe_cutoff >= 0.0)
    return Vector::Constant(k, config.severe_cutoff);
  Vector cuts(k);
  for (int t = 0; t < k; ++t) cuts[t] = safety_threshold(t, safety, law);
  return cuts;
}

SimMetrics simulate_replication(const EscalationPolicy& policy,
                                const QueueEconomics& econ,
                                const RiskModel& model,
                                const SimConfig& config,
                                const Vector& severe_cut,
                                const ScenarioDraw& draw) {
  config.validate();
  const double horizon = config.horizon;
  const double warmup = config.warmup;
  const int k = static_cast<int>(severe_cut.size());
  const double inf = std::numeric_limits<double>::infinity();

  SimMetrics m;
  m.regime_time_share = Vector::Zero(k);
  m.regime_cost = Vector::Zero(k);
  m.regime_queue = Vector::Zero(k);
  m.regime_escalation = Vector::Zero(k);
  Vector regime_time = Vector::Zero(k), regime_qtime = Vector::Zero(k),
         regime_costsum = Vector::Zero(k);
  Eigen::VectorXi regime_arr = Eigen::VectorXi::Zero(k),
                  regime_esc = Eigen::VectorXi::Zero(k);

  // busy servers as (completion time, entry time), earliest first
  using Server = std::pair<double, double>;
  std::priority_queue<Server, std::vector<Server>, std::greater<Server>> busy;
  std::deque<std::pair<double, double>> pending;  // (entry time, work)

  size_t ti = 0, di = 0;
  int q = 0;
  int theta = draw.drift.states.empty() ? 0 : draw.drift.states[0];
  double cur = 0.0;
  double q_integral = 0.0, holding_integral = 0.0, decision_costs = 0.0;
  double sojourn_sum = 0.0;
  long window_completions = 0, severe = 0;
  double next_sample = config.sample_interval > 0.0 ? 0.0 : inf;

  while (true) {
    const double t_arr = ti < draw.tasks.size() ? draw.tasks[ti].time : inf;
    const double t_dep = busy.empty() ? inf : busy.top().first;
    const double t_drift = di + 1 < draw.drift.times.size()
                               ? draw.drift.times[di + 1]
                               : inf;
    const double t_next = std::min({t_arr, t_dep, t_drift, horizon});

    while (next_sample < t_next && next_sample <= horizon) {
      m.queue_samples.push_back(q);
      next_sample += config.sample_interval;
    }
    const double lo = std::max(cur, warmup), hi = std::min(t_next, horizon);
    if (hi > lo) {
      const double dt = hi - lo;
      q_integral += q * dt;
      holding_integral += econ.holding(q) * dt;
      regime_time[theta] += dt;
      regime_qtime[theta] += q * dt;
      regime_costsum[theta] += econ.holding(q) * dt;
    }
    if (t_next >= horizon) break;
    cur = t_next;
    const bool in_window = cur >= warmup;

    if (t_next == t_dep) {
      const auto [done, entry] = busy.top();
      busy.pop();
      --q;
      ++m.completions;
      if (in_window) {
        sojourn_sum += done - entry;
        ++window_completions;
      }
      if (!pending.empty()) {
        const auto [entry2, work] = pending.front();
        pending.pop_front();
        busy.push({cur + work / econ.service_rate, entry2});
      }
    } else if (t_next == t_arr) {
      const Task& task = draw.tasks[ti++];
      ++m.arrivals;
      if (in_window) {
        ++m.window_arrivals;
        ++regime_arr[theta];
      }
      const double cutoff = policy.threshold(q, theta);
      double cost;
      if (task.score >= cutoff) {
        ++m.escalations;
        cost = econ.escalation_fee;
        if (in_window) {
          ++m.window_escalations;
          ++regime_esc[theta];
        }
        ++q;
        if (static_cast<int>(busy.size()) < econ.n_servers)
          busy.push({cur + task.work / econ.service_rate, cur});
        else
          pending.push_back({cur, task.work});
      } else {
        ++m.automations;
        cost = model.cost_auto(task.score, theta);
        if (in_window && task.score >= severe_cut[theta]) ++severe;
      }
      if (in_window) {
        decision_costs += cost;
        regime_costsum[theta] += cost;
      }
    } else {
      ++di;
      theta = draw.drift.states[di];
    }
  }
  m.final_queue = q;

  const double window = horizon - warmup;
  m.avg_total_cost = (decision_costs + holding_integral) / window;
  m.avg_queue_length = q_integral / window;
  m.escalation_fraction =
      m.window_arrivals > 0
          ? static_cast<double>(m.window_escalations) / m.window_arrivals
          : 0.0;
  m.severe_error_rate =
      m.window_arrivals > 0 ? static_cast<double>(severe) / m.window_arrivals
                            : 0.0;
  m.mean_sojourn =
      window_completions > 0 ? sojourn_sum / window_completions : 0.0;
  for (int t = 0; t < k; ++t) {
    m.regime_time_share[t] = regime_time[t] / window;
    if (regime_time[t] > 0.0) {
      m.regime_cost[t] = regime_costsum[t] / regime_time[t];
      m.regime_queue[t] = regime_qtime[t] / regime_time[t];
    }
    if (regime_arr[t] > 0)
      m.regime_escalation[t] =
          static_cast<double>(regime_esc[t]) / regime_arr[t];
  }
  return m;
}

namespace {

ReplicationStats simulate_with_draws(const EscalationPolicy& policy,
                                     const QueueEconomics& econ,
                                     const RiskModel& model,
                                     const SimConfig& config,
                                     const Vector& severe_cut,
                                     const std::vector<ScenarioDraw>& draws,
                                     int threads) {
  std::vector<SimMetrics> reps(draws.size());
  parallel_for(static_cast<int>(draws.size()), threads, [&](int r) {
    reps[r] = simulate_replication(policy, econ, model, config, severe_cut,
                                   draws[r]);
  });
  return aggregate(std::move(reps));
}

std::vector<ScenarioDraw> make_draws(const QueueEconomics& econ,
                                     const DriftChain& chain,
                                     const RiskModel& model,
                                     const SimConfig& config, int threads) {
  std::vector<ScenarioDraw> draws(config.n_replications);
  parallel_for(config.n_replications, threads, [&](int r) {
    draws[r] = draw_scenario(econ, chain, model, config, r);
  });
  return draws;
}

}  // namespace

ReplicationStats simulate(const EscalationPolicy& policy,
                          const QueueEconomics& econ, const DriftChain& chain,
                          const RiskModel& model, const SimConfig& config,
                          const Vector& severe_cut, int threads) {
  const auto draws = make_draws(econ, chain, model, config, threads);
  return simulate_with_draws(policy, econ, model, config, severe_cut, draws,
                             threads);
}

SimMetrics simulate_uniformized_replication(const EscalationPolicy& policy,
                                            const QueueEconomics& econ,
                                            const DriftChain& chain,
                                            const RiskModel& model,
                                            const SimConfig& config,
                                            int replication) {
  config.validate();
  Rng clock(Rng::substream(config.seed, replication, 16));
  Rng category(Rng::substream(config.seed, replication, 17));
  Rng scores(Rng::substream(config.seed, replication, 18));

  const double rate = uniformization_rate(econ, chain);
  const int k = chain.num_states();
  const Vector pi = stationary_distribution(chain);

  SimMetrics m;
  m.regime_time_share = Vector::Zero(k);
  m.regime_cost = Vector::Zero(k);
  m.regime_queue = Vector::Zero(k);
  m.regime_escalation = Vector::Zero(k);

  int q = 0;
  int theta = 0;
  {
    double u = category.uniform(), acc = 0.0;
    for (int i = 0; i < k; ++i) {
      acc += pi[i];
      if (u <= acc) {
        theta = i;
        break;
      }
    }
  }
  double cur = 0.0, q_integral = 0.0, holding_integral = 0.0,
         decision_costs = 0.0;
  long severe = 0;
  Vector severe_cut = Vector::Ones(k);  // unused channel here unless set
  if (config.severe_cutoff >= 0.0)
    severe_cut = Vector::Constant(k, config.severe_cutoff);

  while (cur < config.horizon) {
    const double t_next =
        std::min(cur + clock.exponential(rate), config.horizon);
    const double lo = std::max(cur, config.warmup);
    if (t_next > lo) {
      q_integral += q * (t_next - lo);
      holding_integral += econ.holding(q) * (t_next - lo);
    }
    cur = t_next;
    if (cur >= config.horizon) break;
    const bool in_window = cur >= config.warmup;

    const double u = category.uniform() * rate;
    const double mu_q = econ.service_rate_at(q);
    if (u < econ.arrival_rate) {
      ++m.arrivals;
      if (in_window) ++m.window_arrivals;
      const double s = model.risk_quantile(scores.uniform());
      if (s >= policy.threshold(q, theta)) {
        ++m.escalations;
        ++q;
        if (in_window) {
          ++m.window_escalations;
          decision_costs += econ.escalation_fee;
        }
      } else {
        ++m.automations;
        if (in_window) {
          decision_costs += model.cost_auto(s, theta);
          if (s >= severe_cut[theta]) ++severe;
        }
      }
    } else if (u < econ.arrival_rate + mu_q) {
      --q;
      ++m.completions;
    } else if (u < econ.arrival_rate + mu_q + chain.exit_rate(theta)) {
      double v = u - econ.arrival_rate - mu_q, acc = 0.0;
      for (int j = 0; j < k; ++j) {
        if (j == theta) continue;
        acc += chain.generator(theta, j);
        if (v <= acc) {
          theta = j;
          break;
        }
      }
    }
    // otherwise: fictitious self-loop
  }
  m.final_queue = q;
  const double window = config.horizon - config.warmup;
  m.avg_queue_length = q_integral / window;
  m.avg_total_cost = (decision_costs + holding_integral) / window;
  m.escalation_fraction =
      m.window_arrivals > 0
          ? static_cast<double>(m.window_escalations) / m.window_arrivals
          : 0.0;
  m.severe_error_rate =
      m.window_arrivals > 0 ? static_cast<double>(severe) / m.window_arrivals
                            : 0.0;
  return m;
}

ReplicationStats simulate_uniformized(const EscalationPolicy& policy,
                                      const QueueEconomics& econ,
                                      const DriftChain& chain,
                                      const RiskModel& model,
                                      const SimConfig& config) {
  std::vector<SimMetrics> reps(config.n_replications);
  for (int r = 0; r < config.n_replications; ++r)
    reps[r] =
        simulate_uniformized_replication(policy, econ, chain, model, config, r);
  return aggregate(std::move(reps));
}

namespace {

template <typename Get>
void mean_hw(const std::vector<SimMetrics>& reps, SimMetrics& mean,
             SimMetrics& hw, Get get) {
  const int n = static_cast<int>(reps.size());
  double sum = 0.0;
  for (const auto& r : reps) sum += get(const_cast<SimMetrics&>(r));
  const double mu = sum / n;
  get(mean) = mu;
  if (n < 2) {
    get(hw) = 0.0;
    return;
  }
  double ss = 0.0;
  for (const auto& r : reps) {
    const double d = get(const_cast<SimMetrics&>(r)) - mu;
    ss += d * d;
  }
  get(hw) = 1.96 * std::sqrt(ss / (n - 1)) / std::sqrt(n);
}

}  // namespace

ReplicationStats aggregate(std::vector<SimMetrics> reps) {
  ReplicationStats stats;
  if (reps.empty()) return stats;
  const int k = static_cast<int>(reps.front().regime_time_share.size());
  stats.mean.regime_time_share = Vector::Zero(k);
  stats.mean.regime_cost = Vector::Zero(k);
  stats.mean.regime_queue = Vector::Zero(k);
  stats.mean.regime_escalation = Vector::Zero(k);
  stats.half_width = stats.mean;

  auto scalars = {
      +[](SimMetrics& m) -> double& { return m.avg_total_cost; },
      +[](SimMetrics& m) -> double& { return m.avg_queue_length; },
      +[](SimMetrics& m) -> double& { return m.severe_error_rate; },
      +[](SimMetrics& m) -> double& { return m.escalation_fraction; },
      +[](SimMetrics& m) -> double& { return m.mean_sojourn; }};
  for (auto get : scalars) mean_hw(reps, stats.mean, stats.half_width, get);
  for (int t = 0; t < k; ++t) {
    mean_hw(reps, stats.mean, stats.half_width,
            [t](SimMetrics& m) -> double& { return m.regime_time_share[t]; });
    mean_hw(reps, stats.mean, stats.half_width,
            [t](SimMetrics& m) -> double& { return m.regime_cost[t]; });
    mean_hw(reps, stats.mean, stats.half_width,
            [t](SimMetrics& m) -> double& { return m.regime_queue[t]; });
    mean_hw(reps, stats.mean, stats.half_width,
            [t](SimMetrics& m) -> double& { return m.regime_escalation[t]; });
  }
  stats.reps = std::move(reps);
  return stats;
}

StaticSearchResult grid_search_static(const QueueEconomics& econ,
                                      const DriftChain& chain,
                                      const RiskModel& model,
                                      const SimConfig& config,
                                      const Vector& severe_cut,
                                      const std::vector<double>& grid,
                                      int threads) {
  if (grid.empty())
    throw std::invalid_argument("grid_search_static: empty grid");
  const auto draws = make_draws(econ, chain, model, config, threads);
  StaticSearchResult result;
  double best_cost = std::numeric_limits<double>::infinity();
  for (double t : grid) {
    auto stats =
        simulate_with_draws(EscalationPolicy::static_policy(t), econ, model,
                            config, severe_cut, draws, threads);
    const double cost = stats.mean.avg_total_cost;
    result.cost_curve.push_back({t, cost});
    if (cost <= best_cost) {  // ties resolve toward the larger threshold
      best_cost = cost;
      result.best_threshold = t;
      result.best = std::move(stats);
    }
  }
  return result;
}

std::vector<double> default_static_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

DriftBlindPolicy build_drift_blind(const QueueEconomics& econ,
                                   const DriftChain& chain,
                                   const RiskModel& model,
                                   const SolverConfig& solver) {
  const Vector pi = stationary_distribution(chain);
  DriftBlindPolicy db;
  db.averaged_coeff = pi.dot(model.cost_coeffs);

  RiskModel averaged = model;
  averaged.cost_coeffs = Vector::Constant(1, db.averaged_coeff);
  DriftChain degenerate;
  degenerate.generator = Matrix::Zero(1, 1);
  BetaPowerRisk law(averaged, solver.s_grid_size);
  const ValueTable v = value_iteration(econ, degenerate, law, solver);
  const ThresholdTable t = extract_thresholds(v, econ, law);
  db.per_q = t.thresholds.col(0);
  return db;
}

PolicyComparison compare_policies(const QueueEconomics& econ,
                                  const DriftChain& chain,
                                  const RiskModel& model,
                                  const SolverConfig& solver,
                                  const SimConfig& sim,
                                  const SafetySpec& safety, int threads,
                                  const ThresholdTable* solved_odp) {
  BetaPowerRisk law(model, solver.s_grid_size);
  PolicyComparison cmp;
  if (solved_odp) {
    cmp.odp_table = *solved_odp;
  } else {
    const ValueTable v = value_iteration(econ, chain, law, solver);
    cmp.odp_table = extract_thresholds(v, econ, law);
  }
  const DriftBlindPolicy db = build_drift_blind(econ, chain, model, solver);
  cmp.db_per_q = db.per_q;
  const Vector severe = severe_cutoffs(sim, safety, law);

  const auto draws = make_draws(econ, chain, model, sim, threads);
  auto st_search = grid_search_static(econ, chain, model, sim, severe,
                                      default_static_grid(), threads);
  cmp.static_threshold = st_search.best_threshold;
  cmp.static_curve = std::move(st_search.cost_curve);
  cmp.st = std::move(st_search.best);
  cmp.db = simulate_with_draws(EscalationPolicy::drift_blind_policy(db.per_q),
                               econ, model, sim, severe, draws, threads);
  cmp.odp =
      simulate_with_draws(EscalationPolicy::optimal_policy(cmp.odp_table),
                          econ, model, sim, severe, draws, threads);
  cmp.savings = (cmp.st.mean.avg_total_cost - cmp.odp.mean.avg_total_cost) /
                cmp.st.mean.avg_total_cost;
  return cmp;
}

double linear_slope(const std::vector<double>& samples, double dt,
                    double tail_start) {
  const size_t n = samples.size();
  const size_t start = static_cast<size_t>(tail_start * n);
  if (n - start < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t cnt = 0;
  for (size_t i = start; i < n; ++i) {
    const double x = i * dt;
    sx += x;
    sy += samples[i];
    sxx += x * x;
    sxy += x * samples[i];
    ++cnt;
  }
  const double denom = cnt * sxx - sx * sx;
  return denom > 0.0 ? (cnt * sxy - sx * sy) / denom : 0.0;
}

std::vector<AgilityPoint> value_of_agility_sweep(
    const std::vector<double>& drift_grid, const QueueEconomics& econ,
    const DriftChain& chain, const RiskModel& model,
    const SolverConfig& solver, const SimConfig& sim,
    const SafetySpec& safety, int threads) {
  if (drift_grid.empty())
    throw std::invalid_argument("value_of_agility_sweep: empty drift grid");
  std::vector<AgilityPoint> curve;
  for (double mult : drift_grid) {
    const DriftChain scaled = scale_drift_intensity(chain, mult);
    const PolicyComparison cmp =
        compare_policies(econ, scaled, model, solver, sim, safety, threads);
    AgilityPoint pt;
    pt.drift_multiplier = mult;
    pt.cost_st = cmp.st.mean.avg_total_cost;
    pt.cost_st_hw = cmp.st.half_width.avg_total_cost;
    pt.cost_odp = cmp.odp.mean.avg_total_cost;
    pt.cost_odp_hw = cmp.odp.half_width.avg_total_cost;
    pt.savings = cmp.savings;
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace hitlq
