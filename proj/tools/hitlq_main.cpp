#include "hitlq/certify.hpp"
#include "hitlq/errors.hpp"
#include "hitlq/io.hpp"
#include "hitlq/sim.hpp"
#include "hitlq/solver.hpp"
#include "hitlq/stability.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace hitlq;

namespace {

struct RunContext {
  ExperimentConfig cfg;
  fs::path dir;  // out/<config-hash>/
  int threads = 1;
};

RunContext make_context(const std::string& config_path,
                        const std::string& out_dir, long long seed_override,
                        int threads) {
  RunContext ctx;
  ctx.cfg = load_config(config_path);
  if (seed_override >= 0)
    ctx.cfg.sim.seed = static_cast<uint64_t>(seed_override);
  ctx.dir = fs::path(out_dir) / config_hash(ctx.cfg);
  fs::create_directories(ctx.dir);
  ctx.threads = threads;
  return ctx;
}

struct Solved {
  ValueTable values;
  ThresholdTable thresholds;
  bool from_cache = false;
};

// Reuses solution.csv from an earlier run of the same config when present.
Solved ensure_solution(const RunContext& ctx) {
  Solved s;
  const fs::path csv = ctx.dir / "solution.csv";
  if (fs::exists(csv) && fs::exists(ctx.dir / "manifest.json")) {
    const SolutionData data = read_solution_csv(csv);
    s.values.values = data.values;
    s.values.marginals = data.marginals;
    s.thresholds.thresholds = data.thresholds;
    s.from_cache = true;
    return s;
  }
  BetaPowerRisk law(ctx.cfg.risk, ctx.cfg.solver.s_grid_size);
  s.values = value_iteration(ctx.cfg.econ, ctx.cfg.chain, law, ctx.cfg.solver);
  s.thresholds = extract_thresholds(s.values, ctx.cfg.econ, law);
  write_solution_csv(csv, s.values, s.thresholds);
  write_manifest_json(ctx.dir / "manifest.json", ctx.cfg, s.values);
  return s;
}

void run_certifications(const RunContext& ctx, const Solved& s) {
  BetaPowerRisk law(ctx.cfg.risk, ctx.cfg.solver.s_grid_size);
  const auto convexity =
      verify_convexity(s.values, ctx.cfg.solver.convergence_tol);
  const auto congestion = verify_congestion_shedding(
      s.thresholds, law, ctx.cfg.solver.convergence_tol);
  const auto drift = verify_drift_monotonicity(
      s.thresholds, s.values, law, ctx.cfg.solver.convergence_tol);
  write_certification_json(ctx.dir / "certification.json", convexity,
                           congestion, drift);
  std::printf("convexity: %s\n", convexity.pass ? "pass" : "fail");
  std::printf("congestion shedding: %s\n", congestion.pass ? "pass" : "fail");
  std::printf("drift monotonicity: %s%s\n",
              drift.thresholds.pass ? "pass" : "fail",
              drift.assumption_holds ? "" : " (not guaranteed: immediate-risk "
                                            "dominance fails empirically)");
}

int cmd_solve(const RunContext& ctx) {
  const Solved s = ensure_solution(ctx);
  if (!s.from_cache)
    std::printf("solved in %ld sweeps, residual %.3g\n",
                s.values.iterations_used, s.values.final_residual);
  run_certifications(ctx, s);
  std::printf("outputs in %s\n", ctx.dir.string().c_str());
  return 0;
}

int cmd_certify(const RunContext& ctx) {
  const Solved s = ensure_solution(ctx);
  run_certifications(ctx, s);
  return 0;
}

int cmd_compare(const RunContext& ctx) {
  const fs::path csv = ctx.dir / "solution.csv";
  ThresholdTable cached;
  const ThresholdTable* odp = nullptr;
  if (fs::exists(csv)) {
    cached.thresholds = read_solution_csv(csv).thresholds;
    odp = &cached;
  }
  const PolicyComparison cmp =
      compare_policies(ctx.cfg.econ, ctx.cfg.chain, ctx.cfg.risk,
                       ctx.cfg.solver, ctx.cfg.sim, ctx.cfg.safety,
                       ctx.threads, odp);
  write_metrics_csv(ctx.dir / "metrics.csv",
                    {{"ST", &cmp.st}, {"DB", &cmp.db}, {"ODP", &cmp.odp}});
  write_summary_json(ctx.dir / "summary.json", cmp);
  write_static_curve_csv(ctx.dir / "static_curve.csv", cmp.static_curve);
  std::printf("best static threshold: %.2f\n", cmp.static_threshold);
  std::printf("avg cost/min  ST %.3f  DB %.3f  ODP %.3f\n",
              cmp.st.mean.avg_total_cost, cmp.db.mean.avg_total_cost,
              cmp.odp.mean.avg_total_cost);
  std::printf("ODP vs ST savings: %.1f%%\n", 100.0 * cmp.savings);
  std::printf("outputs in %s\n", ctx.dir.string().c_str());
  return 0;
}

int cmd_phase(const RunContext& ctx, int validate_cells) {
  if (!ctx.cfg.sweep || ctx.cfg.sweep->lambda_grid.empty() ||
      ctx.cfg.sweep->drift_grid.empty())
    throw ConfigError(
        "phase requires sweep.lambda_grid and sweep.drift_grid");
  BetaPowerRisk law(ctx.cfg.risk, ctx.cfg.solver.s_grid_size);
  const PhaseDiagram pd =
      phase_diagram(ctx.cfg.sweep->lambda_grid, ctx.cfg.sweep->drift_grid,
                    ctx.cfg.econ, ctx.cfg.chain, law, ctx.cfg.safety);
  write_phase_csv(ctx.dir / "phase.csv", pd);
  write_boundary_json(ctx.dir / "boundary.json", pd);
  std::printf("phase diagram: %zu cells, %zu boundary points\n",
              pd.cells.size(), pd.boundary.size());

  if (validate_cells > 0) {
    // Deterministically sample non-boundary cells on each side and check
    // the fixed-safety fluid behavior empirically. Cells within 5% of
    // capacity are skipped: there the drift is swamped by diffusion noise
    // at any realistic horizon.
    const double margin = 0.05 * ctx.cfg.econ.capacity();
    std::vector<const PhaseCell*> stable, unstable;
    for (const auto& c : pd.cells) {
      if (std::abs(c.headroom) < margin) continue;
      if (c.cls == Stability::stable) stable.push_back(&c);
      if (c.cls == Stability::unstable) unstable.push_back(&c);
    }
    Rng rng(Rng::substream(ctx.cfg.sim.seed, 0, 99));
    auto pick = [&](std::vector<const PhaseCell*>& pool, int n) {
      std::vector<const PhaseCell*> out;
      for (int i = 0; i < n && !pool.empty(); ++i) {
        const size_t idx = rng.next_u64() % pool.size();
        out.push_back(pool[idx]);
        pool.erase(pool.begin() + idx);
      }
      return out;
    };
    Vector tbar(ctx.cfg.chain.num_states());
    for (int t = 0; t < ctx.cfg.chain.num_states(); ++t)
      tbar[t] = safety_threshold(t, ctx.cfg.safety, law);
    const EscalationPolicy policy =
        EscalationPolicy::fixed_safety_policy(tbar);

    nlohmann::ordered_json verdicts = nlohmann::ordered_json::array();
    auto validate = [&](const PhaseCell* cell) {
      QueueEconomics econ = ctx.cfg.econ;
      econ.arrival_rate = cell->lambda;
      const DriftChain chain =
          scale_drift_intensity(ctx.cfg.chain, cell->drift_multiplier);
      SimConfig sc = ctx.cfg.sim;
      sc.n_replications = std::min(sc.n_replications, 10);
      if (sc.sample_interval <= 0.0) sc.sample_interval = 1.0;
      const Vector severe = severe_cutoffs(sc, ctx.cfg.safety, law);
      const auto stats = simulate(policy, econ, chain, ctx.cfg.risk, sc,
                                  severe, ctx.threads);
      std::vector<double> slopes;
      for (const auto& rep : stats.reps)
        slopes.push_back(
            linear_slope(rep.queue_samples, sc.sample_interval));
      double mean = 0, ss = 0;
      for (double s : slopes) mean += s;
      mean /= slopes.size();
      for (double s : slopes) ss += (s - mean) * (s - mean);
      const double hw = slopes.size() > 1
                            ? 1.96 * std::sqrt(ss / (slopes.size() - 1)) /
                                  std::sqrt(double(slopes.size()))
                            : 0.0;
      const bool grows = mean - hw > 0.0;
      verdicts.push_back(
          {{"lambda", cell->lambda},
           {"drift_multiplier", cell->drift_multiplier},
           {"class", to_string(cell->cls)},
           {"slope_mean", mean},
           {"slope_ci95", hw},
           {"empirical", grows ? "unstable" : "stable"},
           {"agrees", grows == (cell->cls == Stability::unstable)}});
    };
    for (const auto* c : pick(stable, validate_cells)) validate(c);
    for (const auto* c : pick(unstable, validate_cells)) validate(c);
    std::ofstream out(ctx.dir / "phase_validation.json");
    out << verdicts.dump(2) << "\n";
    std::printf("validated %zu cells\n", verdicts.size());
  }
  std::printf("outputs in %s\n", ctx.dir.string().c_str());
  return 0;
}

int cmd_agility(const RunContext& ctx) {
  if (!ctx.cfg.sweep || ctx.cfg.sweep->drift_grid.empty())
    throw ConfigError("agility requires sweep.drift_grid");
  const auto curve = value_of_agility_sweep(
      ctx.cfg.sweep->drift_grid, ctx.cfg.econ, ctx.cfg.chain, ctx.cfg.risk,
      ctx.cfg.solver, ctx.cfg.sim, ctx.cfg.safety, ctx.threads);
  write_agility_csv(ctx.dir / "agility.csv", curve);
  for (const auto& p : curve)
    std::printf("drift x%.2f: ST %.3f  ODP %.3f  savings %.1f%%\n",
                p.drift_multiplier, p.cost_st, p.cost_odp,
                100.0 * p.savings);
  std::printf("outputs in %s\n", ctx.dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic escalation control for human-in-the-loop queues"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  long long seed_override = -1;
  int threads = 1;
  int validate_cells = 0;
  app.add_option("--config", config_path, "experiment config file")
      ->required();
  app.add_option("--out", out_dir, "output directory root");
  app.add_option("--seed", seed_override, "override simulation seed");
  app.add_option("--threads", threads, "worker threads")
      ->check(CLI::PositiveNumber);

  auto* solve = app.add_subcommand(
      "solve", "solve the MDP, extract thresholds, certify structure");
  auto* compare =
      app.add_subcommand("compare", "benchmark ST/DB/ODP policies");
  auto* phase = app.add_subcommand("phase", "map the capacity phase diagram");
  phase->add_option("--validate", validate_cells,
                    "simulate the fixed-safety policy in N cells per side");
  auto* agility =
      app.add_subcommand("agility", "savings vs drift intensity sweep");
  auto* certify =
      app.add_subcommand("certify", "emit structural certification only");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunContext ctx =
        make_context(config_path, out_dir, seed_override, threads);
    if (solve->parsed()) return cmd_solve(ctx);
    if (compare->parsed()) return cmd_compare(ctx);
    if (phase->parsed()) return cmd_phase(ctx, validate_cells);
    if (agility->parsed()) return cmd_agility(ctx);
    if (certify->parsed()) return cmd_certify(ctx);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
