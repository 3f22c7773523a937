#include "routeopt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "routeopt/rng.hpp"

namespace routeopt::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double deviation_sum(const std::vector<double>& targets, const std::vector<double>& values,
                     rec::DeviationMode mode) {
  double total = 0.0;
  for (size_t e = 0; e < targets.size(); ++e) {
    double d = targets[e] - values[e];
    total += mode == rec::DeviationMode::kAbsolute ? std::fabs(d) : d * d;
  }
  return total;
}

}  // namespace

Scenario scenario_from_string(const std::string& tag) {
  if (tag == "perfect") return Scenario::kPerfect;
  if (tag == "known") return Scenario::kKnown;
  if (tag == "learned") return Scenario::kLearned;
  if (tag == "naive") return Scenario::kNaive;
  if (tag == "selfish") return Scenario::kSelfish;
  throw std::invalid_argument("unknown scenario tag '" + tag + "'");
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kPerfect: return "perfect";
    case Scenario::kKnown: return "known";
    case Scenario::kLearned: return "learned";
    case Scenario::kNaive: return "naive";
    case Scenario::kSelfish: return "selfish";
  }
  return "?";
}

SharedContext build_shared_context(const config::ScenarioConfig& cfg, bool need_model) {
  cfg.validate();
  SharedContext ctx;
  ctx.cfg = cfg;
  const std::uint64_t master = cfg.experiment.master_seed;

  std::uint64_t net_seed =
      cfg.network.seed != 0 ? cfg.network.seed : derive_seed(master, "network");
  ctx.network = net::build_grid(cfg.network.rows, cfg.network.cols, net_seed, cfg.network.ranges);
  ctx.demands = cfg.demand.demands();
  ctx.table = net::build_path_table(ctx.network, ctx.demands, cfg.solver.paths_per_od);

  soflow::SolverOptions so_opts;
  so_opts.tolerance = cfg.solver.so_tolerance;
  so_opts.max_iterations = cfg.solver.so_max_iterations;
  so_opts.step_rule = cfg.solver.so_step_rule;
  ctx.so = soflow::solve_so(ctx.network, ctx.demands, ctx.table, so_opts);
  ctx.occupancy = soflow::occupancy_targets(ctx.network, ctx.so.edge_flows,
                                            cfg.solver.occupancy_includes_base_flow);

  // Planner targets: kappa * L*. The auto scale matches the targets' total
  // mass to the SO flow so occupancy-shaped targets compare against the
  // flow-unit expected counts.
  if (cfg.solver.target_scale > 0.0) {
    ctx.target_scale = cfg.solver.target_scale;
  } else {
    double flow_sum = 0.0, occ_sum = 0.0;
    for (size_t e = 0; e < ctx.so.edge_flows.size(); ++e) {
      flow_sum += ctx.so.edge_flows[e];
      occ_sum += ctx.occupancy.counts[e];
    }
    ctx.target_scale = occ_sum > 0.0 ? flow_sum / occ_sum : 1.0;
  }
  ctx.scaled_targets.resize(ctx.occupancy.counts.size());
  for (size_t e = 0; e < ctx.scaled_targets.size(); ++e)
    ctx.scaled_targets[e] = ctx.target_scale * ctx.occupancy.counts[e];

  ctx.base_times.resize(ctx.network.edges.size());
  for (size_t e = 0; e < ctx.base_times.size(); ++e)
    ctx.base_times[e] = net::bpr_time(ctx.network.edges[e], ctx.network.base_flow[e]);

  if (need_model) {
    ctx.history = behavior::generate_history(ctx.network, ctx.table, ctx.demands, cfg.behavior,
                                             cfg.ml.history_days, cfg.ml.policy,
                                             derive_seed(master, "history"));
    auto schema = ml::schema_from_demands(ctx.demands);
    std::vector<std::vector<double>> feats;
    std::vector<int> labels;
    feats.reserve(ctx.history->records.size());
    for (const auto& r : ctx.history->records) {
      feats.push_back(ml::featurize(r, ctx.network, ctx.table, schema));
      labels.push_back(r.label);
    }
    auto split = ml::split_dataset(*ctx.history, derive_seed(master, "split"));
    ml::ForestParams fp;
    fp.num_trees = cfg.ml.trees;
    fp.grid = cfg.ml.grid;
    ctx.model = ml::train_forest(feats, labels, split.train, split.validation, schema, fp,
                                 derive_seed(master, "forest"));
    ctx.model_eval = ml::evaluate(*ctx.model, *ctx.history, split.evaluation, ctx.network,
                                  ctx.table);
  }
  return ctx;
}

namespace {

struct ScenarioRun {
  std::vector<int> recommendations;  // global path ids; empty for selfish
  double obj_value = kNaN;
  double obj_value_true = kNaN;
  std::vector<double> expected_flow;  // planner expectation, flow units
};

ScenarioRun plan_scenario(const SharedContext& ctx, Scenario scenario,
                          const std::vector<behavior::Traveler>& travelers, int replication) {
  const auto& cfg = ctx.cfg;
  ScenarioRun run;
  run.expected_flow.assign(ctx.network.edges.size(), 0.0);
  if (scenario == Scenario::kSelfish) return run;

  std::vector<double> weights(travelers.size());
  for (size_t n = 0; n < travelers.size(); ++n)
    weights[n] =
        ctx.demands[travelers[n].demand_index].rate / static_cast<double>(cfg.behavior.n_per_demand);

  // The naive recommender reuses the perfect-compliance plan.
  const bool plan_as_perfect =
      scenario == Scenario::kPerfect || scenario == Scenario::kNaive;
  rec::ComplianceOracle oracle;
  if (plan_as_perfect) {
    oracle = rec::perfect_oracle(travelers, ctx.table);
  } else if (scenario == Scenario::kKnown) {
    oracle = rec::known_oracle(ctx.network, ctx.table, travelers, ctx.base_times);
  } else {
    if (!ctx.model)
      throw std::runtime_error("learned scenario requires a trained compliance model");
    oracle = rec::learned_oracle(ctx.network, ctx.table, travelers, *ctx.model);
  }

  auto problem = rec::build_allocation_problem(travelers, ctx.table, ctx.network, oracle,
                                               ctx.scaled_targets, weights,
                                               cfg.solver.deviation);

  // Deterministic per scenario and replication; the naive plan shares the
  // perfect plan's seed label so the two scenarios act on one assignment.
  const std::string label =
      "solver-" + scenario_name(plan_as_perfect ? Scenario::kPerfect : scenario);
  std::uint64_t solver_seed = derive_seed(cfg.experiment.master_seed, label,
                                          static_cast<std::uint64_t>(replication));

  double combos = 1.0;
  bool within_budget = true;
  for (const auto& cands : problem.candidates) {
    combos *= static_cast<double>(cands.size());
    if (combos > static_cast<double>(cfg.solver.exact_budget)) {
      within_budget = false;
      break;
    }
  }
  rec::Assignment assignment =
      within_budget ? rec::solve_exact(problem, cfg.solver.exact_budget)
                    : rec::solve_local_search(problem, solver_seed, cfg.solver.ls_restarts);

  run.obj_value = assignment.objective;
  run.expected_flow = rec::expected_edge_counts(problem, assignment.choices);

  // The same plan scored under the ground-truth compliance model.
  auto truth = rec::known_oracle(ctx.network, ctx.table, travelers, ctx.base_times);
  auto truth_problem = rec::build_allocation_problem(travelers, ctx.table, ctx.network, truth,
                                                     ctx.scaled_targets, weights,
                                                     cfg.solver.deviation);
  run.obj_value_true = rec::allocation_objective(truth_problem, assignment.choices);

  run.recommendations.resize(travelers.size());
  for (size_t n = 0; n < travelers.size(); ++n)
    run.recommendations[n] = problem.candidates[n][assignment.choices[n]];
  return run;
}

}  // namespace

MetricAggregate ScenarioResult::obj_value() const {
  std::vector<double> v;
  for (const auto& r : replications) v.push_back(r.obj_value);
  return aggregate(v);
}
MetricAggregate ScenarioResult::obj_value_true() const {
  std::vector<double> v;
  for (const auto& r : replications) v.push_back(r.obj_value_true);
  return aggregate(v);
}
MetricAggregate ScenarioResult::flow_diff() const {
  std::vector<double> v;
  for (const auto& r : replications) v.push_back(r.flow_diff);
  return aggregate(v);
}
MetricAggregate ScenarioResult::travel_time() const {
  std::vector<double> v;
  for (const auto& r : replications) v.push_back(r.travel_time);
  return aggregate(v);
}

MetricAggregate aggregate(const std::vector<double>& values) {
  MetricAggregate a;
  if (values.empty()) return a;
  if (std::any_of(values.begin(), values.end(), [](double v) { return std::isnan(v); })) {
    a.mean = a.stddev = a.min = a.max = kNaN;
    return a;
  }
  double sum = 0.0;
  a.min = values[0];
  a.max = values[0];
  for (double v : values) {
    sum += v;
    a.min = std::min(a.min, v);
    a.max = std::max(a.max, v);
  }
  a.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

ScenarioResult run_scenario(const SharedContext& ctx, Scenario scenario) {
  const auto& cfg = ctx.cfg;
  if (scenario == Scenario::kLearned && !ctx.model)
    throw std::runtime_error("run_scenario: learned scenario requires a context with a model");

  ScenarioResult result;
  result.scenario = scenario;
  result.mean_expected_flow.assign(ctx.network.edges.size(), 0.0);
  result.mean_realized_flow.assign(ctx.network.edges.size(), 0.0);

  const int reps = cfg.experiment.replications;
  for (int r = 0; r < reps; ++r) {
    // Population and choice randomness are shared across scenarios.
    auto pop = behavior::sample_population(
        ctx.network, ctx.demands, cfg.behavior,
        derive_seed(cfg.experiment.master_seed, "population", static_cast<std::uint64_t>(r)));

    ScenarioRun plan = plan_scenario(ctx, scenario, pop, r);

    behavior::SimulationOptions opts;
    opts.forced_adherence = scenario == Scenario::kPerfect;
    opts.adherence_enabled = scenario != Scenario::kSelfish;
    auto day = behavior::simulate_day(
        ctx.network, ctx.table, ctx.demands, pop, plan.recommendations, {},
        derive_seed(cfg.experiment.master_seed, "simulate", static_cast<std::uint64_t>(r)), opts);

    ReplicationRecord rec_row;
    rec_row.replication = r;
    rec_row.obj_value = plan.obj_value;
    rec_row.obj_value_true = plan.obj_value_true;
    rec_row.flow_diff =
        deviation_sum(ctx.scaled_targets, day.realized_edge_flow, cfg.solver.deviation);
    rec_row.travel_time = net::total_system_time(ctx.network, day.realized_edge_flow);
    result.replications.push_back(rec_row);

    for (size_t e = 0; e < ctx.network.edges.size(); ++e) {
      result.mean_expected_flow[e] += plan.expected_flow[e] / reps;
      result.mean_realized_flow[e] += day.realized_edge_flow[e] / reps;
    }
  }
  return result;
}

ComparisonBatch compare_scenarios(const config::ScenarioConfig& cfg) {
  if (cfg.experiment.scenarios.size() < 1)
    throw std::invalid_argument("compare_scenarios: no scenarios configured");
  bool need_model = false;
  std::vector<Scenario> scenarios;
  for (const std::string& tag : cfg.experiment.scenarios) {
    scenarios.push_back(scenario_from_string(tag));
    if (scenarios.back() == Scenario::kLearned) need_model = true;
  }
  ComparisonBatch batch;
  batch.context = build_shared_context(cfg, need_model);
  for (Scenario s : scenarios) batch.results.push_back(run_scenario(batch.context, s));
  return batch;
}

}  // namespace routeopt::harness
