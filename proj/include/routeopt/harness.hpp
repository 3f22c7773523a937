#pragma once

#include <optional>
#include <string>
#include <vector>

#include "routeopt/behavior.hpp"
#include "routeopt/compliance_ml.hpp"
#include "routeopt/config.hpp"
#include "routeopt/netcore.hpp"
#include "routeopt/recommender.hpp"
#include "routeopt/so_flow.hpp"

namespace routeopt::harness {

enum class Scenario { kPerfect, kKnown, kLearned, kNaive, kSelfish };

Scenario scenario_from_string(const std::string& tag);
std::string scenario_name(Scenario s);

// Work products shared by every scenario of a comparison batch: network,
// demands, candidate paths, the SO solution with its occupancy targets,
// and (when a learned scenario is requested) the trained compliance model.
struct SharedContext {
  config::ScenarioConfig cfg;
  net::Network network;
  std::vector<net::DemandSpec> demands;
  net::PathTable table;
  soflow::PathFlowSolution so;
  soflow::TargetOccupancy occupancy;
  double target_scale = 1.0;           // kappa applied to L* for planning
  std::vector<double> scaled_targets;  // kappa * L*
  std::vector<double> base_times;      // t_e at base flow (evaluation-day times)

  std::optional<ml::RandomForestModel> model;
  std::optional<ml::EvalReport> model_eval;
  std::optional<behavior::HistoryDataset> history;
};

// Builds everything the listed scenarios need. Seeds derive from
// (master seed, stage label), so the context is identical however many
// scenarios are requested.
SharedContext build_shared_context(const config::ScenarioConfig& cfg, bool need_model);

struct ReplicationRecord {
  int replication = 0;
  // Planner-side allocation objective under the scenario's own oracle;
  // NaN for selfish routing, which plans nothing.
  double obj_value = 0.0;
  // Same assignment evaluated under the ground-truth (known) oracle.
  double obj_value_true = 0.0;
  double flow_diff = 0.0;    // sum_e |kappa L*_e - realized flow_e|
  double travel_time = 0.0;  // total system time at realized flows
};

struct MetricAggregate {
  double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
};

struct ScenarioResult {
  Scenario scenario = Scenario::kPerfect;
  std::vector<ReplicationRecord> replications;
  std::vector<double> mean_expected_flow;  // planner expectation, per edge
  std::vector<double> mean_realized_flow;  // simulated outcome, per edge

  MetricAggregate obj_value() const;
  MetricAggregate obj_value_true() const;
  MetricAggregate flow_diff() const;
  MetricAggregate travel_time() const;
};

// Runs one scenario for every replication. Replication r draws the same
// population and choice randomness in every scenario (shared seeds), so
// cross-scenario comparisons are paired.
ScenarioResult run_scenario(const SharedContext& ctx, Scenario scenario);

struct ComparisonBatch {
  SharedContext context;
  std::vector<ScenarioResult> results;
};

// Full pipeline for cfg.experiment.scenarios over shared work products.
ComparisonBatch compare_scenarios(const config::ScenarioConfig& cfg);

MetricAggregate aggregate(const std::vector<double>& values);

}  // namespace routeopt::harness
