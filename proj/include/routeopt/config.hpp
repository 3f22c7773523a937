#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "routeopt/behavior.hpp"
#include "routeopt/compliance_ml.hpp"
#include "routeopt/netcore.hpp"
#include "routeopt/recommender.hpp"
#include "routeopt/so_flow.hpp"

namespace routeopt::config {

struct NetworkConfig {
  int rows = 4;
  int cols = 4;
  std::uint64_t seed = 0;  // 0 = derive from the master seed
  net::AttrRanges ranges;
};

struct DemandConfig {
  std::vector<int> od_nodes = {1, 7, 8, 14};  // all ordered pairs become demands
  double rate = 0.33;                         // vehicles/second per OD pair

  std::vector<net::DemandSpec> demands() const;
};

struct MlConfig {
  int trees = 100;
  std::vector<ml::TreeParams> grid = {{12, 5, 0}, {8, 20, 0}};
  int history_days = 200;
  behavior::RecommendationPolicy policy = behavior::RecommendationPolicy::kUniformRandom;
};

struct SolverConfig {
  double so_tolerance = 1e-6;
  int so_max_iterations = 10000;
  soflow::StepRule so_step_rule = soflow::StepRule::kPairwise;
  int paths_per_od = 3;
  int ls_restarts = 8;
  std::uint64_t exact_budget = 1000000;
  rec::DeviationMode deviation = rec::DeviationMode::kAbsolute;
  double target_scale = 0.0;  // 0 = auto-calibrate total mass to the SO flow
  bool occupancy_includes_base_flow = true;
};

struct ExperimentConfig {
  int replications = 10;
  std::uint64_t master_seed = 12345;
  std::vector<std::string> scenarios = {"perfect", "known", "learned", "naive", "selfish"};
  std::string out_dir = "out";
};

struct ScenarioConfig {
  NetworkConfig network;
  DemandConfig demand;
  behavior::BehaviorParams behavior;
  MlConfig ml;
  SolverConfig solver;
  ExperimentConfig experiment;

  void validate() const;
};

// INI-style text with [network], [demand], [behavior], [ml], [solver] and
// [experiment] sections; keys missing from the file keep their defaults,
// unknown sections or keys are rejected.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);

// Canonical dump: fixed key order, lossless floats. Used both as the
// documented default config and as the config-hash input.
std::string dump_config(const ScenarioConfig& cfg);
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace routeopt::config
