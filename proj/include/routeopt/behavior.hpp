#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "routeopt/netcore.hpp"

namespace routeopt::behavior {

// Ground-truth traveler model. Preference weights arise from two latent
// demographic coordinates per traveler: raw (risk, time, toll) weights are
// affine in the latents plus clipped Gaussian noise and normalized onto
// the simplex; the adherence weight is an affine map of the latents
// clamped to [0,1] and scaled by theta4_max.
struct BehaviorParams {
  double lambda = 14.0;       // softmax rationality; >= 0 (0 = uniform choice)
  double theta4_max = 2.0;    // adherence weight upper bound
  double noise_sigma = 0.1;

  // Raw preference weights before normalization: base + c1*l1 + c2*l2 + noise.
  // Time-dominant defaults; the second latent drives adherence steeply, so
  // populations split into habitual followers and predictable deviators.
  double risk_base = 0.1, risk_l1 = 0.3, risk_l2 = 0.0;
  double time_base = 1.0, time_l1 = -0.3, time_l2 = 0.0;
  double toll_base = 0.15, toll_l1 = 0.0, toll_l2 = 0.0;
  // Adherence: theta4_max * clamp01(base + c1*l1 + c2*l2 + noise).
  double adherence_base = -0.45, adherence_l1 = 0.0, adherence_l2 = 3.0;

  int n_per_demand = 25;

  std::map<std::string, std::string> as_map() const;
};

struct Traveler {
  int id = -1;
  int demand_index = -1;
  int origin = -1;
  int destination = -1;
  double latent1 = 0.0, latent2 = 0.0;  // observable demographic coordinates
  double theta_risk = 0.0, theta_time = 0.0, theta_toll = 0.0, theta_adherence = 0.0;
  double lambda = 5.0;  // per-traveler override of the global default
};

// One row of the historical dataset. `recommended` is -1 for runs without
// recommendations (those rows are never used for training).
struct ObservationRecord {
  int day = 0;
  int traveler_id = -1;
  int origin = -1;
  int destination = -1;
  double latent1 = 0.0, latent2 = 0.0;
  std::vector<int> candidate_ids;  // global path ids, >= 3 by default config
  int recommended = -1;
  int chosen = -1;
  int label = 0;  // 1 iff chosen == recommended
};

struct HistoryDataset {
  std::vector<ObservationRecord> records;
  std::map<std::string, std::string> provenance;  // regeneration inputs
};

enum class RecommendationPolicy { kUniformRandom, kShortestPath };

// Deterministic per seed; travelers are partitioned across demands with
// n_per_demand each and draw their latents from per-traveler sub-streams.
std::vector<Traveler> sample_population(const net::Network& net,
                                        const std::vector<net::DemandSpec>& demands,
                                        const BehaviorParams& params, std::uint64_t seed);

// Traveler cost of path p given per-edge travel times (seconds):
// sum_e [th1*risk + th2*t_e/t_e^max + th3*toll] + th4*[p != recommended].
// Pass recommended=false to drop the adherence term entirely.
double path_cost(const net::Network& net, const Traveler& t, const net::Path& p,
                 const std::vector<double>& edge_times, bool is_recommended,
                 bool adherence_enabled = true);

// Numerically safe softmax of -lambda*cost (max-subtraction).
std::vector<double> boltzmann(const std::vector<double>& costs, double lambda);

// Probability of each candidate path under the Boltzmann rule. `recommended`
// is a global path id within `candidates`, or -1 to disable adherence.
std::vector<double> choice_probabilities(const net::Network& net, const net::PathTable& table,
                                         const Traveler& t, const std::vector<int>& candidates,
                                         int recommended, const std::vector<double>& edge_times);

struct SimulationOptions {
  bool forced_adherence = false;   // every traveler takes the recommendation
  bool adherence_enabled = true;   // false: selfish choice over own cost only
};

struct DayResult {
  std::vector<ObservationRecord> records;
  std::vector<double> realized_edge_flow;  // chosen-path tally, alpha_m/n_per_demand each
};

// Samples every traveler's path independently from choice_probabilities at
// edge times t_e(base_flow + prior_controlled_flow). Pass an empty
// recommendations vector for unguided (selfish) days.
DayResult simulate_day(const net::Network& net, const net::PathTable& table,
                       const std::vector<net::DemandSpec>& demands,
                       const std::vector<Traveler>& travelers,
                       const std::vector<int>& recommendations,
                       const std::vector<double>& prior_controlled_flow, std::uint64_t seed,
                       const SimulationOptions& opts = {});

// Concatenates `days` independently sampled populations. Within-day edge
// times use the previous day's realized controlled flow (lagged; day 0
// sees base flow only). Provenance records every regeneration input.
HistoryDataset generate_history(const net::Network& net, const net::PathTable& table,
                                const std::vector<net::DemandSpec>& demands,
                                const BehaviorParams& params, int days,
                                RecommendationPolicy policy, std::uint64_t seed);

// CSV persistence with a schema version line and provenance comments.
std::string serialize_history(const HistoryDataset& ds);
HistoryDataset parse_history(const std::string& text);

}  // namespace routeopt::behavior
