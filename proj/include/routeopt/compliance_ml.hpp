#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "routeopt/behavior.hpp"
#include "routeopt/netcore.hpp"

namespace routeopt::ml {

// Fixed feature encoding: one-hot origin, one-hot destination, the two
// latent coordinates, then attributes of the recommended path (total
// length, total free-flow time, total toll, mean edge risk, edge count,
// free-flow-time rank within the candidate set).
struct FeatureSchema {
  std::vector<int> origin_ids;       // sorted
  std::vector<int> destination_ids;  // sorted

  int dimension() const {
    return static_cast<int>(origin_ids.size() + destination_ids.size()) + 2 + 6;
  }
  std::vector<std::string> feature_names() const;
};

FeatureSchema schema_from_demands(const std::vector<net::DemandSpec>& demands);

// Deterministic encoding of one observation; throws on unknown path ids
// or OD nodes missing from the schema.
std::vector<double> featurize(const behavior::ObservationRecord& record, const net::Network& net,
                              const net::PathTable& table, const FeatureSchema& schema);

// Same encoding for a hypothetical recommendation (candidate position k).
std::vector<double> featurize_candidate(const behavior::Traveler& traveler,
                                        const std::vector<int>& candidates, int recommended,
                                        const net::Network& net, const net::PathTable& table,
                                        const FeatureSchema& schema);

struct SplitIndices {
  std::vector<int> train, validation, evaluation;
};

// 60/20/20 split with exact global sizes (floor(0.6N), floor(0.2N),
// remainder), stratified by (origin, destination) so every OD pair with
// at least 3 records lands in all three splits. Deterministic per seed.
SplitIndices split_dataset(const behavior::HistoryDataset& ds, std::uint64_t seed);

struct TreeParams {
  int max_depth = 12;
  int min_leaf = 5;
  int features_per_split = 0;  // 0 = ceil(sqrt(d))
};

// Flat binary tree; leaves store the compliance fraction of their
// training subsample.
struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0.0; // go left when x[feature] <= threshold
  int left = -1, right = -1;
  double fraction = 0.0;  // leaf payload
  int count = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at index 0
  double predict(const std::vector<double>& x) const;
};

// Greedy CART growth minimizing weighted Gini impurity over a random
// feature subset per node; stops on max_depth, min_leaf or purity.
DecisionTree train_tree(const std::vector<std::vector<double>>& features,
                        const std::vector<int>& labels, const std::vector<int>& sample_indices,
                        const TreeParams& params, int dimension, std::uint64_t seed);

struct ForestParams {
  int num_trees = 100;
  std::vector<TreeParams> grid = {{12, 5, 0}, {8, 20, 0}};
};

struct RandomForestModel {
  FeatureSchema schema;
  TreeParams chosen_params;
  int num_trees = 0;
  std::uint64_t training_seed = 0;
  double validation_log_loss = 0.0;
  std::vector<DecisionTree> trees;

  double predict(const std::vector<double>& x) const;  // mean of tree outputs
};

// Trains num_trees trees per grid point on bootstrap resamples of the
// training rows and keeps the grid point with minimal validation
// log-loss. Deterministic per seed; trees train in parallel with
// index-derived sub-seeds.
RandomForestModel train_forest(const std::vector<std::vector<double>>& features,
                               const std::vector<int>& labels, const std::vector<int>& train_idx,
                               const std::vector<int>& val_idx, const FeatureSchema& schema,
                               const ForestParams& params, std::uint64_t seed);

// phi_hat(z, p^r): forest mean for a record's feature encoding.
double predict_compliance(const RandomForestModel& model, const behavior::ObservationRecord& record,
                          const net::Network& net, const net::PathTable& table);

struct CalibrationBin {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  double mean_predicted = 0.0;
  double empirical_rate = 0.0;
};

struct EvalReport {
  int true_positive = 0, false_positive = 0, true_negative = 0, false_negative = 0;
  double accuracy = 0.0;
  double log_loss = 0.0;
  std::vector<CalibrationBin> calibration;  // 10 bins on predicted probability

  int total() const { return true_positive + false_positive + true_negative + false_negative; }
};

EvalReport evaluate(const RandomForestModel& model, const behavior::HistoryDataset& ds,
                    const std::vector<int>& eval_idx, const net::Network& net,
                    const net::PathTable& table);

// Structured-text model persistence (schema, hyperparameters, flattened
// tree arrays); lossless round-trip.
std::string serialize_model(const RandomForestModel& model);
RandomForestModel parse_model(const std::string& text);

}  // namespace routeopt::ml
