#include "routeopt/compliance_ml.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "routeopt/rng.hpp"
#include "routeopt/text_io.hpp"

namespace routeopt::ml {

namespace {

constexpr double kProbClip = 1e-12;

double log_loss_term(int label, double p) {
  p = std::min(1.0 - kProbClip, std::max(kProbClip, p));
  return label ? -std::log(p) : -std::log(1.0 - p);
}

int one_hot_index(const std::vector<int>& ids, int value, const char* what) {
  auto it = std::lower_bound(ids.begin(), ids.end(), value);
  if (it == ids.end() || *it != value)
    throw std::invalid_argument(std::string("featurize: unknown ") + what + " node " +
                                std::to_string(value));
  return static_cast<int>(it - ids.begin());
}

// Run fn(i) for i in [0, n) on a few threads; work is independent and
// lands in index-addressed slots, so scheduling cannot affect results.
void parallel_for(int n, const std::function<void(int)>& fn) {
  unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(), 8);
  if (workers <= 1 || n < 4) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> names;
  for (int id : origin_ids) names.push_back("origin_" + std::to_string(id));
  for (int id : destination_ids) names.push_back("destination_" + std::to_string(id));
  names.push_back("latent1");
  names.push_back("latent2");
  names.push_back("rec_length");
  names.push_back("rec_free_flow_time");
  names.push_back("rec_toll");
  names.push_back("rec_mean_risk");
  names.push_back("rec_edge_count");
  names.push_back("rec_rank");
  return names;
}

FeatureSchema schema_from_demands(const std::vector<net::DemandSpec>& demands) {
  std::set<int> origins, dests;
  for (const auto& d : demands) {
    origins.insert(d.origin);
    dests.insert(d.destination);
  }
  FeatureSchema s;
  s.origin_ids.assign(origins.begin(), origins.end());
  s.destination_ids.assign(dests.begin(), dests.end());
  return s;
}

namespace {

std::vector<double> encode(int origin, int destination, double l1, double l2,
                           const std::vector<int>& candidates, int recommended,
                           const net::Network& netw, const net::PathTable& table,
                           const FeatureSchema& schema) {
  std::vector<double> x(static_cast<size_t>(schema.dimension()), 0.0);
  size_t off = 0;
  x[off + one_hot_index(schema.origin_ids, origin, "origin")] = 1.0;
  off += schema.origin_ids.size();
  x[off + one_hot_index(schema.destination_ids, destination, "destination")] = 1.0;
  off += schema.destination_ids.size();
  x[off++] = l1;
  x[off++] = l2;

  const net::Path& rec = table.path(recommended);
  double length = 0.0, t0 = 0.0, toll = 0.0, risk = 0.0;
  for (int id : rec.edge_ids) {
    const net::Edge& e = netw.edges[id];
    length += e.length;
    t0 += e.free_flow_time;
    toll += e.toll;
    risk += e.risk;
  }
  int rank = 0;
  bool found = false;
  for (int id : candidates) {
    if (id == recommended) {
      found = true;
      continue;
    }
    if (table.path(id).free_flow_time(netw) < t0) ++rank;
  }
  if (!found) throw std::invalid_argument("featurize: recommended path not in candidate set");

  x[off++] = length;
  x[off++] = t0;
  x[off++] = toll;
  x[off++] = risk / static_cast<double>(rec.edge_ids.size());
  x[off++] = static_cast<double>(rec.edge_ids.size());
  x[off++] = static_cast<double>(rank);
  return x;
}

}  // namespace

std::vector<double> featurize(const behavior::ObservationRecord& record, const net::Network& net,
                              const net::PathTable& table, const FeatureSchema& schema) {
  if (record.recommended < 0)
    throw std::invalid_argument("featurize: record has no recommendation");
  return encode(record.origin, record.destination, record.latent1, record.latent2,
                record.candidate_ids, record.recommended, net, table, schema);
}

std::vector<double> featurize_candidate(const behavior::Traveler& traveler,
                                        const std::vector<int>& candidates, int recommended,
                                        const net::Network& net, const net::PathTable& table,
                                        const FeatureSchema& schema) {
  return encode(traveler.origin, traveler.destination, traveler.latent1, traveler.latent2,
                candidates, recommended, net, table, schema);
}

SplitIndices split_dataset(const behavior::HistoryDataset& ds, std::uint64_t seed) {
  const int n = static_cast<int>(ds.records.size());
  if (n < 10) throw std::invalid_argument("split_dataset: need at least 10 records");

  const int train_quota = static_cast<int>(std::floor(0.6 * n));
  const int val_quota = static_cast<int>(std::floor(0.2 * n));

  // Group records by OD pair and shuffle each group.
  std::map<std::pair<int, int>, std::vector<int>> groups;
  for (int i = 0; i < n; ++i)
    groups[{ds.records[i].origin, ds.records[i].destination}].push_back(i);
  {
    SplitMix64 rng(derive_seed(seed, "split-shuffle"));
    for (auto& [od, idx] : groups) {
      for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.next_below(i)]);
    }
  }

  // Largest-remainder apportionment of each quota across groups, with one
  // record per split pre-reserved for groups of size >= 3 when the quotas
  // allow it.
  struct Alloc {
    std::pair<int, int> od;
    int size = 0;
    int train = 0, val = 0;
  };
  std::vector<Alloc> allocs;
  for (auto& [od, idx] : groups) allocs.push_back({od, static_cast<int>(idx.size()), 0, 0});

  int reservable = 0;
  for (auto& a : allocs)
    if (a.size >= 3) ++reservable;
  const bool reserve = train_quota >= reservable && val_quota >= reservable &&
                       (n - train_quota - val_quota) >= reservable;

  auto apportion = [&](int quota, auto get, auto set, auto capacity) {
    int assigned = 0;
    std::vector<std::pair<double, size_t>> remainders;
    for (size_t g = 0; g < allocs.size(); ++g) {
      double share = quota * static_cast<double>(allocs[g].size) / n;
      int base = static_cast<int>(std::floor(share));
      base = std::min(base, capacity(allocs[g]));
      set(allocs[g], base);
      assigned += base;
      remainders.push_back({share - base, g});
    }
    // Deterministic order: larger remainder first, then OD pair.
    std::sort(remainders.begin(), remainders.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return allocs[a.second].od < allocs[b.second].od;
    });
    size_t cursor = 0;
    while (assigned < quota && cursor < 4 * remainders.size()) {
      auto& a = allocs[remainders[cursor % remainders.size()].second];
      if (get(a) < capacity(a)) {
        set(a, get(a) + 1);
        ++assigned;
      }
      ++cursor;
    }
    if (assigned != quota) throw std::runtime_error("split_dataset: apportionment failed");
  };

  // Capacities keep room for the reserved singles of the other splits.
  apportion(
      train_quota, [](const Alloc& a) { return a.train; },
      [](Alloc& a, int v) { a.train = v; },
      [&](const Alloc& a) { return reserve && a.size >= 3 ? a.size - 2 : a.size; });
  apportion(
      val_quota, [](const Alloc& a) { return a.val; }, [](Alloc& a, int v) { a.val = v; },
      [&](const Alloc& a) {
        int room = a.size - a.train;
        return reserve && a.size >= 3 ? std::min(room, a.size - a.train - 1) : room;
      });

  if (reserve) {
    // Guarantee at least one record per split for groups of size >= 3 by
    // shifting surplus between this group's splits; totals stay fixed by
    // compensating through the largest available donor group.
    auto donate = [&](auto get, auto set, auto room) {
      for (auto& a : allocs) {
        if (a.size < 3 || get(a) > 0) continue;
        for (auto& b : allocs) {
          if (&b == &a) continue;
          if (get(b) > (b.size >= 3 ? 1 : 0) && room(a) >= 2) {
            set(b, get(b) - 1);
            set(a, get(a) + 1);
            break;
          }
        }
      }
    };
    donate([](const Alloc& a) { return a.train; }, [](Alloc& a, int v) { a.train = v; },
           [](const Alloc& a) { return a.size - a.train - a.val; });
    donate([](const Alloc& a) { return a.val; }, [](Alloc& a, int v) { a.val = v; },
           [](const Alloc& a) { return a.size - a.train - a.val; });
  }

  SplitIndices out;
  for (const Alloc& a : allocs) {
    const auto& idx = groups[a.od];
    int cursor = 0;
    for (int i = 0; i < a.train; ++i) out.train.push_back(idx[cursor++]);
    for (int i = 0; i < a.val; ++i) out.validation.push_back(idx[cursor++]);
    while (cursor < a.size) out.evaluation.push_back(idx[cursor++]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.evaluation.begin(), out.evaluation.end());
  if (static_cast<int>(out.train.size()) != train_quota ||
      static_cast<int>(out.validation.size()) != val_quota)
    throw std::runtime_error("split_dataset: size contract violated");
  return out;
}

double DecisionTree::predict(const std::vector<double>& x) const {
  int node = 0;
  for (;;) {
    const TreeNode& nd = nodes[node];
    if (nd.feature < 0) return nd.fraction;
    node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
}

namespace {

struct TreeBuilder {
  const std::vector<std::vector<double>>& features;
  const std::vector<int>& labels;
  const TreeParams& params;
  int dimension;
  int features_per_split;
  SplitMix64 rng;
  std::vector<TreeNode> nodes;

  int build(std::vector<int>& idx, int depth) {
    int positives = 0;
    for (int i : idx) positives += labels[i];
    const int n = static_cast<int>(idx.size());

    auto make_leaf = [&]() {
      TreeNode leaf;
      leaf.feature = -1;
      leaf.fraction = n > 0 ? static_cast<double>(positives) / n : 0.0;
      leaf.count = n;
      nodes.push_back(leaf);
      return static_cast<int>(nodes.size() - 1);
    };

    if (depth >= params.max_depth || n < 2 * params.min_leaf || positives == 0 || positives == n)
      return make_leaf();

    // Random feature subset (partial Fisher-Yates, consumed in node order).
    std::vector<int> feats(dimension);
    for (int i = 0; i < dimension; ++i) feats[i] = i;
    for (int i = 0; i < features_per_split; ++i) {
      int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(dimension - i)));
      std::swap(feats[i], feats[j]);
    }
    feats.resize(features_per_split);
    std::sort(feats.begin(), feats.end());

    const double parent_gini =
        1.0 - std::pow(static_cast<double>(positives) / n, 2.0) -
        std::pow(static_cast<double>(n - positives) / n, 2.0);

    double best_score = parent_gini - 1e-12;  // require strict improvement
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, int>> column(n);
    for (int f : feats) {
      for (int i = 0; i < n; ++i) column[i] = {features[idx[i]][f], labels[idx[i]]};
      std::sort(column.begin(), column.end());
      int left_pos = 0;
      for (int i = 0; i + 1 < n; ++i) {
        left_pos += column[i].second;
        if (column[i].first == column[i + 1].first) continue;
        int nl = i + 1, nr = n - nl;
        if (nl < params.min_leaf || nr < params.min_leaf) continue;
        double pl = static_cast<double>(left_pos) / nl;
        double pr = static_cast<double>(positives - left_pos) / nr;
        double gini_l = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl);
        double gini_r = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr);
        double score = (nl * gini_l + nr * gini_r) / n;
        if (score < best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return make_leaf();

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(idx.size());
    right_idx.reserve(idx.size());
    for (int i : idx)
      (features[i][best_feature] <= best_threshold ? left_idx : right_idx).push_back(i);
    if (left_idx.empty() || right_idx.empty()) return make_leaf();

    int self = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[self].feature = best_feature;
    nodes[self].threshold = best_threshold;
    int l = build(left_idx, depth + 1);
    int r = build(right_idx, depth + 1);
    nodes[self].left = l;
    nodes[self].right = r;
    return self;
  }
};

}  // namespace

DecisionTree train_tree(const std::vector<std::vector<double>>& features,
                        const std::vector<int>& labels, const std::vector<int>& sample_indices,
                        const TreeParams& params, int dimension, std::uint64_t seed) {
  if (sample_indices.empty()) throw std::invalid_argument("train_tree: empty subsample");
  int fps = params.features_per_split > 0
                ? std::min(params.features_per_split, dimension)
                : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dimension))));
  TreeBuilder builder{features, labels, params, dimension, fps, SplitMix64(seed), {}};
  std::vector<int> idx = sample_indices;
  builder.build(idx, 0);
  DecisionTree tree;
  tree.nodes = std::move(builder.nodes);
  return tree;
}

double RandomForestModel::predict(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != schema.dimension())
    throw std::invalid_argument("predict: feature dimension mismatch with model schema");
  double sum = 0.0;
  for (const DecisionTree& t : trees) sum += t.predict(x);
  return sum / static_cast<double>(trees.size());
}

RandomForestModel train_forest(const std::vector<std::vector<double>>& features,
                               const std::vector<int>& labels, const std::vector<int>& train_idx,
                               const std::vector<int>& val_idx, const FeatureSchema& schema,
                               const ForestParams& params, std::uint64_t seed) {
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train_forest: train and validation sets must be nonempty");
  if (params.num_trees < 1 || params.grid.empty())
    throw std::invalid_argument("train_forest: bad forest parameters");

  RandomForestModel best;
  bool have_best = false;
  for (size_t g = 0; g < params.grid.size(); ++g) {
    std::vector<DecisionTree> trees(params.num_trees);
    // Tree seeds depend only on the tree index, so every grid point sees
    // the same bootstrap draws and grid points differ by tree params alone.
    parallel_for(params.num_trees, [&](int t) {
      std::uint64_t tree_seed = derive_seed(seed, "forest-tree", static_cast<std::uint64_t>(t));
      SplitMix64 boot(derive_seed(tree_seed, "bootstrap"));
      std::vector<int> sample(train_idx.size());
      for (size_t i = 0; i < sample.size(); ++i)
        sample[i] = train_idx[boot.next_below(train_idx.size())];
      trees[t] = train_tree(features, labels, sample, params.grid[g],
                            schema.dimension(), derive_seed(tree_seed, "growth"));
    });

    double loss = 0.0;
    for (int i : val_idx) {
      double p = 0.0;
      for (const DecisionTree& t : trees) p += t.predict(features[i]);
      p /= params.num_trees;
      loss += log_loss_term(labels[i], p);
    }
    loss /= static_cast<double>(val_idx.size());

    if (!have_best || loss < best.validation_log_loss) {
      have_best = true;
      best.schema = schema;
      best.chosen_params = params.grid[g];
      best.num_trees = params.num_trees;
      best.training_seed = seed;
      best.validation_log_loss = loss;
      best.trees = std::move(trees);
    }
  }
  return best;
}

double predict_compliance(const RandomForestModel& model, const behavior::ObservationRecord& record,
                          const net::Network& net, const net::PathTable& table) {
  return model.predict(featurize(record, net, table, model.schema));
}

EvalReport evaluate(const RandomForestModel& model, const behavior::HistoryDataset& ds,
                    const std::vector<int>& eval_idx, const net::Network& net,
                    const net::PathTable& table) {
  if (eval_idx.empty()) throw std::invalid_argument("evaluate: empty evaluation set");
  EvalReport rep;
  rep.calibration.resize(10);
  for (int b = 0; b < 10; ++b) {
    rep.calibration[b].lo = b / 10.0;
    rep.calibration[b].hi = (b + 1) / 10.0;
  }
  std::vector<double> bin_pred_sum(10, 0.0);
  std::vector<int> bin_pos(10, 0);

  double loss = 0.0;
  for (int i : eval_idx) {
    const auto& r = ds.records[static_cast<size_t>(i)];
    double p = predict_compliance(model, r, net, table);
    int predicted = p > 0.5 ? 1 : 0;
    if (predicted == 1 && r.label == 1) rep.true_positive++;
    if (predicted == 1 && r.label == 0) rep.false_positive++;
    if (predicted == 0 && r.label == 0) rep.true_negative++;
    if (predicted == 0 && r.label == 1) rep.false_negative++;
    loss += log_loss_term(r.label, p);

    int b = std::min(9, static_cast<int>(p * 10.0));
    rep.calibration[b].count++;
    bin_pred_sum[b] += p;
    bin_pos[b] += r.label;
  }
  rep.accuracy = static_cast<double>(rep.true_positive + rep.true_negative) /
                 static_cast<double>(eval_idx.size());
  rep.log_loss = loss / static_cast<double>(eval_idx.size());
  for (int b = 0; b < 10; ++b) {
    if (rep.calibration[b].count > 0) {
      rep.calibration[b].mean_predicted = bin_pred_sum[b] / rep.calibration[b].count;
      rep.calibration[b].empirical_rate =
          static_cast<double>(bin_pos[b]) / rep.calibration[b].count;
    }
  }
  return rep;
}

std::string serialize_model(const RandomForestModel& model) {
  std::ostringstream out;
  out << "routeopt-forest v1\n";
  auto join_ids = [](const std::vector<int>& ids) {
    std::vector<std::string> s;
    s.reserve(ids.size());
    for (int v : ids) s.push_back(std::to_string(v));
    return join(s, ',');
  };
  out << "origins " << join_ids(model.schema.origin_ids) << "\n";
  out << "destinations " << join_ids(model.schema.destination_ids) << "\n";
  out << "params max_depth=" << model.chosen_params.max_depth
      << " min_leaf=" << model.chosen_params.min_leaf
      << " features_per_split=" << model.chosen_params.features_per_split << "\n";
  out << "num_trees " << model.num_trees << "\n";
  out << "training_seed " << model.training_seed << "\n";
  out << "validation_log_loss " << fmt_double(model.validation_log_loss) << "\n";
  for (const DecisionTree& t : model.trees) {
    out << "tree " << t.nodes.size() << "\n";
    for (const TreeNode& nd : t.nodes) {
      if (nd.feature < 0)
        out << "leaf " << fmt_double(nd.fraction) << ' ' << nd.count << "\n";
      else
        out << "split " << nd.feature << ' ' << fmt_double(nd.threshold) << ' ' << nd.left << ' '
            << nd.right << "\n";
    }
  }
  return out.str();
}

RandomForestModel parse_model(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "routeopt-forest v1")
    throw std::runtime_error("parse_model: unrecognized header");
  RandomForestModel model;
  auto parse_ids = [](const std::string& csv) {
    std::vector<int> out;
    for (const std::string& s : split(csv, ','))
      if (!s.empty()) out.push_back(static_cast<int>(parse_long(s)));
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "origins") {
      std::string rest;
      ls >> rest;
      model.schema.origin_ids = parse_ids(rest);
    } else if (tok == "destinations") {
      std::string rest;
      ls >> rest;
      model.schema.destination_ids = parse_ids(rest);
    } else if (tok == "params") {
      std::string kv;
      while (ls >> kv) {
        auto eq = kv.find('=');
        std::string key = kv.substr(0, eq);
        int value = static_cast<int>(parse_long(kv.substr(eq + 1)));
        if (key == "max_depth") model.chosen_params.max_depth = value;
        if (key == "min_leaf") model.chosen_params.min_leaf = value;
        if (key == "features_per_split") model.chosen_params.features_per_split = value;
      }
    } else if (tok == "num_trees") {
      ls >> model.num_trees;
    } else if (tok == "training_seed") {
      ls >> model.training_seed;
    } else if (tok == "validation_log_loss") {
      std::string v;
      ls >> v;
      model.validation_log_loss = parse_double(v);
    } else if (tok == "tree") {
      size_t count;
      ls >> count;
      DecisionTree tree;
      tree.nodes.reserve(count);
      for (size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("parse_model: truncated tree");
        std::istringstream ns(line);
        std::string kind;
        ns >> kind;
        TreeNode nd;
        if (kind == "leaf") {
          std::string frac;
          ns >> frac >> nd.count;
          nd.fraction = parse_double(frac);
          nd.feature = -1;
        } else if (kind == "split") {
          std::string thr;
          ns >> nd.feature >> thr >> nd.left >> nd.right;
          nd.threshold = parse_double(thr);
        } else {
          throw std::runtime_error("parse_model: bad node line: " + line);
        }
        tree.nodes.push_back(nd);
      }
      model.trees.push_back(std::move(tree));
    } else {
      throw std::runtime_error("parse_model: unexpected token '" + tok + "'");
    }
  }
  if (static_cast<int>(model.trees.size()) != model.num_trees)
    throw std::runtime_error("parse_model: tree count mismatch");
  return model;
}

}  // namespace routeopt::ml
