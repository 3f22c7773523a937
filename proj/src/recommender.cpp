#include "routeopt/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "routeopt/rng.hpp"
#include "routeopt/text_io.hpp"

namespace routeopt::rec {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double deviation(double target, double value, DeviationMode mode) {
  double d = target - value;
  return mode == DeviationMode::kAbsolute ? std::fabs(d) : d * d;
}

}  // namespace

std::vector<double> compliance_distribution(double phi_hat, int num_candidates,
                                            int recommended_index) {
  if (num_candidates < 2)
    throw std::invalid_argument("compliance_distribution: need at least two candidates");
  if (recommended_index < 0 || recommended_index >= num_candidates)
    throw std::invalid_argument("compliance_distribution: recommendation outside candidate set");
  phi_hat = clamp01(phi_hat);
  std::vector<double> dist(num_candidates, (1.0 - phi_hat) / (num_candidates - 1));
  dist[recommended_index] = phi_hat;
  return dist;
}

ComplianceOracle perfect_oracle(const std::vector<behavior::Traveler>& travelers,
                                const net::PathTable& table) {
  ComplianceOracle o;
  o.kind = OracleKind::kPerfect;
  o.phi.resize(travelers.size());
  for (size_t n = 0; n < travelers.size(); ++n)
    o.phi[n].assign(table.by_demand[travelers[n].demand_index].size(), 1.0);
  return o;
}

ComplianceOracle known_oracle(const net::Network& net, const net::PathTable& table,
                              const std::vector<behavior::Traveler>& travelers,
                              const std::vector<double>& edge_times) {
  ComplianceOracle o;
  o.kind = OracleKind::kKnown;
  o.phi.resize(travelers.size());
  for (size_t n = 0; n < travelers.size(); ++n) {
    const auto& candidates = table.by_demand[travelers[n].demand_index];
    o.phi[n].resize(candidates.size());
    for (size_t k = 0; k < candidates.size(); ++k) {
      auto probs = behavior::choice_probabilities(net, table, travelers[n], candidates,
                                                  candidates[k], edge_times);
      o.phi[n][k] = probs[k];
    }
  }
  return o;
}

ComplianceOracle learned_oracle(const net::Network& net, const net::PathTable& table,
                                const std::vector<behavior::Traveler>& travelers,
                                const ml::RandomForestModel& model) {
  ComplianceOracle o;
  o.kind = OracleKind::kLearned;
  o.phi.resize(travelers.size());
  for (size_t n = 0; n < travelers.size(); ++n) {
    const auto& candidates = table.by_demand[travelers[n].demand_index];
    o.phi[n].resize(candidates.size());
    for (size_t k = 0; k < candidates.size(); ++k) {
      auto x = ml::featurize_candidate(travelers[n], candidates, candidates[k], net, table,
                                       model.schema);
      o.phi[n][k] = clamp01(model.predict(x));
    }
  }
  return o;
}

AllocationProblem build_allocation_problem(const std::vector<behavior::Traveler>& travelers,
                                           const net::PathTable& table, const net::Network& net,
                                           const ComplianceOracle& oracle,
                                           const std::vector<double>& targets,
                                           const std::vector<double>& weights,
                                           DeviationMode mode) {
  if (oracle.phi.size() != travelers.size())
    throw std::invalid_argument("build_allocation_problem: oracle size mismatch");
  if (targets.size() != net.edges.size())
    throw std::invalid_argument("build_allocation_problem: target dimension mismatch");
  if (!weights.empty() && weights.size() != travelers.size())
    throw std::invalid_argument("build_allocation_problem: weight dimension mismatch");

  AllocationProblem p;
  p.oracle = oracle;
  p.targets = targets;
  p.mode = mode;
  p.num_edges = static_cast<int>(net.edges.size());
  p.candidates.resize(travelers.size());
  p.weights = weights.empty() ? std::vector<double>(travelers.size(), 1.0) : weights;
  p.contributions.resize(travelers.size());

  for (size_t n = 0; n < travelers.size(); ++n) {
    const auto& cands = table.by_demand[travelers[n].demand_index];
    if (cands.size() < 2)
      throw std::invalid_argument("build_allocation_problem: candidate set too small");
    p.candidates[n] = cands;
    p.contributions[n].resize(cands.size());
    for (size_t k = 0; k < cands.size(); ++k) {
      auto dist = compliance_distribution(oracle.phi[n][k], static_cast<int>(cands.size()),
                                          static_cast<int>(k));
      std::map<int, double> sparse;
      for (size_t j = 0; j < cands.size(); ++j) {
        double mass = p.weights[n] * dist[j];
        if (mass == 0.0) continue;
        for (int id : table.path(cands[j]).edge_ids) sparse[id] += mass;
      }
      p.contributions[n][k].assign(sparse.begin(), sparse.end());
    }
  }
  return p;
}

std::vector<double> expected_edge_counts(const AllocationProblem& problem,
                                         const std::vector<int>& choices) {
  if (choices.size() != problem.candidates.size())
    throw std::invalid_argument("expected_edge_counts: one choice per traveler required");
  std::vector<double> counts(problem.num_edges, 0.0);
  for (size_t n = 0; n < choices.size(); ++n) {
    if (choices[n] < 0 || choices[n] >= static_cast<int>(problem.candidates[n].size()))
      throw std::invalid_argument("expected_edge_counts: choice index out of range");
    for (const auto& [edge, mass] : problem.contributions[n][choices[n]]) counts[edge] += mass;
  }
  return counts;
}

double allocation_objective(const AllocationProblem& problem, const std::vector<int>& choices) {
  std::vector<double> counts = expected_edge_counts(problem, choices);
  double total = 0.0;
  for (int e = 0; e < problem.num_edges; ++e)
    total += deviation(problem.targets[e], counts[e], problem.mode);
  return total;
}

namespace {

// Expected counts plus the objective, with O(touched edges) swap updates.
struct ObjectiveState {
  const AllocationProblem& p;
  std::vector<double> expected;
  double objective = 0.0;

  explicit ObjectiveState(const AllocationProblem& problem)
      : p(problem), expected(problem.num_edges, 0.0) {
    for (int e = 0; e < p.num_edges; ++e)
      objective += deviation(p.targets[e], 0.0, p.mode);
  }

  void add(int n, int k, double sign) {
    for (const auto& [edge, mass] : p.contributions[n][k]) {
      objective -= deviation(p.targets[edge], expected[edge], p.mode);
      expected[edge] += sign * mass;
      objective += deviation(p.targets[edge], expected[edge], p.mode);
    }
  }

  // Objective change if traveler n switched from `from` (or nothing when
  // from < 0) to candidate `to`, without mutating the state.
  double swap_delta(int n, int from, int to) const {
    double delta = 0.0;
    const auto& add_vec = p.contributions[n][to];
    const auto* rem_vec = from >= 0 ? &p.contributions[n][from] : nullptr;
    size_t ia = 0, ir = 0;
    while (ia < add_vec.size() || (rem_vec && ir < rem_vec->size())) {
      int edge;
      double change = 0.0;
      bool take_add = ia < add_vec.size() &&
                      (!rem_vec || ir >= rem_vec->size() || add_vec[ia].first <= (*rem_vec)[ir].first);
      bool take_rem = rem_vec && ir < rem_vec->size() &&
                      (ia >= add_vec.size() || (*rem_vec)[ir].first <= add_vec[ia].first);
      if (take_add && take_rem && add_vec[ia].first == (*rem_vec)[ir].first) {
        edge = add_vec[ia].first;
        change = add_vec[ia].second - (*rem_vec)[ir].second;
        ++ia;
        ++ir;
      } else if (take_add) {
        edge = add_vec[ia].first;
        change = add_vec[ia].second;
        ++ia;
      } else {
        edge = (*rem_vec)[ir].first;
        change = -(*rem_vec)[ir].second;
        ++ir;
      }
      delta += deviation(p.targets[edge], expected[edge] + change, p.mode) -
               deviation(p.targets[edge], expected[edge], p.mode);
    }
    return delta;
  }
};

}  // namespace

Assignment solve_exact(const AllocationProblem& problem, std::uint64_t budget) {
  const int n_travelers = problem.num_travelers();
  if (n_travelers == 0) {
    Assignment a;
    a.objective = allocation_objective(problem, {});
    return a;
  }
  double combos = 1.0;
  for (int n = 0; n < n_travelers; ++n) {
    combos *= static_cast<double>(problem.candidates[n].size());
    if (combos > static_cast<double>(budget))
      throw BudgetExceeded(
          "solve_exact: enumeration budget exceeded (" + std::to_string(budget) +
          " assignments); use solve_local_search");
  }

  ObjectiveState state(problem);
  std::vector<int> current(n_travelers, 0);
  Assignment best;
  best.choices.assign(n_travelers, 0);
  best.objective = std::numeric_limits<double>::infinity();

  // Depth-first enumeration visits choice vectors in lexicographic order,
  // so keeping improvements beyond the tie tolerance yields the
  // lexicographically smallest optimum. Exact ties are common here: when
  // every candidate path of a traveler has the same edge count, swapping
  // its recommendation can leave the objective mathematically unchanged.
  std::function<void(int)> visit = [&](int n) {
    if (n == n_travelers) {
      if (state.objective < best.objective - 1e-9) {
        best.objective = state.objective;
        best.choices = current;
      }
      return;
    }
    for (int k = 0; k < static_cast<int>(problem.candidates[n].size()); ++k) {
      current[n] = k;
      state.add(n, k, 1.0);
      visit(n + 1);
      state.add(n, k, -1.0);
    }
  };
  visit(0);
  // Recompute from scratch so the reported value carries no accumulated
  // floating-point drift.
  best.objective = allocation_objective(problem, best.choices);
  return best;
}

Assignment solve_local_search(const AllocationProblem& problem, std::uint64_t seed, int restarts) {
  const int n_travelers = problem.num_travelers();
  if (restarts < 1) throw std::invalid_argument("solve_local_search: restarts must be >= 1");
  Assignment best;
  best.objective = std::numeric_limits<double>::infinity();
  if (n_travelers == 0) {
    best.objective = allocation_objective(problem, {});
    return best;
  }

  for (int r = 0; r < restarts; ++r) {
    SplitMix64 rng(derive_seed(seed, "restart", static_cast<std::uint64_t>(r)));
    std::vector<int> order(n_travelers);
    for (int i = 0; i < n_travelers; ++i) order[i] = i;
    for (int i = n_travelers; i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(static_cast<std::uint64_t>(i))]);

    // Greedy construction: each traveler takes the marginal-objective
    // minimizer given everyone placed so far.
    ObjectiveState state(problem);
    std::vector<int> choices(n_travelers, -1);
    for (int n : order) {
      int best_k = 0;
      double best_delta = std::numeric_limits<double>::infinity();
      for (int k = 0; k < static_cast<int>(problem.candidates[n].size()); ++k) {
        double d = state.swap_delta(n, -1, k);
        if (d < best_delta) {
          best_delta = d;
          best_k = k;
        }
      }
      choices[n] = best_k;
      state.add(n, best_k, 1.0);
    }

    // Best-improvement single-traveler swaps to local optimality.
    for (;;) {
      int swap_n = -1, swap_k = -1;
      double best_delta = -1e-12;
      for (int n = 0; n < n_travelers; ++n) {
        for (int k = 0; k < static_cast<int>(problem.candidates[n].size()); ++k) {
          if (k == choices[n]) continue;
          double d = state.swap_delta(n, choices[n], k);
          if (d < best_delta) {
            best_delta = d;
            swap_n = n;
            swap_k = k;
          }
        }
      }
      if (swap_n < 0) break;
      state.add(swap_n, choices[swap_n], -1.0);
      state.add(swap_n, swap_k, 1.0);
      choices[swap_n] = swap_k;
    }

    double exact_obj = allocation_objective(problem, choices);
    if (exact_obj < best.objective - 1e-12) {
      best.objective = exact_obj;
      best.choices = choices;
    }
  }
  return best;
}

std::string serialize_assignment(const AllocationProblem& problem, const Assignment& assignment,
                                 const std::vector<behavior::Traveler>& travelers,
                                 const std::string& tag) {
  std::ostringstream out;
  out << "traveler,recommended_path,phi_hat,scenario\n";
  for (size_t n = 0; n < assignment.choices.size(); ++n) {
    int k = assignment.choices[n];
    out << travelers[n].id << ',' << problem.candidates[n][k] << ','
        << fmt_double(problem.oracle.phi[n][k]) << ',' << tag << "\n";
  }
  return out.str();
}

}  // namespace routeopt::rec
