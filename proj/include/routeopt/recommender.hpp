#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "routeopt/behavior.hpp"
#include "routeopt/compliance_ml.hpp"
#include "routeopt/netcore.hpp"

namespace routeopt::rec {

// Case-split deviation model: the recommended path keeps mass phi_hat and
// every alternative shares (1 - phi_hat) / (K - 1) uniformly.
std::vector<double> compliance_distribution(double phi_hat, int num_candidates,
                                            int recommended_index);

enum class OracleKind { kPerfect, kKnown, kLearned };

// Compliance predictions phi[n][k]: probability that traveler n follows
// candidate k of their set when it is recommended.
struct ComplianceOracle {
  OracleKind kind = OracleKind::kPerfect;
  std::vector<std::vector<double>> phi;
};

ComplianceOracle perfect_oracle(const std::vector<behavior::Traveler>& travelers,
                                const net::PathTable& table);

// Ground-truth probabilities: the behavior model's softmax mass on the
// recommended path at the given edge times.
ComplianceOracle known_oracle(const net::Network& net, const net::PathTable& table,
                              const std::vector<behavior::Traveler>& travelers,
                              const std::vector<double>& edge_times);

ComplianceOracle learned_oracle(const net::Network& net, const net::PathTable& table,
                                const std::vector<behavior::Traveler>& travelers,
                                const ml::RandomForestModel& model);

// One recommendation per traveler, stored as an index into that
// traveler's candidate set.
struct Assignment {
  std::vector<int> choices;
  double objective = 0.0;
};

enum class DeviationMode { kAbsolute, kSquared };

// Route-allocation instance: per-traveler candidate sets with per-edge
// expected-count contributions, plus the occupancy targets to match.
struct AllocationProblem {
  std::vector<std::vector<int>> candidates;    // traveler -> global path ids
  std::vector<double> weights;                 // per traveler (flow share)
  ComplianceOracle oracle;
  std::vector<double> targets;                 // per edge, already scaled
  DeviationMode mode = DeviationMode::kAbsolute;

  // contributions[n][k]: sparse per-edge expected counts if k is
  // recommended to n (weights applied), sorted by edge id.
  std::vector<std::vector<std::vector<std::pair<int, double>>>> contributions;
  int num_edges = 0;

  int num_travelers() const { return static_cast<int>(candidates.size()); }
};

AllocationProblem build_allocation_problem(const std::vector<behavior::Traveler>& travelers,
                                           const net::PathTable& table, const net::Network& net,
                                           const ComplianceOracle& oracle,
                                           const std::vector<double>& targets,
                                           const std::vector<double>& weights,
                                           DeviationMode mode = DeviationMode::kAbsolute);

// E_e = sum_n sum_p phi_n(p|p^r_n) I(e in p). Weights default to one per
// traveler; pass flow shares to get expected edge flows instead of counts.
std::vector<double> expected_edge_counts(const AllocationProblem& problem,
                                         const std::vector<int>& choices);

double allocation_objective(const AllocationProblem& problem, const std::vector<int>& choices);

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Globally minimal assignment by exhaustive enumeration in lexicographic
// order (ties keep the lexicographically smallest choice vector). Throws
// BudgetExceeded when K^N exceeds `budget`; use solve_local_search then.
Assignment solve_exact(const AllocationProblem& problem, std::uint64_t budget = 1000000);

// Greedy sequential construction in seeded random order followed by
// best-improvement single-traveler swaps, best of `restarts` runs.
Assignment solve_local_search(const AllocationProblem& problem, std::uint64_t seed,
                              int restarts = 8);

// CSV export: traveler id, recommended path id, phi_hat, scenario tag.
std::string serialize_assignment(const AllocationProblem& problem, const Assignment& assignment,
                                 const std::vector<behavior::Traveler>& travelers,
                                 const std::string& tag);

}  // namespace routeopt::rec
