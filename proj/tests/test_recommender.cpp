#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "routeopt/behavior.hpp"
#include "routeopt/netcore.hpp"
#include "routeopt/recommender.hpp"
#include "routeopt/rng.hpp"
#include "routeopt/text_io.hpp"

using namespace routeopt;
using namespace routeopt::net;
using namespace routeopt::behavior;
using namespace routeopt::rec;

namespace {

struct RecFixture {
  Network netw;
  std::vector<DemandSpec> demands;
  PathTable table;
  BehaviorParams params;

  RecFixture() {
    netw = build_grid(4, 4, 2024);
    for (int o : {1, 7, 8, 14})
      for (int d : {1, 7, 8, 14})
        if (o != d) demands.push_back({o, d, 0.33});
    table = build_path_table(netw, demands, 3);
    params.n_per_demand = 10;
  }

  std::vector<double> base_times() const {
    std::vector<double> t(netw.edges.size());
    for (size_t e = 0; e < t.size(); ++e) t[e] = bpr_time(netw.edges[e], netw.base_flow[e]);
    return t;
  }

  std::vector<Traveler> population(std::uint64_t seed, int count) const {
    auto pop = sample_population(netw, demands, params, seed);
    pop.resize(count);
    return pop;
  }

  // Uniform targets sized to the expected count scale.
  std::vector<double> toy_targets(double value) const {
    return std::vector<double>(netw.edges.size(), value);
  }
};

// An independent second enumeration pass, structured differently from
// solve_exact: odometer iteration with from-scratch objective evaluation.
Assignment enumerate_all(const AllocationProblem& p) {
  Assignment best;
  const int n = p.num_travelers();
  std::vector<int> choice(n, 0);
  best.objective = std::numeric_limits<double>::infinity();
  for (;;) {
    double obj = allocation_objective(p, choice);
    if (obj < best.objective - 1e-9) {
      best.objective = obj;
      best.choices = choice;
    }
    int i = n - 1;
    while (i >= 0 && choice[i] + 1 == static_cast<int>(p.candidates[i].size())) {
      choice[i] = 0;
      --i;
    }
    if (i < 0) break;
    choice[i]++;
  }
  return best;
}

}  // namespace

TEST_CASE("compliance distribution case split") {
  SUBCASE("point mass at full compliance") {
    auto d = compliance_distribution(1.0, 3, 0);
    CHECK(d[0] == 1.0);
    CHECK(d[1] == 0.0);
    CHECK(d[2] == 0.0);
  }
  SUBCASE("partial compliance splits the remainder evenly") {
    auto d = compliance_distribution(0.7, 3, 0);
    CHECK(d[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(d[2] == doctest::Approx(0.15).epsilon(1e-15));
  }
  SUBCASE("phi equal to 1/K collapses to uniform") {
    auto d = compliance_distribution(0.25, 4, 2);
    for (double v : d) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("property sweep: valid distribution for all phi and K") {
    for (int k_count = 2; k_count <= 6; ++k_count) {
      for (int step = 0; step <= 100; ++step) {
        double phi = step / 100.0;
        for (int rec_idx = 0; rec_idx < k_count; ++rec_idx) {
          auto d = compliance_distribution(phi, k_count, rec_idx);
          double sum = 0.0;
          for (double v : d) {
            CHECK(v >= 0.0);
            sum += v;
          }
          CHECK(std::fabs(sum - 1.0) <= 1e-12);
          CHECK(d[rec_idx] == doctest::Approx(phi).epsilon(1e-15));
        }
      }
    }
  }
  CHECK_THROWS(compliance_distribution(0.5, 1, 0));
  CHECK_THROWS(compliance_distribution(0.5, 3, 3));
}

TEST_CASE("oracle variants") {
  RecFixture f;
  auto pop = f.population(1, 12);
  auto times = f.base_times();

  auto perfect = perfect_oracle(pop, f.table);
  for (const auto& row : perfect.phi)
    for (double v : row) CHECK(v == 1.0);

  auto known = known_oracle(f.netw, f.table, pop, times);
  for (size_t n = 0; n < pop.size(); ++n) {
    const auto& cands = f.table.by_demand[pop[n].demand_index];
    for (size_t k = 0; k < cands.size(); ++k) {
      auto probs = choice_probabilities(f.netw, f.table, pop[n], cands, cands[k], times);
      CHECK(known.phi[n][k] == probs[k]);
      CHECK(known.phi[n][k] > 0.0);
      CHECK(known.phi[n][k] < 1.0);
    }
  }
}

TEST_CASE("expected counts: perfect oracle equals recommended tally") {
  RecFixture f;
  auto pop = f.population(3, 8);
  auto oracle = perfect_oracle(pop, f.table);
  auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(1.0), {});
  std::vector<int> choices(pop.size());
  SplitMix64 rng(17);
  for (size_t n = 0; n < pop.size(); ++n)
    choices[n] = static_cast<int>(rng.next_below(problem.candidates[n].size()));

  auto counts = expected_edge_counts(problem, choices);
  std::vector<double> tally(f.netw.edges.size(), 0.0);
  for (size_t n = 0; n < pop.size(); ++n)
    for (int id : f.table.path(problem.candidates[n][choices[n]]).edge_ids) tally[id] += 1.0;
  for (size_t e = 0; e < tally.size(); ++e)
    CHECK(counts[e] == doctest::Approx(tally[e]).epsilon(1e-12));
}

TEST_CASE("expected counts: single traveler hand oracle") {
  RecFixture f;
  auto pop = f.population(5, 1);
  ComplianceOracle oracle;
  oracle.kind = OracleKind::kKnown;
  oracle.phi = {{0.7, 0.7, 0.7}};
  auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.0), {});
  auto counts = expected_edge_counts(problem, {0});

  // Membership pattern enumeration: an edge on the recommended path gets
  // 0.7 plus 0.15 per alternative that also uses it; an edge on only
  // alternatives gets 0.15 each.
  const auto& cands = problem.candidates[0];
  for (size_t e = 0; e < counts.size(); ++e) {
    bool on0 = false, on1 = false, on2 = false;
    auto on = [&](int c) {
      const auto& ids = f.table.path(cands[c]).edge_ids;
      return std::find(ids.begin(), ids.end(), static_cast<int>(e)) != ids.end();
    };
    on0 = on(0);
    on1 = on(1);
    on2 = on(2);
    double expect = 0.7 * on0 + 0.15 * on1 + 0.15 * on2;
    CHECK(counts[e] == doctest::Approx(expect).epsilon(1e-12));
    bool member = std::fabs(counts[e] - 0.0) < 1e-12 || std::fabs(counts[e] - 0.15) < 1e-12 ||
                  std::fabs(counts[e] - 0.3) < 1e-12 || std::fabs(counts[e] - 0.7) < 1e-12 ||
                  std::fabs(counts[e] - 0.85) < 1e-12 || std::fabs(counts[e] - 1.0) < 1e-12;
    CHECK(member);
  }
}

TEST_CASE("expected counts are additive across travelers") {
  RecFixture f;
  auto pop = f.population(7, 2);
  auto times = f.base_times();
  auto oracle = known_oracle(f.netw, f.table, pop, times);
  auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.0), {});

  auto both = expected_edge_counts(problem, {1, 2});
  auto first = build_allocation_problem({pop[0]}, f.table, f.netw,
                                        ComplianceOracle{oracle.kind, {oracle.phi[0]}},
                                        f.toy_targets(0.0), {});
  auto second = build_allocation_problem({pop[1]}, f.table, f.netw,
                                         ComplianceOracle{oracle.kind, {oracle.phi[1]}},
                                         f.toy_targets(0.0), {});
  auto a = expected_edge_counts(first, {1});
  auto b = expected_edge_counts(second, {2});
  for (size_t e = 0; e < both.size(); ++e)
    CHECK(both[e] == doctest::Approx(a[e] + b[e]).epsilon(1e-12));
}

TEST_CASE("allocation objective basics") {
  RecFixture f;
  auto pop = f.population(9, 4);
  auto oracle = perfect_oracle(pop, f.table);

  SUBCASE("zero travelers leave the target sum") {
    auto problem = build_allocation_problem({}, f.table, f.netw,
                                            ComplianceOracle{OracleKind::kPerfect, {}},
                                            f.toy_targets(2.5), {});
    CHECK(allocation_objective(problem, {}) ==
          doctest::Approx(2.5 * f.netw.edges.size()).epsilon(1e-12));
  }

  SUBCASE("exact match gives zero and recompute oracle agrees") {
    auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.0), {});
    std::vector<int> choices(pop.size(), 0);
    auto counts = expected_edge_counts(problem, choices);
    AllocationProblem matched = problem;
    matched.targets = counts;
    CHECK(allocation_objective(matched, choices) == 0.0);

    // Independent elementwise |.| summation.
    double manual = 0.0;
    for (size_t e = 0; e < counts.size(); ++e) manual += std::fabs(0.0 - counts[e]);
    CHECK(allocation_objective(problem, choices) == doctest::Approx(manual).epsilon(1e-12));
  }

  SUBCASE("permutation of travelers leaves the objective unchanged") {
    auto times = f.base_times();
    auto known = known_oracle(f.netw, f.table, pop, times);
    auto problem = build_allocation_problem(pop, f.table, f.netw, known, f.toy_targets(1.0), {});
    std::vector<int> choices = {0, 1, 2, 1};
    double obj = allocation_objective(problem, choices);

    std::vector<Traveler> perm = {pop[2], pop[0], pop[3], pop[1]};
    ComplianceOracle perm_oracle{known.kind,
                                 {known.phi[2], known.phi[0], known.phi[3], known.phi[1]}};
    auto perm_problem =
        build_allocation_problem(perm, f.table, f.netw, perm_oracle, f.toy_targets(1.0), {});
    std::vector<int> perm_choices = {2, 0, 1, 1};
    CHECK(allocation_objective(perm_problem, perm_choices) == doctest::Approx(obj).epsilon(1e-12));
  }

  SUBCASE("squared deviation mode") {
    auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.5), {},
                                            DeviationMode::kSquared);
    std::vector<int> choices(pop.size(), 0);
    auto counts = expected_edge_counts(problem, choices);
    double manual = 0.0;
    for (size_t e = 0; e < counts.size(); ++e)
      manual += (0.5 - counts[e]) * (0.5 - counts[e]);
    CHECK(allocation_objective(problem, choices) == doctest::Approx(manual).epsilon(1e-12));
  }
}

TEST_CASE("solve_exact single traveler and realizable targets") {
  RecFixture f;
  auto pop = f.population(11, 1);
  auto times = f.base_times();
  auto oracle = known_oracle(f.netw, f.table, pop, times);
  auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.1), {});

  auto exact = solve_exact(problem);
  REQUIRE(exact.choices.size() == 1);
  double best = std::numeric_limits<double>::infinity();
  int best_k = -1;
  for (int k = 0; k < 3; ++k) {
    double obj = allocation_objective(problem, {k});
    if (obj < best - 1e-9) {  // ties keep the lexicographically first choice
      best = obj;
      best_k = k;
    }
  }
  CHECK(exact.choices[0] == best_k);
  CHECK(exact.objective == doctest::Approx(best).epsilon(1e-12));

  // Perfect oracle with targets equal to some tally reaches objective 0.
  auto perfect = perfect_oracle(pop, f.table);
  auto p2 = build_allocation_problem(pop, f.table, f.netw, perfect, f.toy_targets(0.0), {});
  auto realizable = expected_edge_counts(p2, {2});
  p2.targets = realizable;
  auto hit = solve_exact(p2);
  CHECK(hit.objective == 0.0);
  CHECK(hit.choices[0] == 2);
}

TEST_CASE("solve_exact equals an independent enumeration on N=6") {
  RecFixture f;
  auto times = f.base_times();
  for (std::uint64_t seed : {100ULL, 200ULL, 300ULL}) {
    auto pop = f.population(seed, 6);
    auto oracle = known_oracle(f.netw, f.table, pop, times);
    // Targets from a random perfect-tally instance keep the scale natural.
    auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.4), {});
    auto exact = solve_exact(problem);
    auto brute = enumerate_all(problem);
    CHECK(exact.objective == doctest::Approx(brute.objective).epsilon(1e-12));
    CHECK(exact.choices == brute.choices);
  }
}

TEST_CASE("solve_exact budget contract") {
  RecFixture f;
  auto pop = f.population(13, 20);
  auto oracle = perfect_oracle(pop, f.table);
  auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.0), {});
  CHECK_THROWS_AS(solve_exact(problem, 1000), BudgetExceeded);
}

TEST_CASE("local search matches exact on small instances") {
  RecFixture f;
  auto times = f.base_times();
  int equal = 0;
  const int instances = 12;
  for (int i = 0; i < instances; ++i) {
    auto pop = f.population(1000 + i, 7);
    auto oracle = known_oracle(f.netw, f.table, pop, times);
    auto problem =
        build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.35), {});
    auto exact = solve_exact(problem);
    auto local = solve_local_search(problem, 42 + i, 8);
    CHECK(local.objective >= exact.objective - 1e-9);
    CHECK(local.objective <= exact.objective * 1.02 + 1e-9);
    if (std::fabs(local.objective - exact.objective) <= 1e-9) ++equal;
  }
  CHECK(equal >= (instances * 4) / 5);
}

TEST_CASE("local search coincides with exact for one traveler") {
  RecFixture f;
  auto pop = f.population(17, 1);
  auto times = f.base_times();
  auto oracle = known_oracle(f.netw, f.table, pop, times);
  auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.2), {});
  auto exact = solve_exact(problem);
  auto local = solve_local_search(problem, 5, 1);
  CHECK(local.choices == exact.choices);
  CHECK(local.objective == doctest::Approx(exact.objective).epsilon(1e-12));
}

TEST_CASE("incremental objective equals full recomputation") {
  RecFixture f;
  auto pop = f.population(19, 40);
  auto times = f.base_times();
  auto oracle = known_oracle(f.netw, f.table, pop, times);
  std::vector<double> weights(pop.size(), 0.033);
  auto problem =
      build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.15), weights);
  auto local = solve_local_search(problem, 7, 4);
  // solve_local_search reports a from-scratch objective; cross-check the
  // returned choices independently.
  CHECK(local.objective == doctest::Approx(allocation_objective(problem, local.choices))
                               .epsilon(1e-12));
  CHECK(std::fabs(local.objective - allocation_objective(problem, local.choices)) <= 1e-9);
}

TEST_CASE("assignment export format") {
  RecFixture f;
  auto pop = f.population(23, 3);
  auto oracle = perfect_oracle(pop, f.table);
  auto problem = build_allocation_problem(pop, f.table, f.netw, oracle, f.toy_targets(0.0), {});
  Assignment a;
  a.choices = {0, 1, 2};
  auto csv = serialize_assignment(problem, a, pop, "perfect");
  auto lines = routeopt::split(csv, '\n');
  CHECK(lines[0] == "traveler,recommended_path,phi_hat,scenario");
  CHECK(lines.size() == 5);  // header + 3 rows + trailing newline
  CHECK(lines[1].find("perfect") != std::string::npos);
}
