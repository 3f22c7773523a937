#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "routeopt/config.hpp"
#include "routeopt/harness.hpp"
#include "routeopt/report.hpp"
#include "routeopt/rng.hpp"
#include "routeopt/text_io.hpp"

using namespace routeopt;
using namespace routeopt::harness;

namespace {

// Small, fast configuration used throughout these tests.
config::ScenarioConfig tiny_config() {
  config::ScenarioConfig cfg;
  cfg.behavior.n_per_demand = 4;
  cfg.ml.history_days = 6;
  cfg.ml.trees = 10;
  cfg.ml.grid = {{8, 5, 0}};
  cfg.experiment.replications = 2;
  cfg.experiment.master_seed = 555;
  return cfg;
}

}  // namespace

TEST_CASE("config parse, dump and validation") {
  config::ScenarioConfig defaults;
  auto text = config::dump_config(defaults);
  auto back = config::parse_config(text);
  CHECK(config::dump_config(back) == text);
  CHECK(config::config_hash(back) == config::config_hash(defaults));

  auto cfg = config::parse_config("[network]\nrows = 5\n[behavior]\nlambda = 3.5\n");
  CHECK(cfg.network.rows == 5);
  CHECK(cfg.behavior.lambda == 3.5);
  CHECK(cfg.network.cols == 4);  // untouched default

  CHECK_THROWS(config::parse_config("[nope]\nx = 1\n"));
  CHECK_THROWS(config::parse_config("[network]\nbogus_key = 1\n"));
  CHECK_THROWS(config::parse_config("[network]\nrows = 1\n"));
  CHECK_THROWS(config::parse_config("[experiment]\nscenarios = perfect,wat\n"));
  CHECK_THROWS(config::parse_config("stray = 1\n"));

  // Demand expansion: 4 nodes -> 12 ordered pairs.
  CHECK(defaults.demand.demands().size() == 12);
}

TEST_CASE("scenario tags") {
  CHECK(scenario_from_string("perfect") == Scenario::kPerfect);
  CHECK(scenario_name(Scenario::kSelfish) == "selfish");
  CHECK_THROWS(scenario_from_string("optimal"));
}

TEST_CASE("shared context work products") {
  auto cfg = tiny_config();
  auto ctx = build_shared_context(cfg, false);
  CHECK(ctx.network.edges.size() == 48);
  CHECK(ctx.so.converged);
  CHECK(ctx.so.gap <= cfg.solver.so_tolerance);
  CHECK_FALSE(ctx.model.has_value());

  // Occupancy targets are zero exactly where SO flow is zero.
  for (size_t e = 0; e < ctx.so.edge_flows.size(); ++e) {
    if (ctx.so.edge_flows[e] == 0.0)
      CHECK(ctx.occupancy.counts[e] == 0.0);
    else
      CHECK(ctx.occupancy.counts[e] > 0.0);
  }

  // Auto target scale matches total masses.
  double target_sum = 0.0, flow_sum = 0.0;
  for (size_t e = 0; e < ctx.scaled_targets.size(); ++e) {
    target_sum += ctx.scaled_targets[e];
    flow_sum += ctx.so.edge_flows[e];
  }
  CHECK(target_sum == doctest::Approx(flow_sum).epsilon(1e-9));
}

TEST_CASE("perfect scenario identity and determinism") {
  auto cfg = tiny_config();
  auto ctx = build_shared_context(cfg, false);
  auto result = run_scenario(ctx, Scenario::kPerfect);
  REQUIRE(result.replications.size() == 2);
  for (const auto& r : result.replications) {
    // Forced adherence: realized flows equal the recommended tally, so the
    // realized deviation equals the planner objective.
    CHECK(r.flow_diff == doctest::Approx(r.obj_value).epsilon(1e-9));
    CHECK(std::isfinite(r.travel_time));
  }

  auto again = run_scenario(ctx, Scenario::kPerfect);
  for (size_t i = 0; i < result.replications.size(); ++i) {
    CHECK(again.replications[i].obj_value == result.replications[i].obj_value);
    CHECK(again.replications[i].flow_diff == result.replications[i].flow_diff);
    CHECK(again.replications[i].travel_time == result.replications[i].travel_time);
  }
}

TEST_CASE("selfish scenario plans nothing") {
  auto cfg = tiny_config();
  auto ctx = build_shared_context(cfg, false);
  auto result = run_scenario(ctx, Scenario::kSelfish);
  for (const auto& r : result.replications) {
    CHECK(std::isnan(r.obj_value));
    CHECK(std::isnan(r.obj_value_true));
    CHECK(r.flow_diff > 0.0);
  }
  auto agg = result.obj_value();
  CHECK(std::isnan(agg.mean));
}

TEST_CASE("naive shares the perfect plan but realizes worse flows") {
  auto cfg = tiny_config();
  auto ctx = build_shared_context(cfg, false);
  auto perfect = run_scenario(ctx, Scenario::kPerfect);
  auto naive = run_scenario(ctx, Scenario::kNaive);
  for (size_t i = 0; i < perfect.replications.size(); ++i) {
    CHECK(naive.replications[i].obj_value ==
          doctest::Approx(perfect.replications[i].obj_value).epsilon(1e-12));
    CHECK(naive.replications[i].flow_diff >= perfect.replications[i].flow_diff - 1e-9);
  }
}

TEST_CASE("scenario execution order does not change results") {
  auto cfg = tiny_config();
  auto ctx = build_shared_context(cfg, false);
  auto selfish_first = run_scenario(ctx, Scenario::kSelfish);
  auto known_a = run_scenario(ctx, Scenario::kKnown);
  auto ctx2 = build_shared_context(cfg, false);
  auto known_b = run_scenario(ctx2, Scenario::kKnown);
  auto selfish_second = run_scenario(ctx2, Scenario::kSelfish);
  for (size_t i = 0; i < known_a.replications.size(); ++i) {
    CHECK(known_a.replications[i].obj_value == known_b.replications[i].obj_value);
    CHECK(known_a.replications[i].travel_time == known_b.replications[i].travel_time);
    CHECK(selfish_first.replications[i].travel_time ==
          selfish_second.replications[i].travel_time);
  }
}

TEST_CASE("aggregates satisfy min <= mean <= max") {
  auto cfg = tiny_config();
  cfg.experiment.replications = 4;
  auto ctx = build_shared_context(cfg, false);
  for (Scenario s : {Scenario::kKnown, Scenario::kNaive, Scenario::kSelfish}) {
    auto result = run_scenario(ctx, s);
    for (auto agg : {result.flow_diff(), result.travel_time()}) {
      CHECK(agg.min <= agg.mean + 1e-12);
      CHECK(agg.mean <= agg.max + 1e-12);
      CHECK(agg.stddev >= 0.0);
    }
  }
}

TEST_CASE("learned scenario requires the model") {
  auto cfg = tiny_config();
  auto ctx = build_shared_context(cfg, false);
  CHECK_THROWS(run_scenario(ctx, Scenario::kLearned));
  auto ctx2 = build_shared_context(cfg, true);
  CHECK(ctx2.model.has_value());
  CHECK(ctx2.model_eval.has_value());
  auto result = run_scenario(ctx2, Scenario::kLearned);
  CHECK(result.replications.size() == 2);
  for (const auto& r : result.replications) CHECK(std::isfinite(r.obj_value));
}

TEST_CASE("emit_report writes the pinned schema and is reproducible") {
  auto cfg = tiny_config();
  cfg.experiment.scenarios = {"perfect", "selfish"};
  auto batch = compare_scenarios(cfg);

  auto dir = std::filesystem::temp_directory_path() / "routeopt_report_test";
  std::filesystem::remove_all(dir);
  auto files = report::emit_report(batch, dir.string());
  CHECK(files.size() >= 6);

  auto comparison = read_file((dir / "comparison.csv").string());
  auto lines = split(comparison, '\n');
  REQUIRE(lines.size() >= 4);
  CHECK(lines[0].rfind("# config_hash=", 0) == 0);
  CHECK(lines[1] ==
        "scenario,obj_value_mean,obj_value_std,flow_diff_mean,flow_diff_std,travel_time_mean,"
        "travel_time_std");
  CHECK(lines[2].rfind("perfect,", 0) == 0);
  CHECK(lines[3].rfind("selfish,NA,NA,", 0) == 0);

  // Replications round-trip to the in-memory values exactly.
  auto rows = report::parse_replications(read_file((dir / "replications.csv").string()));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].scenario == "perfect");
  CHECK(rows[0].record.obj_value == batch.results[0].replications[0].obj_value);
  CHECK(rows[0].record.travel_time == batch.results[0].replications[0].travel_time);
  CHECK(std::isnan(rows[2].record.obj_value));
  CHECK(rows[3].record.flow_diff == batch.results[1].replications[1].flow_diff);

  // Byte-identical on re-emit.
  auto dir2 = std::filesystem::temp_directory_path() / "routeopt_report_test2";
  std::filesystem::remove_all(dir2);
  report::emit_report(batch, dir2.string());
  for (const auto& f : files)
    CHECK(read_file((dir / f).string()) == read_file((dir2 / f).string()));

  // Rebuild from replications reproduces the comparison table.
  auto dir3 = std::filesystem::temp_directory_path() / "routeopt_report_test3";
  std::filesystem::remove_all(dir3);
  report::rebuild_report((dir / "replications.csv").string(), dir3.string());
  CHECK(read_file((dir3 / "comparison.csv").string()) == comparison);

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
  std::filesystem::remove_all(dir3);

  harness::ComparisonBatch empty;
  CHECK_THROWS(report::emit_report(empty, (dir / "never").string()));
  CHECK_FALSE(std::filesystem::exists(dir / "never"));
}

TEST_CASE("identical config run as two scenarios yields identical rows") {
  auto cfg = tiny_config();
  cfg.experiment.scenarios = {"known", "known"};
  auto batch = compare_scenarios(cfg);
  REQUIRE(batch.results.size() == 2);
  for (size_t i = 0; i < batch.results[0].replications.size(); ++i) {
    CHECK(batch.results[0].replications[i].obj_value ==
          batch.results[1].replications[i].obj_value);
    CHECK(batch.results[0].replications[i].flow_diff ==
          batch.results[1].replications[i].flow_diff);
    CHECK(batch.results[0].replications[i].travel_time ==
          batch.results[1].replications[i].travel_time);
  }
}

TEST_CASE("populations are shared across scenarios within a replication") {
  // The perfect and selfish pipelines must see the same travelers; their
  // realized flows differ only through choices, not through the population.
  auto cfg = tiny_config();
  auto ctx = build_shared_context(cfg, false);
  auto pop_a = behavior::sample_population(ctx.network, ctx.demands, cfg.behavior,
                                           derive_seed(cfg.experiment.master_seed, "population", 1));
  auto pop_b = behavior::sample_population(ctx.network, ctx.demands, cfg.behavior,
                                           derive_seed(cfg.experiment.master_seed, "population", 1));
  REQUIRE(pop_a.size() == pop_b.size());
  for (size_t i = 0; i < pop_a.size(); ++i) {
    CHECK(pop_a[i].latent1 == pop_b[i].latent1);
    CHECK(pop_a[i].theta_adherence == pop_b[i].theta_adherence);
  }
}
