#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "routeopt/behavior.hpp"
#include "routeopt/compliance_ml.hpp"
#include "routeopt/config.hpp"
#include "routeopt/harness.hpp"
#include "routeopt/netcore.hpp"
#include "routeopt/recommender.hpp"
#include "routeopt/report.hpp"
#include "routeopt/rng.hpp"
#include "routeopt/so_flow.hpp"
#include "routeopt/text_io.hpp"

namespace {

using namespace routeopt;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

config::ScenarioConfig load(const CommonArgs& args) {
  config::ScenarioConfig cfg;
  if (!args.config_path.empty()) cfg = config::load_config(args.config_path);
  if (args.seed_set) cfg.experiment.master_seed = args.seed;
  return cfg;
}

// Relative output paths land under ROUTEOPT_OUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("ROUTEOPT_OUT_ROOT");
  if (root && *root && !std::filesystem::path(path).is_absolute())
    return (std::filesystem::path(root) / path).string();
  return path;
}

void ensure_parent(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Configuration file (defaults when omitted)");
  cmd->add_option("--seed", args.seed, "Master seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

std::uint64_t network_seed(const config::ScenarioConfig& cfg) {
  return cfg.network.seed != 0 ? cfg.network.seed
                               : derive_seed(cfg.experiment.master_seed, "network");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"System-optimal route recommendation toolkit"};
  app.require_subcommand(1);

  CommonArgs net_args;
  std::string net_out = "network.txt";
  auto* cmd_net = app.add_subcommand("generate-network", "Sample a grid network and write it");
  add_common(cmd_net, net_args);
  cmd_net->add_option("--out", net_out, "Output network file");

  CommonArgs flow_args;
  std::string flow_net_in, flow_out = "solution.txt";
  auto* cmd_flow = app.add_subcommand("optimize-flow", "Solve the system-optimal flow problem");
  add_common(cmd_flow, flow_args);
  cmd_flow->add_option("--network", flow_net_in, "Use a previously written network file");
  cmd_flow->add_option("--out", flow_out, "Output solution file");

  CommonArgs hist_args;
  std::string hist_out = "history.csv";
  auto* cmd_hist = app.add_subcommand("simulate-history", "Generate the historical dataset");
  add_common(cmd_hist, hist_args);
  cmd_hist->add_option("--out", hist_out, "Output history CSV");

  CommonArgs train_args;
  std::string train_hist_in, train_out = "model.txt", train_report_dir;
  auto* cmd_train = app.add_subcommand("train-compliance", "Train the compliance forest");
  add_common(cmd_train, train_args);
  cmd_train->add_option("--history", train_hist_in, "Train from an existing history CSV");
  cmd_train->add_option("--out", train_out, "Output model file");
  cmd_train->add_option("--report-dir", train_report_dir, "Also write evaluation tables here");

  CommonArgs rec_args;
  std::string rec_oracle = "learned", rec_model_in, rec_out = "assignment.csv";
  int rec_replication = 0;
  auto* cmd_rec = app.add_subcommand("recommend", "Solve the route-allocation problem");
  add_common(cmd_rec, rec_args);
  cmd_rec->add_option("--oracle", rec_oracle, "Compliance oracle: perfect|known|learned")
      ->check(CLI::IsMember({"perfect", "known", "learned"}));
  cmd_rec->add_option("--model", rec_model_in, "Load a trained model instead of retraining");
  cmd_rec->add_option("--replication", rec_replication, "Population replication index");
  cmd_rec->add_option("--out", rec_out, "Output assignment CSV");

  CommonArgs scen_args;
  std::string scen_tag = "learned", scen_out_dir = "out";
  auto* cmd_scen = app.add_subcommand("run-scenario", "Run one scenario over all replications");
  add_common(cmd_scen, scen_args);
  cmd_scen->add_option("--scenario", scen_tag, "perfect|known|learned|naive|selfish")
      ->check(CLI::IsMember({"perfect", "known", "learned", "naive", "selfish"}));
  cmd_scen->add_option("--out-dir", scen_out_dir, "Output directory");

  CommonArgs cmp_args;
  std::string cmp_out_dir = "out";
  auto* cmd_cmp = app.add_subcommand("compare", "Run the configured scenario comparison");
  add_common(cmd_cmp, cmp_args);
  cmd_cmp->add_option("--out-dir", cmp_out_dir, "Output directory");

  std::string rep_in = "out/replications.csv", rep_out_dir = "out";
  auto* cmd_rep = app.add_subcommand("report", "Rebuild tables and charts from replications");
  cmd_rep->add_option("--replications", rep_in, "Input replications CSV");
  cmd_rep->add_option("--out-dir", rep_out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_net->parsed()) {
      auto cfg = load(net_args);
      auto network =
          net::build_grid(cfg.network.rows, cfg.network.cols, network_seed(cfg), cfg.network.ranges);
      std::string out = resolve_out(net_out);
      ensure_parent(out);
      net::write_network(network, out);
      std::cout << "wrote " << out << " (" << network.num_nodes << " nodes, "
                << network.edges.size() << " edges)\n";
    } else if (cmd_flow->parsed()) {
      auto cfg = load(flow_args);
      net::Network network = flow_net_in.empty()
                                 ? net::build_grid(cfg.network.rows, cfg.network.cols,
                                                   network_seed(cfg), cfg.network.ranges)
                                 : net::read_network(flow_net_in);
      auto demands = cfg.demand.demands();
      auto table = net::build_path_table(network, demands, cfg.solver.paths_per_od);
      soflow::SolverOptions opts;
      opts.tolerance = cfg.solver.so_tolerance;
      opts.max_iterations = cfg.solver.so_max_iterations;
      opts.step_rule = cfg.solver.so_step_rule;
      auto sol = soflow::solve_so(network, demands, table, opts);
      std::string out = resolve_out(flow_out);
      ensure_parent(out);
      write_file(out, soflow::serialize_solution(sol));
      std::cout << "wrote " << out << " objective=" << fmt_double(sol.objective)
                << " gap=" << fmt_double(sol.gap) << " iterations=" << sol.iterations
                << (sol.converged ? "" : " (not converged)") << "\n";
      if (!sol.converged) return 2;
    } else if (cmd_hist->parsed()) {
      auto cfg = load(hist_args);
      auto network = net::build_grid(cfg.network.rows, cfg.network.cols, network_seed(cfg),
                                     cfg.network.ranges);
      auto demands = cfg.demand.demands();
      auto table = net::build_path_table(network, demands, cfg.solver.paths_per_od);
      auto ds = behavior::generate_history(network, table, demands, cfg.behavior,
                                           cfg.ml.history_days, cfg.ml.policy,
                                           derive_seed(cfg.experiment.master_seed, "history"));
      std::string out = resolve_out(hist_out);
      ensure_parent(out);
      write_file(out, behavior::serialize_history(ds));
      std::cout << "wrote " << out << " (" << ds.records.size() << " records)\n";
    } else if (cmd_train->parsed()) {
      auto cfg = load(train_args);
      auto network = net::build_grid(cfg.network.rows, cfg.network.cols, network_seed(cfg),
                                     cfg.network.ranges);
      auto demands = cfg.demand.demands();
      auto table = net::build_path_table(network, demands, cfg.solver.paths_per_od);
      behavior::HistoryDataset ds =
          train_hist_in.empty()
              ? behavior::generate_history(network, table, demands, cfg.behavior,
                                           cfg.ml.history_days, cfg.ml.policy,
                                           derive_seed(cfg.experiment.master_seed, "history"))
              : behavior::parse_history(read_file(train_hist_in));
      auto schema = ml::schema_from_demands(demands);
      std::vector<std::vector<double>> feats;
      std::vector<int> labels;
      for (const auto& r : ds.records) {
        feats.push_back(ml::featurize(r, network, table, schema));
        labels.push_back(r.label);
      }
      auto split = ml::split_dataset(ds, derive_seed(cfg.experiment.master_seed, "split"));
      ml::ForestParams fp;
      fp.num_trees = cfg.ml.trees;
      fp.grid = cfg.ml.grid;
      auto model = ml::train_forest(feats, labels, split.train, split.validation, schema, fp,
                                    derive_seed(cfg.experiment.master_seed, "forest"));
      auto eval = ml::evaluate(model, ds, split.evaluation, network, table);
      std::string out = resolve_out(train_out);
      ensure_parent(out);
      write_file(out, ml::serialize_model(model));
      std::cout << "wrote " << out << " accuracy=" << fmt_double(eval.accuracy)
                << " log_loss=" << fmt_double(eval.log_loss) << "\n";
      if (!train_report_dir.empty()) {
        std::string dir = resolve_out(train_report_dir);
        std::filesystem::create_directories(dir);
        std::string meta = "# config_hash=" + config::config_hash(cfg) +
                           " master_seed=" + std::to_string(cfg.experiment.master_seed) + "\n";
        std::string conf = meta + "predicted,actual,count\n1,1," +
                           std::to_string(eval.true_positive) + "\n1,0," +
                           std::to_string(eval.false_positive) + "\n0,0," +
                           std::to_string(eval.true_negative) + "\n0,1," +
                           std::to_string(eval.false_negative) + "\n";
        write_file(dir + "/confusion.csv", conf);
        std::string cal = meta + "bin_lo,bin_hi,count,mean_predicted,empirical_rate\n";
        for (const auto& b : eval.calibration)
          cal += fmt_double(b.lo) + "," + fmt_double(b.hi) + "," + std::to_string(b.count) + "," +
                 fmt_double(b.mean_predicted) + "," + fmt_double(b.empirical_rate) + "\n";
        write_file(dir + "/calibration.csv", cal);
        std::cout << "wrote " << dir << "/confusion.csv and calibration.csv\n";
      }
    } else if (cmd_rec->parsed()) {
      auto cfg = load(rec_args);
      bool learned = rec_oracle == "learned";
      harness::SharedContext ctx;
      if (learned && !rec_model_in.empty()) {
        ctx = harness::build_shared_context(cfg, false);
        ctx.model = ml::parse_model(read_file(rec_model_in));
      } else {
        ctx = harness::build_shared_context(cfg, learned);
      }
      auto pop = behavior::sample_population(
          ctx.network, ctx.demands, cfg.behavior,
          derive_seed(cfg.experiment.master_seed, "population",
                      static_cast<std::uint64_t>(rec_replication)));
      rec::ComplianceOracle oracle;
      if (rec_oracle == "perfect") oracle = rec::perfect_oracle(pop, ctx.table);
      else if (rec_oracle == "known")
        oracle = rec::known_oracle(ctx.network, ctx.table, pop, ctx.base_times);
      else oracle = rec::learned_oracle(ctx.network, ctx.table, pop, *ctx.model);
      std::vector<double> weights(pop.size());
      for (size_t n = 0; n < pop.size(); ++n)
        weights[n] = ctx.demands[pop[n].demand_index].rate / cfg.behavior.n_per_demand;
      auto problem = rec::build_allocation_problem(pop, ctx.table, ctx.network, oracle,
                                                   ctx.scaled_targets, weights,
                                                   cfg.solver.deviation);
      double combos = 1.0;
      bool exact_ok = true;
      for (const auto& c : problem.candidates) {
        combos *= static_cast<double>(c.size());
        if (combos > static_cast<double>(cfg.solver.exact_budget)) {
          exact_ok = false;
          break;
        }
      }
      rec::Assignment assignment =
          exact_ok ? rec::solve_exact(problem, cfg.solver.exact_budget)
                   : rec::solve_local_search(
                         problem,
                         derive_seed(cfg.experiment.master_seed, "solver-" + rec_oracle,
                                     static_cast<std::uint64_t>(rec_replication)),
                         cfg.solver.ls_restarts);
      std::string out = resolve_out(rec_out);
      ensure_parent(out);
      write_file(out, rec::serialize_assignment(problem, assignment, pop, rec_oracle));
      std::cout << "wrote " << out << " objective=" << fmt_double(assignment.objective) << "\n";
    } else if (cmd_scen->parsed()) {
      auto cfg = load(scen_args);
      auto scenario = harness::scenario_from_string(scen_tag);
      auto ctx = harness::build_shared_context(cfg, scenario == harness::Scenario::kLearned);
      auto result = harness::run_scenario(ctx, scenario);
      std::string dir = resolve_out(scen_out_dir);
      std::filesystem::create_directories(dir);
      harness::ComparisonBatch batch;
      batch.context = std::move(ctx);
      batch.results.push_back(result);
      write_file(dir + "/scenario_" + scen_tag + ".csv",
                 report::serialize_replications(batch));
      auto fd = result.flow_diff();
      auto tt = result.travel_time();
      std::cout << "wrote " << dir << "/scenario_" << scen_tag << ".csv"
                << " flow_diff=" << fmt_double(fd.mean) << "+/-" << fmt_double(fd.stddev)
                << " travel_time=" << fmt_double(tt.mean) << "+/-" << fmt_double(tt.stddev)
                << "\n";
    } else if (cmd_cmp->parsed()) {
      auto cfg = load(cmp_args);
      auto batch = harness::compare_scenarios(cfg);
      std::string dir = resolve_out(cmp_out_dir);
      auto files = report::emit_report(batch, dir);
      std::cout << "wrote " << files.size() << " files to " << dir << "\n";
      for (const auto& r : batch.results) {
        auto tt = r.travel_time();
        auto fd = r.flow_diff();
        std::cout << "  " << harness::scenario_name(r.scenario)
                  << " travel_time=" << fmt_double(tt.mean) << "+/-" << fmt_double(tt.stddev)
                  << " flow_diff=" << fmt_double(fd.mean) << "+/-" << fmt_double(fd.stddev)
                  << "\n";
      }
    } else if (cmd_rep->parsed()) {
      auto files = report::rebuild_report(rep_in, resolve_out(rep_out_dir));
      std::cout << "wrote " << files.size() << " files to " << resolve_out(rep_out_dir) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
