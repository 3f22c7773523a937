#include "routeopt/config.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

#include "routeopt/text_io.hpp"

namespace routeopt::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  for (const std::string& part : split(csv, ','))
    if (!trim(part).empty()) out.push_back(static_cast<int>(parse_long(trim(part))));
  return out;
}

std::vector<ml::TreeParams> parse_grid(const std::string& text) {
  std::vector<ml::TreeParams> out;
  for (const std::string& part : split(text, ';')) {
    if (trim(part).empty()) continue;
    auto fields = split(trim(part), ':');
    if (fields.size() != 2) throw std::runtime_error("config: grid entries are depth:min_leaf");
    out.push_back({static_cast<int>(parse_long(fields[0])),
                   static_cast<int>(parse_long(fields[1])), 0});
  }
  if (out.empty()) throw std::runtime_error("config: empty ml grid");
  return out;
}

std::string grid_to_string(const std::vector<ml::TreeParams>& grid) {
  std::vector<std::string> parts;
  for (const auto& g : grid)
    parts.push_back(std::to_string(g.max_depth) + ":" + std::to_string(g.min_leaf));
  return join(parts, ';');
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config: expected true/false, got '" + v + "'");
}

}  // namespace

std::vector<net::DemandSpec> DemandConfig::demands() const {
  std::vector<net::DemandSpec> out;
  for (int o : od_nodes)
    for (int d : od_nodes)
      if (o != d) out.push_back({o, d, rate});
  return out;
}

void ScenarioConfig::validate() const {
  if (network.rows < 2 || network.cols < 2)
    throw std::runtime_error("config: grid must be at least 2x2");
  network.ranges.validate();
  if (demand.od_nodes.size() < 2) throw std::runtime_error("config: need at least two OD nodes");
  for (int node : demand.od_nodes)
    if (node < 0 || node >= network.rows * network.cols)
      throw std::runtime_error("config: OD node " + std::to_string(node) + " outside grid");
  if (demand.rate < 0.0) throw std::runtime_error("config: negative demand rate");
  if (behavior.lambda < 0.0) throw std::runtime_error("config: negative rationality");
  if (behavior.n_per_demand < 1) throw std::runtime_error("config: n_per_demand must be >= 1");
  if (ml.trees < 1 || ml.grid.empty()) throw std::runtime_error("config: bad ml parameters");
  if (ml.history_days < 1) throw std::runtime_error("config: history_days must be >= 1");
  if (solver.so_tolerance <= 0.0) throw std::runtime_error("config: so_tolerance must be > 0");
  if (solver.paths_per_od < 2) throw std::runtime_error("config: paths_per_od must be >= 2");
  if (solver.ls_restarts < 1) throw std::runtime_error("config: ls_restarts must be >= 1");
  if (solver.target_scale < 0.0) throw std::runtime_error("config: negative target_scale");
  if (experiment.replications < 1) throw std::runtime_error("config: replications must be >= 1");
  if (experiment.scenarios.empty()) throw std::runtime_error("config: no scenarios listed");
  for (const std::string& s : experiment.scenarios)
    if (s != "perfect" && s != "known" && s != "learned" && s != "naive" && s != "selfish")
      throw std::runtime_error("config: unknown scenario '" + s + "'");
}

ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      if (section != "network" && section != "demand" && section != "behavior" &&
          section != "ml" && section != "solver" && section != "experiment")
        throw std::runtime_error("config: unknown section [" + section + "]");
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(line_no) + " is not key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    bool known = true;

    if (section == "network") {
      auto& n = cfg.network;
      auto& r = n.ranges;
      if (key == "rows") n.rows = static_cast<int>(parse_long(value));
      else if (key == "cols") n.cols = static_cast<int>(parse_long(value));
      else if (key == "seed") n.seed = static_cast<std::uint64_t>(parse_long(value));
      else if (key == "length_min") r.length_min = parse_double(value);
      else if (key == "length_max") r.length_max = parse_double(value);
      else if (key == "speed_min") r.speed_min = parse_double(value);
      else if (key == "speed_max") r.speed_max = parse_double(value);
      else if (key == "capacity_min") r.capacity_min = parse_double(value);
      else if (key == "capacity_max") r.capacity_max = parse_double(value);
      else if (key == "risk_min") r.risk_min = parse_double(value);
      else if (key == "risk_max") r.risk_max = parse_double(value);
      else if (key == "toll_min") r.toll_min = parse_double(value);
      else if (key == "toll_max") r.toll_max = parse_double(value);
      else if (key == "base_flow_frac_min") r.base_flow_frac_min = parse_double(value);
      else if (key == "base_flow_frac_max") r.base_flow_frac_max = parse_double(value);
      else if (key == "max_time_flow_factor") r.max_time_flow_factor = parse_double(value);
      else known = false;
    } else if (section == "demand") {
      if (key == "od_nodes") cfg.demand.od_nodes = parse_int_list(value);
      else if (key == "rate") cfg.demand.rate = parse_double(value);
      else known = false;
    } else if (section == "behavior") {
      auto& b = cfg.behavior;
      if (key == "lambda") b.lambda = parse_double(value);
      else if (key == "theta4_max") b.theta4_max = parse_double(value);
      else if (key == "noise_sigma") b.noise_sigma = parse_double(value);
      else if (key == "n_per_demand") b.n_per_demand = static_cast<int>(parse_long(value));
      else if (key == "risk_base") b.risk_base = parse_double(value);
      else if (key == "risk_l1") b.risk_l1 = parse_double(value);
      else if (key == "risk_l2") b.risk_l2 = parse_double(value);
      else if (key == "time_base") b.time_base = parse_double(value);
      else if (key == "time_l1") b.time_l1 = parse_double(value);
      else if (key == "time_l2") b.time_l2 = parse_double(value);
      else if (key == "toll_base") b.toll_base = parse_double(value);
      else if (key == "toll_l1") b.toll_l1 = parse_double(value);
      else if (key == "toll_l2") b.toll_l2 = parse_double(value);
      else if (key == "adherence_base") b.adherence_base = parse_double(value);
      else if (key == "adherence_l1") b.adherence_l1 = parse_double(value);
      else if (key == "adherence_l2") b.adherence_l2 = parse_double(value);
      else known = false;
    } else if (section == "ml") {
      if (key == "trees") cfg.ml.trees = static_cast<int>(parse_long(value));
      else if (key == "grid") cfg.ml.grid = parse_grid(value);
      else if (key == "history_days") cfg.ml.history_days = static_cast<int>(parse_long(value));
      else if (key == "policy") {
        if (value == "uniform-random")
          cfg.ml.policy = behavior::RecommendationPolicy::kUniformRandom;
        else if (value == "shortest-path")
          cfg.ml.policy = behavior::RecommendationPolicy::kShortestPath;
        else
          throw std::runtime_error("config: unknown policy '" + value + "'");
      } else known = false;
    } else if (section == "solver") {
      auto& s = cfg.solver;
      if (key == "so_tolerance") s.so_tolerance = parse_double(value);
      else if (key == "so_max_iterations") s.so_max_iterations = static_cast<int>(parse_long(value));
      else if (key == "so_step_rule") {
        if (value == "pairwise") s.so_step_rule = soflow::StepRule::kPairwise;
        else if (value == "classic") s.so_step_rule = soflow::StepRule::kClassic;
        else throw std::runtime_error("config: unknown so_step_rule '" + value + "'");
      } else if (key == "paths_per_od") s.paths_per_od = static_cast<int>(parse_long(value));
      else if (key == "ls_restarts") s.ls_restarts = static_cast<int>(parse_long(value));
      else if (key == "exact_budget") s.exact_budget = static_cast<std::uint64_t>(parse_long(value));
      else if (key == "deviation") {
        if (value == "abs") s.deviation = rec::DeviationMode::kAbsolute;
        else if (value == "squared") s.deviation = rec::DeviationMode::kSquared;
        else throw std::runtime_error("config: unknown deviation '" + value + "'");
      } else if (key == "target_scale") {
        s.target_scale = value == "auto" ? 0.0 : parse_double(value);
      } else if (key == "occupancy_includes_base_flow") {
        s.occupancy_includes_base_flow = parse_bool(value);
      } else known = false;
    } else if (section == "experiment") {
      auto& e = cfg.experiment;
      if (key == "replications") e.replications = static_cast<int>(parse_long(value));
      else if (key == "master_seed") e.master_seed = static_cast<std::uint64_t>(parse_long(value));
      else if (key == "scenarios") {
        e.scenarios.clear();
        for (const std::string& s : split(value, ','))
          if (!trim(s).empty()) e.scenarios.push_back(trim(s));
      } else if (key == "out_dir") e.out_dir = value;
      else known = false;
    } else {
      throw std::runtime_error("config: key '" + key + "' appears before any section");
    }
    if (!known)
      throw std::runtime_error("config: unknown key '" + key + "' in section [" + section + "]");
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string dump_config(const ScenarioConfig& cfg) {
  std::ostringstream out;
  const auto& r = cfg.network.ranges;
  out << "[network]\n";
  out << "rows = " << cfg.network.rows << "\n";
  out << "cols = " << cfg.network.cols << "\n";
  out << "seed = " << cfg.network.seed << "\n";
  out << "length_min = " << fmt_double(r.length_min) << "\n";
  out << "length_max = " << fmt_double(r.length_max) << "\n";
  out << "speed_min = " << fmt_double(r.speed_min) << "\n";
  out << "speed_max = " << fmt_double(r.speed_max) << "\n";
  out << "capacity_min = " << fmt_double(r.capacity_min) << "\n";
  out << "capacity_max = " << fmt_double(r.capacity_max) << "\n";
  out << "risk_min = " << fmt_double(r.risk_min) << "\n";
  out << "risk_max = " << fmt_double(r.risk_max) << "\n";
  out << "toll_min = " << fmt_double(r.toll_min) << "\n";
  out << "toll_max = " << fmt_double(r.toll_max) << "\n";
  out << "base_flow_frac_min = " << fmt_double(r.base_flow_frac_min) << "\n";
  out << "base_flow_frac_max = " << fmt_double(r.base_flow_frac_max) << "\n";
  out << "max_time_flow_factor = " << fmt_double(r.max_time_flow_factor) << "\n";

  out << "\n[demand]\n";
  std::vector<std::string> nodes;
  for (int v : cfg.demand.od_nodes) nodes.push_back(std::to_string(v));
  out << "od_nodes = " << join(nodes, ',') << "\n";
  out << "rate = " << fmt_double(cfg.demand.rate) << "\n";

  const auto& b = cfg.behavior;
  out << "\n[behavior]\n";
  out << "lambda = " << fmt_double(b.lambda) << "\n";
  out << "theta4_max = " << fmt_double(b.theta4_max) << "\n";
  out << "noise_sigma = " << fmt_double(b.noise_sigma) << "\n";
  out << "n_per_demand = " << b.n_per_demand << "\n";
  out << "risk_base = " << fmt_double(b.risk_base) << "\n";
  out << "risk_l1 = " << fmt_double(b.risk_l1) << "\n";
  out << "risk_l2 = " << fmt_double(b.risk_l2) << "\n";
  out << "time_base = " << fmt_double(b.time_base) << "\n";
  out << "time_l1 = " << fmt_double(b.time_l1) << "\n";
  out << "time_l2 = " << fmt_double(b.time_l2) << "\n";
  out << "toll_base = " << fmt_double(b.toll_base) << "\n";
  out << "toll_l1 = " << fmt_double(b.toll_l1) << "\n";
  out << "toll_l2 = " << fmt_double(b.toll_l2) << "\n";
  out << "adherence_base = " << fmt_double(b.adherence_base) << "\n";
  out << "adherence_l1 = " << fmt_double(b.adherence_l1) << "\n";
  out << "adherence_l2 = " << fmt_double(b.adherence_l2) << "\n";

  out << "\n[ml]\n";
  out << "trees = " << cfg.ml.trees << "\n";
  out << "grid = " << grid_to_string(cfg.ml.grid) << "\n";
  out << "history_days = " << cfg.ml.history_days << "\n";
  out << "policy = "
      << (cfg.ml.policy == behavior::RecommendationPolicy::kUniformRandom ? "uniform-random"
                                                                          : "shortest-path")
      << "\n";

  const auto& s = cfg.solver;
  out << "\n[solver]\n";
  out << "so_tolerance = " << fmt_double(s.so_tolerance) << "\n";
  out << "so_max_iterations = " << s.so_max_iterations << "\n";
  out << "so_step_rule = "
      << (s.so_step_rule == soflow::StepRule::kPairwise ? "pairwise" : "classic") << "\n";
  out << "paths_per_od = " << s.paths_per_od << "\n";
  out << "ls_restarts = " << s.ls_restarts << "\n";
  out << "exact_budget = " << s.exact_budget << "\n";
  out << "deviation = " << (s.deviation == rec::DeviationMode::kAbsolute ? "abs" : "squared")
      << "\n";
  if (s.target_scale == 0.0)
    out << "target_scale = auto\n";
  else
    out << "target_scale = " << fmt_double(s.target_scale) << "\n";
  out << "occupancy_includes_base_flow = " << (s.occupancy_includes_base_flow ? "true" : "false")
      << "\n";

  const auto& e = cfg.experiment;
  out << "\n[experiment]\n";
  out << "replications = " << e.replications << "\n";
  out << "master_seed = " << e.master_seed << "\n";
  out << "scenarios = " << join(e.scenarios, ',') << "\n";
  out << "out_dir = " << e.out_dir << "\n";
  return out.str();
}

std::string config_hash(const ScenarioConfig& cfg) { return to_hex(fnv1a(dump_config(cfg))); }

}  // namespace routeopt::config
