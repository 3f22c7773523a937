#include "routeopt/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "routeopt/rng.hpp"
#include "routeopt/text_io.hpp"

namespace routeopt::behavior {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::vector<double> edge_times_at(const net::Network& net, const std::vector<double>& controlled) {
  std::vector<double> times(net.edges.size());
  for (size_t e = 0; e < times.size(); ++e) {
    double extra = controlled.empty() ? 0.0 : controlled[e];
    times[e] = net::bpr_time(net.edges[e], net.base_flow[e] + extra);
  }
  return times;
}

}  // namespace

std::map<std::string, std::string> BehaviorParams::as_map() const {
  return {
      {"lambda", fmt_double(lambda)},
      {"theta4_max", fmt_double(theta4_max)},
      {"noise_sigma", fmt_double(noise_sigma)},
      {"risk_affine", fmt_double(risk_base) + "," + fmt_double(risk_l1) + "," + fmt_double(risk_l2)},
      {"time_affine", fmt_double(time_base) + "," + fmt_double(time_l1) + "," + fmt_double(time_l2)},
      {"toll_affine", fmt_double(toll_base) + "," + fmt_double(toll_l1) + "," + fmt_double(toll_l2)},
      {"adherence_affine", fmt_double(adherence_base) + "," + fmt_double(adherence_l1) + "," +
                               fmt_double(adherence_l2)},
      {"n_per_demand", std::to_string(n_per_demand)},
  };
}

std::vector<Traveler> sample_population(const net::Network& net,
                                        const std::vector<net::DemandSpec>& demands,
                                        const BehaviorParams& params, std::uint64_t seed) {
  if (params.n_per_demand < 1) throw std::invalid_argument("n_per_demand must be >= 1");
  (void)net;
  std::vector<Traveler> out;
  out.reserve(demands.size() * static_cast<size_t>(params.n_per_demand));
  for (size_t m = 0; m < demands.size(); ++m) {
    for (int i = 0; i < params.n_per_demand; ++i) {
      Traveler t;
      t.id = static_cast<int>(out.size());
      t.demand_index = static_cast<int>(m);
      t.origin = demands[m].origin;
      t.destination = demands[m].destination;
      SplitMix64 rng(derive_seed(seed, "traveler", static_cast<std::uint64_t>(t.id)));
      t.latent1 = rng.next_double();
      t.latent2 = rng.next_double();
      auto raw = [&](double base, double c1, double c2) {
        return std::max(0.0, base + c1 * t.latent1 + c2 * t.latent2 +
                                 params.noise_sigma * rng.next_normal());
      };
      double r = raw(params.risk_base, params.risk_l1, params.risk_l2);
      double ti = raw(params.time_base, params.time_l1, params.time_l2);
      double to = raw(params.toll_base, params.toll_l1, params.toll_l2);
      double sum = r + ti + to;
      if (sum <= 0.0) {
        r = ti = to = 1.0 / 3.0;
      } else {
        r /= sum;
        ti /= sum;
        to /= sum;
      }
      t.theta_risk = r;
      t.theta_time = ti;
      t.theta_toll = to;
      t.theta_adherence =
          params.theta4_max * clamp01(params.adherence_base + params.adherence_l1 * t.latent1 +
                                      params.adherence_l2 * t.latent2 +
                                      params.noise_sigma * rng.next_normal());
      t.lambda = params.lambda;
      out.push_back(t);
    }
  }
  return out;
}

double path_cost(const net::Network& net, const Traveler& t, const net::Path& p,
                 const std::vector<double>& edge_times, bool is_recommended,
                 bool adherence_enabled) {
  double cost = 0.0;
  for (int id : p.edge_ids) {
    const net::Edge& e = net.edges[id];
    cost += t.theta_risk * e.risk + t.theta_time * edge_times[id] / e.max_time +
            t.theta_toll * e.toll;
  }
  if (adherence_enabled && !is_recommended) cost += t.theta_adherence;
  return cost;
}

std::vector<double> boltzmann(const std::vector<double>& costs, double lambda) {
  if (costs.empty()) throw std::invalid_argument("boltzmann: empty cost vector");
  double best = costs[0];
  for (double c : costs) best = std::min(best, c);
  std::vector<double> probs(costs.size());
  double total = 0.0;
  for (size_t i = 0; i < costs.size(); ++i) {
    probs[i] = std::exp(-lambda * (costs[i] - best));
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

std::vector<double> choice_probabilities(const net::Network& net, const net::PathTable& table,
                                         const Traveler& t, const std::vector<int>& candidates,
                                         int recommended, const std::vector<double>& edge_times) {
  if (candidates.size() < 2)
    throw std::invalid_argument("choice_probabilities: need at least two candidates");
  bool adherence = recommended >= 0;
  if (adherence &&
      std::find(candidates.begin(), candidates.end(), recommended) == candidates.end())
    throw std::invalid_argument("choice_probabilities: recommendation outside candidate set");
  std::vector<double> costs;
  costs.reserve(candidates.size());
  for (int id : candidates)
    costs.push_back(
        path_cost(net, t, table.path(id), edge_times, id == recommended, adherence));
  return boltzmann(costs, t.lambda);
}

DayResult simulate_day(const net::Network& net, const net::PathTable& table,
                       const std::vector<net::DemandSpec>& demands,
                       const std::vector<Traveler>& travelers,
                       const std::vector<int>& recommendations,
                       const std::vector<double>& prior_controlled_flow, std::uint64_t seed,
                       const SimulationOptions& opts) {
  const bool guided = !recommendations.empty();
  if (guided && recommendations.size() != travelers.size())
    throw std::invalid_argument("simulate_day: one recommendation per traveler required");
  if (!prior_controlled_flow.empty() && prior_controlled_flow.size() != net.edges.size())
    throw std::invalid_argument("simulate_day: prior flow dimension mismatch");

  std::vector<double> edge_times = edge_times_at(net, prior_controlled_flow);

  DayResult result;
  result.records.reserve(travelers.size());
  result.realized_edge_flow.assign(net.edges.size(), 0.0);

  // Count travelers per demand so each carries its share of the rate.
  std::vector<int> demand_count(demands.size(), 0);
  for (const Traveler& t : travelers) demand_count[t.demand_index]++;

  for (size_t i = 0; i < travelers.size(); ++i) {
    const Traveler& t = travelers[i];
    const std::vector<int>& candidates = table.by_demand[t.demand_index];
    int rec = guided ? recommendations[i] : -1;
    if (guided && std::find(candidates.begin(), candidates.end(), rec) == candidates.end())
      throw std::invalid_argument("simulate_day: recommendation outside traveler's candidate set");

    int chosen;
    if (opts.forced_adherence && guided) {
      chosen = rec;
    } else {
      std::vector<double> probs;
      if (opts.adherence_enabled) {
        probs = choice_probabilities(net, table, t, candidates, rec, edge_times);
      } else {
        std::vector<double> costs;
        for (int id : candidates)
          costs.push_back(path_cost(net, t, table.path(id), edge_times, false, false));
        probs = boltzmann(costs, t.lambda);
      }
      SplitMix64 rng(derive_seed(seed, "choice", static_cast<std::uint64_t>(t.id)));
      double u = rng.next_double();
      double acc = 0.0;
      chosen = candidates.back();
      for (size_t kk = 0; kk < candidates.size(); ++kk) {
        acc += probs[kk];
        if (u < acc) {
          chosen = candidates[kk];
          break;
        }
      }
    }

    ObservationRecord rec_row;
    rec_row.traveler_id = t.id;
    rec_row.origin = t.origin;
    rec_row.destination = t.destination;
    rec_row.latent1 = t.latent1;
    rec_row.latent2 = t.latent2;
    rec_row.candidate_ids = candidates;
    rec_row.recommended = rec;
    rec_row.chosen = chosen;
    rec_row.label = (guided && chosen == rec) ? 1 : 0;
    result.records.push_back(std::move(rec_row));

    double share = demands[t.demand_index].rate / demand_count[t.demand_index];
    for (int id : table.path(chosen).edge_ids) result.realized_edge_flow[id] += share;
  }
  return result;
}

HistoryDataset generate_history(const net::Network& net, const net::PathTable& table,
                                const std::vector<net::DemandSpec>& demands,
                                const BehaviorParams& params, int days,
                                RecommendationPolicy policy, std::uint64_t seed) {
  if (days < 1) throw std::invalid_argument("generate_history: days must be >= 1");
  HistoryDataset ds;
  std::vector<double> lagged_flow;  // empty = base flow only
  for (int day = 0; day < days; ++day) {
    auto idx = static_cast<std::uint64_t>(day);
    std::vector<Traveler> pop =
        sample_population(net, demands, params, derive_seed(seed, "history-population", idx));
    std::vector<int> recs(pop.size());
    SplitMix64 rec_rng(derive_seed(seed, "history-recommendation", idx));
    for (size_t i = 0; i < pop.size(); ++i) {
      const std::vector<int>& candidates = table.by_demand[pop[i].demand_index];
      if (policy == RecommendationPolicy::kUniformRandom)
        recs[i] = candidates[rec_rng.next_below(candidates.size())];
      else
        recs[i] = candidates.front();  // free-flow shortest
    }
    DayResult day_result = simulate_day(net, table, demands, pop, recs, lagged_flow,
                                        derive_seed(seed, "history-day", idx));
    for (ObservationRecord& r : day_result.records) {
      r.day = day;
      ds.records.push_back(std::move(r));
    }
    lagged_flow = std::move(day_result.realized_edge_flow);
  }
  ds.provenance = params.as_map();
  ds.provenance["days"] = std::to_string(days);
  ds.provenance["policy"] =
      policy == RecommendationPolicy::kUniformRandom ? "uniform-random" : "shortest-path";
  ds.provenance["seed"] = std::to_string(seed);
  ds.provenance["network_hash"] = to_hex(fnv1a(net::serialize_network(net)));
  return ds;
}

std::string serialize_history(const HistoryDataset& ds) {
  std::ostringstream out;
  out << "# routeopt-history v1\n";
  for (const auto& [k, v] : ds.provenance) out << "# provenance " << k << "=" << v << "\n";
  out << "day,traveler,origin,destination,latent1,latent2,candidates,recommended,chosen,label\n";
  for (const ObservationRecord& r : ds.records) {
    std::vector<std::string> cand;
    cand.reserve(r.candidate_ids.size());
    for (int id : r.candidate_ids) cand.push_back(std::to_string(id));
    out << r.day << ',' << r.traveler_id << ',' << r.origin << ',' << r.destination << ','
        << fmt_double(r.latent1) << ',' << fmt_double(r.latent2) << ',' << join(cand, ';') << ','
        << r.recommended << ',' << r.chosen << ',' << r.label << "\n";
  }
  return out.str();
}

HistoryDataset parse_history(const std::string& text) {
  HistoryDataset ds;
  std::istringstream in(text);
  std::string line;
  bool saw_version = false, saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# routeopt-history", 0) == 0) {
      if (line != "# routeopt-history v1")
        throw std::runtime_error("parse_history: unsupported schema version");
      saw_version = true;
      continue;
    }
    if (line.rfind("# provenance ", 0) == 0) {
      std::string kv = line.substr(13);
      auto eq = kv.find('=');
      if (eq != std::string::npos) ds.provenance[kv.substr(0, eq)] = kv.substr(eq + 1);
      continue;
    }
    if (!saw_header) {
      saw_header = true;  // column header
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != 10) throw std::runtime_error("parse_history: bad record: " + line);
    ObservationRecord r;
    r.day = static_cast<int>(parse_long(fields[0]));
    r.traveler_id = static_cast<int>(parse_long(fields[1]));
    r.origin = static_cast<int>(parse_long(fields[2]));
    r.destination = static_cast<int>(parse_long(fields[3]));
    r.latent1 = parse_double(fields[4]);
    r.latent2 = parse_double(fields[5]);
    for (const std::string& c : split(fields[6], ';'))
      if (!c.empty()) r.candidate_ids.push_back(static_cast<int>(parse_long(c)));
    r.recommended = static_cast<int>(parse_long(fields[7]));
    r.chosen = static_cast<int>(parse_long(fields[8]));
    r.label = static_cast<int>(parse_long(fields[9]));
    ds.records.push_back(std::move(r));
  }
  if (!saw_version) throw std::runtime_error("parse_history: missing schema version line");
  return ds;
}

}  // namespace routeopt::behavior
