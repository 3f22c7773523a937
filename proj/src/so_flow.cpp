#include "routeopt/so_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "routeopt/text_io.hpp"

namespace routeopt::soflow {

namespace {

constexpr double kGapFloor = 1e-12;  // denominator guard in the relative gap

// Marginal social cost of an edge at controlled flow x: t(x+f) + x*t'(x+f).
double marginal_cost(const net::Edge& e, double x, double f) {
  double v = x + f;
  double r = v / e.capacity;
  double r2 = r * r;
  double t = e.free_flow_time * (1.0 + 0.15 * r2 * r2);
  double dt = e.free_flow_time * 0.6 * r2 * r * (1.0 / e.capacity);
  return t + x * dt;
}

struct Workspace {
  const net::Network& net;
  const std::vector<net::DemandSpec>& demands;
  std::vector<const net::Path*> paths;     // flattened
  std::vector<std::vector<int>> blocks;    // demand -> flat path indices
  std::vector<double> x;                   // path flows
  std::vector<double> xe;                  // edge flows (incrementally maintained)

  Workspace(const net::Network& n, const std::vector<net::DemandSpec>& d)
      : net(n), demands(d) {}

  double objective() const {
    double total = 0.0;
    for (size_t e = 0; e < xe.size(); ++e)
      total += net::bpr_time(net.edges[e], std::max(xe[e], 0.0) + net.base_flow[e]) *
               std::max(xe[e], 0.0);
    return total;
  }

  std::vector<double> edge_marginals() const {
    std::vector<double> mc(xe.size());
    for (size_t e = 0; e < xe.size(); ++e)
      mc[e] = marginal_cost(net.edges[e], std::max(xe[e], 0.0), net.base_flow[e]);
    return mc;
  }

  double path_marginal(size_t flat, const std::vector<double>& edge_mc) const {
    double g = 0.0;
    for (int id : paths[flat]->edge_ids) g += edge_mc[id];
    return g;
  }

  // Frank-Wolfe duality gap: grad'x - sum_m alpha_m * min_p grad_p.
  double absolute_gap(const std::vector<double>& edge_mc) const {
    double gap = 0.0;
    for (size_t m = 0; m < blocks.size(); ++m) {
      double best = std::numeric_limits<double>::infinity();
      double inner = 0.0;
      for (int flat : blocks[m]) {
        double g = path_marginal(flat, edge_mc);
        inner += g * x[flat];
        best = std::min(best, g);
      }
      if (!blocks[m].empty()) gap += inner - demands[m].rate * best;
    }
    return gap;
  }

  void shift_edges(const std::vector<int>& plus, const std::vector<int>& minus, double delta) {
    for (int id : plus) xe[id] += delta;
    for (int id : minus) xe[id] -= delta;
  }
};

// Directional derivative of the objective along an edge-space direction d
// restricted to the listed support, evaluated at xe + t*d.
double directional_derivative(const Workspace& w, const std::vector<int>& support,
                              const std::vector<double>& dir, double t) {
  double total = 0.0;
  for (int e : support) {
    double y = std::max(w.xe[e] + t * dir[e], 0.0);
    total += dir[e] * marginal_cost(w.net.edges[e], y, w.net.base_flow[e]);
  }
  return total;
}

// Exact line search: the restriction of the objective to the segment is a
// smooth convex polynomial, so its derivative is increasing; bisect it.
double bisect_step(const Workspace& w, const std::vector<int>& support,
                   const std::vector<double>& dir, double t_max) {
  double d0 = directional_derivative(w, support, dir, 0.0);
  if (d0 >= 0.0) return 0.0;
  double d1 = directional_derivative(w, support, dir, t_max);
  if (d1 <= 0.0) return t_max;
  double lo = 0.0, hi = t_max;
  for (int it = 0; it < 200 && (hi - lo) > 1e-16 * std::max(1.0, t_max); ++it) {
    double mid = 0.5 * (lo + hi);
    if (directional_derivative(w, support, dir, mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

void pairwise_sweep(Workspace& w) {
  for (size_t m = 0; m < w.blocks.size(); ++m) {
    const auto& block = w.blocks[m];
    if (block.size() < 2 || w.demands[m].rate <= 0.0) continue;
    std::vector<double> edge_mc = w.edge_marginals();
    int best = -1, worst = -1;
    double best_g = std::numeric_limits<double>::infinity();
    double worst_g = -std::numeric_limits<double>::infinity();
    for (int flat : block) {
      double g = w.path_marginal(flat, edge_mc);
      if (g < best_g) {
        best_g = g;
        best = flat;
      }
      if (w.x[flat] > 0.0 && g > worst_g) {
        worst_g = g;
        worst = flat;
      }
    }
    if (best < 0 || worst < 0 || best == worst || worst_g - best_g <= 0.0) continue;

    // Net edge direction of moving mass from `worst` onto `best`.
    std::vector<double> dir(w.xe.size(), 0.0);
    std::vector<int> support;
    for (int id : w.paths[best]->edge_ids) {
      if (dir[id] == 0.0) support.push_back(id);
      dir[id] += 1.0;
    }
    for (int id : w.paths[worst]->edge_ids) {
      if (dir[id] == 0.0) support.push_back(id);
      dir[id] -= 1.0;
    }
    double delta = bisect_step(w, support, dir, w.x[worst]);
    if (delta <= 0.0) continue;
    if (delta >= w.x[worst]) {
      delta = w.x[worst];
      w.x[worst] = 0.0;
    } else {
      w.x[worst] -= delta;
    }
    w.x[best] += delta;
    for (int e : support) w.xe[e] += delta * dir[e];
  }
}

void classic_step(Workspace& w) {
  std::vector<double> edge_mc = w.edge_marginals();
  // All-or-nothing target s: each demand's full rate on its cheapest path.
  std::vector<double> s(w.x.size(), 0.0);
  for (size_t m = 0; m < w.blocks.size(); ++m) {
    if (w.blocks[m].empty()) continue;
    int best = w.blocks[m].front();
    double best_g = std::numeric_limits<double>::infinity();
    for (int flat : w.blocks[m]) {
      double g = w.path_marginal(flat, edge_mc);
      if (g < best_g) {
        best_g = g;
        best = flat;
      }
    }
    s[best] = w.demands[m].rate;
  }
  std::vector<double> dir(w.xe.size(), 0.0);
  std::vector<char> in_support(w.xe.size(), 0);
  std::vector<int> support;
  auto add = [&](const net::Path& p, double coeff) {
    for (int id : p.edge_ids) {
      if (!in_support[id]) {
        in_support[id] = 1;
        support.push_back(id);
      }
      dir[id] += coeff;
    }
  };
  for (size_t i = 0; i < w.x.size(); ++i) {
    double coeff = s[i] - w.x[i];
    if (coeff != 0.0) add(*w.paths[i], coeff);
  }
  support.erase(std::remove_if(support.begin(), support.end(),
                               [&](int e) { return dir[e] == 0.0; }),
                support.end());
  double t = bisect_step(w, support, dir, 1.0);
  if (t <= 0.0) return;
  for (size_t i = 0; i < w.x.size(); ++i) w.x[i] += t * (s[i] - w.x[i]);
  for (int e : support) w.xe[e] += t * dir[e];
}

}  // namespace

std::vector<double> so_objective_gradient(const net::Network& net,
                                          const std::vector<net::Path>& paths,
                                          const std::vector<double>& path_flows) {
  if (paths.size() != path_flows.size())
    throw std::invalid_argument("so_objective_gradient: dimension mismatch");
  std::vector<double> xe = net::edge_flows(net, paths, path_flows);
  std::vector<double> mc(xe.size());
  for (size_t e = 0; e < xe.size(); ++e)
    mc[e] = marginal_cost(net.edges[e], xe[e], net.base_flow[e]);
  std::vector<double> grad(paths.size(), 0.0);
  for (size_t p = 0; p < paths.size(); ++p)
    for (int id : paths[p].edge_ids) grad[p] += mc[id];
  return grad;
}

PathFlowSolution solve_so(const net::Network& net, const std::vector<net::DemandSpec>& demands,
                          const std::vector<std::vector<net::Path>>& path_sets,
                          const SolverOptions& opts) {
  if (path_sets.size() != demands.size())
    throw std::invalid_argument("solve_so: one path set per demand required");
  if (opts.tolerance <= 0.0) throw std::invalid_argument("solve_so: tolerance must be > 0");

  Workspace w(net, demands);
  w.blocks.resize(demands.size());
  for (size_t m = 0; m < demands.size(); ++m) {
    if (path_sets[m].empty()) throw std::invalid_argument("solve_so: demand with empty path set");
    if (demands[m].rate < 0.0) throw std::invalid_argument("solve_so: negative demand rate");
    for (const net::Path& p : path_sets[m]) {
      w.blocks[m].push_back(static_cast<int>(w.paths.size()));
      w.paths.push_back(&p);
    }
  }

  // All-or-nothing start on each demand's free-flow shortest path.
  w.x.assign(w.paths.size(), 0.0);
  for (size_t m = 0; m < demands.size(); ++m) w.x[w.blocks[m].front()] = demands[m].rate;
  w.xe.assign(net.edges.size(), 0.0);
  for (size_t i = 0; i < w.x.size(); ++i)
    for (int id : w.paths[i]->edge_ids) w.xe[id] += w.x[i];

  PathFlowSolution sol;
  int iter = 0;
  double rel_gap = std::numeric_limits<double>::infinity();
  for (;; ++iter) {
    std::vector<double> edge_mc = w.edge_marginals();
    double j = w.objective();
    rel_gap = std::max(w.absolute_gap(edge_mc), 0.0) / std::max(j, kGapFloor);
    if (rel_gap <= opts.tolerance) {
      sol.converged = true;
      break;
    }
    if (iter >= opts.max_iterations) break;
    if (opts.step_rule == StepRule::kPairwise)
      pairwise_sweep(w);
    else
      classic_step(w);
  }

  sol.path_flows = w.x;
  // Recompute from path flows so the stored edge flows match
  // net::edge_flows bit for bit.
  std::vector<net::Path> flat;
  flat.reserve(w.paths.size());
  for (const net::Path* p : w.paths) flat.push_back(*p);
  sol.edge_flows = net::edge_flows(net, flat, sol.path_flows);
  sol.objective = total_system_time(net, sol.edge_flows);
  sol.gap = rel_gap;
  sol.iterations = iter;
  return sol;
}

PathFlowSolution solve_so(const net::Network& net, const std::vector<net::DemandSpec>& demands,
                          const net::PathTable& table, const SolverOptions& opts) {
  std::vector<std::vector<net::Path>> sets(table.by_demand.size());
  for (size_t m = 0; m < table.by_demand.size(); ++m)
    for (int id : table.by_demand[m]) sets[m].push_back(table.path(id));
  return solve_so(net, demands, sets, opts);
}

TargetOccupancy occupancy_targets(const net::Network& net, const std::vector<double>& so_edge_flows,
                                  bool latency_includes_base_flow) {
  if (so_edge_flows.size() != net.edges.size())
    throw std::invalid_argument("occupancy_targets: dimension mismatch");
  TargetOccupancy t;
  t.counts.resize(so_edge_flows.size());
  for (size_t e = 0; e < so_edge_flows.size(); ++e) {
    double latency_flow = latency_includes_base_flow ? so_edge_flows[e] + net.base_flow[e]
                                                     : so_edge_flows[e];
    t.counts[e] = so_edge_flows[e] * net::bpr_time(net.edges[e], latency_flow);
  }
  return t;
}

std::string serialize_solution(const PathFlowSolution& sol) {
  std::ostringstream out;
  out << "routeopt-solution v1\n";
  out << "objective " << fmt_double(sol.objective) << "\n";
  out << "gap " << fmt_double(sol.gap) << "\n";
  out << "iterations " << sol.iterations << "\n";
  out << "converged " << (sol.converged ? 1 : 0) << "\n";
  out << "path_flows";
  for (double v : sol.path_flows) out << ' ' << fmt_double(v);
  out << "\nedge_flows";
  for (double v : sol.edge_flows) out << ' ' << fmt_double(v);
  out << "\n";
  return out.str();
}

PathFlowSolution parse_solution(const std::string& text) {
  std::istringstream in(text);
  std::string tok, ver;
  in >> tok >> ver;
  if (tok != "routeopt-solution" || ver != "v1")
    throw std::runtime_error("parse_solution: unrecognized header");
  PathFlowSolution sol;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ls >> tok;
    if (tok == "objective") {
      std::string v;
      ls >> v;
      sol.objective = parse_double(v);
    } else if (tok == "gap") {
      std::string v;
      ls >> v;
      sol.gap = parse_double(v);
    } else if (tok == "iterations") {
      ls >> sol.iterations;
    } else if (tok == "converged") {
      int c;
      ls >> c;
      sol.converged = c != 0;
    } else if (tok == "path_flows") {
      std::string v;
      while (ls >> v) sol.path_flows.push_back(parse_double(v));
    } else if (tok == "edge_flows") {
      std::string v;
      while (ls >> v) sol.edge_flows.push_back(parse_double(v));
    } else {
      throw std::runtime_error("parse_solution: unexpected token '" + tok + "'");
    }
  }
  return sol;
}

}  // namespace routeopt::soflow
