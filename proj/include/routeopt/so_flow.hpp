#pragma once

#include <string>
#include <vector>

#include "routeopt/netcore.hpp"

namespace routeopt::soflow {

// Feasible path-flow assignment with a Frank-Wolfe duality-gap certificate.
struct PathFlowSolution {
  std::vector<double> path_flows;   // one entry per path in the flattened order
  std::vector<double> edge_flows;   // induced, equals net::edge_flows exactly
  double objective = 0.0;           // total system time at the solution
  double gap = 0.0;                 // certified relative duality gap, >= 0
  int iterations = 0;
  bool converged = false;
};

// Desired per-edge steady-state vehicle counts (Little's law).
struct TargetOccupancy {
  std::vector<double> counts;  // >= 0, zero exactly where SO flow is zero
};

enum class StepRule {
  kPairwise,   // mass transfer worst->best path per demand, exact line search
  kClassic,    // all-or-nothing direction with exact line search
};

struct SolverOptions {
  double tolerance = 1e-6;   // relative duality gap
  int max_iterations = 10000;
  StepRule step_rule = StepRule::kPairwise;
};

// Exact gradient of total_system_time composed with edge_flows:
// d/dx_p = sum_{e in p} [ t_e(x_e+f_e) + x_e * t'_e(x_e+f_e) ].
std::vector<double> so_objective_gradient(const net::Network& net,
                                          const std::vector<net::Path>& paths,
                                          const std::vector<double>& path_flows);

// Minimizes total system time over the product of demand simplices
// {x_p >= 0, sum_{p in P_m} x_p = alpha_m}. Initializes all-or-nothing on
// each demand's free-flow shortest path (index 0 of its path list) and
// runs Frank-Wolfe steps with exact line search until the duality gap
// gap = grad(x)'(x - s) / max(J(x), eps) drops below tolerance, where s
// puts each demand's whole rate on its minimum-marginal-cost path.
// Deterministic; on iteration exhaustion returns the best iterate with
// converged=false and the achieved gap.
PathFlowSolution solve_so(const net::Network& net, const std::vector<net::DemandSpec>& demands,
                          const std::vector<std::vector<net::Path>>& path_sets,
                          const SolverOptions& opts = {});

PathFlowSolution solve_so(const net::Network& net, const std::vector<net::DemandSpec>& demands,
                          const net::PathTable& table, const SolverOptions& opts = {});

// L*_e = x*_e * t_e(x*_e + f_e) by default; set latency_includes_base_flow
// to false to evaluate the latency at the controlled flow alone.
TargetOccupancy occupancy_targets(const net::Network& net, const std::vector<double>& so_edge_flows,
                                  bool latency_includes_base_flow = true);

// Structured-text export: per-path flows, per-edge flows, objective, gap,
// iteration count. Round-trips losslessly.
std::string serialize_solution(const PathFlowSolution& sol);
PathFlowSolution parse_solution(const std::string& text);

}  // namespace routeopt::soflow
