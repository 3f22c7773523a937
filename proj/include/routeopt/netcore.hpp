#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace routeopt::net {

// Directed road segment. Attribute units: seconds, vehicles/second,
// meters, dimensionless risk in [0,1], currency toll.
struct Edge {
  int id = -1;
  int tail = -1;
  int head = -1;
  double free_flow_time = 0.0;  // t0, > 0
  double capacity = 0.0;        // > 0
  double length = 0.0;          // >= 0
  double risk = 0.0;            // in [0,1]
  double toll = 0.0;            // >= 0
  double max_time = 0.0;        // normalization constant, >= free_flow_time

  void validate() const;  // throws std::invalid_argument on a bad attribute
};

// BPR latency: t0 * (1 + 0.15 * (x / capacity)^4). Strictly increasing
// and continuous in x; rejects negative flow.
double bpr_time(const Edge& e, double flow);

struct Network {
  int num_nodes = 0;
  std::vector<Edge> edges;
  std::vector<double> base_flow;              // one entry per edge, >= 0
  std::vector<std::vector<int>> out_edges;    // per node, edge ids in id order

  void rebuild_adjacency();
  void validate() const;

  double edge_time(int edge_id, double flow) const { return bpr_time(edges[edge_id], flow); }
};

struct DemandSpec {
  int origin = -1;
  int destination = -1;
  double rate = 0.0;  // vehicles/second, >= 0
};

// Simple path: connected head-to-tail edge chain with no repeated node.
struct Path {
  std::vector<int> edge_ids;
  int origin = -1;
  int destination = -1;
  int demand_index = -1;

  double free_flow_time(const Network& net) const;
};

// Walks the edge chain and checks connectivity, endpoints and node
// uniqueness. Used by tests and by enumerate_paths postconditions.
bool is_valid_simple_path(const Network& net, const Path& p);

// Sampling bounds for build_grid. Free-flow time is derived as
// length / speed; max_time as the BPR time at max_time_flow_factor * capacity.
// The capacity default puts the standard demand profile into a congested
// regime where route coordination visibly matters.
struct AttrRanges {
  double length_min = 280.0, length_max = 320.0;      // meters
  double speed_min = 10.0, speed_max = 15.0;          // m/s
  double capacity_min = 0.25, capacity_max = 0.70;    // veh/s
  double risk_min = 0.0, risk_max = 1.0;
  double toll_min = 0.0, toll_max = 2.0;
  double base_flow_frac_min = 0.0, base_flow_frac_max = 0.5;  // fraction of capacity
  double max_time_flow_factor = 2.0;

  void validate() const;
};

// rows x cols lattice with an antiparallel directed edge pair per adjacent
// node pair. Nodes are numbered row-major from 0. Edge attributes and the
// per-edge base flow are sampled from `ranges` with SplitMix64(seed);
// identical arguments produce a bit-identical network.
Network build_grid(int rows, int cols, std::uint64_t seed, const AttrRanges& ranges = {});

// K shortest loop-free paths by free-flow time (Yen's algorithm), ordered
// ascending with lexicographic edge-id tie-break. Returns min(K, available)
// paths; throws if no path exists.
std::vector<Path> enumerate_paths(const Network& net, const DemandSpec& od, int k);

// Path-to-edge aggregation x_e = sum_p x_p * I(e in p).
std::vector<double> edge_flows(const Network& net, const std::vector<Path>& paths,
                               const std::vector<double>& path_flows);

// Total system travel time sum_e t_e(x_e + f_e) * x_e with f the network
// base flow. Units: vehicle-seconds per second.
double total_system_time(const Network& net, const std::vector<double>& x);

// Candidate paths for every demand, flattened with global path ids.
struct PathTable {
  std::vector<Path> paths;                    // global id = index
  std::vector<std::vector<int>> by_demand;    // demand index -> global path ids

  const Path& path(int id) const;             // throws on unknown id
};

PathTable build_path_table(const Network& net, const std::vector<DemandSpec>& demands, int k);

// Lossless structured-text serialization (17 significant digits).
std::string serialize_network(const Network& net);
Network parse_network(const std::string& text);
void write_network(const Network& net, const std::string& file);
Network read_network(const std::string& file);

}  // namespace routeopt::net
