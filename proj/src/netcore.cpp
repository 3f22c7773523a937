#include "routeopt/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "routeopt/rng.hpp"
#include "routeopt/text_io.hpp"

namespace routeopt::net {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void Edge::validate() const {
  if (free_flow_time <= 0.0) throw std::invalid_argument("edge free_flow_time must be > 0");
  if (capacity <= 0.0) throw std::invalid_argument("edge capacity must be > 0");
  if (length < 0.0) throw std::invalid_argument("edge length must be >= 0");
  if (risk < 0.0 || risk > 1.0) throw std::invalid_argument("edge risk must be in [0,1]");
  if (toll < 0.0) throw std::invalid_argument("edge toll must be >= 0");
  if (max_time < free_flow_time) throw std::invalid_argument("edge max_time must be >= free_flow_time");
}

double bpr_time(const Edge& e, double flow) {
  if (flow < 0.0) throw std::invalid_argument("bpr_time: negative flow");
  double ratio = flow / e.capacity;
  double r2 = ratio * ratio;
  return e.free_flow_time * (1.0 + 0.15 * r2 * r2);
}

void Network::rebuild_adjacency() {
  out_edges.assign(num_nodes, {});
  for (const Edge& e : edges) out_edges[e.tail].push_back(e.id);
}

void Network::validate() const {
  if (base_flow.size() != edges.size()) throw std::invalid_argument("base_flow size mismatch");
  for (size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.id != static_cast<int>(i)) throw std::invalid_argument("edge ids must be contiguous");
    if (e.tail < 0 || e.tail >= num_nodes || e.head < 0 || e.head >= num_nodes)
      throw std::invalid_argument("edge endpoint outside node set");
    e.validate();
    if (base_flow[i] < 0.0) throw std::invalid_argument("base flow must be nonnegative");
  }
}

double Path::free_flow_time(const Network& net) const {
  double t = 0.0;
  for (int id : edge_ids) t += net.edges[id].free_flow_time;
  return t;
}

bool is_valid_simple_path(const Network& net, const Path& p) {
  if (p.edge_ids.empty()) return false;
  std::set<int> seen;
  int cur = net.edges[p.edge_ids.front()].tail;
  if (cur != p.origin) return false;
  seen.insert(cur);
  for (int id : p.edge_ids) {
    if (id < 0 || id >= static_cast<int>(net.edges.size())) return false;
    const Edge& e = net.edges[id];
    if (e.tail != cur) return false;
    cur = e.head;
    if (!seen.insert(cur).second) return false;  // repeated node
  }
  return cur == p.destination;
}

void AttrRanges::validate() const {
  auto ordered = [](double lo, double hi) { return lo <= hi; };
  if (!ordered(length_min, length_max) || length_min < 0.0)
    throw std::invalid_argument("bad length range");
  if (!ordered(speed_min, speed_max) || speed_min <= 0.0)
    throw std::invalid_argument("bad speed range");
  if (!ordered(capacity_min, capacity_max) || capacity_min <= 0.0)
    throw std::invalid_argument("bad capacity range");
  if (!ordered(risk_min, risk_max) || risk_min < 0.0 || risk_max > 1.0)
    throw std::invalid_argument("bad risk range");
  if (!ordered(toll_min, toll_max) || toll_min < 0.0)
    throw std::invalid_argument("bad toll range");
  if (!ordered(base_flow_frac_min, base_flow_frac_max) || base_flow_frac_min < 0.0)
    throw std::invalid_argument("bad base flow fraction range");
  if (max_time_flow_factor < 0.0) throw std::invalid_argument("bad max_time flow factor");
}

Network build_grid(int rows, int cols, std::uint64_t seed, const AttrRanges& ranges) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("build_grid: rows and cols must be >= 2");
  ranges.validate();

  Network net;
  net.num_nodes = rows * cols;
  SplitMix64 rng(seed);

  auto add_edge = [&](int tail, int head) {
    Edge e;
    e.id = static_cast<int>(net.edges.size());
    e.tail = tail;
    e.head = head;
    e.length = rng.uniform(ranges.length_min, ranges.length_max);
    double speed = rng.uniform(ranges.speed_min, ranges.speed_max);
    e.free_flow_time = e.length / speed;
    if (e.free_flow_time <= 0.0) e.free_flow_time = 1e-9;  // length range may start at 0
    e.capacity = rng.uniform(ranges.capacity_min, ranges.capacity_max);
    e.risk = rng.uniform(ranges.risk_min, ranges.risk_max);
    e.toll = rng.uniform(ranges.toll_min, ranges.toll_max);
    e.max_time = bpr_time(e, ranges.max_time_flow_factor * e.capacity);
    double frac = rng.uniform(ranges.base_flow_frac_min, ranges.base_flow_frac_max);
    net.edges.push_back(e);
    net.base_flow.push_back(frac * e.capacity);
  };

  // Row-major sweep; each lattice adjacency yields an antiparallel pair.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int node = r * cols + c;
      if (c + 1 < cols) {
        add_edge(node, node + 1);
        add_edge(node + 1, node);
      }
      if (r + 1 < rows) {
        add_edge(node, node + cols);
        add_edge(node + cols, node);
      }
    }
  }
  net.rebuild_adjacency();
  net.validate();
  return net;
}

namespace {

// Deterministic Dijkstra by free-flow time over a masked subgraph.
// Ties break on node id when popping and on edge id when relaxing.
struct DijkstraResult {
  bool found = false;
  std::vector<int> edge_chain;
  double cost = 0.0;
};

DijkstraResult dijkstra_masked(const Network& net, int source, int target,
                               const std::vector<char>& edge_banned,
                               const std::vector<char>& node_banned) {
  const int n = net.num_nodes;
  std::vector<double> dist(n, kInf);
  std::vector<int> pred_edge(n, -1);
  std::vector<char> done(n, 0);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (done[u] || d > dist[u]) continue;
    done[u] = 1;
    if (u == target) break;
    for (int id : net.out_edges[u]) {
      if (edge_banned[id]) continue;
      const Edge& e = net.edges[id];
      if (node_banned[e.head]) continue;
      double nd = d + e.free_flow_time;
      if (nd < dist[e.head]) {
        dist[e.head] = nd;
        pred_edge[e.head] = id;
        pq.emplace(nd, e.head);
      }
    }
  }
  DijkstraResult res;
  if (dist[target] == kInf) return res;
  res.found = true;
  res.cost = dist[target];
  for (int v = target; v != source;) {
    int id = pred_edge[v];
    res.edge_chain.push_back(id);
    v = net.edges[id].tail;
  }
  std::reverse(res.edge_chain.begin(), res.edge_chain.end());
  return res;
}

struct Candidate {
  double cost;
  std::vector<int> edges;
  bool operator<(const Candidate& o) const {
    if (cost != o.cost) return cost < o.cost;
    return edges < o.edges;
  }
};

double chain_cost(const Network& net, const std::vector<int>& chain) {
  double c = 0.0;
  for (int id : chain) c += net.edges[id].free_flow_time;
  return c;
}

}  // namespace

std::vector<Path> enumerate_paths(const Network& net, const DemandSpec& od, int k) {
  if (k < 1) throw std::invalid_argument("enumerate_paths: k must be >= 1");
  if (od.origin == od.destination) throw std::invalid_argument("enumerate_paths: origin == destination");
  if (od.origin < 0 || od.origin >= net.num_nodes || od.destination < 0 ||
      od.destination >= net.num_nodes)
    throw std::invalid_argument("enumerate_paths: od node outside network");

  std::vector<char> no_edges(net.edges.size(), 0), no_nodes(net.num_nodes, 0);
  DijkstraResult first = dijkstra_masked(net, od.origin, od.destination, no_edges, no_nodes);
  if (!first.found)
    throw std::runtime_error("enumerate_paths: no path from " + std::to_string(od.origin) +
                             " to " + std::to_string(od.destination));

  std::vector<Candidate> accepted;
  accepted.push_back({chain_cost(net, first.edge_chain), first.edge_chain});
  std::set<Candidate> tentative;

  while (static_cast<int>(accepted.size()) < k) {
    const std::vector<int>& prev = accepted.back().edges;
    std::vector<int> root;
    root.reserve(prev.size());
    for (size_t i = 0; i < prev.size(); ++i) {
      int spur_node = net.edges[prev[i]].tail;
      std::vector<char> edge_banned(net.edges.size(), 0);
      std::vector<char> node_banned(net.num_nodes, 0);
      // Ban the next edge of every accepted path sharing this root.
      for (const Candidate& a : accepted) {
        if (a.edges.size() > i && std::equal(root.begin(), root.end(), a.edges.begin()))
          edge_banned[a.edges[i]] = 1;
      }
      // Ban root nodes except the spur node itself.
      for (int id : root) node_banned[net.edges[id].tail] = 1;

      DijkstraResult spur =
          dijkstra_masked(net, spur_node, od.destination, edge_banned, node_banned);
      if (spur.found) {
        Candidate cand;
        cand.edges = root;
        cand.edges.insert(cand.edges.end(), spur.edge_chain.begin(), spur.edge_chain.end());
        cand.cost = chain_cost(net, cand.edges);
        bool already = false;
        for (const Candidate& a : accepted)
          if (a.edges == cand.edges) { already = true; break; }
        if (!already) tentative.insert(std::move(cand));
      }
      root.push_back(prev[i]);
    }
    if (tentative.empty()) break;
    accepted.push_back(*tentative.begin());
    tentative.erase(tentative.begin());
  }

  std::vector<Path> out;
  out.reserve(accepted.size());
  for (const Candidate& c : accepted) {
    Path p;
    p.edge_ids = c.edges;
    p.origin = od.origin;
    p.destination = od.destination;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> edge_flows(const Network& net, const std::vector<Path>& paths,
                               const std::vector<double>& path_flows) {
  if (paths.size() != path_flows.size())
    throw std::invalid_argument("edge_flows: path/flow dimension mismatch");
  std::vector<double> x(net.edges.size(), 0.0);
  for (size_t p = 0; p < paths.size(); ++p) {
    if (path_flows[p] < 0.0) throw std::invalid_argument("edge_flows: negative path flow");
    for (int id : paths[p].edge_ids) x[id] += path_flows[p];
  }
  return x;
}

double total_system_time(const Network& net, const std::vector<double>& x) {
  if (x.size() != net.edges.size()) throw std::invalid_argument("total_system_time: dimension mismatch");
  double total = 0.0;
  for (size_t e = 0; e < x.size(); ++e) {
    if (x[e] < 0.0) throw std::invalid_argument("total_system_time: negative edge flow");
    total += bpr_time(net.edges[e], x[e] + net.base_flow[e]) * x[e];
  }
  return total;
}

const Path& PathTable::path(int id) const {
  if (id < 0 || id >= static_cast<int>(paths.size()))
    throw std::invalid_argument("unknown path id: " + std::to_string(id));
  return paths[static_cast<size_t>(id)];
}

PathTable build_path_table(const Network& net, const std::vector<DemandSpec>& demands, int k) {
  PathTable table;
  table.by_demand.resize(demands.size());
  for (size_t m = 0; m < demands.size(); ++m) {
    std::vector<Path> paths = enumerate_paths(net, demands[m], k);
    for (Path& p : paths) {
      p.demand_index = static_cast<int>(m);
      table.by_demand[m].push_back(static_cast<int>(table.paths.size()));
      table.paths.push_back(std::move(p));
    }
  }
  return table;
}

std::string serialize_network(const Network& net) {
  std::ostringstream out;
  out << "routeopt-network v1\n";
  out << "nodes " << net.num_nodes << "\n";
  out << "edges " << net.edges.size() << "\n";
  for (const Edge& e : net.edges) {
    out << "edge " << e.id << ' ' << e.tail << ' ' << e.head << ' ' << fmt_double(e.free_flow_time)
        << ' ' << fmt_double(e.capacity) << ' ' << fmt_double(e.length) << ' '
        << fmt_double(e.risk) << ' ' << fmt_double(e.toll) << ' ' << fmt_double(e.max_time)
        << "\n";
  }
  out << "base_flow";
  for (double f : net.base_flow) out << ' ' << fmt_double(f);
  out << "\n";
  return out.str();
}

Network parse_network(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  in >> tok;
  std::string ver;
  in >> ver;
  if (tok != "routeopt-network" || ver != "v1")
    throw std::runtime_error("parse_network: unrecognized header");
  Network net;
  size_t edge_count = 0;
  while (in >> tok) {
    if (tok == "nodes") {
      in >> net.num_nodes;
    } else if (tok == "edges") {
      in >> edge_count;
    } else if (tok == "edge") {
      Edge e;
      std::string t0, cap, len, risk, toll, tmax;
      in >> e.id >> e.tail >> e.head >> t0 >> cap >> len >> risk >> toll >> tmax;
      e.free_flow_time = parse_double(t0);
      e.capacity = parse_double(cap);
      e.length = parse_double(len);
      e.risk = parse_double(risk);
      e.toll = parse_double(toll);
      e.max_time = parse_double(tmax);
      net.edges.push_back(e);
    } else if (tok == "base_flow") {
      std::string v;
      for (size_t i = 0; i < edge_count && in >> v; ++i) net.base_flow.push_back(parse_double(v));
    } else {
      throw std::runtime_error("parse_network: unexpected token '" + tok + "'");
    }
  }
  if (net.edges.size() != edge_count || net.base_flow.size() != edge_count)
    throw std::runtime_error("parse_network: truncated file");
  net.rebuild_adjacency();
  net.validate();
  return net;
}

void write_network(const Network& net, const std::string& file) {
  write_file(file, serialize_network(net));
}

Network read_network(const std::string& file) { return parse_network(read_file(file)); }

}  // namespace routeopt::net
