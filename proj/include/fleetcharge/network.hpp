#pragma once

// Road network: text format, synthetic grids, shortest paths and station
// regions by graph distance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace fleetcharge {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct RoadNode {
  long id = 0;
  double x = 0, y = 0;  // meters
};

struct RoadEdge {
  std::size_t from = 0, to = 0;  // node indices
  double length_m = 0;
};

class RoadNetwork {
 public:
  std::size_t add_node(long id, double x, double y) {
    if (index_.count(id)) throw ParseError("duplicate node id " + std::to_string(id));
    index_[id] = nodes_.size();
    nodes_.push_back({id, x, y});
    out_.emplace_back();
    in_.emplace_back();
    return nodes_.size() - 1;
  }

  void add_edge(long from_id, long to_id, double length_m) {
    if (!(length_m > 0) || !std::isfinite(length_m)) throw ParseError("edge length must be positive");
    const std::size_t a = index_of(from_id), b = index_of(to_id);
    out_[a].push_back(edges_.size());
    in_[b].push_back(edges_.size());
    edges_.push_back({a, b, length_m});
  }

  std::size_t index_of(long id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw ParseError("unknown node id " + std::to_string(id));
    return it->second;
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const RoadNode& node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<RoadEdge>& edges() const { return edges_; }

  /// Shortest distances in meters, from `source` along edges (forward) or
  /// to `source` against them (reverse).
  std::vector<double> dijkstra(std::size_t source, bool reverse = false) const {
    std::vector<double> dist(nodes_.size(), kUnreachable);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist.at(source) = 0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      for (std::size_t e : reverse ? in_[u] : out_[u]) {
        const std::size_t w = reverse ? edges_[e].from : edges_[e].to;
        const double nd = d + edges_[e].length_m;
        if (nd < dist[w]) {
          dist[w] = nd;
          heap.emplace(nd, w);
        }
      }
    }
    return dist;
  }

  /// Node records "node id x y" and edge records "edge from to length_m";
  /// '#' starts a comment.
  static RoadNetwork parse(std::istream& in) {
    RoadNetwork net;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      std::string kind;
      if (!(ss >> kind)) continue;
      auto fail = [&](const std::string& what) {
        throw ParseError("network line " + std::to_string(lineno) + ": " + what);
      };
      try {
        if (kind == "node") {
          long id;
          double x, y;
          if (!(ss >> id >> x >> y)) fail("expected: node id x y");
          net.add_node(id, x, y);
        } else if (kind == "edge") {
          long a, b;
          double len;
          if (!(ss >> a >> b >> len)) fail("expected: edge from to length_m");
          net.add_edge(a, b, len);
        } else {
          fail("unknown record '" + kind + "'");
        }
      } catch (const ParseError& e) {
        if (std::string(e.what()).rfind("network line", 0) == 0) throw;
        fail(e.what());
      }
      std::string extra;
      if (ss >> extra) fail("trailing field '" + extra + "'");
    }
    if (net.num_nodes() == 0) throw ParseError("network has no nodes");
    return net;
  }

  void write(std::ostream& out) const {
    for (const auto& n : nodes_) out << "node " << n.id << ' ' << n.x << ' ' << n.y << '\n';
    for (const auto& e : edges_) out << "edge " << nodes_[e.from].id << ' ' << nodes_[e.to].id << ' ' << e.length_m << '\n';
  }

 private:
  std::vector<RoadNode> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::vector<std::size_t>> out_, in_;
  std::unordered_map<long, std::size_t> index_;
};

/// Two-way grid with optional multiplicative jitter on segment lengths.
inline RoadNetwork grid_network(std::size_t rows, std::size_t cols, double spacing_m, double jitter = 0.0,
                                std::uint64_t seed = 1) {
  if (rows < 1 || cols < 1) throw InvalidParameter("grid needs at least one row and column");
  if (!(spacing_m > 0)) throw InvalidParameter("grid spacing must be positive");
  if (!(jitter >= 0 && jitter < 1)) throw InvalidParameter("grid jitter must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1 - jitter, 1 + jitter);
  RoadNetwork net;
  auto id = [&](std::size_t r, std::size_t c) { return static_cast<long>(r * cols + c); };
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      net.add_node(id(r, c), static_cast<double>(c) * spacing_m, static_cast<double>(r) * spacing_m);
  auto link = [&](long a, long b) {
    const double len = spacing_m * (jitter > 0 ? u(rng) : 1.0);
    net.add_edge(a, b, len);
    net.add_edge(b, a, len);
  };
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (c + 1 < cols) link(id(r, c), id(r, c + 1));
      if (r + 1 < rows) link(id(r, c), id(r + 1, c));
    }
  return net;
}

/// All-pairs distances (km) and next hops, one Dijkstra per target on the
/// reversed graph.
class DistanceTable {
 public:
  explicit DistanceTable(const RoadNetwork& net) : n_(net.num_nodes()), km_(n_ * n_), next_(n_ * n_) {
    for (std::size_t t = 0; t < n_; ++t) {
      const auto to_t = net.dijkstra(t, true);
      for (std::size_t u = 0; u < n_; ++u) km_[u * n_ + t] = to_t[u] / 1000.0;
    }
    // Next hop from u towards t: the out-neighbour on a shortest path.
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::fill(next_.begin(), next_.end(), none);
    for (const auto& e : net.edges())
      for (std::size_t t = 0; t < n_; ++t) {
        const double via = e.length_m / 1000.0 + km_[e.to * n_ + t];
        const double best = km_[e.from * n_ + t];
        if (std::isfinite(best) && e.from != t && std::abs(via - best) <= 1e-9 * (1 + best)) {
          std::size_t& slot = next_[e.from * n_ + t];
          if (slot == none || e.to < slot) slot = e.to;
        }
      }
  }

  std::size_t size() const { return n_; }
  double km(std::size_t from, std::size_t to) const { return km_[from * n_ + to]; }
  std::size_t next_hop(std::size_t from, std::size_t to) const { return next_[from * n_ + to]; }

  /// Last node passed after travelling `progress_km` from `from` towards `to`.
  std::size_t node_after(std::size_t from, std::size_t to, double progress_km) const {
    std::size_t u = from;
    while (u != to) {
      const std::size_t w = next_hop(u, to);
      const double step = km(u, to) - km(w, to);
      if (progress_km < step - 1e-12) break;
      progress_km -= step;
      u = w;
    }
    return u;
  }

 private:
  std::size_t n_;
  std::vector<double> km_;
  std::vector<std::size_t> next_;
};

/// Every station reachable from every other station.
inline bool stations_strongly_connected(const RoadNetwork& net, const std::vector<std::size_t>& stations) {
  if (stations.empty()) return true;
  const auto fwd = net.dijkstra(stations[0]);
  const auto bwd = net.dijkstra(stations[0], true);
  for (std::size_t s : stations)
    if (!std::isfinite(fwd.at(s)) || !std::isfinite(bwd.at(s))) return false;
  return true;
}

/// Region of each node: the station with the smallest graph distance from
/// the node, lowest index on ties; nodes that reach no station get -1.
inline std::vector<int> station_regions(const RoadNetwork& net, const std::vector<std::size_t>& stations) {
  std::vector<int> region(net.num_nodes(), -1);
  std::vector<double> best(net.num_nodes(), kUnreachable);
  for (std::size_t k = 0; k < stations.size(); ++k) {
    const auto to_k = net.dijkstra(stations[k], true);
    for (std::size_t u = 0; u < net.num_nodes(); ++u)
      if (to_k[u] < best[u]) {
        best[u] = to_k[u];
        region[u] = static_cast<int>(k);
      }
  }
  return region;
}

}  // namespace fleetcharge
