#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fleetcharge/network.hpp"

using namespace fleetcharge;

namespace {

/// Floyd-Warshall over the edge list, meters.
std::vector<std::vector<double>> all_pairs(const RoadNetwork& net) {
  const std::size_t n = net.num_nodes();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, kUnreachable));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& e : net.edges()) d[e.from][e.to] = std::min(d[e.from][e.to], e.length_m);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

RoadNetwork random_network(std::size_t n, std::size_t edges, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> len(50, 2000);
  RoadNetwork net;
  for (std::size_t i = 0; i < n; ++i) net.add_node(static_cast<long>(10 * i + 3), 0, 0);
  for (std::size_t k = 0; k < edges; ++k) {
    const auto a = static_cast<long>(10 * (rng() % n) + 3), b = static_cast<long>(10 * (rng() % n) + 3);
    if (a != b) net.add_edge(a, b, len(rng));
  }
  return net;
}

RoadNetwork parse_text(const std::string& s) {
  std::istringstream in(s);
  return RoadNetwork::parse(in);
}

}  // namespace

TEST(RoadNetworkParse, ReadsNodesEdgesAndComments) {
  const auto net = parse_text(
      "# tiny network\n"
      "node 7 0 0\n"
      "node 9 100 0   # east\n"
      "\n"
      "edge 7 9 120.5\n"
      "edge 9 7 130\n");
  EXPECT_EQ(net.num_nodes(), 2u);
  EXPECT_EQ(net.num_edges(), 2u);
  EXPECT_EQ(net.index_of(9), 1u);
  EXPECT_DOUBLE_EQ(net.edges()[0].length_m, 120.5);
  EXPECT_DOUBLE_EQ(net.node(1).x, 100);
}

TEST(RoadNetworkParse, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    try {
      parse_text(text);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("node 1 0 0\nroad 1 2 3\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("node 1 0\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("node 1 0 0\nedge 1 5 10\n").find("unknown node id 5"), std::string::npos);
  EXPECT_NE(message("node 1 0 0\nnode 1 1 1\n").find("duplicate"), std::string::npos);
  EXPECT_NE(message("node 1 0 0\nnode 2 0 0\nedge 1 2 0\n").find("positive"), std::string::npos);
  EXPECT_NE(message("node 1 0 0 extra\n").find("trailing"), std::string::npos);
  EXPECT_NE(message("# nothing\n").find("no nodes"), std::string::npos);
}

TEST(RoadNetworkParse, WriteRoundTrips) {
  const auto net = grid_network(3, 4, 250, 0.3, 5);
  std::ostringstream out;
  net.write(out);
  const auto back = parse_text(out.str());
  ASSERT_EQ(back.num_nodes(), net.num_nodes());
  ASSERT_EQ(back.num_edges(), net.num_edges());
  for (std::size_t k = 0; k < net.num_edges(); ++k)
    EXPECT_NEAR(back.edges()[k].length_m, net.edges()[k].length_m, 1e-3);
}

TEST(GridNetwork, ShapeAndLengths) {
  const auto plain = grid_network(4, 5, 600);
  EXPECT_EQ(plain.num_nodes(), 20u);
  EXPECT_EQ(plain.num_edges(), 2u * (4 * 4 + 5 * 3));
  for (const auto& e : plain.edges()) EXPECT_DOUBLE_EQ(e.length_m, 600);

  const auto jittered = grid_network(4, 5, 600, 0.2, 3);
  for (const auto& e : jittered.edges()) {
    EXPECT_GE(e.length_m, 480);
    EXPECT_LE(e.length_m, 720);
  }
  EXPECT_THROW(grid_network(0, 3, 600), InvalidParameter);
  EXPECT_THROW(grid_network(3, 3, 600, 1.0), InvalidParameter);
}

TEST(Dijkstra, MatchesFloydWarshall) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto net = random_network(12, 30, seed);
    const auto oracle = all_pairs(net);
    for (std::size_t s = 0; s < net.num_nodes(); ++s) {
      const auto fwd = net.dijkstra(s);
      const auto bwd = net.dijkstra(s, true);
      for (std::size_t t = 0; t < net.num_nodes(); ++t) {
        if (std::isinf(oracle[s][t])) EXPECT_TRUE(std::isinf(fwd[t]));
        else EXPECT_NEAR(fwd[t], oracle[s][t], 1e-9);
        if (std::isinf(oracle[t][s])) EXPECT_TRUE(std::isinf(bwd[t]));
        else EXPECT_NEAR(bwd[t], oracle[t][s], 1e-9);
      }
    }
  }
}

TEST(DistanceTable, KilometersAndNextHops) {
  const auto net = random_network(15, 60, 99);
  const auto oracle = all_pairs(net);
  const DistanceTable table(net);
  for (std::size_t u = 0; u < net.num_nodes(); ++u)
    for (std::size_t t = 0; t < net.num_nodes(); ++t) {
      if (std::isinf(oracle[u][t])) {
        EXPECT_TRUE(std::isinf(table.km(u, t)));
        continue;
      }
      EXPECT_NEAR(table.km(u, t), oracle[u][t] / 1000, 1e-12);
      if (u == t) continue;
      // Following next hops walks a shortest path.
      const std::size_t w = table.next_hop(u, t);
      double hop = kUnreachable;
      for (const auto& e : net.edges())
        if (e.from == u && e.to == w) hop = std::min(hop, e.length_m / 1000);
      EXPECT_NEAR(hop + table.km(w, t), table.km(u, t), 1e-9);
    }
}

TEST(DistanceTable, NodeAfterProgress) {
  const auto net = grid_network(1, 5, 1000);  // a line 0-1-2-3-4, 1 km apart
  const DistanceTable table(net);
  EXPECT_EQ(table.node_after(0, 4, 0.0), 0u);
  EXPECT_EQ(table.node_after(0, 4, 0.999), 0u);
  EXPECT_EQ(table.node_after(0, 4, 1.0), 1u);
  EXPECT_EQ(table.node_after(0, 4, 2.5), 2u);
  EXPECT_EQ(table.node_after(0, 4, 10.0), 4u);
  EXPECT_EQ(table.node_after(4, 0, 3.2), 1u);
}

TEST(StationConnectivity, OneWayEdgeBreaksIt) {
  RoadNetwork net;
  for (long i = 0; i < 3; ++i) net.add_node(i, 0, 0);
  net.add_edge(0, 1, 10);
  net.add_edge(1, 2, 10);
  EXPECT_FALSE(stations_strongly_connected(net, {0, 2}));
  net.add_edge(2, 0, 10);
  EXPECT_TRUE(stations_strongly_connected(net, {0, 2}));
}

TEST(StationRegions, NearestStationByGraphDistance) {
  const auto net = random_network(14, 40, 7);
  const auto oracle = all_pairs(net);
  const std::vector<std::size_t> stations{2, 5, 11};
  const auto region = station_regions(net, stations);
  for (std::size_t u = 0; u < net.num_nodes(); ++u) {
    int expect = -1;
    double best = kUnreachable;
    for (std::size_t k = 0; k < stations.size(); ++k)
      if (oracle[u][stations[k]] < best) {
        best = oracle[u][stations[k]];
        expect = static_cast<int>(k);
      }
    EXPECT_EQ(region[u], expect) << "node " << u;
  }
  for (std::size_t k = 0; k < stations.size(); ++k) EXPECT_EQ(region[stations[k]], static_cast<int>(k));
}
