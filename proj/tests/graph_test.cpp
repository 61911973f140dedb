#include <gtest/gtest.h>

#include "support/oracle.hpp"
#include "tgs/delta.hpp"
#include "tgs/error.hpp"
#include "tgs/graph.hpp"
#include "tgs/serialize.hpp"
#include "tgs/synth.hpp"

namespace {

using namespace tgs;

GraphS build(const std::vector<Event>& events) {
  return GraphS::from_delta(apply_events(Delta{}, events).materialized());
}

// Triangle 1-2-3 plus pendant 4 on 3.
GraphS triangle_pendant() {
  return build({Event::add_node(1, 1), Event::add_node(1, 2), Event::add_node(1, 3), Event::add_node(1, 4),
                Event::add_edge(2, 1, 2), Event::add_edge(2, 2, 3), Event::add_edge(2, 3, 1),
                Event::add_edge(2, 3, 4)});
}

TEST(Graph, CountsAndDensity) {
  const GraphS g = triangle_pendant();
  EXPECT_EQ(g.node_count(), 4u);
  EXPECT_EQ(g.edge_count(), 4u);
  EXPECT_DOUBLE_EQ(density(g), 4.0 / 12.0);
  EXPECT_DOUBLE_EQ(density(GraphS{}), 0.0);
}

TEST(Graph, ClusteringCoefficient) {
  const GraphS g = triangle_pendant();
  EXPECT_DOUBLE_EQ(clustering_coefficient(g, 1), 1.0);
  EXPECT_DOUBLE_EQ(clustering_coefficient(g, 2), 1.0);
  EXPECT_DOUBLE_EQ(clustering_coefficient(g, 3), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(clustering_coefficient(g, 4), 0.0);
  EXPECT_DOUBLE_EQ(clustering_coefficient(g, 99), 0.0);
}

TEST(Graph, LabelCount) {
  GraphS g = triangle_pendant();
  g.nodes[1].attrs["c"] = "x";
  g.nodes[4].attrs["c"] = "x";
  g.nodes[2].attrs["c"] = "y";
  EXPECT_EQ(label_count(g, "c", "x"), 2u);
  EXPECT_EQ(label_count(g, "c", "z"), 0u);
}

TEST(Graph, KHopBallMatchesBfsOracle) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RandomLogOptions opts;
    opts.events = 500;
    opts.max_nodes = 40;
    opts.seed = seed;
    const GraphS g = build(random_log(opts));
    for (const auto& [id, _] : g.nodes) {
      for (unsigned h = 0; h <= 3; ++h) {
        const auto ball = k_hop_ball(g, id, h);
        EXPECT_EQ(ball, oracle::ball(g, id, h));
        EXPECT_EQ(induced_subgraph(g, ball), oracle::induced(g, ball));
        EXPECT_EQ(induced_subgraph(g.to_delta(), ball), oracle::induced(g, ball));
      }
    }
    EXPECT_TRUE(k_hop_ball(g, 100000, 2).empty());
  }
}

TEST(Graph, InducedSubgraphDropsTombstones) {
  Delta d = triangle_pendant().to_delta();
  d.put_tombstone(3);
  const GraphS g = induced_subgraph(d, {1, 2, 3});
  EXPECT_EQ(g.node_count(), 2u);
  EXPECT_TRUE(referentially_intact(g));
}

TEST(Graph, ReferentialIntegrityDetectsHalfEdges) {
  GraphS g = triangle_pendant();
  EXPECT_TRUE(referentially_intact(g));
  g.nodes[4].edges.clear();
  EXPECT_FALSE(referentially_intact(g));
}

TEST(Serialize, DeltaAndGraphRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RandomLogOptions opts;
    opts.events = 300;
    opts.seed = seed;
    const auto log = random_log(opts);
    Delta d = apply_events(Delta{}, log);
    d.put_tombstone(100000 + seed);
    for (bool z : {false, true}) {
      EXPECT_EQ(deserialize_delta(serialize_delta(d, z)), d);
      const GraphS g = GraphS::from_delta(d);
      EXPECT_EQ(deserialize_graph(serialize_graph(g, z)), g);
    }
    EventList el;
    for (std::size_t i = 0; i < log.size(); ++i) el.events.push_back({i, log[i]});
    el.span = {std::nullopt, log.back().time};
    EXPECT_EQ(deserialize_event_list(serialize_event_list(el, true)), el);
  }
}

TEST(Serialize, CorruptInputThrows) {
  const std::string bytes = serialize_delta(triangle_pendant().to_delta());
  EXPECT_THROW(deserialize_delta(bytes.substr(0, bytes.size() - 1)), Error);
  EXPECT_THROW(deserialize_event_list(bytes), Error);
}

}  // namespace
