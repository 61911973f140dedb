#include <gtest/gtest.h>

#include <set>

#include "support/oracle.hpp"
#include "tgs/error.hpp"
#include "tgs/serialize.hpp"
#include "tgs/synth.hpp"
#include "tgs/tgi.hpp"

namespace {

using namespace tgs;

std::vector<Event> ten_events() {
  std::vector<Event> ev;
  for (NodeId i = 1; i <= 5; ++i) ev.push_back(Event::add_node(i, i));
  for (NodeId i = 1; i <= 4; ++i) ev.push_back(Event::add_edge(5 + i, i, i + 1));
  ev.push_back(Event::set_node_attr(10, 3, "label", "x"));
  return ev;
}

IndexConfig small_config() {
  IndexConfig cfg;
  cfg.ts_events = 1000;
  cfg.l = 2;
  cfg.k = 2;
  cfg.ns = 1;
  cfg.psize = 2;
  return cfg;
}

GraphS graph_at(const Tgi& tgi, Time t) { return GraphS::from_delta(tgi.state_at(t)); }

// Full delta of tree node (level, index), summed from the root.
Delta tree_node(const TgiStore& store, const TimeSpanRecord& span, std::uint32_t sid,
                const TreeShape& shape, std::size_t level, std::size_t index, bool aux_only = false) {
  std::vector<std::pair<std::size_t, std::size_t>> path;
  for (std::size_t lv = level + 1, i = index; lv-- > 0; i /= shape.arity()) path.insert(path.begin(), {lv, i});
  Delta out;
  for (const auto& [lv, i] : path) {
    for (const auto& rec : store.scan_delta(span.tsid, sid, shape.did(lv, i))) {
      if (is_aux_pid(rec.key.pid) != aux_only) continue;
      out = out + deserialize_delta(rec.dval);
    }
  }
  return out;
}

// Checks parent = intersection of children and leaf = checkpoint state for
// every tree in the index.
void check_trees(const Tgi& tgi, std::span<const Event> log) {
  for (const auto& span : tgi.spans()) {
    const TreeShape shape = TreeShape::for_leaves(span.checkpts.size(), span.k);
    for (std::uint32_t sid = 0; sid < tgi.config().ns; ++sid) {
      for (std::size_t level = 0; level + 1 < shape.levels(); ++level) {
        for (std::size_t i = 0; i < shape.level_size(level); ++i) {
          const Delta parent = tree_node(tgi.store(), span, sid, shape, level, i);
          std::optional<Delta> acc;
          for (std::size_t c = i * shape.arity();
               c < std::min((i + 1) * shape.arity(), shape.level_size(level + 1)); ++c) {
            const Delta child = tree_node(tgi.store(), span, sid, shape, level + 1, c);
            acc = acc ? delta_intersect(*acc, child) : child;
          }
          ASSERT_TRUE(acc.has_value());
          EXPECT_EQ(parent, *acc) << "span " << span.tsid << " sid " << sid << " node " << level << "," << i;
        }
      }
      for (std::size_t j = 0; j < shape.leaf_count(); ++j) {
        const Delta leaf = tree_node(tgi.store(), span, sid, shape, shape.height(), j);
        std::set<NodeId> ids;
        for (const auto& [id, _] : leaf.entries()) ids.insert(id);
        const Time at = j == 0 ? span.start - 1 : span.checkpts[j];
        const GraphS expect = j == 0 && span.start == 0 ? GraphS{} : oracle::replay(log, at);
        GraphS got = GraphS::from_delta(leaf);
        GraphS want;
        for (NodeId id : ids) {
          if (const StaticNode* n = expect.find(id)) want.nodes.emplace(id, *n);
        }
        EXPECT_EQ(got, want) << "span " << span.tsid << " sid " << sid << " leaf " << j;
      }
    }
  }
}

TEST(IndexConfig, ParseRoundTripAndValidation) {
  IndexConfig cfg;
  cfg.ts_events = 50;
  cfg.ns = 3;
  cfg.partitioning = PartitioningMode::kLocality;
  cfg.replicate_1hop = true;
  cfg.collapse = CollapseFn::kMedian;
  EXPECT_EQ(IndexConfig::parse(cfg.to_text()), cfg);
  EXPECT_EQ(IndexConfig::parse("# comment\nk = 3\n\nl=7\n").k, 3u);
  EXPECT_THROW(IndexConfig::parse("bogus=1"), Error);
  EXPECT_THROW(IndexConfig::parse("k=0"), Error);
  EXPECT_THROW(IndexConfig::parse("partitioning=hierarchical"), Error);
  EXPECT_THROW(IndexConfig::parse("l"), Error);
}

TEST(TreeShape, Shapes) {
  const TreeShape five = TreeShape::for_leaves(5, 2);
  EXPECT_EQ(five.height(), 3u);
  EXPECT_EQ(five.level_size(0), 1u);
  EXPECT_EQ(five.level_size(1), 2u);
  EXPECT_EQ(five.level_size(2), 3u);
  EXPECT_EQ(five.node_count(), 11u);
  EXPECT_EQ(five.did(0, 0), 0u);
  EXPECT_EQ(five.did(3, 4), 20u);
  const auto path = five.path_to_leaf(4);
  ASSERT_EQ(path.size(), 4u);
  EXPECT_EQ(path.back(), std::make_pair(std::size_t{3}, std::size_t{4}));
  EXPECT_EQ(path[1], std::make_pair(std::size_t{1}, std::size_t{1}));
  EXPECT_EQ(five.first_leaf(1, 1), 4u);

  EXPECT_EQ(TreeShape::for_leaves(1, 2).height(), 0u);
  const TreeShape flat = TreeShape::for_leaves(6, 1);
  EXPECT_EQ(flat.height(), 1u);
  EXPECT_EQ(flat.level_size(1), 6u);
}

TEST(Build, EmptyLog) {
  auto store = TgiStore::in_memory(1);
  const Tgi tgi = Tgi::build(*store, {}, small_config());
  EXPECT_TRUE(tgi.empty());
  EXPECT_TRUE(tgi.state_at(0).empty());
  EXPECT_TRUE(tgi.state_at(1000).empty());
  const IndexStats st = tgi.describe();
  EXPECT_EQ(st.meta.tscount, 0u);
  EXPECT_EQ(st.meta.events, 0u);
  EXPECT_EQ(st.delta_records, 0u);
}

TEST(Build, TenEventTreeShape) {
  const auto log = ten_events();
  auto store = TgiStore::in_memory(1);
  const Tgi tgi = Tgi::build(*store, log, small_config());
  ASSERT_EQ(tgi.spans().size(), 1u);
  const auto& span = tgi.spans()[0];
  EXPECT_EQ(span.checkpts, (std::vector<Time>{1, 2, 4, 6, 8}));
  const IndexStats st = tgi.describe();
  EXPECT_EQ(st.meta.tscount, 1u);
  EXPECT_EQ(st.meta.events, 10u);
  ASSERT_EQ(st.spans.size(), 1u);
  EXPECT_EQ(st.spans[0].checkpoints.size(), 5u);
  EXPECT_EQ(st.spans[0].tree_height, 3u);
  check_trees(tgi, log);
  for (Time t = 0; t <= 11; ++t) EXPECT_EQ(graph_at(tgi, t), oracle::replay(log, t)) << t;
}

TEST(Build, RefusesNonEmptyStore) {
  auto store = TgiStore::in_memory(1);
  Tgi::build(*store, ten_events(), small_config());
  try {
    Tgi::build(*store, ten_events(), small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRefuseOverwrite);
  }
}

TEST(Build, OpenReadsBack) {
  auto store = TgiStore::in_memory(2);
  EXPECT_THROW(Tgi::open(*store), Error);
  IndexConfig cfg = small_config();
  cfg.ns = 3;
  const Tgi built = Tgi::build(*store, ten_events(), cfg);
  const Tgi opened = Tgi::open(*store);
  EXPECT_EQ(opened.config(), cfg);
  EXPECT_EQ(opened.spans(), built.spans());
  EXPECT_EQ(opened.meta(), built.meta());
}

TEST(Build, AnchorLeaf) {
  TimeSpanRecord span;
  span.start = 1;
  span.end = 10;
  span.checkpts = {1, 2, 4, 6, 8};
  EXPECT_EQ(anchor_leaf(span, 1), 0u);
  EXPECT_TRUE(needs_events(span, 1));
  EXPECT_EQ(anchor_leaf(span, 2), 1u);
  EXPECT_FALSE(needs_events(span, 2));
  EXPECT_EQ(anchor_leaf(span, 5), 2u);
  EXPECT_TRUE(needs_events(span, 5));
  EXPECT_EQ(anchor_leaf(span, 9), 4u);
}

struct Shape {
  std::uint64_t ts_events;
  std::uint32_t ns, l, psize, k;
  PartitioningMode mode;
  bool aux;
};

class TreeInvariants : public ::testing::TestWithParam<Shape> {};

TEST_P(TreeInvariants, RandomLogs) {
  const Shape s = GetParam();
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    RandomLogOptions opts;
    opts.events = 700;
    opts.max_nodes = 50;
    opts.seed = seed;
    const auto log = random_log(opts);
    IndexConfig cfg;
    cfg.ts_events = s.ts_events;
    cfg.ns = s.ns;
    cfg.l = s.l;
    cfg.psize = s.psize;
    cfg.k = s.k;
    cfg.partitioning = s.mode;
    cfg.replicate_1hop = s.aux;
    cfg.seed = seed;
    auto store = TgiStore::in_memory(3);
    const Tgi tgi = Tgi::build(*store, log, cfg);
    check_trees(tgi, log);
    std::vector<Time> times;
    for (Time t = 0; t <= log.back().time + 1; t += 7) times.push_back(t);
    const auto want = oracle::replay_at(log, times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      EXPECT_EQ(graph_at(tgi, times[i]), want[i]) << "t=" << times[i];
    }
  }
}

INSTANTIATE_TEST_SUITE_P(
    Configs, TreeInvariants,
    ::testing::Values(Shape{1000, 1, 50, 100, 2, PartitioningMode::kRandom, false},
                      Shape{200, 2, 17, 8, 3, PartitioningMode::kRandom, false},
                      Shape{250, 3, 40, 10, 1, PartitioningMode::kRandom, false},
                      Shape{300, 2, 25, 12, 2, PartitioningMode::kLocality, true},
                      Shape{150, 1, 10, 20, 4, PartitioningMode::kLocality, false}));

TEST(VersionChains, EveryReferenceHasExactlyOnePointer) {
  RandomLogOptions opts;
  opts.events = 800;
  opts.max_nodes = 60;
  const auto log = random_log(opts);
  IndexConfig cfg;
  cfg.ts_events = 300;
  cfg.ns = 2;
  cfg.l = 30;
  cfg.psize = 10;
  cfg.partitioning = PartitioningMode::kLocality;
  cfg.replicate_1hop = true;
  auto store = TgiStore::in_memory(2);
  const Tgi tgi = Tgi::build(*store, log, cfg);

  // Expected (node, key) references from the stored records.
  std::multiset<std::pair<NodeId, DeltaKey>> referenced;
  for (const auto& span : tgi.spans()) {
    for (const auto& rec : store->scan_delta(span.tsid)) {
      if (is_aux_pid(rec.key.pid)) continue;
      if (is_eventlist_did(rec.key.did)) {
        std::set<NodeId> ids;
        for (const auto& me : deserialize_masked_events(rec.dval)) {
          if (me.mask & kMaskSubject) ids.insert(me.event.subject);
          if (me.mask & kMaskPeer) ids.insert(me.event.peer);
        }
        for (NodeId id : ids) referenced.insert({id, rec.key});
      } else {
        const Delta d = deserialize_delta(rec.dval);
        for (const auto& [id, _] : d.entries()) referenced.insert({id, rec.key});
      }
    }
  }
  std::multiset<std::pair<NodeId, DeltaKey>> pointed;
  std::set<NodeId> logged;
  for (const auto& e : log) {
    logged.insert(e.subject);
    if (is_edge_event(e.kind)) logged.insert(e.peer);
  }
  for (NodeId id : logged) {
    const auto vc = store->get_versions(id);
    ASSERT_TRUE(vc.has_value()) << id;
    for (const auto& [tsid, chain] : vc->vchain) {
      EXPECT_TRUE(std::is_sorted(chain.begin(), chain.end()));
      for (const auto& p : chain) {
        EXPECT_EQ(p.key.tsid, tsid);
        EXPECT_TRUE(store->get_delta(p.key).has_value());
        pointed.insert({id, p.key});
      }
    }
  }
  EXPECT_EQ(pointed, referenced);
}

TEST(Update, EquivalentToSingleBuild) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RandomLogOptions opts;
    opts.events = 900;
    opts.seed = seed;
    const auto log = random_log(opts);
    // Split between distinct timestamps.
    std::size_t cut = 450;
    while (cut < log.size() && log[cut].time == log[cut - 1].time) ++cut;
    const std::vector<Event> l1(log.begin(), log.begin() + cut), l2(log.begin() + cut, log.end());

    IndexConfig cfg;
    cfg.ts_events = 150;
    cfg.ns = 2;
    cfg.l = 20;
    cfg.psize = 15;
    cfg.partitioning = seed % 2 ? PartitioningMode::kLocality : PartitioningMode::kRandom;
    auto s1 = TgiStore::in_memory(2);
    Tgi a = Tgi::build(*s1, l1, cfg);
    a.update({});
    a.update(l2);
    auto s2 = TgiStore::in_memory(2);
    const Tgi b = Tgi::build(*s2, log, cfg);
    EXPECT_EQ(a.meta().events, b.meta().events);
    for (Time t = 0; t <= log.back().time + 1; t += 11) {
      EXPECT_EQ(graph_at(a, t), graph_at(b, t));
      EXPECT_EQ(graph_at(a, t), oracle::replay(log, t));
    }
    check_trees(a, log);
  }
}

TEST(Update, RejectsOldEvents) {
  auto store = TgiStore::in_memory(1);
  Tgi tgi = Tgi::build(*store, ten_events(), small_config());
  const std::vector<Event> late = {Event::add_node(10, 99)};
  try {
    tgi.update(late);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfOrderBatch);
  }
  const std::vector<Event> invalid = {Event::delete_node(20, 12345)};
  EXPECT_THROW(tgi.update(invalid), Error);
  EXPECT_EQ(tgi.meta().events, 10u);
  const std::vector<Event> ok = {Event::add_node(11, 99)};
  tgi.update(ok);
  EXPECT_EQ(tgi.meta().tscount, 2u);
  EXPECT_TRUE(tgi.state_at(11).contains_live(99));
}

TEST(Build, CompressionDoesNotChangeAnswers) {
  RandomLogOptions opts;
  opts.events = 500;
  const auto log = random_log(opts);
  IndexConfig cfg;
  cfg.ts_events = 200;
  cfg.l = 30;
  auto s1 = TgiStore::in_memory(1), s2 = TgiStore::in_memory(1);
  const Tgi plain = Tgi::build(*s1, log, cfg);
  cfg.compress = true;
  const Tgi packed = Tgi::build(*s2, log, cfg);
  for (Time t = 0; t <= log.back().time; t += 13) EXPECT_EQ(plain.state_at(t), packed.state_at(t));
}

}  // namespace
