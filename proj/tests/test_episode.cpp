#include <gtest/gtest.h>

#include <set>

#include "cpt/data_io.hpp"
#include "cpt/episode.hpp"

namespace {

using namespace cpt;

Graph benchmark_graph() {
  SbmSpec spec;
  spec.num_classes = 8;
  spec.nodes_per_class = 20;
  spec.intra_p = 0.3;
  spec.inter_p = 0.02;
  spec.feature_dim = 8;
  spec.noise = 0.2;
  spec.seed = 100;
  return generate_sbm(spec);
}

TEST(LabelIndex, GroupsNodesByClassAscending) {
  MatrixF x(5, 2);
  const Graph g = Graph::create(5, {}, std::move(x), {1, 0, 1, -1, 0});
  const LabelIndex index = build_label_index(g);
  EXPECT_EQ(index.size(), 2u);
  EXPECT_EQ(index.at(0), (std::vector<NodeId>{1, 4}));
  EXPECT_EQ(index.at(1), (std::vector<NodeId>{0, 2}));
  EXPECT_EQ(index.count(-1), 0u);
}

TEST(SampleTask, ShapeGroupingAndMembership) {
  const Graph g = benchmark_graph();
  const std::vector<ClassId> pool{0, 1, 2, 3, 4};
  const EpisodeShape shape{3, 2, 4};
  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const EpisodeTask task = sample_task(g, pool, shape, rng);
    ASSERT_EQ(task.class_list.size(), 3u);
    ASSERT_EQ(task.support.size(), 6u);   // N*K
    ASSERT_EQ(task.query.size(), 12u);    // N*R

    // classes distinct and from the pool
    std::set<ClassId> classes(task.class_list.begin(), task.class_list.end());
    EXPECT_EQ(classes.size(), 3u);
    for (ClassId c : task.class_list)
      EXPECT_TRUE(std::count(pool.begin(), pool.end(), c) == 1);

    // grouped by class: support entry i has local label i / K
    for (std::size_t i = 0; i < task.support.size(); ++i)
      EXPECT_EQ(task.support[i].second, static_cast<std::int32_t>(i / 2));
    for (std::size_t i = 0; i < task.query.size(); ++i)
      EXPECT_EQ(task.query[i].second, static_cast<std::int32_t>(i / 4));

    // local labels map to the true class; nodes distinct; disjoint sets
    std::set<NodeId> support_nodes, query_nodes;
    for (const auto& [node, label] : task.support) {
      EXPECT_EQ(g.labels()[static_cast<std::size_t>(node)],
                task.class_list[static_cast<std::size_t>(label)]);
      EXPECT_TRUE(support_nodes.insert(node).second);
    }
    for (const auto& [node, label] : task.query) {
      EXPECT_EQ(g.labels()[static_cast<std::size_t>(node)],
                task.class_list[static_cast<std::size_t>(label)]);
      EXPECT_TRUE(query_nodes.insert(node).second);
      EXPECT_EQ(support_nodes.count(node), 0u);
    }
  }
}

TEST(SampleTask, DeterministicGivenSeed) {
  const Graph g = benchmark_graph();
  const std::vector<ClassId> pool{0, 1, 2, 3, 4, 5, 6, 7};
  const EpisodeShape shape{5, 3, 5};
  Rng a(42), b(42), c(43);
  const EpisodeTask ta = sample_task(g, pool, shape, a);
  const EpisodeTask tb = sample_task(g, pool, shape, b);
  const EpisodeTask tc = sample_task(g, pool, shape, c);
  EXPECT_EQ(ta.class_list, tb.class_list);
  EXPECT_EQ(ta.support, tb.support);
  EXPECT_EQ(ta.query, tb.query);
  EXPECT_FALSE(ta.class_list == tc.class_list && ta.support == tc.support &&
               ta.query == tc.query);
}

TEST(SampleTask, PrecomputedIndexMatchesGraphOverload) {
  const Graph g = benchmark_graph();
  const LabelIndex index = build_label_index(g);
  const std::vector<ClassId> pool{1, 3, 5, 7};
  const EpisodeShape shape{2, 2, 2};
  Rng a(9), b(9);
  const EpisodeTask ta = sample_task(g, pool, shape, a);
  const EpisodeTask tb = sample_task(index, pool, shape, b);
  EXPECT_EQ(ta.class_list, tb.class_list);
  EXPECT_EQ(ta.support, tb.support);
  EXPECT_EQ(ta.query, tb.query);
}

TEST(SampleTask, PoolTooSmallIsConfigError) {
  const Graph g = benchmark_graph();
  Rng rng(1);
  try {
    sample_task(g, {0, 1}, EpisodeShape{5, 1, 1}, rng);
    FAIL() << "expected config_error";
  } catch (const config_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2 classes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("5"), std::string::npos) << msg;
  }
}

TEST(SampleTask, ClassWithTooFewNodesIsDataError) {
  MatrixF x(7, 2);
  // class 0 has 5 nodes, class 1 has 2
  const Graph g = Graph::create(7, {}, std::move(x), {0, 0, 0, 0, 0, 1, 1});
  Rng rng(2);
  try {
    sample_task(g, {0, 1}, EpisodeShape{2, 2, 1}, rng);
    FAIL() << "expected data_error";
  } catch (const data_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("class 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("need 3"), std::string::npos) << msg;
  }
}

TEST(SampleTask, InvalidShapeRejected) {
  const Graph g = benchmark_graph();
  Rng rng(3);
  EXPECT_THROW(sample_task(g, {0, 1}, EpisodeShape{0, 1, 1}, rng), config_error);
  EXPECT_THROW(sample_task(g, {0, 1}, EpisodeShape{2, 0, 1}, rng), config_error);
  EXPECT_THROW(sample_task(g, {0, 1}, EpisodeShape{2, 1, 0}, rng), config_error);
}

}  // namespace
