#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "rydmis/graphs.hpp"
#include "rydmis/hamiltonian.hpp"

using namespace rydmis;

namespace {

std::vector<std::pair<int, int>> edge_list(const UnitDiskGraph& g) {
  std::vector<std::pair<int, int>> e(g.edges().begin(), g.edges().end());
  return e;
}

}  // namespace

TEST(UnitDiskGraph, ThreeRowHasTwoEdges) {
  const auto g = testutil::three_row();
  EXPECT_EQ(g.order(), 3u);
  EXPECT_EQ(edge_list(g), (std::vector<std::pair<int, int>>{{0, 1}, {1, 2}}));
  EXPECT_FALSE(g.adjacent(0, 2));
}

TEST(UnitDiskGraph, SingleSiteHasNoEdges) {
  EXPECT_TRUE(testutil::single_site().edges().empty());
}

TEST(UnitDiskGraph, DiagonalIsOnTheBoundary) {
  const auto g = build_unit_disk_graph({{0, 0}, {1, 1}}, 5.0);
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_TRUE(g.adjacent(0, 1));
  const auto far = build_unit_disk_graph({{0, 0}, {2, 1}}, 5.0);
  EXPECT_TRUE(far.edges().empty());
}

TEST(UnitDiskGraph, DuplicateSiteNamesIndices) {
  try {
    build_unit_disk_graph({{0, 0}, {3, 1}, {0, 0}}, 5.0);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("indices 0 and 2"), std::string::npos) << msg;
  }
}

TEST(UnitDiskGraph, EmptyAndBadSpacingRejected) {
  EXPECT_THROW(build_unit_disk_graph({}, 5.0), DomainError);
  EXPECT_THROW(build_unit_disk_graph({{0, 0}}, 0.0), DomainError);
  EXPECT_THROW(build_unit_disk_graph({{0, 0}}, -1.0), DomainError);
}

TEST(UnitDiskGraph, EdgesMatchEuclideanRuleOnRandomGraphs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = testutil::random_graph(2 + trial % 14, rng);
    for (std::size_t i = 0; i < g.order(); ++i) {
      EXPECT_FALSE(g.adjacent(i, i));
      for (std::size_t j = 0; j < g.order(); ++j) {
        if (i == j) continue;
        EXPECT_EQ(g.adjacent(i, j), oracle::edge(g.site(i), g.site(j)));
        EXPECT_EQ(g.adjacent(i, j), g.adjacent(j, i));
      }
    }
  }
}

TEST(Bitstring, ParseAndMaskRoundTrip) {
  const auto b = Bitstring::parse("1011");
  EXPECT_EQ(b.count(), 3u);
  EXPECT_EQ(b.to_mask(), 0b1101u);
  EXPECT_EQ(Bitstring::from_mask(0b1101, 4).str(), "1011");
  EXPECT_THROW(Bitstring::parse("10x"), DomainError);
}

TEST(Census, ThreeRow) {
  const auto c = independent_set_census(testutil::three_row());
  EXPECT_EQ(c.degeneracies, (std::vector<std::uint64_t>{1, 3, 1}));
  EXPECT_EQ(c.independence_number, 2u);
  ASSERT_EQ(c.mis_solutions.size(), 1u);
  EXPECT_EQ(c.mis_solutions[0].str(), "101");
}

TEST(Census, SingleVertex) {
  const auto c = independent_set_census(testutil::single_site());
  EXPECT_EQ(c.degeneracies, (std::vector<std::uint64_t>{1, 1}));
  EXPECT_EQ(c.independence_number, 1u);
  EXPECT_DOUBLE_EQ(hardness_parameter(c), 1.0);
}

TEST(Census, Toy7DEHasUniqueMisOnAtoms1379) {
  const auto c = independent_set_census(parse_toy_graph_id("7DE"));
  ASSERT_EQ(c.mis_solutions.size(), 1u);
  // Atoms numbered from 1 in reading order.
  EXPECT_EQ(c.mis_solutions[0].str(), "101000101");
}

TEST(Census, MatchesBruteForceOnRandomGraphs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 150; ++trial) {
    const auto g = testutil::random_graph(1 + trial % 12, rng);
    const auto c = independent_set_census(g);
    EXPECT_EQ(c.degeneracies, oracle::census(g.sites()));
    EXPECT_EQ(c.degeneracies.front(), 1u);
    EXPECT_EQ(c.degeneracy(c.independence_number), c.mis_solutions.size());
    for (const auto& s : c.mis_solutions) {
      EXPECT_TRUE(is_independent(s, g));
      EXPECT_EQ(s.count(), c.independence_number);
    }
  }
}

TEST(Census, TotalEqualsUnitDiskBasisSize) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = testutil::random_graph(4 + trial % 11, rng);
    const auto c = independent_set_census(g);
    EXPECT_EQ(c.total_independent_sets(), build_basis(g, Subspace::UnitDisk).size());
  }
}

TEST(Census, RefusesAboveLimit) {
  const auto g = triangle_chain_graph(9);
  EXPECT_EQ(g.order(), 28u);
  try {
    independent_set_census(g);
    FAIL() << "expected LimitError";
  } catch (const LimitError& e) {
    EXPECT_NE(std::string(e.what()).find("25"), std::string::npos);
  }
}

TEST(HardnessParameter, ThreeRowIsThreeHalves) {
  EXPECT_DOUBLE_EQ(hardness_parameter(independent_set_census(testutil::three_row())), 1.5);
}

TEST(HardnessParameter, InvariantUnderRelabeling) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    auto sites = testutil::random_sites(9, 4, 4, rng);
    const double hp = hardness_parameter(independent_set_census(build_unit_disk_graph(sites, 5.0)));
    std::shuffle(sites.begin(), sites.end(), rng);
    EXPECT_DOUBLE_EQ(hp, hardness_parameter(independent_set_census(build_unit_disk_graph(sites, 5.0))));
  }
}

TEST(ToyGraphs, IdentifierDecoding) {
  const auto g = parse_toy_graph_id("7DE");
  ASSERT_EQ(g.order(), 9u);
  const std::vector<Site> expected{{1, 0}, {2, 0}, {3, 0}, {0, 1}, {1, 1},
                                   {3, 1}, {0, 2}, {1, 2}, {2, 2}};
  EXPECT_EQ(g.sites(), expected);
  const auto row = parse_toy_graph_id("F00");
  EXPECT_EQ(row.order(), 4u);
  for (const auto& s : row.sites()) EXPECT_EQ(s.y, 0);
}

TEST(ToyGraphs, MalformedIdentifiersRejected) {
  EXPECT_THROW(parse_toy_graph_id("000"), DomainError);
  EXPECT_THROW(parse_toy_graph_id("7dg"), DomainError);
  EXPECT_THROW(parse_toy_graph_id("7D"), DomainError);
  EXPECT_THROW(parse_toy_graph_id("7DEE"), DomainError);
}

TEST(ToyGraphs, ElevenGraphsWithHardnessBetweenTwoAndThree) {
  const auto& ids = toy_graph_ids();
  EXPECT_EQ(std::set<std::string_view>(ids.begin(), ids.end()).size(), 11u);
  for (auto id : ids) {
    const auto g = parse_toy_graph_id(id);
    const auto c = independent_set_census(g);
    const double hp = hardness_parameter(c);
    EXPECT_GE(hp, 2.0) << id;
    EXPECT_LE(hp, 3.0) << id;
    EXPECT_EQ(c.mis_solutions.size(), 1u) << id;
    EXPECT_TRUE(g.order() == 9 || g.order() == 10) << id;
  }
}

TEST(TriangleChain, Construction) {
  EXPECT_EQ(triangle_chain_graph(1).order(), 4u);
  const auto g2 = triangle_chain_graph(2);
  EXPECT_EQ(g2.order(), 7u);
  EXPECT_EQ(independent_set_census(g2).independence_number, 3u);
  EXPECT_EQ(oracle::census(g2.sites()).size(), 4u);
  EXPECT_THROW(triangle_chain_graph(0), DomainError);
}

TEST(TriangleChain, MisAndTipConfigurations) {
  for (std::size_t m = 1; m <= 6; ++m) {
    const auto g = triangle_chain_graph(m);
    const auto [mis, tips] = triangle_chain_configurations(m);
    EXPECT_TRUE(is_independent(mis, g));
    EXPECT_TRUE(is_independent(tips, g));
    EXPECT_EQ(mis.count(), independent_set_census(g).independence_number);
    EXPECT_EQ(tips.count(), m);
  }
}

TEST(GreedyRepair, MaximalInputUnchanged) {
  const auto g = parse_toy_graph_id("7DE");
  const auto mis = independent_set_census(g).mis_solutions.front();
  for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_EQ(greedy_repair(mis, g, seed).str(), mis.str());
}

TEST(GreedyRepair, AllOnesOnThreeRowReachesBothOutcomes) {
  const auto g = testutil::three_row();
  std::map<std::string, int> freq;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto out = greedy_repair(Bitstring::parse("111"), g, seed);
    EXPECT_TRUE(is_maximal_independent(out, g));
    ++freq[out.str()];
  }
  EXPECT_GT(freq["101"], 0);
  EXPECT_GT(freq["010"], 0);
  EXPECT_EQ(freq["101"] + freq["010"], 400);
}

TEST(GreedyRepair, OutputIsMaximalIndependentAndDeterministic) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = testutil::random_graph(3 + trial % 14, rng);
    const auto in = Bitstring::from_mask(rng(), g.order());
    const auto a = greedy_repair(in, g, static_cast<std::uint64_t>(trial));
    const auto b = greedy_repair(in, g, static_cast<std::uint64_t>(trial));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_TRUE(is_independent(a, g));
    EXPECT_TRUE(is_maximal_independent(a, g));
  }
}

TEST(GreedyRepair, EmptyInputGivesRandomMaximalSets) {
  const auto g = parse_toy_graph_id("7F7");
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto out = greedy_repair(Bitstring(g.order()), g, seed);
    EXPECT_TRUE(is_maximal_independent(out, g));
    seen.insert(out.str());
  }
  EXPECT_GT(seen.size(), 1u);
}

TEST(GreedyRepair, LengthMismatchRejected) {
  EXPECT_THROW(greedy_repair(Bitstring(4), testutil::three_row(), 1), DomainError);
}
