#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "helpers.hpp"
#include "rydmis/dataset.hpp"

using namespace rydmis;

namespace {

DatasetSpec small_spec() {
  DatasetSpec s;
  s.min_order = 8;
  s.max_order = 10;
  s.per_order = 10;
  s.num_bins = 3;
  s.per_bin = 10;
  return s;
}

const std::vector<PoolEntry>& small_pool() {
  static const auto pool = [] {
    PoolSpec p;
    p.orders = {8, 9, 10};
    p.draws_per_order = 40;
    p.walk_steps = 40;
    p.walk_hp_hi = 3.0;
    return generate_pool(p, 77, 4);
  }();
  return pool;
}

}  // namespace

TEST(CanonicalForm, IdempotentAndSymmetryInvariant) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sites = testutil::random_sites(7, 5, 4, rng);
    const auto c = canonical_form(sites);
    EXPECT_EQ(canonical_form(c), c);
    for (int k = 0; k < 8; ++k) {
      std::vector<Site> moved;
      for (const auto& s : sites) {
        const auto t = apply_symmetry(s, k);
        moved.push_back({t.x + 11, t.y - 3});
      }
      std::shuffle(moved.begin(), moved.end(), rng);
      EXPECT_EQ(canonical_form(moved), c);
    }
  }
}

TEST(CanonicalForm, TranslationToOrigin) {
  const auto n = normalize_translation({{5, 7}, {4, 9}});
  EXPECT_EQ(n, (std::vector<Site>{{0, 2}, {1, 0}}));
}

TEST(RandomUdg, DrawsAreCanonicalAndMostlyDistinct) {
  std::set<std::string> keys;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto g = generate_random_udg(8, {6, 6}, seed);
    ASSERT_EQ(g.order(), 8u);
    EXPECT_EQ(canonical_form(g), g.sites());
    for (const auto& s : g.sites()) {
      EXPECT_LT(s.x, 6);
      EXPECT_LT(s.y, 6);
    }
    keys.insert(canonical_key(canonical_form(g)));
  }
  EXPECT_GT(keys.size(), 990u);
  EXPECT_EQ(generate_random_udg(8, {6, 6}, 5).sites(), generate_random_udg(8, {6, 6}, 5).sites());
}

TEST(RandomUdg, RejectsOverfullWindow) {
  EXPECT_THROW(generate_random_udg(10, {3, 3}, 1), DomainError);
  EXPECT_THROW(generate_random_udg(0, {3, 3}, 1), DomainError);
  EXPECT_THROW(window_for_order(5, 0.0), DomainError);
}

TEST(WindowForOrder, HoldsRequestedDensity) {
  for (std::size_t n = 1; n <= 40; ++n) {
    const auto w = window_for_order(n, 0.75);
    EXPECT_GE(w.area(), static_cast<std::int64_t>(std::ceil(n / 0.75 - 1e-9)));
    EXPECT_LE(std::abs(w.width - w.height), 1);
  }
}

TEST(Pool, IndependentOfThreadCountAndDuplicateFree) {
  PoolSpec p;
  p.orders = {7, 9};
  p.draws_per_order = 30;
  p.walk_steps = 10;
  const auto a = generate_pool(p, 3, 1);
  const auto b = generate_pool(p, 3, 4);
  ASSERT_EQ(a.size(), b.size());
  std::set<std::string> keys;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].graph.sites(), b[i].graph.sites());
    EXPECT_EQ(a[i].hp, b[i].hp);
    EXPECT_DOUBLE_EQ(a[i].hp, hardness_parameter(independent_set_census(a[i].graph)));
    EXPECT_TRUE(keys.insert(canonical_key(canonical_form(a[i].graph))).second);
  }
}

TEST(DatasetSpec, TotalsMustAgree) {
  auto s = small_spec();
  EXPECT_NO_THROW(s.validate());
  s.per_bin = 11;
  EXPECT_THROW(s.validate(), DomainError);
  EXPECT_NO_THROW(DatasetSpec{}.validate());
  EXPECT_EQ(DatasetSpec{}.total(), 500u);
}

TEST(DatasetSpec, BinEdgesDouble) {
  const DatasetSpec s;
  EXPECT_EQ(s.bin_of(0.375), 0);
  EXPECT_EQ(s.bin_of(0.74), 0);
  EXPECT_EQ(s.bin_of(0.75), 1);
  EXPECT_EQ(s.bin_of(11.9), 4);
  EXPECT_EQ(s.bin_of(12.0), -1);
  EXPECT_EQ(s.bin_of(0.3), -1);
}

TEST(Selection, ExactCountsAndDistinctHp) {
  const auto spec = small_spec();
  const auto sel = select_representative_dataset(small_pool(), spec, 1);
  ASSERT_EQ(sel.graphs.size(), spec.total());
  std::vector<std::size_t> per_order(spec.num_orders()), per_bin(spec.num_bins);
  std::set<double> hps;
  std::set<std::string> keys;
  for (const auto& e : sel.graphs) {
    const int b = spec.bin_of(e.hp);
    ASSERT_GE(b, 0);
    ++per_order[e.graph.order() - spec.min_order];
    ++per_bin[static_cast<std::size_t>(b)];
    EXPECT_TRUE(hps.insert(e.hp).second) << e.hp;
    EXPECT_TRUE(keys.insert(canonical_key(canonical_form(e.graph))).second);
  }
  for (auto c : per_order) EXPECT_EQ(c, spec.per_order);
  for (auto c : per_bin) EXPECT_EQ(c, spec.per_bin);
  std::size_t cells = 0;
  for (const auto& row : sel.cell_counts) {
    for (auto c : row) cells += c;
  }
  EXPECT_EQ(cells, spec.total());
}

TEST(Selection, OrdersNearUniformWithinBins) {
  const auto spec = small_spec();
  const auto sel = select_representative_dataset(small_pool(), spec, 1);
  const double ideal = static_cast<double>(spec.per_order) / static_cast<double>(spec.num_bins);
  for (const auto& row : sel.cell_counts) {
    for (auto c : row) {
      EXPECT_GE(static_cast<double>(c), std::floor(ideal) - 1.0);
      EXPECT_LE(static_cast<double>(c), std::ceil(ideal) + 1.0);
    }
  }
}

TEST(Selection, ReducesOrderHardnessCorrelation) {
  // Plain sampling at fixed density gives a clearly correlated pool.
  PoolSpec p;
  p.orders = {8, 9, 10, 11, 12};
  p.draws_per_order = 300;
  const auto pool = generate_pool(p, 5, 4);
  DatasetSpec spec;
  spec.min_order = 8;
  spec.max_order = 12;
  spec.per_order = 12;
  spec.num_bins = 3;
  spec.per_bin = 20;
  const double before = order_loghp_correlation(pool);
  ASSERT_GT(std::abs(before), 0.2);
  const auto sel = select_representative_dataset(pool, spec, 1);
  EXPECT_LT(std::abs(order_loghp_correlation(sel.graphs)), std::abs(before));
}

TEST(Selection, DeterministicForSeed) {
  const auto a = select_representative_dataset(small_pool(), small_spec(), 9);
  const auto b = select_representative_dataset(small_pool(), small_spec(), 9);
  ASSERT_EQ(a.graphs.size(), b.graphs.size());
  for (std::size_t i = 0; i < a.graphs.size(); ++i) EXPECT_EQ(a.graphs[i].graph.sites(), b.graphs[i].graph.sites());
}

TEST(Selection, ValidDatasetSelectsItself) {
  const auto spec = small_spec();
  const auto first = select_representative_dataset(small_pool(), spec, 2);
  const auto again = select_representative_dataset(first.graphs, spec, 5);
  std::set<std::string> a, b;
  for (const auto& e : first.graphs) a.insert(canonical_key(canonical_form(e.graph)));
  for (const auto& e : again.graphs) b.insert(canonical_key(canonical_form(e.graph)));
  EXPECT_EQ(a, b);
}

TEST(Selection, InfeasiblePoolNamesDeficientCells) {
  std::vector<PoolEntry> pool;
  for (const auto& e : small_pool()) {
    if (e.graph.order() != 8) pool.push_back(e);
  }
  try {
    select_representative_dataset(pool, small_spec(), 1);
    FAIL() << "expected InfeasibleDatasetError";
  } catch (const InfeasibleDatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("(8, bin 3"), std::string::npos) << e.what();
    bool found = false;
    for (const auto& c : e.cells()) found = found || (c.order == 8 && c.bin == 3 && c.available == 0);
    EXPECT_TRUE(found);
  }
}

TEST(Correlation, PerfectAndDegenerate) {
  std::vector<PoolEntry> v;
  for (std::size_t n = 1; n <= 4; ++n) {
    PoolEntry e{testutil::single_site(), std::exp(static_cast<double>(n)), 1, true};
    v.push_back(e);
  }
  // Every graph has order 1, so the order variance vanishes.
  EXPECT_EQ(order_loghp_correlation(v), 0.0);
  v.clear();
  std::mt19937_64 rng(1);
  for (std::size_t n = 2; n <= 6; ++n) {
    v.push_back({testutil::random_graph(n, rng), 2.0 * std::exp(static_cast<double>(n)), 1, true});
  }
  EXPECT_NEAR(order_loghp_correlation(v), 1.0, 1e-12);
}
