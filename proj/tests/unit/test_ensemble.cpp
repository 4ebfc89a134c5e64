#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ecit/ensemble.hpp"
#include "oracles.hpp"

using namespace ecit;

namespace {

DataTriple pnl(std::size_t n, std::uint64_t seed, Hypothesis h = Hypothesis::h0) {
  PnlConfig c;
  c.n = n;
  c.seed = seed;
  c.hypothesis = h;
  return gen_pnl(c).triple();
}

CITestSpec rcit_spec() {
  CITestSpec s;
  s.method = CiMethod::rcit;
  return s;
}

}  // namespace

TEST(EnsembleConfig, Validation) {
  EnsembleConfig c;
  EXPECT_NO_THROW(c.validate());
  c.subsets = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(EnsembleConfig::with_subset_size(7).validate(), ConfigError);
  EXPECT_THROW(EnsembleConfig::with_subsets(0).validate(), ConfigError);
  auto e = EnsembleConfig::with_subsets(2);
  e.clamp_epsilon = 0.5;
  EXPECT_THROW(e.validate(), ConfigError);
}

TEST(Partition, SizesFollowPolicy) {
  auto c = EnsembleConfig::with_subset_size(400);
  auto p = partition_indices(2000, c);
  EXPECT_EQ(p.subsets.size(), 5u);
  for (const auto& s : p.subsets) EXPECT_EQ(s.size(), 400u);
  EXPECT_TRUE(p.dropped.empty());

  p = partition_indices(1030, c);
  ASSERT_EQ(p.subsets.size(), 2u);
  EXPECT_EQ(p.subsets[0].size(), 400u);
  EXPECT_EQ(p.subsets[1].size(), 400u);
  EXPECT_EQ(p.dropped.size(), 230u);

  c.remainder = RemainderPolicy::merge_last;
  p = partition_indices(1030, c);
  ASSERT_EQ(p.subsets.size(), 2u);
  EXPECT_EQ(p.subsets[0].size(), 400u);
  EXPECT_EQ(p.subsets[1].size(), 630u);
  EXPECT_TRUE(p.dropped.empty());
}

TEST(Partition, DisjointCoverOfRows) {
  for (const auto rem : {RemainderPolicy::drop, RemainderPolicy::merge_last}) {
    auto c = EnsembleConfig::with_subsets(7);
    c.remainder = rem;
    c.seed = 99;
    const auto p = partition_indices(1001, c);
    std::vector<Eigen::Index> all(p.dropped);
    for (const auto& s : p.subsets) all.insert(all.end(), s.begin(), s.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), 1001u);
    for (Eigen::Index i = 0; i < 1001; ++i) EXPECT_EQ(all[i], i);
  }
}

TEST(Partition, ShuffleDependsOnSeedOnly) {
  auto c = EnsembleConfig::with_subset_size(100);
  c.seed = 5;
  EXPECT_EQ(partition_indices(500, c).subsets, partition_indices(500, c).subsets);
  auto d = c;
  d.seed = 6;
  EXPECT_NE(partition_indices(500, c).subsets, partition_indices(500, d).subsets);
  c.partition = PartitionPolicy::sequential;
  const auto seq = partition_indices(500, c);
  EXPECT_EQ(seq.subsets[1].front(), 100);
  EXPECT_EQ(seq.subsets[1].back(), 199);
}

TEST(Partition, TooFewRows) {
  EXPECT_THROW(partition_indices(399, EnsembleConfig::with_subset_size(400)), DataError);
  EXPECT_THROW(partition_indices(20, EnsembleConfig::with_subsets(3)), DataError);
  try {
    partition_indices(100, EnsembleConfig::with_subset_size(400));
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("base test directly"), std::string::npos);
  }
  const auto one = partition_indices(10, EnsembleConfig::with_subsets(1));
  ASSERT_EQ(one.subsets.size(), 1u);
  EXPECT_EQ(one.subsets[0].size(), 10u);
}

TEST(Ecit, SingleSubsetEqualsBaseOnShuffledData) {
  const auto data = pnl(500, 1, Hypothesis::h1);
  auto cfg = EnsembleConfig::with_subsets(1);
  cfg.seed = 4;
  for (const auto method : {CiMethod::kcit, CiMethod::rcit, CiMethod::fisherz}) {
    CITestSpec base;
    base.method = method;
    const auto out = ecit::ecit(data, base, cfg);
    const auto part = partition_indices(data.n(), cfg);
    CITestSpec direct = base;
    direct.seed = subtest_seed(cfg.seed, 0);
    const double raw = run_base_test(data.rows(part.subsets[0]), direct).p;
    EXPECT_NEAR(out.p, std::clamp(raw, 1e-12, 1.0 - 1e-12), 1e-10) << to_string(method);
    EXPECT_EQ(out.method, "e-" + std::string(to_string(method)));
    ASSERT_TRUE(out.subtest_ps);
    EXPECT_EQ(out.subtest_ps->size(), 1u);
  }
}

TEST(Ecit, CombinesSubtestsWithConfiguredCombiner) {
  const auto data = pnl(1200, 2);
  auto cfg = EnsembleConfig::with_subset_size(400);
  cfg.seed = 8;
  const auto subs = run_subtests(data, rcit_spec(), cfg);
  ASSERT_EQ(subs.size(), 3u);
  std::vector<double> raw;
  for (const auto& s : subs) raw.push_back(s.p);
  const auto out = ecit::ecit(data, rcit_spec(), cfg);
  EXPECT_EQ(out.p.value(), combine_stable(clamp_pvalues(raw), cfg.params).p_combined.value());
  EXPECT_EQ(out.n_used, 1200u);
  cfg.combiner = CombineMethod::fisher;
  EXPECT_EQ(ecit::ecit(data, rcit_spec(), cfg).p.value(),
            combine_classical(CombineMethod::fisher, clamp_pvalues(raw)).p_combined.value());
}

TEST(Ecit, ParallelismDoesNotChangeResult) {
  const auto data = pnl(2000, 3, Hypothesis::h1);
  auto cfg = EnsembleConfig::with_subset_size(200);
  cfg.seed = 10;
  for (const auto method : {CiMethod::kcit, CiMethod::rcit}) {
    CITestSpec base;
    base.method = method;
    cfg.parallelism = 1;
    const auto ref = ecit::ecit(data, base, cfg);
    for (const std::size_t t : {4u, 8u}) {
      cfg.parallelism = t;
      const auto out = ecit::ecit(data, base, cfg);
      EXPECT_EQ(out.p.value(), ref.p.value());
      EXPECT_TRUE(std::equal(out.subtest_ps->begin(), out.subtest_ps->end(), ref.subtest_ps->begin()));
    }
  }
}

TEST(Ecit, SubtestErrorsCarryIndex) {
  auto s = gen_pnl(PnlConfig{});
  s.z.block(100, 0, 100, 1).setConstant(1.0);  // second subset of 100 has a constant z
  auto cfg = EnsembleConfig::with_subset_size(100);
  cfg.partition = PartitionPolicy::sequential;
  try {
    ecit::ecit(s.triple(), CITestSpec{}, cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("subtest 1 of 4"), std::string::npos) << e.what();
  }
}

TEST(Ecit, PermutationSubtestsGetJittered) {
  const auto data = pnl(400, 4);
  auto base = rcit_spec();
  base.permutations = 49;
  auto cfg = EnsembleConfig::with_subset_size(100);
  const auto out = ecit::ecit(data, base, cfg);
  for (const double p : *out.subtest_ps) {
    const double cell = p * 50.0;
    EXPECT_GT(std::abs(cell - std::round(cell)), 1e-12);
  }
}

TEST(Ecit, LevelMonotoneDecisions) {
  const auto out = ecit::ecit(pnl(800, 5, Hypothesis::h1), rcit_spec(), EnsembleConfig::with_subset_size(200));
  bool rejected = false;
  for (double level = 0.001; level < 1.0; level += 0.001) {
    const bool r = out.p <= level;
    if (rejected) {
      EXPECT_TRUE(r);
    }
    rejected = rejected || r;
  }
}

TEST(Ecit, SubtestsRoughlyUncorrelatedUnderNull) {
  const int reps = 500;
  std::vector<std::vector<double>> cols(5);
  for (int r = 0; r < reps; ++r) {
    auto cfg = EnsembleConfig::with_subsets(5);
    cfg.seed = r;
    const auto subs = run_subtests(pnl(1000, 5000 + r), rcit_spec(), cfg);
    for (std::size_t k = 0; k < 5; ++k) cols[k].push_back(subs[k].p);
  }
  const auto corr = [](const std::vector<double>& a, const std::vector<double>& b) {
    Eigen::Map<const Vector> u(a.data(), static_cast<Eigen::Index>(a.size()));
    Eigen::Map<const Vector> v(b.data(), static_cast<Eigen::Index>(b.size()));
    const Vector cu = u.array() - u.mean(), cv = v.array() - v.mean();
    return cu.dot(cv) / (cu.norm() * cv.norm());
  };
  std::vector<double> left, right;
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = a + 1; b < 5; ++b) {
      // a single pair's null sd is about 0.045 at 500 replicates
      EXPECT_LT(std::abs(corr(cols[a], cols[b])), 0.2) << a << "," << b;
      left.insert(left.end(), cols[a].begin(), cols[a].end());
      right.insert(right.end(), cols[b].begin(), cols[b].end());
    }
  }
  EXPECT_LT(std::abs(corr(left, right)), 0.1);
}

TEST(RuntimeProfile, EmptyAndOrdered) {
  EXPECT_TRUE(runtime_profile(rcit_spec(), EnsembleConfig{}, {}, 1).empty());
  EXPECT_THROW(runtime_profile(rcit_spec(), EnsembleConfig{}, {800, 400}, 1), ConfigError);
  const auto t = runtime_profile(rcit_spec(), EnsembleConfig::with_subset_size(100), {200, 400}, 1);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].n, 200u);
  EXPECT_GT(t[1].median.count(), 0.0);
}
