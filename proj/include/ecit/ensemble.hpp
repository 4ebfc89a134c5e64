#pragma once

// Ensemble CI testing: split the rows into K disjoint subsets, run the base
// test on each, and combine the subtest p-values.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ecit/base_tests.hpp"
#include "ecit/combiners.hpp"
#include "ecit/datagen.hpp"
#include "ecit/error.hpp"
#include "ecit/parallel.hpp"
#include "ecit/rng.hpp"
#include "ecit/stable.hpp"

namespace ecit {

enum class PartitionPolicy { shuffle, sequential };
enum class RemainderPolicy { drop, merge_last };

inline std::string_view to_string(PartitionPolicy p) {
  return p == PartitionPolicy::shuffle ? "shuffle" : "sequential";
}
inline std::string_view to_string(RemainderPolicy r) {
  return r == RemainderPolicy::drop ? "drop" : "merge_last";
}
inline PartitionPolicy parse_partition_policy(std::string_view s) {
  if (s == "shuffle") return PartitionPolicy::shuffle;
  if (s == "sequential") return PartitionPolicy::sequential;
  throw ConfigError("unknown partition policy '" + std::string(s) + "'");
}
inline RemainderPolicy parse_remainder_policy(std::string_view s) {
  if (s == "drop") return RemainderPolicy::drop;
  if (s == "merge_last") return RemainderPolicy::merge_last;
  throw ConfigError("unknown remainder policy '" + std::string(s) + "'");
}

struct EnsembleConfig {
  // Exactly one of these.
  std::optional<std::size_t> subset_size = 400;
  std::optional<std::size_t> subsets;
  StableParams params{1.75, 0.0, 1.0, 0.0};
  PartitionPolicy partition = PartitionPolicy::shuffle;
  RemainderPolicy remainder = RemainderPolicy::drop;
  std::uint64_t seed = 0;
  double clamp_epsilon = kDefaultClampEpsilon;
  std::size_t parallelism = 1;
  CombineMethod combiner = CombineMethod::stable;
  ClassicalOptions classical;

  static EnsembleConfig with_subset_size(std::size_t nk) {
    EnsembleConfig c;
    c.subset_size = nk;
    c.subsets.reset();
    return c;
  }
  static EnsembleConfig with_subsets(std::size_t k) {
    EnsembleConfig c;
    c.subset_size.reset();
    c.subsets = k;
    return c;
  }

  void validate() const {
    if (subset_size.has_value() == subsets.has_value()) {
      throw ConfigError("ensemble: set exactly one of subset size (n_k) and subset count (K)");
    }
    if (subset_size && *subset_size < static_cast<std::size_t>(kMinRows)) {
      throw ConfigError("ensemble: subset size must be at least " + std::to_string(kMinRows));
    }
    if (subsets && *subsets < 1) throw ConfigError("ensemble: K must be at least 1");
    if (!(clamp_epsilon > 0.0 && clamp_epsilon <= 0.01)) {
      throw ConfigError("ensemble: clamp epsilon must lie in (0, 0.01]");
    }
  }
};

struct Partition {
  std::vector<std::vector<Eigen::Index>> subsets;
  std::vector<Eigen::Index> dropped;
};

inline Partition partition_indices(Eigen::Index n, const EnsembleConfig& config) {
  config.validate();
  const auto un = static_cast<std::size_t>(n);
  std::size_t k = 0;
  std::size_t size = 0;
  if (config.subset_size) {
    size = *config.subset_size;
    k = un / size;
    if (k == 0) {
      throw DataError("ensemble: n = " + std::to_string(n) + " is smaller than one subset (n_k = " +
                      std::to_string(size) + "); run the base test directly");
    }
  } else {
    k = *config.subsets;
    size = un / k;
    if (size < static_cast<std::size_t>(kMinRows)) {
      throw DataError("ensemble: n = " + std::to_string(n) + " cannot fill K = " + std::to_string(k) +
                      " subsets of at least " + std::to_string(kMinRows) +
                      " rows; run the base test directly");
    }
  }
  std::vector<Eigen::Index> order(un);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (config.partition == PartitionPolicy::shuffle) {
    Rng rng(derive_seed(config.seed, "ensemble.partition"));
    std::shuffle(order.begin(), order.end(), rng);
  }
  Partition part;
  part.subsets.resize(k);
  for (std::size_t s = 0; s < k; ++s) {
    part.subsets[s].assign(order.begin() + static_cast<std::ptrdiff_t>(s * size),
                           order.begin() + static_cast<std::ptrdiff_t>((s + 1) * size));
  }
  const auto tail = order.begin() + static_cast<std::ptrdiff_t>(k * size);
  if (config.remainder == RemainderPolicy::merge_last) {
    part.subsets.back().insert(part.subsets.back().end(), tail, order.end());
  } else {
    part.dropped.assign(tail, order.end());
  }
  return part;
}

inline std::vector<DataTriple> partition(const DataTriple& data, const EnsembleConfig& config) {
  const auto part = partition_indices(data.n(), config);
  std::vector<DataTriple> out;
  out.reserve(part.subsets.size());
  for (const auto& idx : part.subsets) out.push_back(data.rows(idx));
  return out;
}

inline std::uint64_t subtest_seed(std::uint64_t master, std::size_t index) {
  return derive_seed(derive_seed(master, "ensemble.subtest"), static_cast<std::uint64_t>(index));
}

// Raw (unclamped) subtest outcomes in subset order.
inline std::vector<TestOutcome> run_subtests(const DataTriple& data, const CITestSpec& base,
                                             const EnsembleConfig& config) {
  base.validate();
  const auto subsets = partition(data, config);
  std::vector<std::optional<TestOutcome>> slots(subsets.size());
  const auto errors = parallel_for(subsets.size(), config.parallelism, [&](std::size_t i) {
    CITestSpec spec = base;
    spec.seed = subtest_seed(config.seed, i);
    slots[i] = run_base_test(subsets[i], spec);
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) {
      rethrow_with_context(errors[i], "subtest " + std::to_string(i) + " of " +
                                          std::to_string(subsets.size()));
    }
  }
  std::vector<TestOutcome> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// Clamps (and, for permutation-based subtests, de-lattices) the raw subtest
// p-values and combines them according to config.
inline TestOutcome combine_subtests(const std::vector<TestOutcome>& subtests,
                                    const EnsembleConfig& config) {
  if (subtests.empty()) throw DataError("ensemble: no subtests to combine");
  std::vector<double> raw;
  raw.reserve(subtests.size());
  std::size_t n_used = 0;
  for (const auto& t : subtests) {
    raw.push_back(t.p.value());
    n_used += t.n_used;
  }
  std::optional<LatticeJitter> jitter;
  if (subtests.front().permutations > 0) {
    jitter = LatticeJitter{derive_seed(config.seed, "ensemble.jitter"), subtests.front().permutations};
  }
  auto clamped = clamp_pvalues(raw, config.clamp_epsilon, jitter);
  const auto combined = combine(config.combiner, clamped, config.params, config.classical);
  TestOutcome out;
  out.p = combined.p_combined;
  out.statistic = combined.statistic;
  out.method = "e-" + subtests.front().method;
  out.n_used = n_used;
  out.subtest_ps = std::move(clamped);
  return out;
}

inline TestOutcome ecit(const DataTriple& data, const CITestSpec& base,
                        const EnsembleConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  auto out = combine_subtests(run_subtests(data, base, config), config);
  out.elapsed = std::chrono::steady_clock::now() - start;
  return out;
}

struct RuntimePoint {
  std::size_t n = 0;
  Seconds median{0.0};
};

inline constexpr std::size_t kMinRuntimeRepetitions = 5;

// Median wall-clock time of the test call (data generation excluded) on
// post-nonlinear null data of each size, drawn from data_template. With `ensemble` false the base
// test runs on the full data.
inline std::vector<RuntimePoint> runtime_profile(const CITestSpec& base, const EnsembleConfig& config,
                                                 const std::vector<std::size_t>& sizes,
                                                 std::uint64_t seed, bool ensemble = true,
                                                 std::size_t repetitions = kMinRuntimeRepetitions,
                                                 const PnlConfig& data_template = {}) {
  if (!std::is_sorted(sizes.begin(), sizes.end())) {
    throw ConfigError("runtime profile sizes must be ascending");
  }
  repetitions = std::max(repetitions, kMinRuntimeRepetitions);
  std::vector<RuntimePoint> table;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    std::vector<double> times;
    for (std::size_t r = 0; r < repetitions; ++r) {
      PnlConfig gen = data_template;
      gen.hypothesis = Hypothesis::h0;
      gen.n = sizes[s];
      gen.seed = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(sizes[s])), r);
      const auto data = gen_pnl(gen).triple();
      CITestSpec spec = base;
      spec.seed = derive_seed(gen.seed, "runtime.test");
      EnsembleConfig cfg = config;
      cfg.seed = spec.seed;
      const auto start = std::chrono::steady_clock::now();
      if (ensemble) {
        (void)ecit(data, spec, cfg);
      } else {
        (void)run_base_test(data, spec);
      }
      times.push_back(Seconds(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t m = times.size();
    const double med = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
    table.push_back({sizes[s], Seconds(med)});
  }
  return table;
}

}  // namespace ecit
