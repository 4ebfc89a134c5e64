#pragma once

// PC skeleton search over an arbitrary CI test, and skeleton metrics.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecit/base_tests.hpp"
#include "ecit/datagen.hpp"
#include "ecit/ensemble.hpp"
#include "ecit/error.hpp"
#include "ecit/rng.hpp"

namespace ecit {

struct CiQuery {
  std::size_t x = 0;
  std::size_t y = 0;
  std::vector<std::size_t> z;

  std::string describe() const {
    std::string s = "X" + std::to_string(x) + " _||_ X" + std::to_string(y) + " | {";
    for (std::size_t i = 0; i < z.size(); ++i) s += (i ? "," : "") + std::string("X") + std::to_string(z[i]);
    return s + "}";
  }
  bool operator==(const CiQuery&) const = default;
};

// Any conditional independence test: returns the p-value for a query.
using CiTest = std::function<double(const CiQuery&)>;

class SkeletonGraph {
 public:
  SkeletonGraph() = default;
  explicit SkeletonGraph(std::size_t d) : d_(d), adj_(d * d, false) {}

  static SkeletonGraph complete(std::size_t d) {
    SkeletonGraph g(d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) g.add_edge(i, j);
    }
    return g;
  }

  static SkeletonGraph from_edges(std::size_t d, const std::vector<Edge>& edges) {
    SkeletonGraph g(d);
    for (const auto& [i, j] : edges) g.add_edge(i, j);
    return g;
  }

  static SkeletonGraph from_dag(const GraphSpec& dag) { return from_edges(dag.d, dag.edges); }

  std::size_t d() const noexcept { return d_; }

  bool adjacent(std::size_t i, std::size_t j) const {
    check(i, j);
    return adj_[i * d_ + j];
  }
  void add_edge(std::size_t i, std::size_t j) { set(i, j, true); }
  void remove_edge(std::size_t i, std::size_t j) { set(i, j, false); }

  std::vector<std::size_t> neighbors(std::size_t i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < d_; ++j) {
      if (adj_[i * d_ + j]) out.push_back(j);
    }
    return out;
  }

  // Unordered edges (i < j) in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < d_; ++i) {
      for (std::size_t j = i + 1; j < d_; ++j) {
        if (adj_[i * d_ + j]) out.emplace_back(i, j);
      }
    }
    return out;
  }

  std::size_t edge_count() const { return edges().size(); }

  void set_sepset(std::size_t i, std::size_t j, std::vector<std::size_t> s) {
    sepsets_[key(i, j)] = std::move(s);
  }
  const std::vector<std::size_t>* sepset(std::size_t i, std::size_t j) const {
    const auto it = sepsets_.find(key(i, j));
    return it == sepsets_.end() ? nullptr : &it->second;
  }
  const std::map<Edge, std::vector<std::size_t>>& sepsets() const noexcept { return sepsets_; }

  bool operator==(const SkeletonGraph&) const = default;

 private:
  static Edge key(std::size_t i, std::size_t j) { return i < j ? Edge{i, j} : Edge{j, i}; }
  void check(std::size_t i, std::size_t j) const {
    if (i >= d_ || j >= d_) throw DataError("node index out of range");
  }
  void set(std::size_t i, std::size_t j, bool value) {
    check(i, j);
    if (i == j) throw DataError("skeleton graphs have no self-loops");
    adj_[i * d_ + j] = value;
    adj_[j * d_ + i] = value;
  }

  std::size_t d_ = 0;
  std::vector<bool> adj_;
  std::map<Edge, std::vector<std::size_t>> sepsets_;
};

struct QueryRecord {
  CiQuery query;
  double p = 0.0;
};

struct PcResult {
  SkeletonGraph graph;
  std::vector<QueryRecord> transcript;
};

inline constexpr std::size_t kDefaultMaxCond = 3;

namespace detail {

// Calls fn on each size-k subset of pool (lexicographic in pool order) until
// fn returns true.
template <typename F>
bool for_each_subset(const std::vector<std::size_t>& pool, std::size_t k, F&& fn) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  std::vector<std::size_t> subset(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = pool[pick[i]];
    if (fn(subset)) return true;
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == pool.size() - k + (i - 1)) --i;
    if (i == 0) return false;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
}

}  // namespace detail

// Skeleton phase of the original (order-dependent) PC algorithm with a fixed
// iteration order: rounds l = 0..max_cond, pairs (i, j) with i < j in
// lexicographic order, conditioning sets drawn first from adj(i) \ {j} and
// then from adj(j) \ {i}, subsets in lexicographic order. An edge is removed
// as soon as one test accepts independence (p > level).
inline PcResult pc_skeleton(std::size_t d, const CiTest& test, Probability level,
                            std::size_t max_cond = kDefaultMaxCond) {
  if (!(level.value() > 0.0 && level.value() < 1.0)) {
    throw ConfigError("pc: level must lie in (0, 1)");
  }
  if (d >= 2 && max_cond > d - 2) {
    throw ConfigError("pc: max_cond = " + std::to_string(max_cond) + " exceeds d - 2 = " +
                      std::to_string(d - 2));
  }
  PcResult result{SkeletonGraph::complete(d), {}};
  auto& g = result.graph;
  for (std::size_t l = 0; l <= max_cond && d >= 2; ++l) {
    bool any_testable = false;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        if (!g.adjacent(i, j)) continue;
        // A set drawn from both neighborhoods is tested once.
        std::vector<std::vector<std::size_t>> tested;
        for (const auto& [a, b] : {Edge{i, j}, Edge{j, i}}) {
          if (!g.adjacent(i, j)) break;
          auto pool = g.neighbors(a);
          pool.erase(std::remove(pool.begin(), pool.end(), b), pool.end());
          if (pool.size() < l) continue;
          any_testable = true;
          detail::for_each_subset(pool, l, [&](const std::vector<std::size_t>& s) {
            if (std::find(tested.begin(), tested.end(), s) != tested.end()) return false;
            tested.push_back(s);
            CiQuery q{i, j, s};
            double p = 0.0;
            try {
              p = test(q);
            } catch (...) {
              rethrow_with_context(std::current_exception(), "pc query " + q.describe());
            }
            result.transcript.push_back({q, p});
            if (p > level.value()) {
              g.remove_edge(i, j);
              g.set_sepset(i, j, s);
              return true;
            }
            return false;
          });
        }
      }
    }
    if (!any_testable) break;
  }
  return result;
}

struct SkeletonMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t shd = 0;
};

namespace detail {
inline double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }
inline double f1_score(double precision, double recall) {
  return ratio_or_zero(2.0 * precision * recall, precision + recall);
}
}  // namespace detail

// Edge-set comparison over unordered pairs. Two empty skeletons agree
// perfectly; otherwise every 0/0 ratio is 0.
inline SkeletonMetrics skeleton_metrics(const SkeletonGraph& estimated, const SkeletonGraph& truth) {
  if (estimated.d() != truth.d()) {
    throw DataError("skeleton_metrics: dimension mismatch (" + std::to_string(estimated.d()) +
                    " vs " + std::to_string(truth.d()) + ")");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.d(); ++i) {
    for (std::size_t j = i + 1; j < truth.d(); ++j) {
      const bool e = estimated.adjacent(i, j);
      const bool t = truth.adjacent(i, j);
      tp += e && t;
      fp += e && !t;
      fn += !e && t;
    }
  }
  SkeletonMetrics m;
  m.shd = fp + fn;
  if (tp + fp + fn == 0) {
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  m.precision = detail::ratio_or_zero(tp, static_cast<double>(tp + fp));
  m.recall = detail::ratio_or_zero(tp, static_cast<double>(tp + fn));
  m.f1 = detail::f1_score(m.precision, m.recall);
  return m;
}

struct LabeledQuery {
  CiQuery query;
  bool dependent = false;
};

struct PairMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
};

// "Dependent" is the positive class; a query is predicted dependent iff
// p <= level.
inline PairMetrics cit_pair_benchmark(const std::vector<LabeledQuery>& queries, const CiTest& test,
                                      Probability level) {
  PairMetrics m;
  for (const auto& lq : queries) {
    double p = 0.0;
    try {
      p = test(lq.query);
    } catch (...) {
      rethrow_with_context(std::current_exception(), "query " + lq.query.describe());
    }
    const bool predicted = p <= level.value();
    m.true_positive += predicted && lq.dependent;
    m.false_positive += predicted && !lq.dependent;
    m.false_negative += !predicted && lq.dependent;
  }
  m.precision = detail::ratio_or_zero(m.true_positive, static_cast<double>(m.true_positive + m.false_positive));
  m.recall = detail::ratio_or_zero(m.true_positive, static_cast<double>(m.true_positive + m.false_negative));
  m.f1 = detail::f1_score(m.precision, m.recall);
  return m;
}

// Adapts a base test (optionally wrapped in the ensemble) to column queries
// on a data matrix. The per-query seed depends only on the query, so
// results do not depend on the order queries are asked in.
inline CiTest make_data_test(const Matrix& data, CITestSpec base,
                             std::optional<EnsembleConfig> ensemble, std::uint64_t seed) {
  return [data, base, ensemble, seed](const CiQuery& q) {
    const auto cols = [&](std::span<const std::size_t> c) {
      std::vector<Eigen::Index> idx(c.begin(), c.end());
      return select_columns(data, idx);
    };
    const std::size_t xs[] = {q.x};
    const std::size_t ys[] = {q.y};
    const DataTriple triple(cols(xs), cols(ys), cols(q.z));
    const std::uint64_t qseed = derive_seed(seed, q.describe());
    CITestSpec spec = base;
    spec.seed = qseed;
    if (ensemble) {
      EnsembleConfig cfg = *ensemble;
      cfg.seed = qseed;
      return ecit(triple, spec, cfg).p.value();
    }
    return run_base_test(triple, spec).p.value();
  };
}

}  // namespace ecit
