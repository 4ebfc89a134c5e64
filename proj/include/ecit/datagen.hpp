#pragma once

// Synthetic data: the post-nonlinear CI benchmark and random-DAG structural
// causal models with additive noise.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ecit/data.hpp"
#include "ecit/error.hpp"
#include "ecit/rng.hpp"
#include "ecit/stable.hpp"

namespace ecit {

enum class Mechanism { identity, square, cube, tanh, cos };

inline constexpr std::array<Mechanism, 5> kMechanisms = {
    Mechanism::identity, Mechanism::square, Mechanism::cube, Mechanism::tanh, Mechanism::cos};

inline std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::identity: return "x";
    case Mechanism::square: return "x^2";
    case Mechanism::cube: return "x^3";
    case Mechanism::tanh: return "tanh";
    case Mechanism::cos: return "cos";
  }
  return "?";
}

inline double apply(Mechanism m, double v) {
  switch (m) {
    case Mechanism::identity: return v;
    case Mechanism::square: return v * v;
    case Mechanism::cube: return v * v * v;
    case Mechanism::tanh: return std::tanh(v);
    case Mechanism::cos: return std::cos(v);
  }
  return v;
}

inline Mechanism draw_mechanism(Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kMechanisms.size() - 1);
  return kMechanisms[pick(rng)];
}

// Standard (location 0, scale 1) noise laws.
struct NoiseDist {
  enum class Kind { gaussian, student_t, cauchy, laplace };
  Kind kind = Kind::gaussian;
  double df = 0.0;

  static NoiseDist gaussian() { return {Kind::gaussian, 0.0}; }
  static NoiseDist cauchy() { return {Kind::cauchy, 0.0}; }
  static NoiseDist laplace() { return {Kind::laplace, 0.0}; }
  static NoiseDist student_t(double df) {
    if (!(df >= 1.0) || !std::isfinite(df)) {
      throw ConfigError("student_t degrees of freedom must be >= 1");
    }
    return {Kind::student_t, df};
  }

  double draw(Rng& rng) const {
    switch (kind) {
      case Kind::gaussian: return std::normal_distribution<double>(0.0, 1.0)(rng);
      case Kind::student_t: return std::student_t_distribution<double>(df)(rng);
      case Kind::cauchy: return std::cauchy_distribution<double>(0.0, 1.0)(rng);
      case Kind::laplace: {
        // Inverse CDF on (-1/2, 1/2); the open interval avoids log(0).
        double u = 0.0;
        do {
          u = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
        } while (u == -0.5);
        return -std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
      }
    }
    return 0.0;
  }

  bool operator==(const NoiseDist&) const = default;
};

inline std::string to_string(const NoiseDist& d) {
  switch (d.kind) {
    case NoiseDist::Kind::gaussian: return "gaussian";
    case NoiseDist::Kind::cauchy: return "cauchy";
    case NoiseDist::Kind::laplace: return "laplace";
    case NoiseDist::Kind::student_t: {
      std::string df = std::to_string(d.df);
      df.erase(df.find_last_not_of('0') + 1);
      if (!df.empty() && df.back() == '.') df.pop_back();
      return "student_t:" + df;
    }
  }
  return "?";
}

// "gaussian", "normal", "cauchy", "laplace", "t:4" or "student_t:4".
inline NoiseDist parse_noise(std::string_view text) {
  if (text == "gaussian" || text == "normal") return NoiseDist::gaussian();
  if (text == "cauchy") return NoiseDist::cauchy();
  if (text == "laplace") return NoiseDist::laplace();
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    const auto head = text.substr(0, colon);
    if (head == "t" || head == "student_t") {
      const std::string tail(text.substr(colon + 1));
      std::size_t used = 0;
      double df = 0.0;
      try {
        df = std::stod(tail, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != tail.size()) {
        throw ConfigError("bad degrees of freedom in '" + std::string(text) + "'");
      }
      return NoiseDist::student_t(df);
    }
  }
  throw ConfigError("unknown noise distribution '" + std::string(text) + "'");
}

enum class Hypothesis { h0, h1 };

struct PnlConfig {
  Hypothesis hypothesis = Hypothesis::h0;
  std::size_t n = 400;
  std::size_t d_z = 1;
  NoiseDist z_dist = NoiseDist::gaussian();
  NoiseDist noise = NoiseDist::student_t(4.0);
  double beta_x = 1.0;
  std::uint64_t seed = 0;
  // Pin the mechanisms instead of drawing them.
  std::optional<Mechanism> f_x;
  std::optional<Mechanism> f_y;
  // Multiplies both noise terms; 1 is the benchmark setting.
  double noise_scale = 1.0;

  void validate() const {
    if (n < 1) throw ConfigError("pnl: n must be >= 1");
    if (d_z < 1) throw ConfigError("pnl: d_z must be >= 1");
    if (z_dist.kind != NoiseDist::Kind::gaussian && z_dist.kind != NoiseDist::Kind::laplace) {
      throw ConfigError("pnl: z distribution must be gaussian or laplace");
    }
    if (!std::isfinite(beta_x)) throw ConfigError("pnl: beta_x must be finite");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
      throw ConfigError("pnl: noise scale must be non-negative");
    }
  }
};

struct PnlSample {
  Matrix x;  // n x 1
  Matrix y;  // n x 1
  Matrix z;  // n x d_z
  Mechanism f_x = Mechanism::identity;
  Mechanism f_y = Mechanism::identity;
  Vector w_x;  // d_z
  Vector w_y;  // d_z
  // Arguments of f_x and f_y before the nonlinearity.
  Vector latent_x;
  Vector latent_y;
  bool independent = true;

  std::string label() const {
    return independent ? "conditionally independent" : "conditionally dependent";
  }
  DataTriple triple() const { return DataTriple(x, y, z); }
};

inline PnlSample gen_pnl(const PnlConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(cfg.n);
  const auto dz = static_cast<Eigen::Index>(cfg.d_z);
  PnlSample s;
  s.independent = cfg.hypothesis == Hypothesis::h0;

  Rng rng_mech(derive_seed(cfg.seed, "pnl.mechanisms"));
  const Mechanism drawn_x = draw_mechanism(rng_mech);
  const Mechanism drawn_y = draw_mechanism(rng_mech);
  s.f_x = cfg.f_x.value_or(drawn_x);
  s.f_y = cfg.f_y.value_or(drawn_y);

  Rng rng_w(derive_seed(cfg.seed, "pnl.weights"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  s.w_x.resize(dz);
  s.w_y.resize(dz);
  for (Eigen::Index j = 0; j < dz; ++j) s.w_x(j) = unit(rng_w);
  for (Eigen::Index j = 0; j < dz; ++j) s.w_y(j) = unit(rng_w);
  s.w_x /= s.w_x.sum();
  s.w_y /= s.w_y.sum();

  Rng rng_z(derive_seed(cfg.seed, "pnl.z"));
  s.z.resize(n, dz);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dz; ++j) s.z(i, j) = cfg.z_dist.draw(rng_z);
  }

  Rng rng_ex(derive_seed(cfg.seed, "pnl.noise.x"));
  Rng rng_ey(derive_seed(cfg.seed, "pnl.noise.y"));
  s.x.resize(n, 1);
  s.y.resize(n, 1);
  s.latent_x.resize(n);
  s.latent_y.resize(n);
  const Vector zx = s.z * s.w_x;
  const Vector zy = s.z * s.w_y;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ex = cfg.noise_scale * cfg.noise.draw(rng_ex);
    const double ey = cfg.noise_scale * cfg.noise.draw(rng_ey);
    s.latent_x(i) = zx(i) + ex;
    s.x(i, 0) = apply(s.f_x, s.latent_x(i));
    if (s.independent) {
      s.latent_y(i) = zy(i) + ey;
      s.y(i, 0) = apply(s.f_y, s.latent_y(i));
    } else {
      s.latent_y(i) = zy(i) + cfg.beta_x * s.x(i, 0);
      s.y(i, 0) = apply(s.f_y, s.latent_y(i)) + ey;
    }
  }
  return s;
}

using Edge = std::pair<std::size_t, std::size_t>;

struct GraphSpec {
  std::size_t d = 0;
  std::vector<Edge> edges;     // sorted, directed i -> j
  std::vector<Edge> backbone;  // subset of edges

  // Parents of each node, in increasing order.
  std::vector<std::vector<std::size_t>> parents() const {
    std::vector<std::vector<std::size_t>> pa(d);
    for (const auto& [i, j] : edges) pa[j].push_back(i);
    for (auto& p : pa) std::sort(p.begin(), p.end());
    return pa;
  }

  // Kahn order; throws on a cycle or an out-of-range endpoint.
  std::vector<std::size_t> topological_order() const {
    std::vector<std::size_t> indegree(d, 0);
    std::vector<std::vector<std::size_t>> children(d);
    for (const auto& [i, j] : edges) {
      if (i >= d || j >= d || i == j) throw DataError("graph edge out of range or self-loop");
      children[i].push_back(j);
      ++indegree[j];
    }
    std::vector<std::size_t> order;
    std::vector<std::size_t> ready;
    for (std::size_t v = d; v-- > 0;) {
      if (indegree[v] == 0) ready.push_back(v);
    }
    while (!ready.empty()) {
      const std::size_t v = ready.back();
      ready.pop_back();
      order.push_back(v);
      std::vector<std::size_t> freed;
      for (const auto c : children[v]) {
        if (--indegree[c] == 0) freed.push_back(c);
      }
      std::sort(freed.rbegin(), freed.rend());
      for (const auto c : freed) ready.push_back(c);
      std::sort(ready.rbegin(), ready.rend());
    }
    if (order.size() != d) throw DataError("graph has a cycle");
    return order;
  }
};

// Backbone chain 0 -> 1 -> ... -> d-1 plus each other forward pair with
// probability p_edge. One uniform is consumed per non-backbone pair in
// lexicographic order.
inline GraphSpec gen_random_dag(std::size_t d, Probability p_edge, std::uint64_t seed) {
  if (d < 2) throw ConfigError("random DAG needs d >= 2");
  GraphSpec g;
  g.d = d;
  Rng rng(derive_seed(seed, "dag.edges"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      if (j == i + 1) {
        g.edges.emplace_back(i, j);
        g.backbone.emplace_back(i, j);
      } else if (unit(rng) < p_edge.value()) {
        g.edges.emplace_back(i, j);
      }
    }
  }
  return g;
}

inline constexpr double kScmClip = 1e12;

struct ScmSample {
  Matrix data;                      // n x d
  std::vector<Mechanism> mechanisms;  // aligned with graph.edges
  bool clipped = false;
};

// Deterministic core: given the noise matrix and per-edge mechanisms, each
// variable is the sum of transformed parents plus its own noise column.
inline ScmSample simulate_scm_with_noise(const GraphSpec& graph, const Matrix& noise,
                                         std::vector<Mechanism> mechanisms) {
  if (noise.cols() != static_cast<Eigen::Index>(graph.d)) {
    throw DataError("noise matrix has " + std::to_string(noise.cols()) + " columns, graph has " +
                    std::to_string(graph.d) + " nodes");
  }
  if (mechanisms.size() != graph.edges.size()) {
    throw DataError("need one mechanism per edge");
  }
  ScmSample out;
  out.data = noise;
  out.mechanisms = std::move(mechanisms);
  std::vector<std::vector<std::size_t>> incoming(graph.d);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) incoming[graph.edges[e].second].push_back(e);
  for (const auto v : graph.topological_order()) {
    auto col = out.data.col(static_cast<Eigen::Index>(v));
    for (const auto e : incoming[v]) {
      const auto src = out.data.col(static_cast<Eigen::Index>(graph.edges[e].first));
      const Mechanism m = out.mechanisms[e];
      for (Eigen::Index i = 0; i < col.size(); ++i) col(i) += apply(m, src(i));
    }
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      double& v_i = col(i);
      if (!std::isfinite(v_i) || std::abs(v_i) > kScmClip) {
        v_i = std::isnan(v_i) ? 0.0 : std::copysign(kScmClip, v_i);
        out.clipped = true;
      }
    }
  }
  return out;
}

// Node j's noise comes from its own stream derive_seed(seed, "scm.noise", j),
// so perturbing one node's noise never shifts another's.
inline Matrix scm_noise(std::size_t d, std::size_t n, const NoiseDist& noise, std::uint64_t seed) {
  Matrix e(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::uint64_t base = derive_seed(seed, "scm.noise");
  for (std::size_t j = 0; j < d; ++j) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(j)));
    for (std::size_t i = 0; i < n; ++i) {
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = noise.draw(rng);
    }
  }
  return e;
}

inline std::vector<Mechanism> scm_mechanisms(const GraphSpec& graph, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "scm.mechanisms"));
  std::vector<Mechanism> m;
  m.reserve(graph.edges.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) m.push_back(draw_mechanism(rng));
  return m;
}

inline ScmSample simulate_scm(const GraphSpec& graph, std::size_t n, const NoiseDist& noise,
                              std::uint64_t seed) {
  graph.topological_order();
  return simulate_scm_with_noise(graph, scm_noise(graph.d, n, noise, seed),
                                 scm_mechanisms(graph, seed));
}

}  // namespace ecit
