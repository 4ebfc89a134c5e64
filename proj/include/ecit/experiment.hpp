#pragma once

// Simulation harness behind the `bench` subcommands: Type I / power sweeps,
// ablations over the ensemble settings, runtime profiles and PC benchmarks,
// all reduced to a MetricsReport.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecit/base_tests.hpp"
#include "ecit/combiners.hpp"
#include "ecit/config.hpp"
#include "ecit/datagen.hpp"
#include "ecit/discovery.hpp"
#include "ecit/ensemble.hpp"
#include "ecit/error.hpp"
#include "ecit/parallel.hpp"
#include "ecit/report.hpp"
#include "ecit/rng.hpp"

namespace ecit {

enum class ExperimentKind { type1, power, runtime, alpha_ablation, nk_ablation, combiner_compare, pc_bench };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::type1: return "type1";
    case ExperimentKind::power: return "power";
    case ExperimentKind::runtime: return "runtime";
    case ExperimentKind::alpha_ablation: return "alpha_ablation";
    case ExperimentKind::nk_ablation: return "nk_ablation";
    case ExperimentKind::combiner_compare: return "combiner_compare";
    case ExperimentKind::pc_bench: return "pc_bench";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "type1") return ExperimentKind::type1;
  if (s == "power") return ExperimentKind::power;
  if (s == "runtime") return ExperimentKind::runtime;
  if (s == "alpha_ablation" || s == "alpha") return ExperimentKind::alpha_ablation;
  if (s == "nk_ablation" || s == "nk") return ExperimentKind::nk_ablation;
  if (s == "combiner_compare" || s == "combiners") return ExperimentKind::combiner_compare;
  if (s == "pc_bench" || s == "pc") return ExperimentKind::pc_bench;
  throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

// A test under comparison: a base test, optionally wrapped in the ensemble.
struct MethodSpec {
  std::string label;
  CITestSpec base;
  std::optional<EnsembleConfig> ensemble;

  // Methods with equal keys see identical subtest p-values on the same data.
  std::string subtest_key() const {
    std::string k = std::string(to_string(base.method)) + "|" + std::to_string(base.rcit_features_xy) + "|" +
                    std::to_string(base.rcit_features_z) + "|" + format_double(base.rcit_ridge) + "|" +
                    format_double(base.kcit_ridge_factor) + "|" + std::to_string(base.permutations) + "|" +
                    (base.bandwidth ? format_double(*base.bandwidth) : "median");
    if (ensemble) {
      k += "|nk=" + (ensemble->subset_size ? std::to_string(*ensemble->subset_size) : "-") +
           "|K=" + (ensemble->subsets ? std::to_string(*ensemble->subsets) : "-") + "|" +
           std::string(to_string(ensemble->partition)) + "|" + std::string(to_string(ensemble->remainder));
    }
    return k;
  }
};

// "kcit", "rcit(features=5)", "e-kcit(alpha=2,nk=400,combiner=fisher)".
inline MethodSpec parse_method(std::string_view text) {
  std::string compact;
  for (const char c : text) {
    if (c != ' ' && c != '\t') compact += c;
  }
  MethodSpec m;
  m.label = compact;
  std::string name = compact;
  std::string options;
  if (const auto open = compact.find('('); open != std::string::npos) {
    if (compact.back() != ')') throw ConfigError("method '" + compact + "': missing ')'");
    name = compact.substr(0, open);
    options = compact.substr(open + 1, compact.size() - open - 2);
  }
  if (name.rfind("e-", 0) == 0) {
    m.ensemble = EnsembleConfig{};
    name = name.substr(2);
  }
  m.base.method = parse_ci_method(name);
  double alpha = 1.75;
  for (const auto& opt : KeyValueConfig::split(options, ',')) {
    const auto eq = opt.find('=');
    if (eq == std::string::npos) throw ConfigError("method '" + compact + "': option '" + opt + "' needs '='");
    const std::string key = opt.substr(0, eq);
    const std::string val = opt.substr(eq + 1);
    const auto need_ensemble = [&] {
      if (!m.ensemble) throw ConfigError("method '" + compact + "': '" + key + "' needs an e- method");
    };
    if (key == "features") {
      m.base.rcit_features_xy = KeyValueConfig::to_uint(key, val);
    } else if (key == "zfeatures") {
      m.base.rcit_features_z = KeyValueConfig::to_uint(key, val);
    } else if (key == "perms") {
      m.base.permutations = KeyValueConfig::to_uint(key, val);
    } else if (key == "ridge") {
      m.base.kcit_ridge_factor = KeyValueConfig::to_double(key, val);
      m.base.rcit_ridge = m.base.kcit_ridge_factor;
    } else if (key == "bandwidth") {
      m.base.bandwidth = KeyValueConfig::to_double(key, val);
    } else if (key == "alpha") {
      need_ensemble();
      alpha = KeyValueConfig::to_double(key, val);
    } else if (key == "nk") {
      need_ensemble();
      m.ensemble->subset_size = KeyValueConfig::to_uint(key, val);
      m.ensemble->subsets.reset();
    } else if (key == "K" || key == "k") {
      need_ensemble();
      m.ensemble->subsets = KeyValueConfig::to_uint(key, val);
      m.ensemble->subset_size.reset();
    } else if (key == "combiner") {
      need_ensemble();
      m.ensemble->combiner = parse_combine_method(val);
    } else if (key == "partition") {
      need_ensemble();
      m.ensemble->partition = parse_partition_policy(val);
    } else if (key == "remainder") {
      need_ensemble();
      m.ensemble->remainder = parse_remainder_policy(val);
    } else {
      throw ConfigError("method '" + compact + "': unknown option '" + key + "'");
    }
  }
  if (m.ensemble) {
    m.ensemble->params = StableParams(alpha);
    m.ensemble->validate();
  }
  m.base.validate();
  return m;
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::type1;
  // Generator grid.
  std::vector<std::size_t> n_values{1200};
  std::vector<NoiseDist> noises{NoiseDist::student_t(4.0)};
  std::vector<std::size_t> dz_values{1};
  NoiseDist z_dist = NoiseDist::gaussian();
  double beta_x = 1.0;
  std::vector<Hypothesis> hypotheses{Hypothesis::h0};

  std::vector<MethodSpec> methods;
  std::size_t replicates = 200;
  Probability level{0.05};
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool record_timing = false;
  bool edgington_normal_approx = false;
  double max_failure_fraction = 0.10;

  // runtime
  std::vector<std::size_t> sizes{800, 1600, 3200};
  std::size_t repetitions = kMinRuntimeRepetitions;

  // pc_bench
  std::size_t graphs = 50;
  std::size_t graph_d = 8;
  double p_edge = 0.3;
  std::size_t max_cond = kDefaultMaxCond;

  void validate() const {
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    if (methods.empty()) throw ConfigError("no methods to compare");
    if (!(level.value() > 0.0 && level.value() < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (n_values.empty() || noises.empty() || dz_values.empty() || hypotheses.empty()) {
      throw ConfigError("generator grid has an empty axis");
    }
    if (kind == ExperimentKind::runtime && sizes.empty()) throw ConfigError("runtime sizes are empty");
    if (kind == ExperimentKind::pc_bench) {
      if (graphs < 1) throw ConfigError("pc.graphs must be >= 1");
      if (graph_d < 2) throw ConfigError("pc.d must be >= 2");
      if (max_cond > graph_d - 2) throw ConfigError("pc.max_cond exceeds d - 2");
      if (!(p_edge >= 0.0 && p_edge <= 1.0)) throw ConfigError("pc.p_edge must lie in [0, 1]");
    }
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction < 1.0)) {
      throw ConfigError("failure fraction must lie in [0, 1)");
    }
  }
};

inline std::string fingerprint(std::string_view canonical) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

inline double binomial_stderr(double rate, std::size_t trials) {
  return trials == 0 ? 0.0 : std::sqrt(rate * (1.0 - rate) / static_cast<double>(trials));
}

// One generator setting of a CI simulation.
struct GridPoint {
  std::size_t n = 0;
  NoiseDist noise;
  std::size_t d_z = 1;
  Hypothesis hypothesis = Hypothesis::h0;
};

// Per-method, per-replicate p-values (nullopt: that replicate failed) and
// test-call times.
struct PointResult {
  std::string config_id;
  GridPoint point;
  std::vector<std::vector<std::optional<double>>> p;
  std::vector<std::vector<double>> elapsed_ms;
  std::vector<std::vector<std::string>> errors;
};

namespace detail {

inline std::string canonical_point(const ExperimentConfig& cfg, const GridPoint& g) {
  return std::string(to_string(cfg.kind)) + ";n=" + std::to_string(g.n) + ";noise=" + to_string(g.noise) +
         ";z=" + to_string(cfg.z_dist) + ";dz=" + std::to_string(g.d_z) + ";beta_x=" + format_double(cfg.beta_x) +
         ";h=" + (g.hypothesis == Hypothesis::h0 ? "h0" : "h1") + ";reps=" + std::to_string(cfg.replicates) +
         ";level=" + format_double(cfg.level.value()) + ";seed=" + std::to_string(cfg.seed);
}

}  // namespace detail

inline PointResult simulate_point(const ExperimentConfig& cfg, const GridPoint& g) {
  PointResult res;
  res.point = g;
  res.config_id = fingerprint(detail::canonical_point(cfg, g));
  const std::uint64_t point_seed = derive_seed(cfg.seed, detail::canonical_point(cfg, g));
  const std::size_t m = cfg.methods.size();
  res.p.assign(m, std::vector<std::optional<double>>(cfg.replicates));
  res.elapsed_ms.assign(m, std::vector<double>(cfg.replicates, 0.0));
  res.errors.assign(m, std::vector<std::string>(cfg.replicates));

  // Group ensemble methods that can share subtests.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < m; ++k) {
    if (cfg.methods[k].ensemble) groups[cfg.methods[k].subtest_key()].push_back(k);
  }

  const auto replicate = [&](std::size_t r) {
    PnlConfig gen;
    gen.hypothesis = g.hypothesis;
    gen.n = g.n;
    gen.d_z = g.d_z;
    gen.z_dist = cfg.z_dist;
    gen.noise = g.noise;
    gen.beta_x = cfg.beta_x;
    gen.seed = derive_seed(point_seed, static_cast<std::uint64_t>(r));
    const DataTriple data = gen_pnl(gen).triple();
    using Clock = std::chrono::steady_clock;
    for (std::size_t k = 0; k < m; ++k) {
      const auto& method = cfg.methods[k];
      if (method.ensemble) continue;
      try {
        CITestSpec spec = method.base;
        spec.seed = derive_seed(gen.seed, "base");
        const auto start = Clock::now();
        const auto out = run_base_test(data, spec);
        res.elapsed_ms[k][r] = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        res.p[k][r] = out.p.value();
      } catch (const std::exception& e) {
        res.errors[k][r] = e.what();
      }
    }
    for (const auto& [key, members] : groups) {
      const auto& first = cfg.methods[members.front()];
      EnsembleConfig shared = *first.ensemble;
      shared.seed = derive_seed(gen.seed, "ensemble");
      std::vector<TestOutcome> subtests;
      double sub_ms = 0.0;
      try {
        const auto start = Clock::now();
        subtests = run_subtests(data, first.base, shared);
        sub_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      } catch (const std::exception& e) {
        for (const auto k : members) res.errors[k][r] = e.what();
        continue;
      }
      for (const auto k : members) {
        try {
          EnsembleConfig ec = *cfg.methods[k].ensemble;
          ec.seed = shared.seed;
          ec.classical.edgington_normal_approx = cfg.edgington_normal_approx;
          const auto start = Clock::now();
          const auto out = combine_subtests(subtests, ec);
          res.elapsed_ms[k][r] = sub_ms + std::chrono::duration<double, std::milli>(Clock::now() - start).count();
          res.p[k][r] = out.p.value();
        } catch (const std::exception& e) {
          res.errors[k][r] = e.what();
        }
      }
    }
  };
  const auto errors = parallel_for(cfg.replicates, cfg.threads, replicate);
  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (errors[r]) rethrow_with_context(errors[r], "replicate " + std::to_string(r));
  }

  for (std::size_t k = 0; k < m; ++k) {
    std::size_t failed = 0;
    std::string first_error;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      if (!res.p[k][r]) {
        ++failed;
        if (first_error.empty()) first_error = res.errors[k][r];
      }
    }
    if (static_cast<double>(failed) > cfg.max_failure_fraction * static_cast<double>(cfg.replicates)) {
      throw NumericalError("grid point " + res.config_id + " (" + detail::canonical_point(cfg, g) + "), method " +
                           cfg.methods[k].label + ": " + std::to_string(failed) + " of " +
                           std::to_string(cfg.replicates) + " replicates failed; first error: " + first_error);
    }
  }
  return res;
}

struct RateSummary {
  double rate = 0.0;
  double stderr_value = 0.0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  double mean_elapsed_ms = 0.0;
};

inline RateSummary summarize_rate(const std::vector<std::optional<double>>& ps, const std::vector<double>& ms,
                                  Probability level) {
  RateSummary s;
  std::size_t rejected = 0;
  double total_ms = 0.0;
  for (std::size_t r = 0; r < ps.size(); ++r) {
    if (!ps[r]) {
      ++s.failures;
      continue;
    }
    ++s.successes;
    rejected += *ps[r] <= level.value();
    total_ms += ms[r];
  }
  if (s.successes > 0) {
    s.rate = static_cast<double>(rejected) / static_cast<double>(s.successes);
    s.mean_elapsed_ms = total_ms / static_cast<double>(s.successes);
  }
  s.stderr_value = binomial_stderr(s.rate, s.successes);
  return s;
}

// Least-squares slope of log(time) on log(n).
inline double loglog_slope(const std::vector<RuntimePoint>& pts) {
  if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    const double x = std::log(static_cast<double>(p.n));
    const double y = std::log(p.median.count());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(pts.size());
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

struct PcGraphResult {
  GraphSpec truth;
  bool clipped = false;
  // Per method.
  std::vector<SkeletonMetrics> metrics;
  std::vector<double> elapsed_ms;
  // Empty when the method succeeded on this graph.
  std::vector<std::string> errors;

  bool failed() const {
    return std::any_of(errors.begin(), errors.end(), [](const std::string& e) { return !e.empty(); });
  }
};

inline std::vector<PcGraphResult> run_pc_graphs(const ExperimentConfig& cfg) {
  const std::size_t n = cfg.n_values.front();
  const NoiseDist noise = cfg.noises.front();
  const std::string canonical = "pc_bench;d=" + std::to_string(cfg.graph_d) + ";p_edge=" + format_double(cfg.p_edge) +
                                ";n=" + std::to_string(n) + ";noise=" + to_string(noise) +
                                ";seed=" + std::to_string(cfg.seed);
  const std::uint64_t base_seed = derive_seed(cfg.seed, canonical);
  std::vector<PcGraphResult> results(cfg.graphs);
  const auto errors = parallel_for(cfg.graphs, cfg.threads, [&](std::size_t gi) {
    const std::uint64_t gseed = derive_seed(base_seed, static_cast<std::uint64_t>(gi));
    auto& out = results[gi];
    out.truth = gen_random_dag(cfg.graph_d, Probability(cfg.p_edge), gseed);
    const auto sample = simulate_scm(out.truth, n, noise, gseed);
    out.clipped = sample.clipped;
    const auto truth = SkeletonGraph::from_dag(out.truth);
    for (const auto& method : cfg.methods) {
      const auto test = make_data_test(sample.data, method.base, method.ensemble, derive_seed(gseed, "pc.test"));
      const auto start = std::chrono::steady_clock::now();
      try {
        const auto pc = pc_skeleton(cfg.graph_d, test, cfg.level, cfg.max_cond);
        out.metrics.push_back(skeleton_metrics(pc.graph, truth));
        out.errors.emplace_back();
      } catch (const std::exception& e) {
        out.metrics.emplace_back();
        out.errors.emplace_back(e.what());
      }
      out.elapsed_ms.push_back(
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
  });
  for (std::size_t gi = 0; gi < errors.size(); ++gi) {
    if (errors[gi]) rethrow_with_context(errors[gi], "pc graph " + std::to_string(gi));
  }
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    std::size_t failed = 0;
    std::string first_error;
    for (std::size_t gi = 0; gi < results.size(); ++gi) {
      if (results[gi].errors[k].empty()) continue;
      if (failed++ == 0) first_error = "pc graph " + std::to_string(gi) + ": " + results[gi].errors[k];
    }
    if (static_cast<double>(failed) > cfg.max_failure_fraction * static_cast<double>(cfg.graphs)) {
      throw NumericalError("pc bench, method " + cfg.methods[k].label + ": " + std::to_string(failed) + " of " +
                           std::to_string(cfg.graphs) + " graphs failed; first error: " + first_error);
    }
  }
  return results;
}

inline MetricsReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  MetricsReport report;
  report.set_header("experiment", std::string(to_string(cfg.kind)));
  report.set_header("seed", std::to_string(cfg.seed));
  report.set_header("version", kVersion);
  std::string partition = "none";
  for (const auto& m : cfg.methods) {
    if (m.ensemble) {
      partition = std::string(to_string(m.ensemble->partition)) + "/" + std::string(to_string(m.ensemble->remainder));
      break;
    }
  }
  report.set_header("partition_policy", partition);
  report.set_header("replicates", std::to_string(cfg.replicates));
  report.set_header("level", format_double(cfg.level.value()));
  std::string dz;
  for (std::size_t i = 0; i < cfg.dz_values.size(); ++i) dz += (i ? "," : "") + std::to_string(cfg.dz_values[i]);
  report.set_header("d_z", dz);
  report.set_header("z_dist", to_string(cfg.z_dist));
  std::string methods;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) methods += (i ? ";" : "") + cfg.methods[i].label;
  report.set_header("methods", methods);

  const auto timing = [&](double ms) -> std::optional<double> {
    return cfg.record_timing ? std::optional<double>(ms) : std::nullopt;
  };

  if (cfg.kind == ExperimentKind::runtime) {
    PnlConfig tmpl;
    tmpl.noise = cfg.noises.front();
    tmpl.z_dist = cfg.z_dist;
    tmpl.d_z = cfg.dz_values.front();
    std::string sizes;
    for (std::size_t i = 0; i < cfg.sizes.size(); ++i) sizes += (i ? "," : "") + std::to_string(cfg.sizes[i]);
    const std::string summary_id = fingerprint("runtime;sizes=" + sizes + ";noise=" + to_string(tmpl.noise) +
                                               ";seed=" + std::to_string(cfg.seed));
    for (const auto& m : cfg.methods) {
      const EnsembleConfig ec = m.ensemble.value_or(EnsembleConfig{});
      const auto table = runtime_profile(m.base, ec, cfg.sizes, cfg.seed, m.ensemble.has_value(),
                                         cfg.repetitions, tmpl);
      for (const auto& pt : table) {
        const double ms = pt.median.count() * 1e3;
        report.rows.push_back({fingerprint("runtime;n=" + std::to_string(pt.n) + ";noise=" + to_string(tmpl.noise) +
                                           ";seed=" + std::to_string(cfg.seed)),
                               m.label, "runtime_median_ms", ms, std::nullopt, ms});
      }
      if (table.size() >= 2) {
        report.rows.push_back({summary_id, m.label, "loglog_slope", loglog_slope(table), std::nullopt, std::nullopt});
      }
    }
    return report;
  }

  if (cfg.kind == ExperimentKind::pc_bench) {
    const auto all = run_pc_graphs(cfg);
    // Metrics are paired across methods, so a graph any method failed on is dropped for all.
    std::vector<PcGraphResult> graphs;
    for (const auto& g : all) {
      if (!g.failed()) graphs.push_back(g);
    }
    const std::string id = fingerprint("pc_bench;d=" + std::to_string(cfg.graph_d) + ";p_edge=" +
                                       format_double(cfg.p_edge) + ";n=" + std::to_string(cfg.n_values.front()) +
                                       ";noise=" + to_string(cfg.noises.front()) + ";graphs=" +
                                       std::to_string(cfg.graphs) + ";seed=" + std::to_string(cfg.seed));
    std::size_t clipped = 0;
    for (const auto& g : all) clipped += g.clipped;
    report.set_header("clipped_graphs", std::to_string(clipped));
    report.set_header("failed_graphs", std::to_string(all.size() - graphs.size()));
    const double gcount = static_cast<double>(graphs.size());
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
      const auto mean_sd = [&](auto get) {
        double sum = 0, sq = 0;
        for (const auto& g : graphs) {
          const double v = get(g.metrics[k]);
          sum += v;
          sq += v * v;
        }
        const double mean = sum / gcount;
        const double var = graphs.size() > 1 ? std::max(0.0, (sq - gcount * mean * mean) / (gcount - 1.0)) : 0.0;
        return std::pair{mean, std::sqrt(var / gcount)};
      };
      double ms = 0;
      for (const auto& g : graphs) ms += g.elapsed_ms[k];
      ms /= gcount;
      const auto add = [&](const std::string& metric, std::pair<double, double> v) {
        report.rows.push_back({id, cfg.methods[k].label, metric, v.first, v.second, timing(ms)});
      };
      add("f1", mean_sd([](const SkeletonMetrics& s) { return s.f1; }));
      add("precision", mean_sd([](const SkeletonMetrics& s) { return s.precision; }));
      add("recall", mean_sd([](const SkeletonMetrics& s) { return s.recall; }));
      add("shd", mean_sd([](const SkeletonMetrics& s) { return static_cast<double>(s.shd); }));
      const auto failures = std::count_if(all.begin(), all.end(), [&](const PcGraphResult& g) { return !g.errors[k].empty(); });
      if (failures > 0) {
        report.rows.push_back({id, cfg.methods[k].label, "failed_replicates", static_cast<double>(failures),
                               std::nullopt, std::nullopt});
      }
    }
    return report;
  }

  for (const auto n : cfg.n_values) {
    for (const auto& noise : cfg.noises) {
      for (const auto d_z : cfg.dz_values) {
        for (const auto h : cfg.hypotheses) {
          const auto res = simulate_point(cfg, {n, noise, d_z, h});
          for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
            const auto s = summarize_rate(res.p[k], res.elapsed_ms[k], cfg.level);
            report.rows.push_back({res.config_id, cfg.methods[k].label, h == Hypothesis::h0 ? "type1" : "power",
                                   s.rate, s.stderr_value, timing(s.mean_elapsed_ms)});
            if (s.failures > 0) {
              report.rows.push_back({res.config_id, cfg.methods[k].label, "failed_replicates",
                                     static_cast<double>(s.failures), std::nullopt, std::nullopt});
            }
          }
        }
      }
    }
  }
  return report;
}

namespace detail {

inline std::vector<MethodSpec> parse_methods(const std::vector<std::string>& texts) {
  std::vector<MethodSpec> out;
  for (const auto& t : texts) out.push_back(parse_method(t));
  return out;
}

inline std::string with_option(const std::string& method, const std::string& option) {
  if (method.back() == ')') return method.substr(0, method.size() - 1) + "," + option + ")";
  return method + "(" + option + ")";
}

}  // namespace detail

// Builds an experiment from flat keys. Every kind has desk-scale defaults,
// so an empty file is a valid configuration.
inline ExperimentConfig experiment_from_config(const KeyValueConfig& kv, std::optional<ExperimentKind> kind = {}) {
  ExperimentConfig cfg;
  cfg.kind = kind ? *kind : parse_experiment_kind(kv.get("experiment", "type1"));
  if (kind && kv.has("experiment") && parse_experiment_kind(kv.get("experiment", "")) != *kind) {
    throw ConfigError("config file is for experiment '" + kv.get("experiment", "") + "', not '" +
                      std::string(to_string(*kind)) + "'");
  }

  // Kind-specific defaults.
  std::vector<std::string> methods;
  std::vector<std::string> noise{"t:4"};
  std::vector<std::size_t> n_values{1200};
  std::vector<std::string> hyps{"h0", "h1"};
  std::string ablation_base = "e-kcit";
  switch (cfg.kind) {
    case ExperimentKind::type1:
      methods = {"rcit", "e-rcit(alpha=2)", "e-rcit(alpha=1.75)"};
      hyps = {"h0"};
      break;
    case ExperimentKind::power:
      methods = {"rcit", "e-rcit(alpha=2)", "e-rcit(alpha=1.75)"};
      hyps = {"h1"};
      break;
    case ExperimentKind::runtime:
      methods = {"kcit", "e-kcit"};
      noise = {"t:2"};
      break;
    case ExperimentKind::alpha_ablation:
      noise = {"laplace"};
      break;
    case ExperimentKind::nk_ablation:
      noise = {"laplace"};
      n_values = {2000};
      methods = {"kcit"};
      break;
    case ExperimentKind::combiner_compare:
      noise = {"laplace"};
      n_values = {2000};
      break;
    case ExperimentKind::pc_bench:
      methods = {"e-kcit", "rcit"};
      noise = {"laplace"};
      n_values = {2000};
      break;
  }

  cfg.seed = kv.get_uint("seed", 0);
  cfg.replicates = kv.get_uint("replicates", 200);
  cfg.level = Probability(kv.get_double("level", 0.05));
  cfg.threads = kv.get_uint("threads", 1);
  cfg.record_timing = kv.get_bool("report.timing", cfg.kind == ExperimentKind::runtime);
  cfg.edgington_normal_approx = kv.get_bool("combine.edgington_normal_approx", false);
  cfg.max_failure_fraction = kv.get_double("max_failure_fraction", 0.10);
  cfg.n_values = kv.get_sizes("gen.n", n_values);
  cfg.noises.clear();
  for (const auto& s : kv.get_list("gen.noise", noise)) cfg.noises.push_back(parse_noise(s));
  cfg.dz_values = kv.get_sizes("gen.dz", {1});
  cfg.z_dist = parse_noise(kv.get("gen.z", "gaussian"));
  cfg.beta_x = kv.get_double("gen.beta_x", 1.0);
  cfg.hypotheses.clear();
  for (const auto& h : kv.get_list("hypotheses", hyps)) {
    if (h == "h0") cfg.hypotheses.push_back(Hypothesis::h0);
    else if (h == "h1") cfg.hypotheses.push_back(Hypothesis::h1);
    else throw ConfigError("unknown hypothesis '" + h + "'");
  }
  auto method_texts = kv.get_list("methods", methods, ';');

  ablation_base = kv.get("ablation.base", ablation_base);
  if (cfg.kind == ExperimentKind::alpha_ablation) {
    for (const double a : kv.get_doubles("ablation.alphas", {0.5, 1.0, 1.5, 1.75, 2.0})) {
      method_texts.push_back(detail::with_option(ablation_base, "alpha=" + format_double(a)));
    }
  } else if (cfg.kind == ExperimentKind::nk_ablation) {
    for (const auto nk : kv.get_sizes("ablation.nk", {200, 400, 500, 1000})) {
      method_texts.push_back(detail::with_option(ablation_base, "nk=" + std::to_string(nk)));
    }
  } else if (cfg.kind == ExperimentKind::combiner_compare) {
    for (const auto& c : kv.get_list("ablation.combiners",
                                     {"stable", "tippett", "edgington", "fisher", "pearson", "mudholkar"})) {
      method_texts.push_back(detail::with_option(ablation_base, "combiner=" + std::string(to_string(parse_combine_method(c)))));
    }
  }
  cfg.methods = detail::parse_methods(method_texts);

  cfg.sizes = kv.get_sizes("runtime.sizes", {800, 1600, 3200});
  cfg.repetitions = kv.get_uint("runtime.repetitions", kMinRuntimeRepetitions);
  cfg.graphs = kv.get_uint("pc.graphs", 50);
  cfg.graph_d = kv.get_uint("pc.d", 8);
  cfg.p_edge = kv.get_double("pc.p_edge", 0.3);
  cfg.max_cond = kv.get_uint("pc.max_cond", kDefaultMaxCond);

  if (const auto unused = kv.unused_keys(); !unused.empty()) {
    std::string list;
    for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + list);
  }
  cfg.validate();
  return cfg;
}

}  // namespace ecit
