// Acceptance checks 1-10. Usage: acceptance [N ...]; no arguments runs all.
// Prints one "criterion N: PASS|FAIL ..." line per check and exits non-zero
// if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ecit/ecit.hpp"
#include "oracles.hpp"

using namespace ecit;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::size_t threads() { return std::max(1u, std::thread::hardware_concurrency()); }

KeyValueConfig config(std::initializer_list<std::pair<const char*, std::string>> kv) {
  KeyValueConfig c;
  for (const auto& [k, v] : kv) c.set(k, v);
  c.set("threads", std::to_string(threads()));
  return c;
}

double ks_against(std::vector<double> xs, const StableParams& p) {
  return oracle::ks_statistic(std::move(xs), [&](double x) { return stable_cdf(x, p).value(); });
}

double metric(const MetricsReport& r, const std::string& method, const std::string& name) {
  const auto* row = r.find(method, name);
  if (!row) throw std::runtime_error("report has no " + name + " row for " + method);
  return row->value;
}

// ---------------------------------------------------------------------------

Verdict stable_numerics() {
  const auto start = std::chrono::steady_clock::now();
  const StableParams gauss(2.0, 0.0, 1.3, 0.4);
  const StableParams cauchy(1.0, 0.0, 0.7, -1.0);
  const StableParams levy(0.5, 1.0, 1.5, 0.5);
  double err = 0.0;
  std::size_t points = 0;
  const int per_law = 3334;
  for (int i = 0; i < per_law; ++i) {
    const double x = -30.0 + 60.0 * i / (per_law - 1);
    err = std::max(err, std::abs(stable_cdf(x, gauss) - oracle::normal_cdf(x, 0.4, 1.3 * std::numbers::sqrt2)));
    err = std::max(err, std::abs(stable_cdf(x, cauchy) - oracle::cauchy_cdf(x, 0.7, -1.0)));
    err = std::max(err, std::abs(stable_cdf(x, levy) - oracle::levy_cdf(x, 1.5, 0.5)));
    points += 3;
  }
  // same laws through the quadrature, bypassing the closed-form shortcuts
  double err_int = 0.0;
  for (int i = 0; i < per_law; ++i) {
    const double x = -30.0 + 60.0 * i / (per_law - 1);
    const auto g = stable_tails_integral(x, gauss);
    const auto c = stable_tails_integral(x, cauchy);
    const auto l = stable_tails_integral(x, levy);
    err_int = std::max(err_int, std::abs(g.lower - oracle::normal_cdf(x, 0.4, 1.3 * std::numbers::sqrt2)));
    err_int = std::max(err_int, std::abs(c.lower - oracle::cauchy_cdf(x, 0.7, -1.0)));
    err_int = std::max(err_int, std::abs(l.lower - oracle::levy_cdf(x, 1.5, 0.5)));
  }
  double round = 0.0;
  const std::vector<StableParams> laws = {gauss, cauchy, levy, {1.75}, {1.5, 0.5}, {1.0, 0.6, 2.0, 1.0}};
  for (const auto& p : laws) {
    for (int i = 1; i < 400; ++i) {
      for (const double u : {i / 400.0, std::pow(10.0, -8.0 + 6.0 * i / 400.0)}) {
        round = std::max(round, std::abs(stable_cdf(stable_quantile(Probability(u), p), p) - u));
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {err <= 1e-8 && err_int <= 1e-8 && round <= 1e-8 && secs < 60.0,
          fmt("%zu grid points, max cdf error %.2e (quadrature path %.2e), max roundtrip error %.2e, %.1f s", points,
              err, err_int, round, secs)};
}

Verdict closure() {
  const std::size_t reps = 100000, k = 10;
  bool ok = true;
  std::string detail;
  const std::vector<StableParams> cases = {{1.0, 0.5, 1.0, 0.0}, {1.5, 0.3, 1.0, 0.5}, {1.75}, {2.0}};
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& p = cases[c];
    const auto draws = stable_sample(p, reps * k, 1000 + c);
    std::vector<double> means(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += draws[r * k + j];
      means[r] = s / static_cast<double>(k);
    }
    const double ks = ks_against(std::move(means), aggregate_params(p, k));
    ok = ok && ks < 0.01;
    detail += fmt("mean alpha=%g KS %.4f; ", p.alpha(), ks);
  }
  const std::vector<std::pair<StableParams, StableParams>> pairs = {
      {{1.5, 0.5, 1.0, 1.0}, {1.5, 0.0, 2.0, -1.0}},
      {{1.0, 1.0, 1.0, 0.0}, {1.0, -0.5, 0.5, 2.0}},
      {{1.75, 0.8, 0.5, 0.0}, {1.75, -0.2, 1.5, 0.3}},
  };
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    const auto& [a, b] = pairs[c];
    const auto xa = stable_sample(a, reps, 2000 + c);
    const auto xb = stable_sample(b, reps, 3000 + c);
    std::vector<double> sums(reps);
    for (std::size_t r = 0; r < reps; ++r) sums[r] = xa[r] + xb[r];
    const double ks = ks_against(std::move(sums), sum_params(a, b));
    ok = ok && ks < 0.01;
    detail += fmt("sum alpha=%g KS %.4f; ", a.alpha(), ks);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Verdict validity() {
  const std::size_t reps = 100000, k = 5;
  bool ok = true;
  std::string detail;
  for (const double a : {1.0, 1.75, 2.0}) {
    const StableParams params(a);
    Rng rng(derive_seed(7, format_double(a)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> out(reps);
    std::size_t rejected = 0;
    for (auto& p : out) {
      std::vector<double> ps(k);
      for (auto& v : ps) v = unif(rng);
      p = combine_stable(clamp_pvalues(ps), params).p_combined.value();
      rejected += p <= 0.05;
    }
    const double ks = oracle::ks_uniform(out);
    const double level = static_cast<double>(rejected) / static_cast<double>(reps);
    ok = ok && ks < 0.006 && level >= 0.045 && level <= 0.055;
    detail += fmt("alpha=%g KS %.4f level %.4f; ", a, ks, level);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Verdict stouffer_reduction() {
  Rng rng(44);
  std::uniform_int_distribution<std::size_t> kd(1, 50);
  std::uniform_real_distribution<double> lp(-12.0, 0.0);
  std::bernoulli_distribution upper(0.5);
  double err = 0.0;
  const StableParams gauss(2.0);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> ps(kd(rng));
    for (auto& v : ps) {
      const double t = std::pow(10.0, lp(rng));
      v = upper(rng) ? 1.0 - t : t;
    }
    const auto pv = clamp_pvalues(ps);
    err = std::max(err, std::abs(combine_stable(pv, gauss).p_combined.value() -
                                 combine_classical(CombineMethod::stouffer, pv).p_combined.value()));
  }
  return {err <= 1e-10, fmt("10000 inputs, max |difference| %.2e", err)};
}

Verdict power_convergence() {
  const std::size_t reps = 10000;
  const std::vector<std::size_t> ks = {1, 2, 5, 10, 20, 50};
  Rng rng(55);
  std::gamma_distribution<double> ga(5.0, 1.0), gb(95.0, 1.0);
  const StableParams params(1.75);
  std::vector<std::size_t> rejected(ks.size(), 0);
  for (std::size_t r = 0; r < reps; ++r) {
    // nested: the K=50 draw extends the K=20 draw, and so on
    std::vector<double> ps(ks.back());
    for (auto& p : ps) {
      const double x = ga(rng);
      p = x / (x + gb(rng));
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const std::vector<double> head(ps.begin(), ps.begin() + static_cast<std::ptrdiff_t>(ks[i]));
      rejected[i] += combine_stable(clamp_pvalues(head), params).p_combined.value() <= 0.05;
    }
  }
  bool monotone = true;
  std::string detail = "rates";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (i > 0 && rejected[i] < rejected[i - 1]) monotone = false;
    detail += fmt(" K=%zu:%.4f", ks[i], static_cast<double>(rejected[i]) / reps);
  }
  const double last = static_cast<double>(rejected.back()) / reps;
  return {monotone && last > 0.99, detail};
}

Verdict table_trend() {
  const auto cfg = experiment_from_config(config({{"methods", "rcit; e-rcit(alpha=2)"},
                                                  {"gen.n", "1200"},
                                                  {"gen.noise", "t:4"},
                                                  {"gen.z", "gaussian"},
                                                  {"hypotheses", "h0, h1"},
                                                  {"replicates", "200"},
                                                  {"seed", "1"}}),
                                          ExperimentKind::power);
  const auto r = run_experiment(cfg);
  const double orig = metric(r, "rcit", "power");
  const double ens = metric(r, "e-rcit(alpha=2)", "power");
  const double t1o = metric(r, "rcit", "type1");
  const double t1e = metric(r, "e-rcit(alpha=2)", "type1");
  const auto hits = static_cast<std::size_t>(std::lround(ens * 200));
  const double pval = orig >= 1.0 ? 1.0 : oracle::binomial_upper(hits, 200, orig);
  const bool ok = orig >= 0.75 && orig <= 0.92 && pval < 0.1 && t1o >= 0.02 && t1o <= 0.09 && t1e >= 0.02 &&
                  t1e <= 0.09;
  return {ok, fmt("power orig %.3f ens %.3f (one-sided binomial p %.3f); type1 orig %.3f ens %.3f", orig, ens, pval,
                  t1o, t1e)};
}

Verdict linear_scaling() {
  const auto cfg = experiment_from_config(config({{"methods", "kcit; e-kcit(nk=400)"},
                                                  {"runtime.sizes", "800, 1600, 3200"},
                                                  {"runtime.repetitions", "5"}}),
                                          ExperimentKind::runtime);
  const auto r = run_experiment(cfg);
  const double s_e = metric(r, "e-kcit(nk=400)", "loglog_slope");
  const double s_k = metric(r, "kcit", "loglog_slope");
  std::map<std::string, double> at_max;
  for (const auto& row : r.rows) {
    if (row.metric == "runtime_median_ms") at_max[row.method] = row.value;  // sizes ascend
  }
  const double speedup = at_max["kcit"] / at_max["e-kcit(nk=400)"];
  const bool ok = s_e >= 0.8 && s_e <= 1.2 && s_k >= 1.8 && speedup >= 3.0;
  return {ok, fmt("slope e-kcit %.3f, kcit %.3f; speedup at n=3200 %.1fx (%.0f ms vs %.0f ms)", s_e, s_k, speedup,
                  at_max["kcit"], at_max["e-kcit(nk=400)"])};
}

Verdict alpha_ablation() {
  const auto cfg = experiment_from_config(
      config({{"hypotheses", "h1"}, {"replicates", "200"}, {"gen.noise", "laplace"}, {"seed", "2"}}),
      ExperimentKind::alpha_ablation);
  const auto r = run_experiment(cfg);
  std::vector<std::pair<double, double>> power;
  std::string detail = "power";
  for (const double a : {0.5, 1.0, 1.5, 1.75, 2.0}) {
    const double v = metric(r, "e-kcit(alpha=" + format_double(a) + ")", "power");
    power.emplace_back(a, v);
    detail += fmt(" a=%g:%.3f", a, v);
  }
  double best = 0.0, best_top = 0.0;
  for (const auto& [a, v] : power) {
    best = std::max(best, v);
    if (a >= 1.75) best_top = std::max(best_top, v);
  }
  const double gap = power.back().second - power.front().second;
  detail += fmt("; gap(2 vs 0.5) %.3f", gap);
  return {best_top == best && gap >= 0.05, detail};
}

Verdict combiner_pattern() {
  const auto cfg = experiment_from_config(
      config({{"hypotheses", "h0"}, {"replicates", "200"}, {"seed", "3"}}), ExperimentKind::combiner_compare);
  const auto r = run_experiment(cfg);
  const auto t1 = [&](const char* c) { return metric(r, std::string("e-kcit(combiner=") + c + ")", "type1"); };
  const double st = t1("stable"), fi = t1("fisher"), ti = t1("tippett"), ed = t1("edgington"), pe = t1("pearson");
  const bool ok = ed > 0.09 && pe > 0.09 && st <= 0.08 && fi <= 0.08 && ti <= 0.08;
  return {ok, fmt("type1 stable %.3f fisher %.3f tippett %.3f edgington %.3f pearson %.3f mudholkar %.3f", st, fi, ti,
                  ed, pe, t1("mudholkar"))};
}

Verdict causal_discovery() {
  std::size_t oracle_fail = 0, oracle_runs = 0;
  for (std::size_t d = 2; d <= 7; ++d) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto g = gen_random_dag(d, Probability(0.3), seed);
      const oracle::DSeparation sep(g.d, g.edges);
      const CiTest test = [&](const CiQuery& q) { return sep.separated(q.x, q.y, q.z) ? 1.0 : 0.0; };
      const auto pc = pc_skeleton(d, test, Probability(0.05), d - 2);
      oracle_fail += skeleton_metrics(pc.graph, SkeletonGraph::from_dag(g)).shd != 0;
      ++oracle_runs;
    }
  }

  const auto cfg = experiment_from_config(config({{"methods", "e-kcit; rcit"}, {"seed", "4"}}), ExperimentKind::pc_bench);
  const auto graphs = run_pc_graphs(cfg);
  std::size_t wins = 0, losses = 0, failed = 0, used = 0;
  double f1_e = 0.0, f1_r = 0.0;
  for (const auto& g : graphs) {
    if (g.failed()) {
      ++failed;
      continue;
    }
    ++used;
    f1_e += g.metrics[0].f1;
    f1_r += g.metrics[1].f1;
    wins += g.metrics[0].f1 > g.metrics[1].f1;
    losses += g.metrics[0].f1 < g.metrics[1].f1;
  }
  const std::size_t n = wins + losses;
  // one-sided sign tests, ties dropped
  const double p_worse = n == 0 ? 1.0 : oracle::binomial_upper(losses, n, 0.5);
  const double p_better = n == 0 ? 1.0 : oracle::binomial_upper(wins, n, 0.5);
  const bool ok = oracle_fail == 0 && p_worse >= 0.1;
  return {ok, fmt("oracle PC SHD=0 on %zu/%zu DAGs; mean F1 e-kcit %.3f rcit %.3f over %zu graphs; "
                  "%zu failed; wins %zu losses %zu; sign test p(e-kcit worse) %.3f, p(e-kcit better) %.3f",
                  oracle_runs - oracle_fail, oracle_runs, f1_e / used, f1_r / used, used, failed, wins, losses,
                  p_worse, p_better)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> checks = {stable_numerics,  closure,        validity,
                                                        stouffer_reduction, power_convergence, table_trend,
                                                        linear_scaling,   alpha_ablation, combiner_pattern,
                                                        causal_discovery};
  std::vector<std::size_t> which;
  for (int i = 1; i < argc; ++i) {
    const long v = std::strtol(argv[i], nullptr, 10);
    if (v < 1 || v > static_cast<long>(checks.size())) {
      std::cerr << "unknown criterion '" << argv[i] << "'\n";
      return 2;
    }
    which.push_back(static_cast<std::size_t>(v));
  }
  if (which.empty()) {
    for (std::size_t i = 1; i <= checks.size(); ++i) which.push_back(i);
  }
  int failed = 0;
  for (const auto n : which) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = checks[n - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " (" << v.detail << ") ["
              << fmt("%.1f s", secs) << "]" << std::endl;
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
