#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ecit/ecit.hpp"

namespace {

using namespace ecit;

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "json";
  std::size_t threads = 1;
};

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw ConfigError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

void print_json(const Globals& g, const Json& j) {
  Output out(g.out);
  out.stream() << j.dump(2) << '\n';
}

std::vector<double> read_numbers(std::istream& in, const std::string& source) {
  std::vector<double> values;
  std::string token;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (char& c : text) {
    if (c == ',' || c == ';' || c == '\t' || c == '\r' || c == '\n') c = ' ';
  }
  std::istringstream words(text);
  while (words >> token) {
    double v = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
      throw DataError(source + ": '" + token + "' is not a number");
    }
    values.push_back(v);
  }
  return values;
}

struct StableArgs {
  double alpha = 1.75;
  double beta = 0.0;
  double gamma = 1.0;
  double delta = 0.0;
  StableParams params() const { return StableParams(alpha, beta, gamma, delta); }
};

void add_stable_options(CLI::App* cmd, StableArgs& a) {
  cmd->add_option("--alpha", a.alpha, "tail index in (0, 2]")->capture_default_str();
  cmd->add_option("--beta", a.beta, "skewness in [-1, 1]")->capture_default_str();
  cmd->add_option("--gamma", a.gamma, "scale > 0")->capture_default_str();
  cmd->add_option("--delta", a.delta, "location")->capture_default_str();
}

struct DataArgs {
  std::string path;
  std::string x;
  std::string y;
  std::string z;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.path, "CSV file with a header row")->required();
  cmd->add_option("--x", a.x, "x columns (names or 0-based indices, comma separated)")->required();
  cmd->add_option("--y", a.y, "y columns")->required();
  cmd->add_option("--z", a.z, "conditioning columns (empty for none)");
}

DataTriple load_triple(const DataArgs& a) {
  const auto table = load_csv(a.path);
  return make_triple(table.data, resolve_columns(table, a.x), resolve_columns(table, a.y),
                     resolve_columns(table, a.z));
}

struct TestArgs {
  std::string method = "kcit";
  std::size_t features = 100;
  std::size_t zfeatures = 100;
  std::size_t perms = 0;
  std::optional<double> bandwidth;
  double kcit_ridge = 1e-3;
  double rcit_ridge = 1e-3;
};

void add_test_options(CLI::App* cmd, TestArgs& a) {
  cmd->add_option("--features", a.features, "RCIT features for x and y")->capture_default_str();
  cmd->add_option("--zfeatures", a.zfeatures, "RCIT features for z")->capture_default_str();
  cmd->add_option("--perms", a.perms, "permutation null with this many permutations (0: gamma null)")
      ->capture_default_str();
  cmd->add_option("--bandwidth", a.bandwidth, "fixed kernel width (default: median heuristic)");
  cmd->add_option("--kcit-ridge", a.kcit_ridge, "KCIT ridge factor (times n)")->capture_default_str();
  cmd->add_option("--rcit-ridge", a.rcit_ridge, "RCIT feature-space ridge")->capture_default_str();
}

CITestSpec make_spec(const TestArgs& a, std::uint64_t seed) {
  CITestSpec s;
  s.method = parse_ci_method(a.method);
  s.rcit_features_xy = a.features;
  s.rcit_features_z = a.zfeatures;
  s.permutations = a.perms;
  s.bandwidth = a.bandwidth;
  s.kcit_ridge_factor = a.kcit_ridge;
  s.rcit_ridge = a.rcit_ridge;
  s.seed = seed;
  s.validate();
  return s;
}

struct EnsembleArgs {
  std::optional<std::size_t> nk;
  std::optional<std::size_t> k;
  std::string partition = "shuffle";
  std::string remainder = "drop";
  std::string combiner = "stable";
  double clamp = kDefaultClampEpsilon;
  StableArgs stable;
};

void add_ensemble_options(CLI::App* cmd, EnsembleArgs& a) {
  auto* nk = cmd->add_option("--nk", a.nk, "subset size (default 400)");
  cmd->add_option("--K", a.k, "number of subsets")->excludes(nk);
  cmd->add_option("--partition", a.partition, "shuffle | sequential")->capture_default_str();
  cmd->add_option("--remainder", a.remainder, "drop | merge_last")->capture_default_str();
  cmd->add_option("--combiner", a.combiner, "stable or a classical combiner")->capture_default_str();
  cmd->add_option("--clamp", a.clamp, "p-value clamp epsilon")->capture_default_str();
  add_stable_options(cmd, a.stable);
}

EnsembleConfig make_ensemble(const EnsembleArgs& a, const Globals& g) {
  EnsembleConfig c = a.k ? EnsembleConfig::with_subsets(*a.k) : EnsembleConfig::with_subset_size(a.nk.value_or(400));
  c.params = a.stable.params();
  c.partition = parse_partition_policy(a.partition);
  c.remainder = parse_remainder_policy(a.remainder);
  c.combiner = parse_combine_method(a.combiner);
  c.clamp_epsilon = a.clamp;
  c.seed = g.seed;
  c.parallelism = g.threads;
  c.validate();
  return c;
}

std::string write_sidecar(const std::string& out, const Json& j) {
  if (out.empty() || out == "-") return {};
  const std::string path = out + ".json";
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << j.dump(2) << '\n';
  return path;
}

Mechanism parse_mechanism(const std::string& s) {
  for (const auto m : kMechanisms) {
    if (s == to_string(m)) return m;
  }
  if (s == "identity") return Mechanism::identity;
  if (s == "square") return Mechanism::square;
  if (s == "cube") return Mechanism::cube;
  throw ConfigError("unknown mechanism '" + s + "' (x, x^2, x^3, tanh, cos)");
}

int run(int argc, char** argv) {
  CLI::App app{"Ensemble conditional independence testing with stable-distribution p-value combination"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--out", g.out, "output file (default stdout)");
  app.add_option("--format", g.format, "csv | json")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", g.threads, "worker threads")->capture_default_str();

  // stable
  auto* stable = app.add_subcommand("stable", "stable distribution numerics");
  stable->require_subcommand(1);
  StableArgs sargs;
  std::vector<double> points;
  std::size_t sample_n = 10;
  auto* s_cdf = stable->add_subcommand("cdf", "distribution function at the given points");
  add_stable_options(s_cdf, sargs);
  s_cdf->add_option("x", points, "points")->required();
  auto* s_q = stable->add_subcommand("quantile", "quantiles at the given probabilities");
  add_stable_options(s_q, sargs);
  s_q->add_option("p", points, "probabilities in (0,1)")->required();
  auto* s_sample = stable->add_subcommand("sample", "random draws");
  add_stable_options(s_sample, sargs);
  s_sample->add_option("-n,--n", sample_n, "number of draws")->capture_default_str();

  // combine
  auto* comb = app.add_subcommand("combine", "combine p-values read from a file or stdin");
  std::string comb_method = "stable";
  std::string comb_file;
  StableArgs comb_stable;
  bool edgington_normal = false;
  std::optional<double> comb_clamp;
  comb->add_option("--method", comb_method, "stable, tippett, edgington, fisher, pearson, mudholkar, stouffer, liptak")
      ->capture_default_str();
  add_stable_options(comb, comb_stable);
  comb->add_flag("--edgington-normal", edgington_normal, "normal approximation for Edgington with K > 30");
  comb->add_option("--clamp", comb_clamp, "clip inputs to [eps, 1 - eps] first");
  comb->add_option("file", comb_file, "file of p-values (default stdin)");

  // cit run
  auto* cit = app.add_subcommand("cit", "single conditional independence test");
  cit->require_subcommand(1);
  auto* cit_run = cit->add_subcommand("run", "run one base test");
  DataArgs cit_data;
  TestArgs cit_test;
  cit_run->add_option("--method", cit_test.method, "fisherz | kcit | rcit")->capture_default_str();
  add_data_options(cit_run, cit_data);
  add_test_options(cit_run, cit_test);

  // ecit run
  auto* ens = app.add_subcommand("ecit", "ensemble conditional independence test");
  ens->require_subcommand(1);
  auto* ens_run = ens->add_subcommand("run", "run the ensemble test");
  DataArgs ens_data;
  TestArgs ens_test;
  EnsembleArgs ens_args;
  ens_run->add_option("--base", ens_test.method, "fisherz | kcit | rcit")->capture_default_str();
  add_data_options(ens_run, ens_data);
  add_test_options(ens_run, ens_test);
  add_ensemble_options(ens_run, ens_args);

  // gen
  auto* gen = app.add_subcommand("gen", "synthetic data");
  gen->require_subcommand(1);
  auto* gen_pnl_cmd = gen->add_subcommand("pnl", "post-nonlinear CI benchmark data (columns x, y, z0..)");
  std::string hyp = "h0", zdist = "gaussian", noise = "t:4";
  std::size_t gen_n = 400, gen_dz = 1;
  double beta_x = 1.0;
  std::string fx, fy;
  gen_pnl_cmd->add_option("--hypothesis", hyp, "h0 | h1")->capture_default_str()->check(CLI::IsMember({"h0", "h1"}));
  gen_pnl_cmd->add_option("-n,--n", gen_n, "rows")->capture_default_str();
  gen_pnl_cmd->add_option("--dz", gen_dz, "dimension of z")->capture_default_str();
  gen_pnl_cmd->add_option("--z-dist", zdist, "gaussian | laplace")->capture_default_str();
  gen_pnl_cmd->add_option("--noise", noise, "gaussian | laplace | cauchy | t:DF")->capture_default_str();
  gen_pnl_cmd->add_option("--beta-x", beta_x, "effect of x on y under h1")->capture_default_str();
  gen_pnl_cmd->add_option("--fx", fx, "pin f_x (x, x^2, x^3, tanh, cos)");
  gen_pnl_cmd->add_option("--fy", fy, "pin f_y");
  auto* gen_dag_cmd = gen->add_subcommand("dag", "random DAG and SCM data (columns X0..)");
  std::size_t dag_d = 8;
  double p_edge = 0.3;
  std::size_t dag_n = 2000;
  std::string dag_noise = "laplace";
  gen_dag_cmd->add_option("--d", dag_d, "variables")->capture_default_str();
  gen_dag_cmd->add_option("--p-edge", p_edge, "probability of each non-backbone forward edge")->capture_default_str();
  gen_dag_cmd->add_option("-n,--n", dag_n, "rows")->capture_default_str();
  gen_dag_cmd->add_option("--noise", dag_noise, "gaussian | laplace | cauchy | t:DF")->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "simulation experiments");
  bench->require_subcommand(1);
  std::string bench_config;
  std::vector<std::string> overrides;
  std::string bench_kind;
  for (const char* kind : {"type1", "power", "runtime", "alpha", "nk", "combiners", "pc"}) {
    auto* sub = bench->add_subcommand(kind, std::string("run the ") + kind + " experiment");
    sub->add_option("--config", bench_config, "flat key = value experiment file");
    sub->add_option("--set", overrides, "override one key (key=value), repeatable");
    sub->callback([&bench_kind, kind] { bench_kind = kind; });
  }

  // pc run
  auto* pc = app.add_subcommand("pc", "PC skeleton discovery");
  pc->require_subcommand(1);
  auto* pc_run = pc->add_subcommand("run", "run the skeleton phase on a CSV dataset");
  std::string pc_data, pc_test = "e-kcit", pc_truth, pc_columns, pc_queries;
  double pc_level = 0.05;
  std::optional<std::size_t> pc_max_cond;
  pc_run->add_option("--data", pc_data, "CSV file")->required();
  pc_run->add_option("--test", pc_test, "method, e.g. fisherz, kcit, e-kcit(alpha=2), rcit(features=5)")
      ->capture_default_str();
  pc_run->add_option("--alpha-level", pc_level, "significance level")->capture_default_str();
  pc_run->add_option("--max-cond", pc_max_cond, "largest conditioning set (default min(3, d - 2))");
  pc_run->add_option("--columns", pc_columns, "columns to use (default all)");
  pc_run->add_option("--truth", pc_truth, "JSON truth graph {\"d\": .., \"edges\": [[i, j], ..]}");
  pc_run->add_option("--queries", pc_queries,
                     "JSON labelled queries [{\"x\", \"y\", \"z\", \"dependent\"}]; scores the test on them "
                     "instead of running PC");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::config_error);
  }

  if (s_cdf->parsed() || s_q->parsed()) {
    const auto params = sargs.params();
    Json arr = Json::array();
    for (const double v : points) {
      if (s_cdf->parsed()) {
        arr.push_back({{"x", v}, {"cdf", stable_cdf(v, params).value()}});
      } else {
        arr.push_back({{"p", v}, {"quantile", stable_quantile(Probability(v), params)}});
      }
    }
    if (g.format == "csv") {
      Output out(g.out);
      out.stream() << (s_cdf->parsed() ? "x,cdf\n" : "p,quantile\n");
      for (const auto& row : arr) {
        const auto& first = row.begin().value();
        const auto& second = std::next(row.begin()).value();
        out.stream() << format_double(first.get<double>()) << ',' << format_double(second.get<double>()) << '\n';
      }
    } else {
      print_json(g, arr);
    }
  } else if (s_sample->parsed()) {
    const auto draws = stable_sample(sargs.params(), sample_n, g.seed);
    Output out(g.out);
    if (g.format == "csv") {
      out.stream() << "value\n";
      for (const double v : draws) out.stream() << format_double(v) << '\n';
    } else {
      out.stream() << Json(draws).dump(2) << '\n';
    }
  } else if (comb->parsed()) {
    std::vector<double> raw;
    if (comb_file.empty() || comb_file == "-") {
      raw = read_numbers(std::cin, "<stdin>");
    } else {
      std::ifstream in(comb_file);
      if (!in) throw DataError("cannot open '" + comb_file + "'");
      raw = read_numbers(in, comb_file);
    }
    const PValueVector pv = comb_clamp ? clamp_pvalues(raw, *comb_clamp) : PValueVector(raw);
    ClassicalOptions opts;
    opts.edgington_normal_approx = edgington_normal;
    const auto r = combine(parse_combine_method(comb_method), pv, comb_stable.params(), opts);
    print_json(g, Json{{"method", std::string(to_string(r.method))},
                       {"K", r.k},
                       {"statistic", r.statistic},
                       {"p", r.p_combined.value()}});
  } else if (cit_run->parsed()) {
    const auto data = load_triple(cit_data);
    print_json(g, to_json(run_base_test(data, make_spec(cit_test, g.seed))));
  } else if (ens_run->parsed()) {
    const auto data = load_triple(ens_data);
    const auto cfg = make_ensemble(ens_args, g);
    auto j = to_json(ecit::ecit(data, make_spec(ens_test, g.seed), cfg));
    j["alpha"] = cfg.params.alpha();
    j["partition"] = std::string(to_string(cfg.partition));
    j["remainder"] = std::string(to_string(cfg.remainder));
    j["seed"] = g.seed;
    print_json(g, j);
  } else if (gen_pnl_cmd->parsed()) {
    PnlConfig c;
    c.hypothesis = hyp == "h1" ? Hypothesis::h1 : Hypothesis::h0;
    c.n = gen_n;
    c.d_z = gen_dz;
    c.z_dist = parse_noise(zdist);
    c.noise = parse_noise(noise);
    c.beta_x = beta_x;
    c.seed = g.seed;
    if (!fx.empty()) c.f_x = parse_mechanism(fx);
    if (!fy.empty()) c.f_y = parse_mechanism(fy);
    const auto s = gen_pnl(c);
    Matrix all(s.x.rows(), 2 + s.z.cols());
    all << s.x, s.y, s.z;
    std::vector<std::string> header{"x", "y"};
    for (Eigen::Index j = 0; j < s.z.cols(); ++j) header.push_back("z" + std::to_string(j));
    {
      Output out(g.out);
      write_csv(out.stream(), header, all);
    }
    Json side;
    side["generator"] = "pnl";
    side["hypothesis"] = hyp;
    side["label"] = s.label();
    side["n"] = gen_n;
    side["d_z"] = gen_dz;
    side["z_dist"] = to_string(c.z_dist);
    side["noise"] = to_string(c.noise);
    side["beta_x"] = beta_x;
    side["seed"] = g.seed;
    side["f_x"] = std::string(to_string(s.f_x));
    side["f_y"] = std::string(to_string(s.f_y));
    side["w_x"] = std::vector<double>(s.w_x.data(), s.w_x.data() + s.w_x.size());
    side["w_y"] = std::vector<double>(s.w_y.data(), s.w_y.data() + s.w_y.size());
    write_sidecar(g.out, side);
  } else if (gen_dag_cmd->parsed()) {
    const auto graph = gen_random_dag(dag_d, Probability(p_edge), g.seed);
    const auto sample = simulate_scm(graph, dag_n, parse_noise(dag_noise), g.seed);
    std::vector<std::string> header;
    for (std::size_t j = 0; j < dag_d; ++j) header.push_back("X" + std::to_string(j));
    {
      Output out(g.out);
      write_csv(out.stream(), header, sample.data);
    }
    Json side = to_json(graph);
    side["generator"] = "dag";
    side["p_edge"] = p_edge;
    side["n"] = dag_n;
    side["noise"] = dag_noise;
    side["seed"] = g.seed;
    Json mech = Json::array();
    for (const auto m : sample.mechanisms) mech.push_back(std::string(to_string(m)));
    side["mechanisms"] = std::move(mech);
    side["clipped"] = sample.clipped;
    write_sidecar(g.out, side);
  } else if (!bench_kind.empty()) {
    KeyValueConfig kv = bench_config.empty() ? KeyValueConfig{} : KeyValueConfig::load(bench_config);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      kv.set(KeyValueConfig::trim(o.substr(0, eq)), KeyValueConfig::trim(o.substr(eq + 1)));
    }
    if (!kv.has("seed")) kv.set("seed", std::to_string(g.seed));
    if (!kv.has("threads")) kv.set("threads", std::to_string(g.threads));
    const auto cfg = experiment_from_config(kv, parse_experiment_kind(bench_kind));
    const auto report = run_experiment(cfg);
    const auto format = parse_report_format(g.format);
    if (g.out.empty() || g.out == "-") {
      emit_report(std::cout, report, format);
    } else {
      emit_report(g.out, report, format);
      if (format == ReportFormat::csv) {
        Json header = Json::object();
        for (const auto& [k, v] : report.header) header[k] = v;
        std::ofstream side(g.out + ".header.json");
        side << header.dump(2) << '\n';
      }
    }
  } else if (pc_run->parsed()) {
    const auto table = load_csv(pc_data);
    Matrix data = table.data;
    if (!pc_columns.empty()) data = select_columns(table.data, resolve_columns(table, pc_columns));
    const auto d = static_cast<std::size_t>(data.cols());
    if (d < 2) throw DataError("pc needs at least two columns");
    const std::size_t max_cond = pc_max_cond.value_or(std::min<std::size_t>(kDefaultMaxCond, d - 2));
    auto method = parse_method(pc_test);
    if (method.ensemble) method.ensemble->parallelism = g.threads;
    const auto test = make_data_test(data, method.base, method.ensemble, g.seed);
    if (!pc_queries.empty()) {
      const auto queries = queries_from_json(read_json_file(pc_queries), d);
      const auto m = cit_pair_benchmark(queries, test, Probability(pc_level));
      Json j;
      j["test"] = method.label;
      j["level"] = pc_level;
      j["queries"] = queries.size();
      j["precision"] = m.precision;
      j["recall"] = m.recall;
      j["f1"] = m.f1;
      j["true_positive"] = m.true_positive;
      j["false_positive"] = m.false_positive;
      j["false_negative"] = m.false_negative;
      print_json(g, j);
      return 0;
    }
    const auto result = pc_skeleton(d, test, Probability(pc_level), max_cond);
    Json j;
    j["test"] = method.label;
    j["level"] = pc_level;
    j["max_cond"] = max_cond;
    j["tests_run"] = result.transcript.size();
    j["skeleton"] = to_json(result.graph);
    if (!pc_truth.empty()) {
      const auto truth = skeleton_from_json(read_json_file(pc_truth));
      j["metrics"] = to_json(skeleton_metrics(result.graph, truth));
    }
    print_json(g, j);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ecit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ecit::ExitCode::numerical_error);
  }
}
