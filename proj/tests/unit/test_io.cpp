#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "ecit/ecit.hpp"

using namespace ecit;

namespace {

KeyValueConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in);
}

std::string emitted(const MetricsReport& r, ReportFormat f) {
  std::ostringstream out;
  emit_report(out, r, f);
  return out.str();
}

MetricsReport sample_report() {
  MetricsReport r;
  r.set_header("seed", "3");
  r.set_header("version", kVersion);
  r.rows.push_back({"abc", "e-rcit(alpha=2,nk=400)", "type1", 0.051, 0.0031, std::nullopt});
  r.rows.push_back({"abc", "rcit", "power", 1.0 / 3.0, std::nullopt, 12.5});
  return r;
}

}  // namespace

TEST(Csv, RoundTripIsBitExact) {
  Rng rng(5);
  Matrix m(40, 3);
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng) * std::pow(10.0, static_cast<double>(i % 13) - 6);
  m(0, 0) = std::numeric_limits<double>::denorm_min();
  m(1, 1) = -0.0;
  std::ostringstream out;
  write_csv(out, {"a", "b", "c"}, m);
  std::istringstream in(out.str());
  const auto t = parse_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(t.data.rows(), 40);
  for (Eigen::Index i = 0; i < m.size(); ++i) EXPECT_EQ(std::memcmp(&t.data.data()[i], &m.data()[i], sizeof(double)), 0);
}

TEST(Csv, ParsesBomCrlfAndBlankLines) {
  std::istringstream in("\xEF\xBB\xBFx, y\r\n1,2\r\n\r\n+3 ,-4e0\r\n");
  const auto t = parse_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(t.data.rows(), 2);
  EXPECT_EQ(t.data(1, 0), 3.0);
  EXPECT_EQ(t.data(1, 1), -4.0);
}

TEST(Csv, ErrorsNameTheCell) {
  std::istringstream nan_cell("x,y\n1,2\n3,nan\n");
  try {
    parse_csv(nan_cell, "f.csv");
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("f.csv: line 3, column 2 ('y')"), std::string::npos) << msg;
  }
  std::istringstream ragged("x,y\n1,2\n3\n");
  EXPECT_THROW(parse_csv(ragged), DataError);
  std::istringstream empty("");
  EXPECT_THROW(parse_csv(empty), DataError);
  std::istringstream bad_utf8("x\n\xff\n");
  EXPECT_THROW(parse_csv(bad_utf8), DataError);
  EXPECT_THROW(load_csv("/nonexistent/file.csv"), DataError);
}

TEST(Csv, ResolveColumns) {
  std::istringstream in("x,y,z0,z1\n1,2,3,4\n");
  const auto t = parse_csv(in);
  EXPECT_EQ(resolve_columns(t, "z0,z1"), (std::vector<Eigen::Index>{2, 3}));
  EXPECT_EQ(resolve_columns(t, "1"), (std::vector<Eigen::Index>{1}));
  EXPECT_TRUE(resolve_columns(t, "").empty());
  EXPECT_THROW(resolve_columns(t, "w"), DataError);
  EXPECT_THROW(resolve_columns(t, "4"), DataError);
}

TEST(Report, CsvShape) {
  MetricsReport r;
  r.rows.push_back({"id", "kcit", "type1", 0.05, 0.01, std::nullopt});
  const auto text = emitted(r, ReportFormat::csv);
  EXPECT_EQ(text, std::string(kReportCsvHeader) + "\nid,kcit,type1,0.05,0.01,\n");
  // method labels with commas are quoted
  const auto two = emitted(sample_report(), ReportFormat::csv);
  EXPECT_NE(two.find("\"e-rcit(alpha=2,nk=400)\""), std::string::npos);
  EXPECT_THROW(emitted(MetricsReport{}, ReportFormat::csv), DataError);
}

TEST(Report, JsonRoundTripAndReemission) {
  const auto r = sample_report();
  const auto text = emitted(r, ReportFormat::json);
  const auto back = report_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back.rows, r.rows);
  EXPECT_EQ(back.header, r.header);
  EXPECT_EQ(emitted(back, ReportFormat::json), text);
  EXPECT_EQ(emitted(back, ReportFormat::csv), emitted(r, ReportFormat::csv));
  EXPECT_THROW(report_from_json(nlohmann::json::parse(R"({"rows": []})")), DataError);
}

TEST(Report, CsvAndJsonCarrySameRows) {
  const auto r = sample_report();
  std::istringstream csv(emitted(r, ReportFormat::csv));
  std::string line;
  std::getline(csv, line);
  std::size_t count = 0;
  while (std::getline(csv, line)) ++count;
  EXPECT_EQ(count, nlohmann::json::parse(emitted(r, ReportFormat::json)).at("rows").size());
}

TEST(Config, ParsesCommentsAndLists) {
  const auto kv = parse_config("# header\nseed = 4\n  gen.n = 800, 1600 # trailing\nmethods = rcit; e-rcit(alpha=2,nk=200)\n");
  EXPECT_EQ(kv.get_uint("seed", 0), 4u);
  EXPECT_EQ(kv.get_sizes("gen.n", {}), (std::vector<std::size_t>{800, 1600}));
  EXPECT_EQ(kv.get_list("methods", {}, ';'), (std::vector<std::string>{"rcit", "e-rcit(alpha=2,nk=200)"}));
  EXPECT_TRUE(kv.unused_keys().empty());
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("seed 4\n"), ConfigError);
  EXPECT_THROW(parse_config("= 4\n"), ConfigError);
  EXPECT_THROW(parse_config("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("bad key = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("seed = -1\n").get_uint("seed", 0), ConfigError);
  EXPECT_THROW(parse_config("x = yes please\n").get_bool("x", false), ConfigError);
  EXPECT_THROW(experiment_from_config(parse_config("replicats = 5\n")), ConfigError);
  EXPECT_THROW(experiment_from_config(parse_config("experiment = power\n"), ExperimentKind::type1), ConfigError);
}

TEST(Experiment, ParseMethod) {
  const auto plain = parse_method("kcit");
  EXPECT_EQ(plain.base.method, CiMethod::kcit);
  EXPECT_FALSE(plain.ensemble);
  const auto e = parse_method("e-rcit(alpha = 2, nk=400, combiner=fisher)");
  EXPECT_EQ(e.label, "e-rcit(alpha=2,nk=400,combiner=fisher)");
  ASSERT_TRUE(e.ensemble);
  EXPECT_EQ(e.ensemble->params.alpha(), 2.0);
  EXPECT_EQ(e.ensemble->subset_size, 400u);
  EXPECT_EQ(e.ensemble->combiner, CombineMethod::fisher);
  EXPECT_EQ(parse_method("e-kcit(K=4)").ensemble->subsets, 4u);
  EXPECT_EQ(parse_method("rcit(features=5,zfeatures=20)").base.rcit_features_xy, 5u);
  EXPECT_THROW(parse_method("kcit(alpha=2)"), ConfigError);
  EXPECT_THROW(parse_method("e-kcit(alpha=2"), ConfigError);
  EXPECT_THROW(parse_method("e-kcit(colour=red)"), ConfigError);
  EXPECT_THROW(parse_method("e-kcit(alpha=0)"), DomainError);
  EXPECT_THROW(parse_method("hsic"), ConfigError);
}

TEST(Experiment, DefaultsForEveryKind) {
  for (const auto k : {"type1", "power", "runtime", "alpha", "nk", "combiners", "pc"}) {
    EXPECT_NO_THROW(experiment_from_config(parse_config(""), parse_experiment_kind(k))) << k;
  }
  const auto a = experiment_from_config(parse_config("ablation.alphas = 0.5, 2\n"), ExperimentKind::alpha_ablation);
  ASSERT_EQ(a.methods.size(), 2u);
  EXPECT_EQ(a.methods[1].label, "e-kcit(alpha=2)");
}

TEST(Experiment, ReportIsReproducible) {
  const auto kv = parse_config(
      "seed = 9\nreplicates = 30\ngen.n = 300\nmethods = fisherz; rcit; e-rcit(nk=100); e-rcit(nk=100,alpha=2)\n");
  const auto cfg = experiment_from_config(kv, ExperimentKind::type1);
  const auto a = emitted(run_experiment(cfg), ReportFormat::json);
  auto threaded = cfg;
  threaded.threads = 3;
  EXPECT_EQ(emitted(run_experiment(threaded), ReportFormat::json), a);
  auto other = cfg;
  other.seed = 10;
  EXPECT_NE(emitted(run_experiment(other), ReportFormat::json), a);
}

TEST(Experiment, ConfigIdDependsOnGridPointOnly) {
  auto cfg = experiment_from_config(parse_config("replicates = 5\ngen.n = 200\nmethods = fisherz\n"),
                                    ExperimentKind::type1);
  const auto a = run_experiment(cfg);
  cfg.methods.push_back(parse_method("rcit"));
  const auto b = run_experiment(cfg);
  EXPECT_EQ(a.rows[0].config_id, b.rows[0].config_id);
  EXPECT_EQ(a.rows[0].config_id.size(), 16u);
  EXPECT_EQ(fingerprint("x"), fingerprint("x"));
  EXPECT_NE(fingerprint("x"), fingerprint("y"));
}

TEST(Experiment, Type1HasBinomialStderr) {
  const auto cfg = experiment_from_config(
      parse_config("replicates = 400\ngen.n = 400\nmethods = rcit\n"), ExperimentKind::type1);
  const auto r = run_experiment(cfg);
  const auto* row = r.find("rcit", "type1");
  ASSERT_NE(row, nullptr);
  ASSERT_TRUE(row->stderr_value);
  EXPECT_NEAR(*row->stderr_value, std::sqrt(row->value * (1 - row->value) / 400.0), 1e-15);
  EXPECT_LT(std::abs(row->value - 0.05), 4.0 * std::sqrt(0.05 * 0.95 / 400.0));
  EXPECT_FALSE(row->elapsed_ms);
  EXPECT_EQ(r.header_value("seed"), "0");
  EXPECT_EQ(r.header_value("partition_policy"), "none");
}

TEST(Experiment, RuntimeRowsAndSlope) {
  const auto cfg = experiment_from_config(
      parse_config("methods = kcit\nruntime.sizes = 200, 400, 800\nruntime.repetitions = 5\n"), ExperimentKind::runtime);
  const auto r = run_experiment(cfg);
  std::vector<double> ms;
  for (const auto& row : r.rows) {
    if (row.metric == "runtime_median_ms") ms.push_back(row.value);
  }
  ASSERT_EQ(ms.size(), 3u);
  EXPECT_LE(ms[0], ms[1]);
  EXPECT_LE(ms[1], ms[2]);
  const auto* slope = r.find("kcit", "loglog_slope");
  ASSERT_NE(slope, nullptr);
  EXPECT_GT(slope->value, 1.0);
}

// Clipped Laplace SCM columns at n = 200 make some Fisher Z conditioning blocks singular.
TEST(Experiment, PcBenchRecordsFailedGraphs) {
  const std::string text = "seed = 4\ngen.n = 200\npc.graphs = 60\nmethods = fisherz; e-fisherz(K=2)\n";
  auto cfg = experiment_from_config(parse_config(text + "max_failure_fraction = 0.99\n"), ExperimentKind::pc_bench);
  const auto graphs = run_pc_graphs(cfg);
  std::size_t failed = 0, fz_failed = 0;
  double f1 = 0.0;
  for (const auto& g : graphs) {
    fz_failed += !g.errors[0].empty();
    if (g.failed()) {
      ++failed;
    } else {
      f1 += g.metrics[0].f1;
    }
  }
  ASSERT_GT(fz_failed, 6u);
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.header_value("failed_graphs"), std::to_string(failed));
  const auto* row = r.find("fisherz", "failed_replicates");
  ASSERT_NE(row, nullptr);
  EXPECT_EQ(row->value, static_cast<double>(fz_failed));
  ASSERT_NE(r.find("fisherz", "f1"), nullptr);
  EXPECT_NEAR(r.find("fisherz", "f1")->value, f1 / static_cast<double>(graphs.size() - failed), 1e-12);

  // More than 10% of graphs failing aborts with the first error attached.
  cfg = experiment_from_config(parse_config(text), ExperimentKind::pc_bench);
  try {
    run_experiment(cfg);
    FAIL() << "expected a NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("graphs failed; first error: pc graph"), std::string::npos) << e.what();
  }
}

// Linear Gaussian data makes the Fisher Z null exact, so the true rate is 0.05.
TEST(Experiment, StderrCoversExactNullRate) {
  std::size_t covered = 0;
  for (std::uint64_t run = 0; run < 100; ++run) {
    std::vector<std::optional<double>> ps;
    std::vector<double> ms;
    for (std::uint64_t r = 0; r < 200; ++r) {
      PnlConfig c;
      c.n = 100;
      c.seed = derive_seed(run, r);
      c.f_x = Mechanism::identity;
      c.f_y = Mechanism::identity;
      c.noise = NoiseDist::gaussian();
      CITestSpec fz;
      fz.method = CiMethod::fisherz;
      ps.push_back(run_base_test(gen_pnl(c).triple(), fz).p.value());
      ms.push_back(0.0);
    }
    const auto s = summarize_rate(ps, ms, Probability(0.05));
    covered += std::abs(s.rate - 0.05) <= 2.0 * s.stderr_value;
  }
  EXPECT_GE(covered, 93u);
}

TEST(JsonIo, SkeletonAndQueries) {
  const auto g = skeleton_from_json(Json::parse(R"({"d": 4, "edges": [[0, 1], [3, 2]]})"));
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {2, 3}}));
  EXPECT_THROW(skeleton_from_json(Json::parse(R"({"d": 2, "edges": [[0, 5]]})")), DataError);
  const auto q = queries_from_json(
      Json::parse(R"([{"x": 0, "y": 2, "z": [1], "dependent": false}, {"x": 1, "y": 3, "dependent": true}])"), 4);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].query, (CiQuery{0, 2, {1}}));
  EXPECT_FALSE(q[0].dependent);
  EXPECT_TRUE(q[1].query.z.empty());
  EXPECT_THROW(queries_from_json(Json::parse(R"([{"x": 0, "y": 9}])"), 4), DataError);
  const auto j = to_json(g);
  EXPECT_EQ(skeleton_from_json(Json::parse(j.dump())).edges(), g.edges());
}
