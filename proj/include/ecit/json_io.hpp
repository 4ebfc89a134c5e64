#pragma once

// JSON views of library results and the JSON input formats (truth graphs,
// labeled query lists).

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecit/base_tests.hpp"
#include "ecit/datagen.hpp"
#include "ecit/discovery.hpp"
#include "ecit/error.hpp"

namespace ecit {

using Json = nlohmann::ordered_json;

inline Json to_json(const TestOutcome& t) {
  Json j;
  j["method"] = t.method;
  j["p"] = t.p.value();
  j["statistic"] = t.statistic;
  j["n_used"] = t.n_used;
  j["elapsed_ms"] = t.elapsed.count() * 1e3;
  j["saturated"] = t.saturated;
  if (t.permutations > 0) j["permutations"] = t.permutations;
  if (t.subtest_ps) {
    Json ps = Json::array();
    for (const double p : *t.subtest_ps) ps.push_back(p);
    j["subtest_ps"] = std::move(ps);
  }
  return j;
}

inline Json edges_to_json(const std::vector<Edge>& edges) {
  Json arr = Json::array();
  for (const auto& [i, j] : edges) arr.push_back(Json::array({i, j}));
  return arr;
}

inline Json to_json(const SkeletonGraph& g) {
  Json j;
  j["d"] = g.d();
  j["edges"] = edges_to_json(g.edges());
  Json seps = Json::array();
  for (const auto& [pair, set] : g.sepsets()) {
    seps.push_back({{"pair", Json::array({pair.first, pair.second})}, {"sepset", set}});
  }
  j["sepsets"] = std::move(seps);
  return j;
}

inline Json to_json(const SkeletonMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"shd", m.shd}};
}

inline Json to_json(const GraphSpec& g) {
  Json j;
  j["d"] = g.d;
  j["edges"] = edges_to_json(g.edges);
  j["backbone"] = edges_to_json(g.backbone);
  return j;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
}

// {"d": 5, "edges": [[0, 1], [1, 2]]}; edges are unordered for skeletons.
inline SkeletonGraph skeleton_from_json(const Json& j) {
  try {
    const auto d = j.at("d").get<std::size_t>();
    SkeletonGraph g(d);
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw DataError("edge entries must be [i, j] pairs");
      const auto a = e[0].get<std::size_t>();
      const auto b = e[1].get<std::size_t>();
      if (a >= d || b >= d || a == b) {
        throw DataError("edge [" + std::to_string(a) + ", " + std::to_string(b) + "] is invalid for d = " +
                        std::to_string(d));
      }
      g.add_edge(a, b);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed graph JSON: ") + e.what());
  }
}

// [{"x": 0, "y": 1, "z": [2, 3], "dependent": true}, ...]
inline std::vector<LabeledQuery> queries_from_json(const Json& j, std::size_t columns) {
  std::vector<LabeledQuery> out;
  try {
    if (!j.is_array()) throw DataError("query file must hold a JSON array");
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto& q = j[i];
      LabeledQuery lq;
      lq.query.x = q.at("x").get<std::size_t>();
      lq.query.y = q.at("y").get<std::size_t>();
      if (q.contains("z")) lq.query.z = q.at("z").get<std::vector<std::size_t>>();
      lq.dependent = q.at("dependent").get<bool>();
      const auto check = [&](std::size_t c) {
        if (c >= columns) {
          throw DataError("query " + std::to_string(i) + ": column " + std::to_string(c) + " out of range");
        }
      };
      check(lq.query.x);
      check(lq.query.y);
      for (const auto c : lq.query.z) check(c);
      if (lq.query.x == lq.query.y) throw DataError("query " + std::to_string(i) + ": x and y coincide");
      out.push_back(std::move(lq));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed query file: ") + e.what());
  }
  return out;
}

}  // namespace ecit
