#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ecit/csv.hpp"
#include "ecit/error.hpp"

namespace ecit {

#ifndef ECIT_VERSION
#define ECIT_VERSION "0.0.0"
#endif

inline constexpr const char* kVersion = ECIT_VERSION;

struct MetricRow {
  std::string config_id;
  std::string method;
  std::string metric;
  double value = 0.0;
  std::optional<double> stderr_value;
  std::optional<double> elapsed_ms;

  bool operator==(const MetricRow&) const = default;
};

// Rows plus a reproducibility header of ordered key/value pairs (seed,
// version, partition policy, ...).
struct MetricsReport {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<MetricRow> rows;

  void set_header(const std::string& key, const std::string& value) {
    for (auto& [k, v] : header) {
      if (k == key) {
        v = value;
        return;
      }
    }
    header.emplace_back(key, value);
  }
  std::optional<std::string> header_value(const std::string& key) const {
    for (const auto& [k, v] : header) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
  const MetricRow* find(const std::string& method, const std::string& metric,
                        const std::string& config_id = {}) const {
    for (const auto& r : rows) {
      if (r.method == method && r.metric == metric && (config_id.empty() || r.config_id == config_id)) {
        return &r;
      }
    }
    return nullptr;
  }
};

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw ConfigError("unknown format '" + std::string(s) + "' (csv or json)");
}

inline constexpr const char* kReportCsvHeader = "config_id,method,metric,value,stderr,elapsed_ms";

namespace detail {
inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}
inline std::string optional_number(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}
}  // namespace detail

// Header lines are not part of the CSV body; the reproducibility header goes
// to the JSON form (and to a sidecar when the CLI writes CSV).
inline void emit_csv(std::ostream& out, const MetricsReport& report) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : report.rows) {
    out << detail::csv_cell(r.config_id) << ',' << detail::csv_cell(r.method) << ','
        << detail::csv_cell(r.metric) << ',' << format_double(r.value) << ','
        << detail::optional_number(r.stderr_value) << ',' << detail::optional_number(r.elapsed_ms)
        << '\n';
  }
}

inline nlohmann::ordered_json report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.header) header[k] = v;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["config_id"] = r.config_id;
    row["method"] = r.method;
    row["metric"] = r.metric;
    row["value"] = r.value;
    row["stderr"] = r.stderr_value ? nlohmann::ordered_json(*r.stderr_value) : nlohmann::ordered_json();
    row["elapsed_ms"] = r.elapsed_ms ? nlohmann::ordered_json(*r.elapsed_ms) : nlohmann::ordered_json();
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json doc;
  doc["header"] = std::move(header);
  doc["rows"] = std::move(rows);
  return doc;
}

inline void emit_json(std::ostream& out, const MetricsReport& report) {
  out << report_to_json(report).dump(2) << '\n';
}

inline MetricsReport report_from_json(const nlohmann::json& doc) {
  MetricsReport report;
  try {
    for (const auto& [k, v] : doc.at("header").items()) report.header.emplace_back(k, v.get<std::string>());
    for (const auto& row : doc.at("rows")) {
      MetricRow r;
      r.config_id = row.at("config_id").get<std::string>();
      r.method = row.at("method").get<std::string>();
      r.metric = row.at("metric").get<std::string>();
      r.value = row.at("value").get<double>();
      if (!row.at("stderr").is_null()) r.stderr_value = row.at("stderr").get<double>();
      if (!row.at("elapsed_ms").is_null()) r.elapsed_ms = row.at("elapsed_ms").get<double>();
      report.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
  return report;
}

inline void emit_report(std::ostream& out, const MetricsReport& report, ReportFormat format) {
  if (report.rows.empty()) throw DataError("refusing to emit an empty report");
  if (format == ReportFormat::csv) {
    emit_csv(out, report);
  } else {
    emit_json(out, report);
  }
}

inline void emit_report(const std::string& path, const MetricsReport& report, ReportFormat format) {
  std::ostringstream buffer;
  emit_report(buffer, report, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write report to '" + path + "'");
  out << buffer.str();
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

}  // namespace ecit
