#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ecit/data.hpp"
#include "ecit/error.hpp"

namespace ecit {

struct CsvTable {
  std::vector<std::string> header;
  Matrix data;

  Eigen::Index column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<Eigen::Index>(j);
    }
    throw DataError("missing column '" + std::string(name) + "'");
  }
};

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (c < 0x80) len = 1;
    else if ((c >> 5) == 0x6) len = 2;
    else if ((c >> 4) == 0xe) len = 3;
    else if ((c >> 3) == 0x1e) len = 4;
    else return false;
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += len;
  }
  return true;
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

// Header row plus numeric, comma-separated rows. Every cell must parse as a
// finite number; errors name the 1-based line and the column.
inline CsvTable parse_csv(std::istream& in, const std::string& source = "<input>") {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!detail::valid_utf8(line)) {
      throw DataError(source + ": line " + std::to_string(line_no) + " is not valid UTF-8");
    }
    if (line.empty()) continue;
    auto fields = detail::split_fields(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError(source + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string& f = fields[j];
      double v = 0.0;
      const char* first = f.data();
      if (!f.empty() && f.front() == '+') ++first;
      const auto res = std::from_chars(first, f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw DataError(source + ": line " + std::to_string(line_no) + ", column " +
                        std::to_string(j + 1) + " ('" + table.header[j] + "'): '" + f +
                        "' is not a finite number");
      }
      row[j] = v;
    }
    rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw DataError(source + ": empty file");
  table.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

inline CsvTable load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

// Column list "a,b" by header name or zero-based index; "" means none.
inline std::vector<Eigen::Index> resolve_columns(const CsvTable& table, std::string_view spec) {
  std::vector<Eigen::Index> out;
  if (spec.empty()) return out;
  for (const auto& token : detail::split_fields(spec)) {
    if (token.empty()) throw DataError("empty column name in '" + std::string(spec) + "'");
    bool found = false;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (table.header[j] == token) {
        out.push_back(static_cast<Eigen::Index>(j));
        found = true;
        break;
      }
    }
    if (found) continue;
    std::size_t idx = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), idx);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size() || idx >= table.header.size()) {
      throw DataError("missing column '" + token + "'");
    }
    out.push_back(static_cast<Eigen::Index>(idx));
  }
  return out;
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) out << (j ? "," : "") << format_double(data(i, j));
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_csv(out, header, data);
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

}  // namespace ecit
