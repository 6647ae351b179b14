#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "flexknn/dataset.hpp"
#include "flexknn/errors.hpp"

namespace flexknn {

struct TabularSchema {
  std::vector<std::string> feature_columns;  // empty means "all non-label columns"
  std::string label_column = "label";
  char delimiter = ',';
};

struct LoadedTable {
  LabeledDataset data;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;  // index = label id, first-seen order
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(cell);
  for (std::string& s : out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
  }
  return out;
}

}  // namespace detail

// CSV with a header row. Label values are arbitrary strings, mapped to ids in
// first-seen order. Tiebreaks are attached from a fixed seed so that loading
// the same file always yields the same dataset.
inline LoadedTable load_csv(std::istream& in, const TabularSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyDataset("no header row");
  const std::vector<std::string> header = detail::split_line(line, schema.delimiter);

  auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw MissingColumn("column '" + name + "' not found");
  };

  const std::size_t label_col = column_of(schema.label_column);
  std::vector<std::size_t> feature_cols;
  LoadedTable out;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (i != label_col) {
        feature_cols.push_back(i);
        out.feature_names.push_back(header[i]);
      }
  } else {
    for (const std::string& name : schema.feature_columns) {
      feature_cols.push_back(column_of(name));
      out.feature_names.push_back(name);
    }
  }
  if (feature_cols.empty()) throw MissingColumn("no feature columns");

  out.data = LabeledDataset(feature_cols.size());
  std::map<std::string, int> label_ids;
  std::vector<double> row(feature_cols.size());
  long row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_line(line, schema.delimiter);
    if (cells.size() != header.size())
      throw ParseError("wrong number of cells", row_no, static_cast<long>(cells.size()));
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const std::string& cell = cells[feature_cols[f]];
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw ParseError("bad number '" + cell + "'", row_no, static_cast<long>(feature_cols[f] + 1));
      row[f] = v;
    }
    const std::string& label = cells[label_col];
    auto [it, fresh] = label_ids.emplace(label, static_cast<int>(out.label_names.size()));
    if (fresh) out.label_names.push_back(label);
    out.data.add(row, it->second);
  }
  if (out.data.empty()) throw EmptyDataset("no data rows");
  out.data.set_num_classes(static_cast<int>(out.label_names.size()));
  out.data.assign_tiebreaks(0x7ab1eu);
  return out;
}

inline LoadedTable load_csv(const std::string& path, const TabularSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_csv(in, schema);
}

inline void save_csv(std::ostream& out, const LabeledDataset& ds, const std::vector<std::string>& feature_names,
                     const std::string& label_column = "label") {
  if (feature_names.size() != ds.dim()) throw DimensionMismatch("feature name count does not match dimension");
  for (const std::string& name : feature_names) out << name << ',';
  out << label_column << '\n';
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::span<const double> row = ds.row(i);
    for (double v : row) {
      auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << ds.label(i) << '\n';
  }
}

inline void save_csv(const std::string& path, const LabeledDataset& ds,
                     const std::vector<std::string>& feature_names, const std::string& label_column = "label") {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_csv(out, ds, feature_names, label_column);
}

}  // namespace flexknn
