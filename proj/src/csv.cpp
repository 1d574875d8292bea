// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pwemoe/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pwemoe/error.hpp"

namespace pwemoe::io {

namespace {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, long line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ParseError("line " + std::to_string(line) + ": '" + s + "' is not a number", line);
  return v;
}

std::size_t column(const CsvTable& t, std::string_view name) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return i;
  throw ParseError("missing column '" + std::string(name) + "'", 1);
}

void append_indexed(std::vector<std::string>& out, std::string_view prefix, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(prefix) + std::to_string(i));
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(table.header.size()) + " columns, found " +
                           std::to_string(cells.size()),
                       line_no);
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw ParseError("missing header row", 1);
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_csv(os.str());
}

void validate_schema(const CsvTable& table, std::span<const std::string> schema) {
  if (!std::equal(table.header.begin(), table.header.end(), schema.begin(), schema.end()))
    throw ParseError("CSV header does not match its declared schema", 1);
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    if (table.rows[i].size() != schema.size())
      throw ParseError("CSV row width does not match its schema", static_cast<long>(i) + 2);
}

std::string to_csv_text(const CsvTable& table) {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table,
               std::span<const std::string> schema) {
  validate_schema(table, schema);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write '" + path.string() + "'");
  out << to_csv_text(table);
  if (!out) throw FileError("failed writing '" + path.string() + "'");
}

std::vector<std::string> front_schema(std::size_t task_count, bool with_metrics) {
  std::vector<std::string> h;
  append_indexed(h, "pref_", task_count);
  append_indexed(h, "loss_", task_count);
  if (with_metrics) append_indexed(h, "metric_", task_count);
  return h;
}

std::vector<std::string> routing_schema(std::size_t task_count) {
  std::vector<std::string> h{"layer", "expert", "pref_id"};
  append_indexed(h, "pref_", task_count);
  h.push_back("weight");
  return h;
}

std::vector<std::string> sweep_schema(std::size_t task_count) {
  std::vector<std::string> h{"lambda", "method", "mean_loss"};
  append_indexed(h, "loss_", task_count);
  return h;
}

std::vector<std::string> trainlog_schema(std::size_t task_count) {
  std::vector<std::string> h{"step"};
  append_indexed(h, "r_", task_count);
  append_indexed(h, "loss_", task_count);
  h.push_back("aggregate");
  h.push_back("non_uniformity");
  return h;
}

std::vector<std::string> distance_schema(std::span<const std::string> task_names) {
  std::vector<std::string> h{"task"};
  h.insert(h.end(), task_names.begin(), task_names.end());
  return h;
}

CsvTable front_table(const pareto::SampledFront& front) {
  const std::size_t T = front.task_count;
  bool with_metrics = !front.points.empty();
  for (const auto& p : front.points) with_metrics = with_metrics && p.metrics.size() == T;
  CsvTable t{front_schema(T, with_metrics), {}};
  for (const auto& p : front.points) {
    std::vector<std::string> row;
    for (std::size_t i = 0; i < T; ++i)
      row.push_back(p.preference ? format_number((*p.preference)[i]) : std::string("nan"));
    for (double l : p.losses) row.push_back(format_number(l));
    if (with_metrics)
      for (double m : p.metrics) row.push_back(format_number(m));
    t.rows.push_back(std::move(row));
  }
  return t;
}

pareto::SampledFront parse_front(const CsvTable& table) {
  std::size_t T = 0;
  for (const auto& h : table.header) T += h.rfind("loss_", 0) == 0 ? 1 : 0;
  const bool with_metrics = table.header.size() == 3 * T;
  validate_schema(table, front_schema(T, with_metrics));
  pareto::SampledFront front;
  front.task_count = T;
  long line = 1;
  for (const auto& row : table.rows) {
    ++line;
    pareto::FrontPoint p;
    Preference r;
    bool has_pref = true;
    for (std::size_t i = 0; i < T; ++i) {
      if (row[i] == "nan") has_pref = false;
      else r.push_back(parse_double(row[i], line));
    }
    if (has_pref) p.preference = r;
    for (std::size_t i = 0; i < T; ++i) p.losses.push_back(parse_double(row[T + i], line));
    if (with_metrics)
      for (std::size_t i = 0; i < T; ++i) p.metrics.push_back(parse_double(row[2 * T + i], line));
    front.points.push_back(std::move(p));
  }
  return front;
}

CsvTable routing_csv_table(std::span<const pareto::RoutingRow> rows, std::size_t task_count) {
  CsvTable t{routing_schema(task_count), {}};
  for (const auto& r : rows) {
    std::vector<std::string> row{r.layer, std::to_string(r.expert), std::to_string(r.preference_id)};
    for (double v : r.preference) row.push_back(format_number(v));
    row.push_back(format_number(r.weight));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable trainlog_table(const train::TrainLog& log, std::size_t task_count) {
  CsvTable t{trainlog_schema(task_count), {}};
  for (const auto& rec : log.records) {
    std::vector<std::string> row{std::to_string(rec.step)};
    for (double v : rec.r) row.push_back(format_number(v));
    for (double v : rec.losses) row.push_back(format_number(v));
    row.push_back(format_number(rec.aggregate));
    row.push_back(format_number(rec.non_uniformity));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable distance_table(const Matrix& distances, std::span<const std::string> task_names) {
  if (distances.rows() != task_names.size() || distances.cols() != task_names.size())
    throw ShapeError("distance matrix does not match task names");
  CsvTable t{distance_schema(task_names), {}};
  for (std::size_t i = 0; i < distances.rows(); ++i) {
    std::vector<std::string> row{task_names[i]};
    for (std::size_t j = 0; j < distances.cols(); ++j) row.push_back(format_number(distances(i, j)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable sweep_table(std::span<const SweepRow> rows, std::size_t task_count) {
  CsvTable t{sweep_schema(task_count), {}};
  for (const auto& r : rows) {
    std::vector<std::string> row{format_number(r.lambda), r.method, format_number(r.mean_loss)};
    for (double l : r.losses) row.push_back(format_number(l));
    t.rows.push_back(std::move(row));
  }
  return t;
}

double select_lambda(const CsvTable& sweep, std::string_view method) {
  const std::size_t lambda_col = column(sweep, "lambda");
  const std::size_t method_col = column(sweep, "method");
  const std::size_t loss_col = column(sweep, "mean_loss");
  std::size_t count = 0;
  double best_lambda = 0.0;
  double best_loss = 0.0;
  long line = 1;
  for (const auto& row : sweep.rows) {
    ++line;
    if (!method.empty() && row[method_col] != method) continue;
    const double lambda = parse_double(row[lambda_col], line);
    const double loss = parse_double(row[loss_col], line);
    if (count == 0 || loss < best_loss || (loss == best_loss && lambda < best_lambda)) {
      best_lambda = lambda;
      best_loss = loss;
    }
    ++count;
  }
  if (count < 2) throw ParseError("sweep needs at least two lambda rows", line);
  return best_lambda;
}

}  // namespace pwemoe::io
