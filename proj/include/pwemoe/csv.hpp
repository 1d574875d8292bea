// Copyright 2026 The pwemoe Authors
// SPDX-License-Identifier: Apache-2.0
//
// CSV exports consumed by the plotting tool. Comma separated, '.' decimal
// point, header row required, every row newline terminated. Numbers are
// written in shortest round-trip form.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pwemoe/matrix.hpp"
#include "pwemoe/pareto.hpp"
#include "pwemoe/trainer.hpp"

namespace pwemoe::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string format_number(double value);

/// Throws ParseError (with a 1-based line number) on a row whose column count
/// differs from the header's.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Validates that the header equals `schema` and every row has as many columns.
void validate_schema(const CsvTable& table, std::span<const std::string> schema);

std::string to_csv_text(const CsvTable& table);
/// Validates against `schema`, then writes.
void write_csv(const std::filesystem::path& path, const CsvTable& table,
               std::span<const std::string> schema);

std::vector<std::string> front_schema(std::size_t task_count, bool with_metrics);
std::vector<std::string> routing_schema(std::size_t task_count);
std::vector<std::string> sweep_schema(std::size_t task_count);
std::vector<std::string> trainlog_schema(std::size_t task_count);
std::vector<std::string> distance_schema(std::span<const std::string> task_names);

CsvTable front_table(const pareto::SampledFront& front);
CsvTable routing_csv_table(std::span<const pareto::RoutingRow> rows, std::size_t task_count);
CsvTable trainlog_table(const train::TrainLog& log, std::size_t task_count);
CsvTable distance_table(const Matrix& distances, std::span<const std::string> task_names);

/// Reads front.csv back (metrics columns optional).
pareto::SampledFront parse_front(const CsvTable& table);

struct SweepRow {
  double lambda = 0.0;
  std::string method;
  double mean_loss = 0.0;
  std::vector<double> losses;
};
CsvTable sweep_table(std::span<const SweepRow> rows, std::size_t task_count);

/// Lambda with the smallest mean loss among rows of `method` (all rows when
/// empty); ties go to the smaller lambda. Needs at least two rows.
double select_lambda(const CsvTable& sweep, std::string_view method = {});

}  // namespace pwemoe::io
