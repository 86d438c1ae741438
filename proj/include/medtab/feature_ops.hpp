// Copyright 2026 The medtab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "medtab/code_selection.hpp"
#include "medtab/feature_schema.hpp"
#include "medtab/task_cache.hpp"

namespace medtab {

/// Per-column inclusion flags over a FeatureSchema, with a record of how
/// they were chosen.
struct ColumnMask {
  std::vector<bool> keep;
  json provenance = json::object();

  static ColumnMask all(std::size_t n_cols);
  std::size_t count() const;
  std::vector<std::uint32_t> columns() const;

  json to_json() const;
  static ColumnMask from_json(const json& j);
};

/// Columns whose window, aggregation and code all belong to the given sets.
ColumnMask mask_for_options(const FeatureSchema& schema, std::span<const WindowSpec> windows,
                            std::span<const AggKind> aggs, const std::set<std::string>& codes);

// ---------------------------------------------------------------------------
// Correlation with the label. Structurally missing entries count as 0.

/// Sufficient statistics for Pearson r; merge is associative.
struct CorrelationStats {
  std::uint64_t n = 0;
  long double sum_y = 0, sum_yy = 0;
  std::vector<long double> sum_x, sum_xx, sum_xy;

  explicit CorrelationStats(std::size_t n_cols = 0) : sum_x(n_cols), sum_xx(n_cols), sum_xy(n_cols) {}
  void add_shard(const TaskShard& shard, const RowFilter& filter);
  void merge(const CorrelationStats& other);
  std::vector<double> correlations() const;
};

/// Pearson r per column over the filtered rows, accumulated shard by shard.
/// Zero-variance columns get r = 0. Fails if the labels are all identical.
std::vector<double> column_correlations(const TaskSource& source, const RowFilter& filter = all_rows, int jobs = 1);

/// The `top_r` columns with the largest |r|; ties go to the earlier column.
/// Only columns kept by `base` compete.
ColumnMask select_top_correlated(std::span<const double> r, std::size_t top_r, const ColumnMask* base = nullptr);

/// Columns with |r| >= threshold (and kept by `base`).
ColumnMask select_min_correlation(std::span<const double> r, double threshold, const ColumnMask* base = nullptr);

// ---------------------------------------------------------------------------
// Imputation and standardization for learners without native missing
// handling. Both produce dense matrices.

enum class ImputeStrategy { Mean, Median, Mode };
ImputeStrategy parse_impute_strategy(std::string_view name);
std::string_view impute_strategy_name(ImputeStrategy s);

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Fill value per selected column from the observed entries of the filtered
/// rows. Columns with no observed entry get 0 and a warning.
std::vector<double> fit_imputer(const TaskSource& source, const RowFilter& filter, ImputeStrategy strategy,
                                std::span<const std::uint32_t> columns);

/// Dense copy of `rows` x `columns` of `m`, with missing entries set to `fill`.
DenseMatrix densify(const SparseShardMatrix& m, std::span<const std::size_t> rows,
                    std::span<const std::uint32_t> columns, std::span<const double> fill);

/// Imputes every column of `m` from its own observed entries.
DenseMatrix impute(const SparseShardMatrix& m, ImputeStrategy strategy);

/// Population mean / standard deviation per column; sigma = 0 maps to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const DenseMatrix& train);
  DenseMatrix apply(const DenseMatrix& m) const;
  void apply_row(std::span<double> row) const;
};

DenseMatrix standardize(const DenseMatrix& m, const Standardizer& train_stats);

}  // namespace medtab
