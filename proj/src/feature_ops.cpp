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

#include "medtab/feature_ops.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace medtab {

ColumnMask ColumnMask::all(std::size_t n_cols) {
  ColumnMask m;
  m.keep.assign(n_cols, true);
  m.provenance = json{{"criterion", "all"}};
  return m;
}

std::size_t ColumnMask::count() const { return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true)); }

std::vector<std::uint32_t> ColumnMask::columns() const {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

json ColumnMask::to_json() const {
  json p = provenance;
  p.erase("config_hash");
  json j{{"n_cols", keep.size()}, {"columns", columns()}, {"provenance", provenance}};
  j["provenance"]["config_hash"] = canonical_hash(p);
  return j;
}

ColumnMask ColumnMask::from_json(const json& j) {
  ColumnMask m;
  m.keep.assign(j.at("n_cols").get<std::size_t>(), false);
  for (const auto& c : j.at("columns")) m.keep.at(c.get<std::size_t>()) = true;
  m.provenance = j.value("provenance", json::object());
  return m;
}

ColumnMask mask_for_options(const FeatureSchema& schema, std::span<const WindowSpec> windows,
                            std::span<const AggKind> aggs, const std::set<std::string>& codes) {
  ColumnMask m;
  m.keep.assign(schema.size(), false);
  json w = json::array(), a = json::array();
  for (const auto& win : windows) w.push_back(win.name());
  for (auto agg : aggs) a.push_back(std::string(agg_name(agg)));
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& c = schema.columns()[i];
    const bool window_ok =
        !c.window || std::any_of(windows.begin(), windows.end(), [&](const WindowSpec& x) { return x == *c.window; });
    const bool agg_ok = std::find(aggs.begin(), aggs.end(), c.agg) != aggs.end();
    m.keep[i] = window_ok && agg_ok && codes.contains(c.code);
  }
  m.provenance = json{{"criterion", "options"}, {"windows", w}, {"aggs", a}, {"n_codes", codes.size()}};
  return m;
}

// ---------------------------------------------------------------------------

void CorrelationStats::add_shard(const TaskShard& shard, const RowFilter& filter) {
  for (std::size_t r = 0; r < shard.n_rows(); ++r) {
    if (!filter(shard.alignment[r].subject_id)) continue;
    const long double y = shard.y[r];
    ++n;
    sum_y += y;
    sum_yy += y * y;
    auto cols = shard.x.row_indices(r);
    auto vals = shard.x.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const long double x = vals[k];
      sum_x[cols[k]] += x;
      sum_xx[cols[k]] += x * x;
      sum_xy[cols[k]] += x * y;
    }
  }
}

void CorrelationStats::merge(const CorrelationStats& other) {
  MEDTAB_CHECK(other.sum_x.size() == sum_x.size(), "correlation stats width mismatch");
  n += other.n;
  sum_y += other.sum_y;
  sum_yy += other.sum_yy;
  for (std::size_t c = 0; c < sum_x.size(); ++c) {
    sum_x[c] += other.sum_x[c];
    sum_xx[c] += other.sum_xx[c];
    sum_xy[c] += other.sum_xy[c];
  }
}

std::vector<double> CorrelationStats::correlations() const {
  if (n < 2) throw DataError("correlation needs at least 2 task rows, found " + std::to_string(n));
  const long double nn = static_cast<long double>(n);
  const long double var_y = nn * sum_yy - sum_y * sum_y;
  if (var_y <= 0) throw DataError("all labels are identical; correlation with the label is undefined");
  std::vector<double> r(sum_x.size(), 0.0);
  for (std::size_t c = 0; c < sum_x.size(); ++c) {
    const long double var_x = nn * sum_xx[c] - sum_x[c] * sum_x[c];
    if (var_x <= 1e-12L * nn * sum_xx[c] || var_x <= 0) continue;
    const long double cov = nn * sum_xy[c] - sum_x[c] * sum_y;
    r[c] = static_cast<double>(cov / std::sqrt(var_x * var_y));
  }
  return r;
}

std::vector<double> column_correlations(const TaskSource& source, const RowFilter& filter, int jobs) {
  std::vector<CorrelationStats> partial(source.shard_count(), CorrelationStats(source.n_cols()));
  parallel_for(source.shard_count(), jobs, [&](std::size_t s) { partial[s].add_shard(*source.shard(s), filter); });
  CorrelationStats total(source.n_cols());
  for (const auto& p : partial) total.merge(p);
  return total.correlations();
}

ColumnMask select_top_correlated(std::span<const double> r, std::size_t top_r, const ColumnMask* base) {
  if (top_r == 0) throw UserError("max_by_correlation must be positive");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!base || base->keep.at(i)) candidates.push_back(i);
  }
  if (top_r > candidates.size()) {
    log_warn("max_by_correlation exceeds the number of columns; keeping all",
             {{"requested", top_r}, {"available", candidates.size()}});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return std::fabs(r[a]) > std::fabs(r[b]); });
  ColumnMask m;
  m.keep.assign(r.size(), false);
  for (std::size_t i = 0; i < candidates.size() && i < top_r; ++i) m.keep[candidates[i]] = true;
  m.provenance = json{{"criterion", "max_by_correlation"}, {"top_r", top_r}};
  if (base) m.provenance["base"] = base->provenance;
  return m;
}

ColumnMask select_min_correlation(std::span<const double> r, double threshold, const ColumnMask* base) {
  if (threshold < 0) throw UserError("min_correlation must be non-negative");
  ColumnMask m;
  m.keep.assign(r.size(), false);
  for (std::size_t i = 0; i < r.size(); ++i) {
    m.keep[i] = (!base || base->keep.at(i)) && std::fabs(r[i]) >= threshold;
  }
  m.provenance = json{{"criterion", "min_correlation"}, {"threshold", threshold}};
  if (base) m.provenance["base"] = base->provenance;
  return m;
}

// ---------------------------------------------------------------------------

ImputeStrategy parse_impute_strategy(std::string_view name) {
  if (name == "mean" || name == "mean_imputer") return ImputeStrategy::Mean;
  if (name == "median" || name == "median_imputer") return ImputeStrategy::Median;
  if (name == "mode" || name == "mode_imputer") return ImputeStrategy::Mode;
  throw UserError("unknown imputation strategy '" + std::string(name) + "'");
}

std::string_view impute_strategy_name(ImputeStrategy s) {
  switch (s) {
    case ImputeStrategy::Mean: return "mean";
    case ImputeStrategy::Median: return "median";
    case ImputeStrategy::Mode: return "mode";
  }
  return "?";
}

namespace {

double column_statistic(std::vector<double>& observed, ImputeStrategy strategy) {
  switch (strategy) {
    case ImputeStrategy::Mean: {
      long double sum = 0;
      for (double v : observed) sum += v;
      return static_cast<double>(sum / static_cast<long double>(observed.size()));
    }
    case ImputeStrategy::Median: {
      std::sort(observed.begin(), observed.end());
      const std::size_t n = observed.size();
      return n % 2 == 1 ? observed[n / 2] : 0.5 * (observed[n / 2 - 1] + observed[n / 2]);
    }
    case ImputeStrategy::Mode: {
      // Most frequent value; the smallest such value on ties.
      std::sort(observed.begin(), observed.end());
      double best = observed.front();
      std::size_t best_count = 0;
      for (std::size_t i = 0; i < observed.size();) {
        std::size_t j = i;
        while (j < observed.size() && observed[j] == observed[i]) ++j;
        if (j - i > best_count) {
          best_count = j - i;
          best = observed[i];
        }
        i = j;
      }
      return best;
    }
  }
  return 0.0;
}

std::vector<double> statistics_from_observed(std::vector<std::vector<double>>& observed, ImputeStrategy strategy,
                                             std::span<const std::uint32_t> columns) {
  std::vector<double> fill(observed.size(), 0.0);
  std::size_t empty = 0;
  for (std::size_t j = 0; j < observed.size(); ++j) {
    if (observed[j].empty()) {
      ++empty;
      continue;
    }
    fill[j] = column_statistic(observed[j], strategy);
  }
  if (empty > 0) {
    log_warn("columns with no observed entries imputed with 0", {{"columns", empty}, {"total", columns.size()}});
  }
  return fill;
}

std::vector<std::int64_t> local_column_map(std::uint64_t n_cols, std::span<const std::uint32_t> columns) {
  std::vector<std::int64_t> local(n_cols, -1);
  for (std::size_t j = 0; j < columns.size(); ++j) local.at(columns[j]) = static_cast<std::int64_t>(j);
  return local;
}

}  // namespace

std::vector<double> fit_imputer(const TaskSource& source, const RowFilter& filter, ImputeStrategy strategy,
                                std::span<const std::uint32_t> columns) {
  const auto local = local_column_map(source.n_cols(), columns);
  std::vector<std::vector<double>> observed(columns.size());
  for (std::size_t s = 0; s < source.shard_count(); ++s) {
    const auto shard = source.shard(s);
    for (std::size_t r = 0; r < shard->n_rows(); ++r) {
      if (!filter(shard->alignment[r].subject_id)) continue;
      auto cols = shard->x.row_indices(r);
      auto vals = shard->x.row_values(r);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (local[cols[k]] >= 0) observed[static_cast<std::size_t>(local[cols[k]])].push_back(vals[k]);
      }
    }
  }
  return statistics_from_observed(observed, strategy, columns);
}

DenseMatrix densify(const SparseShardMatrix& m, std::span<const std::size_t> rows,
                    std::span<const std::uint32_t> columns, std::span<const double> fill) {
  MEDTAB_CHECK(fill.size() == columns.size(), "one fill value per column");
  const auto local = local_column_map(m.n_cols, columns);
  DenseMatrix out(rows.size(), columns.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(fill.begin(), fill.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * out.cols));
    auto cols = m.row_indices(rows[i]);
    auto vals = m.row_values(rows[i]);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (local[cols[k]] >= 0) out.at(i, static_cast<std::size_t>(local[cols[k]])) = vals[k];
    }
  }
  return out;
}

DenseMatrix impute(const SparseShardMatrix& m, ImputeStrategy strategy) {
  std::vector<std::uint32_t> columns(m.n_cols);
  std::iota(columns.begin(), columns.end(), 0u);
  std::vector<std::vector<double>> observed(m.n_cols);
  for (std::size_t k = 0; k < m.nnz(); ++k) observed[m.indices[k]].push_back(m.data[k]);
  const auto fill = statistics_from_observed(observed, strategy, columns);
  std::vector<std::size_t> rows(m.n_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  log_info("imputation densifies the matrix", {{"rows", m.n_rows()}, {"cols", m.n_cols}, {"nnz", m.nnz()}});
  return densify(m, rows, columns, fill);
}

Standardizer Standardizer::fit(const DenseMatrix& train) {
  Standardizer s;
  s.mean.assign(train.cols, 0.0);
  s.stddev.assign(train.cols, 0.0);
  if (train.rows == 0) return s;
  for (std::size_t c = 0; c < train.cols; ++c) {
    long double sum = 0;
    for (std::size_t r = 0; r < train.rows; ++r) sum += train.at(r, c);
    const long double mu = sum / static_cast<long double>(train.rows);
    long double ss = 0;
    for (std::size_t r = 0; r < train.rows; ++r) {
      const long double d = train.at(r, c) - mu;
      ss += d * d;
    }
    s.mean[c] = static_cast<double>(mu);
    s.stddev[c] = static_cast<double>(std::sqrt(ss / static_cast<long double>(train.rows)));
  }
  return s;
}

void Standardizer::apply_row(std::span<double> row) const {
  for (std::size_t c = 0; c < row.size(); ++c) {
    row[c] = stddev[c] > 0.0 ? (row[c] - mean[c]) / stddev[c] : 0.0;
  }
}

DenseMatrix Standardizer::apply(const DenseMatrix& m) const {
  MEDTAB_CHECK(m.cols == mean.size(), "standardizer width mismatch");
  DenseMatrix out = m;
  for (std::size_t r = 0; r < out.rows; ++r) apply_row({out.values.data() + r * out.cols, out.cols});
  return out;
}

DenseMatrix standardize(const DenseMatrix& m, const Standardizer& train_stats) { return train_stats.apply(m); }

}  // namespace medtab
