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

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "medtab/event_store.hpp"
#include "medtab/feature_schema.hpp"
#include "medtab/sparse_matrix.hpp"

namespace medtab {

/// Unique (subject, time) pairs of the shard's timed events, in shard order.
std::vector<RowKey> shard_row_index(const EventShard& shard);

/// For each row i, the smallest j with times[j] > times[i] - w, i.e. the
/// first row inside the window (t_i - w, t_i]. Full windows start at 0.
/// `times` must be strictly ascending.
std::vector<std::size_t> rolling_start_indices(std::span<const Timestamp> times, const WindowSpec& window);

/// Start indices over a whole shard's row index. Windows never reach back
/// past the first row of the row's subject.
std::vector<std::size_t> shard_start_indices(std::span<const RowKey> rows, const WindowSpec& window);

/// One observation of a code, attached to the row at its event time.
struct Observation {
  std::size_t row = 0;
  std::optional<double> value;
};

struct WindowEntry {
  std::size_t row = 0;
  double value = 0.0;

  bool operator==(const WindowEntry&) const = default;
};

/// Aggregates one code's observations (sorted by row) over the windows
/// described by `starts`. Only rows with at least one contributing
/// observation get an entry; value aggregations ignore observations without
/// a value.
std::vector<WindowEntry> aggregate_window(std::span<const Observation> observations,
                                          std::span<const std::size_t> starts, AggKind agg);

/// Per-shard lookup structure shared by all blocks of one shard.
class ShardIndex {
 public:
  explicit ShardIndex(const EventShard& shard);

  const std::vector<RowKey>& rows() const { return rows_; }
  std::span<const Observation> observations(const std::string& code) const;
  const std::vector<std::size_t>& starts(const WindowSpec& window) const;

 private:
  std::vector<RowKey> rows_;
  std::map<std::string, std::vector<Observation>> observations_;
  mutable std::mutex starts_mutex_;
  mutable std::vector<std::pair<WindowSpec, std::vector<std::size_t>>> starts_;
};

/// Static block: n_cols = schema.static_width(), hashed with the static part
/// of the schema. Each subject's static features are repeated on every row.
SparseShardMatrix tabularize_static(const EventShard& shard, const FeatureSchema& schema);

/// One (window, agg) block; n_cols = block.codes.size().
SparseShardMatrix tabularize_block(const ShardIndex& index, const FeatureBlock& block, const std::string& schema_hash);

struct TimeSeriesOutput {
  std::vector<SparseShardMatrix> blocks;  // schema.blocks() order
  SparseShardMatrix assembled;            // static + all blocks, full schema width
};

/// Tabularizes every time-series block of the schema (in parallel across
/// blocks) and assembles the full matrix. When `static_block` is null the
/// static columns are computed here.
TimeSeriesOutput tabularize_time_series(const EventShard& shard, const FeatureSchema& schema,
                                        const SparseShardMatrix* static_block = nullptr, int jobs = 1);

}  // namespace medtab
