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

#include "medtab/tabularizer.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace medtab {

namespace {

// Double-double accumulator. Window sums are differences of running
// prefixes; the extra word keeps those differences accurate when the
// prefix is much larger than the window.
struct Compensated {
  double hi = 0.0;
  double lo = 0.0;

  static Compensated two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
  }
  Compensated operator+(const Compensated& o) const {
    Compensated s = two_sum(hi, o.hi);
    const double lo_sum = s.lo + lo + o.lo;
    const double r = s.hi + lo_sum;
    return {r, lo_sum - (r - s.hi)};
  }
  Compensated operator-() const { return {-hi, -lo}; }
  Compensated operator-(const Compensated& o) const { return *this + (-o); }
  double value() const { return hi + lo; }
};

struct Group {
  std::size_t row = 0;
  std::uint64_t count = 0;
  Compensated sum;
  Compensated sum_sqd;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
};

}  // namespace

std::vector<RowKey> shard_row_index(const EventShard& shard) {
  std::vector<RowKey> rows;
  for (const auto& e : shard.events) {
    if (!e.time) continue;
    const RowKey key{e.subject_id, *e.time};
    if (rows.empty() || rows.back() != key) rows.push_back(key);
  }
  return rows;
}

std::vector<std::size_t> rolling_start_indices(std::span<const Timestamp> times, const WindowSpec& window) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] <= times[i - 1]) {
      throw InvariantError("rolling_start_indices: times must be strictly ascending (index " + std::to_string(i) + ")");
    }
  }
  std::vector<std::size_t> starts(times.size(), 0);
  if (window.is_full()) return starts;
  const Timestamp w = window.duration();
  std::size_t j = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    while (times[j] <= times[i] - w) ++j;
    starts[i] = j;
  }
  return starts;
}

std::vector<std::size_t> shard_start_indices(std::span<const RowKey> rows, const WindowSpec& window) {
  std::vector<std::size_t> starts(rows.size(), 0);
  const Timestamp w = window.is_full() ? 0 : window.duration();
  std::size_t subject_begin = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].subject_id != rows[i - 1].subject_id) {
      subject_begin = i;
      j = i;
    } else if (i > 0 && rows[i].time <= rows[i - 1].time) {
      throw InvariantError("shard row index not strictly ascending within subject " +
                           std::to_string(rows[i].subject_id));
    }
    if (window.is_full()) {
      starts[i] = subject_begin;
      continue;
    }
    while (rows[j].time <= rows[i].time - w) ++j;
    starts[i] = j;
  }
  return starts;
}

std::vector<WindowEntry> aggregate_window(std::span<const Observation> observations,
                                          std::span<const std::size_t> starts, AggKind agg) {
  if (is_static_agg(agg)) throw InvariantError("aggregate_window: static aggregation has no window");
  const bool value_agg = is_value_agg(agg);

  std::vector<Group> groups;
  for (const auto& obs : observations) {
    if (value_agg && !obs.value) continue;
    if (!groups.empty() && obs.row < groups.back().row) {
      throw InvariantError("aggregate_window: observations must be sorted by row");
    }
    if (obs.row >= starts.size()) throw InvariantError("aggregate_window: observation row out of range");
    if (groups.empty() || groups.back().row != obs.row) {
      Group fresh{};
      fresh.row = obs.row;
      groups.push_back(fresh);
    }
    Group& g = groups.back();
    ++g.count;
    if (obs.value) {
      const double v = *obs.value;
      g.sum = g.sum + Compensated{v, 0.0};
      g.sum_sqd = g.sum_sqd + Compensated::two_sum(v * v, std::fma(v, v, -(v * v)));
      g.min = std::min(g.min, v);
      g.max = std::max(g.max, v);
    }
  }
  std::vector<WindowEntry> out;
  if (groups.empty()) return out;

  const std::size_t n_groups = groups.size();
  std::vector<std::uint64_t> count_prefix(n_groups + 1, 0);
  std::vector<Compensated> sum_prefix(n_groups + 1), sqd_prefix(n_groups + 1);
  for (std::size_t k = 0; k < n_groups; ++k) {
    count_prefix[k + 1] = count_prefix[k] + groups[k].count;
    sum_prefix[k + 1] = sum_prefix[k] + groups[k].sum;
    sqd_prefix[k + 1] = sqd_prefix[k] + groups[k].sum_sqd;
  }

  const bool track_min = agg == AggKind::ValueMin;
  const bool track_max = agg == AggKind::ValueMax;
  std::deque<std::size_t> extreme;  // monotonic over group indices in [lo, hi)
  auto dominates = [&](std::size_t a, std::size_t b) {
    return track_min ? groups[a].min <= groups[b].min : groups[a].max >= groups[b].max;
  };

  const std::size_t n_rows = starts.size();
  std::size_t lo = 0, hi = 0;
  std::size_t i = groups.front().row;
  while (i < n_rows) {
    while (hi < n_groups && groups[hi].row <= i) {
      if (track_min || track_max) {
        while (!extreme.empty() && dominates(hi, extreme.back())) extreme.pop_back();
        extreme.push_back(hi);
      }
      ++hi;
    }
    while (lo < hi && groups[lo].row < starts[i]) {
      if (!extreme.empty() && extreme.front() == lo) extreme.pop_front();
      ++lo;
    }
    if (lo == hi) {
      if (hi == n_groups) break;
      i = groups[hi].row;  // nothing in any window until the next observation
      continue;
    }
    const std::uint64_t count = count_prefix[hi] - count_prefix[lo];
    double value = 0.0;
    switch (agg) {
      case AggKind::CodeCount:
      case AggKind::ValueCount: value = static_cast<double>(count); break;
      case AggKind::CodePresent: value = 1.0; break;
      case AggKind::ValueSum: value = (sum_prefix[hi] - sum_prefix[lo]).value(); break;
      case AggKind::ValueSumSqd: value = (sqd_prefix[hi] - sqd_prefix[lo]).value(); break;
      case AggKind::ValueMean: value = (sum_prefix[hi] - sum_prefix[lo]).value() / static_cast<double>(count); break;
      case AggKind::ValueMin: value = groups[extreme.front()].min; break;
      case AggKind::ValueMax: value = groups[extreme.front()].max; break;
      default: throw InvariantError("aggregate_window: unsupported aggregation");
    }
    out.push_back({i, value});
    ++i;
  }
  return out;
}

ShardIndex::ShardIndex(const EventShard& shard) {
  for (const auto& e : shard.events) {
    if (!e.time) continue;
    const RowKey key{e.subject_id, *e.time};
    if (rows_.empty() || rows_.back() != key) {
      if (!rows_.empty() && key < rows_.back()) throw InvariantError("ShardIndex: shard events are not sorted");
      rows_.push_back(key);
    }
    observations_[e.code].push_back({rows_.size() - 1, e.numeric_value});
  }
}

std::span<const Observation> ShardIndex::observations(const std::string& code) const {
  auto it = observations_.find(code);
  if (it == observations_.end()) return {};
  return it->second;
}

const std::vector<std::size_t>& ShardIndex::starts(const WindowSpec& window) const {
  std::lock_guard<std::mutex> lock(starts_mutex_);
  for (const auto& [w, s] : starts_) {
    if (w == window) return s;
  }
  starts_.emplace_back(window, shard_start_indices(rows_, window));
  return starts_.back().second;
}

SparseShardMatrix tabularize_static(const EventShard& shard, const FeatureSchema& schema) {
  const FeatureSchema static_schema = schema.static_part();
  SparseShardMatrix out;
  out.n_cols = static_schema.size();
  out.schema_hash = static_schema.hash();

  std::map<std::string, std::vector<std::pair<AggKind, std::uint32_t>>> by_code;
  for (std::size_t c = 0; c < static_schema.size(); ++c) {
    const auto& col = static_schema.columns()[c];
    by_code[col.code].emplace_back(col.agg, static_cast<std::uint32_t>(c));
  }

  const auto& events = shard.events;
  std::size_t begin = 0;
  std::vector<std::pair<std::uint32_t, float>> entries;
  std::vector<std::uint32_t> cols;
  std::vector<float> vals;
  while (begin < events.size()) {
    const std::int64_t subject = events[begin].subject_id;
    std::size_t end = begin;
    entries.clear();
    for (; end < events.size() && events[end].subject_id == subject && !events[end].time; ++end) {
      auto it = by_code.find(events[end].code);
      if (it == by_code.end()) continue;
      for (const auto& [agg, col] : it->second) {
        const bool seen = std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.first == col; });
        if (seen) continue;
        if (agg == AggKind::StaticPresent) {
          entries.emplace_back(col, 1.0f);
        } else if (events[end].numeric_value) {
          // First value in shard order wins.
          entries.emplace_back(col, static_cast<float>(*events[end].numeric_value));
        }
      }
    }
    std::sort(entries.begin(), entries.end());
    cols.clear();
    vals.clear();
    for (const auto& [c, v] : entries) {
      cols.push_back(c);
      vals.push_back(v);
    }
    for (; end < events.size() && events[end].subject_id == subject; ++end) {
      const RowKey key{subject, *events[end].time};
      if (!out.rows.empty() && out.rows.back() == key) continue;
      out.push_row(key, cols, vals);
    }
    begin = end;
  }
  return out;
}

SparseShardMatrix tabularize_block(const ShardIndex& index, const FeatureBlock& block, const std::string& schema_hash) {
  const auto& rows = index.rows();
  const auto& starts = index.starts(block.window);
  std::vector<std::vector<WindowEntry>> per_code(block.codes.size());
  std::vector<std::uint64_t> row_counts(rows.size() + 1, 0);
  for (std::size_t c = 0; c < block.codes.size(); ++c) {
    per_code[c] = aggregate_window(index.observations(block.codes[c]), starts, block.agg);
    for (const auto& e : per_code[c]) ++row_counts[e.row + 1];
  }
  SparseShardMatrix out;
  out.n_cols = block.codes.size();
  out.schema_hash = schema_hash;
  out.rows = rows;
  out.indptr.assign(rows.size() + 1, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) out.indptr[r + 1] = out.indptr[r] + row_counts[r + 1];
  out.indices.resize(out.indptr.back());
  out.data.resize(out.indptr.back());
  std::vector<std::uint64_t> cursor(out.indptr.begin(), out.indptr.end() - 1);
  // Columns are visited in increasing order, so each row fills ascending.
  for (std::size_t c = 0; c < per_code.size(); ++c) {
    for (const auto& e : per_code[c]) {
      const std::uint64_t k = cursor[e.row]++;
      out.indices[k] = static_cast<std::uint32_t>(c);
      out.data[k] = static_cast<float>(e.value);
    }
  }
  return out;
}

TimeSeriesOutput tabularize_time_series(const EventShard& shard, const FeatureSchema& schema,
                                        const SparseShardMatrix* static_block, int jobs) {
  if (schema.size() >= (std::uint64_t{1} << 32)) {
    throw DataError("schema has " + std::to_string(schema.size()) + " columns; column indices are 32-bit");
  }
  const ShardIndex index(shard);
  TimeSeriesOutput out;
  out.blocks.resize(schema.blocks().size());
  parallel_for(out.blocks.size(), jobs,
               [&](std::size_t b) { out.blocks[b] = tabularize_block(index, schema.blocks()[b], schema.hash()); });

  SparseShardMatrix computed_static;
  if (static_block == nullptr) {
    computed_static = tabularize_static(shard, schema);
    static_block = &computed_static;
  } else {
    if (static_block->schema_hash != schema.static_part().hash()) {
      throw DataError("static matrix was built for a different schema (stale static tabularization)");
    }
    if (static_block->rows != index.rows()) throw DataError("static matrix rows do not match the shard");
  }
  std::vector<const SparseShardMatrix*> parts{static_block};
  for (const auto& b : out.blocks) parts.push_back(&b);
  out.assembled = hstack(parts, schema.hash());
  return out;
}

}  // namespace medtab
