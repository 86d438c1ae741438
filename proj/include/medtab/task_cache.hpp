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

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "medtab/event_store.hpp"
#include "medtab/labels.hpp"
#include "medtab/sparse_matrix.hpp"

namespace medtab {

enum class AlignMode {
  StrictBefore,  // event_time < prediction_time
  AtOrBefore,    // event_time <= prediction_time
};

std::string_view align_mode_name(AlignMode mode);

/// Source of one task row.
struct Alignment {
  std::size_t row = 0;  // row in the shard's tabularized matrix
  std::int64_t subject_id = 0;
  Timestamp event_time = 0;
  Timestamp prediction_time = 0;
  bool label = false;

  bool operator==(const Alignment&) const = default;
};

struct DroppedLabel {
  LabelRecord label;
  std::string reason;
};

struct AlignmentResult {
  std::vector<Alignment> aligned;  // in label order
  std::vector<DroppedLabel> dropped;
};

inline constexpr const char* kDropNoPriorRow = "no qualifying event row before prediction_time";
inline constexpr const char* kDropUnknownSubject = "subject has no event rows in this shard";

/// Maps each label to the latest row of its subject whose time satisfies
/// `mode` relative to the prediction time. `rows` must be in shard order.
AlignmentResult align_labels(std::span<const LabelRecord> labels, std::span<const RowKey> rows, AlignMode mode);

/// Label-aligned rows of one shard.
struct TaskShard {
  SparseShardMatrix x;
  std::vector<std::uint8_t> y;
  std::vector<Alignment> alignment;

  std::size_t n_rows() const { return y.size(); }
  void validate() const;
};

TaskShard build_task_shard(const SparseShardMatrix& features, const AlignmentResult& alignment);

void write_task_shard(const fs::path& dir, const TaskShard& shard);
TaskShard read_task_shard(const fs::path& dir);

struct CacheTaskReport {
  std::string task;
  AlignMode mode = AlignMode::StrictBefore;
  std::string schema_hash;
  std::uint64_t n_labels = 0;
  std::uint64_t n_aligned = 0;
  std::uint64_t n_dropped = 0;
  std::vector<std::uint64_t> shard_rows;
  std::map<std::string, std::uint64_t> drop_reasons;

  json to_json() const;
};

/// Aligns `labels` against every tabularized shard in `features_dir`
/// (one matrix per shard_XXXX subdirectory) and writes task shards plus
/// task_manifest.json and drops.csv into `out_dir`.
CacheTaskReport cache_task(const ShardedDataset& dataset, const fs::path& features_dir,
                           std::vector<LabelRecord> labels, AlignMode mode, const std::string& task,
                           const fs::path& out_dir, int jobs = 1);

// ---------------------------------------------------------------------------
// Access to task shards for training.

/// Sequence of task shards. Implementations are safe for concurrent reads.
class TaskSource {
 public:
  virtual ~TaskSource() = default;
  virtual std::size_t shard_count() const = 0;
  virtual std::shared_ptr<const TaskShard> shard(std::size_t i) const = 0;
  virtual std::uint64_t n_cols() const = 0;
  virtual const std::string& schema_hash() const = 0;
};

class InMemoryTaskSource : public TaskSource {
 public:
  explicit InMemoryTaskSource(std::vector<TaskShard> shards);
  /// Loads every shard of a cached task directory.
  static InMemoryTaskSource load(const fs::path& task_dir);

  std::size_t shard_count() const override { return shards_.size(); }
  std::shared_ptr<const TaskShard> shard(std::size_t i) const override { return shards_.at(i); }
  std::uint64_t n_cols() const override { return n_cols_; }
  const std::string& schema_hash() const override { return schema_hash_; }

 private:
  std::vector<std::shared_ptr<const TaskShard>> shards_;
  std::uint64_t n_cols_ = 0;
  std::string schema_hash_;
};

/// Reads a shard from disk on every access; nothing is retained.
class DiskTaskSource : public TaskSource {
 public:
  explicit DiskTaskSource(fs::path task_dir);

  std::size_t shard_count() const override { return shard_dirs_.size(); }
  std::shared_ptr<const TaskShard> shard(std::size_t i) const override;
  std::uint64_t n_cols() const override { return n_cols_; }
  const std::string& schema_hash() const override { return schema_hash_; }

 private:
  std::vector<fs::path> shard_dirs_;
  std::uint64_t n_cols_ = 0;
  std::string schema_hash_;
};

/// Row membership predicate on the subject of a task row.
using RowFilter = std::function<bool(std::int64_t subject_id)>;
inline bool all_rows(std::int64_t) { return true; }

/// Indices of the rows of `shard` accepted by `filter`.
std::vector<std::size_t> filtered_rows(const TaskShard& shard, const RowFilter& filter);

}  // namespace medtab
