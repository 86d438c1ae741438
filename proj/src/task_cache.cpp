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

#include "medtab/task_cache.hpp"

#include <algorithm>

#include "medtab/csv.hpp"

namespace medtab {

std::string_view align_mode_name(AlignMode mode) {
  return mode == AlignMode::StrictBefore ? "strict_before" : "at_or_before";
}

AlignmentResult align_labels(std::span<const LabelRecord> labels, std::span<const RowKey> rows, AlignMode mode) {
  AlignmentResult out;
  out.aligned.reserve(labels.size());
  for (const auto& label : labels) {
    const RowKey probe{label.subject_id, label.prediction_time};
    auto it = mode == AlignMode::StrictBefore ? std::lower_bound(rows.begin(), rows.end(), probe)
                                              : std::upper_bound(rows.begin(), rows.end(), probe);
    if (it != rows.begin() && std::prev(it)->subject_id == label.subject_id) {
      const auto row = static_cast<std::size_t>(std::prev(it) - rows.begin());
      out.aligned.push_back({row, label.subject_id, rows[row].time, label.prediction_time, label.label});
      continue;
    }
    const bool known = std::binary_search(rows.begin(), rows.end(), RowKey{label.subject_id, 0},
                                          [](const RowKey& a, const RowKey& b) { return a.subject_id < b.subject_id; });
    out.dropped.push_back({label, known ? kDropNoPriorRow : kDropUnknownSubject});
  }
  return out;
}

void TaskShard::validate() const {
  MEDTAB_CHECK(y.size() == x.n_rows(), "label count differs from task matrix rows");
  MEDTAB_CHECK(alignment.size() == y.size(), "alignment count differs from labels");
  for (std::size_t i = 0; i < y.size(); ++i) {
    MEDTAB_CHECK(alignment[i].event_time <= alignment[i].prediction_time, "aligned row after prediction time");
    MEDTAB_CHECK(x.rows[i].subject_id == alignment[i].subject_id, "alignment subject differs from row");
  }
}

TaskShard build_task_shard(const SparseShardMatrix& features, const AlignmentResult& alignment) {
  std::vector<std::size_t> selection;
  selection.reserve(alignment.aligned.size());
  TaskShard out;
  for (const auto& a : alignment.aligned) {
    selection.push_back(a.row);
    out.y.push_back(a.label ? 1 : 0);
  }
  out.x = select_rows(features, selection);
  out.alignment = alignment.aligned;
  return out;
}

void write_task_shard(const fs::path& dir, const TaskShard& shard) {
  write_matrix(dir, shard.x);
  write_file_atomic(dir / "labels.bin",
                    std::string_view(reinterpret_cast<const char*>(shard.y.data()), shard.y.size()));
  CsvWriter w({"row", "subject_id", "event_time", "prediction_time", "label"});
  for (const auto& a : shard.alignment) {
    w.field(static_cast<std::int64_t>(a.row))
        .field(a.subject_id)
        .field(a.event_time)
        .field(a.prediction_time)
        .field(std::int64_t{a.label ? 1 : 0});
    w.end_row();
  }
  write_file_atomic(dir / "alignment.csv", w.str());
}

TaskShard read_task_shard(const fs::path& dir) {
  TaskShard out;
  out.x = read_matrix(dir);
  const std::string labels = read_file(dir / "labels.bin");
  out.y.assign(labels.begin(), labels.end());
  const CsvTable t = CsvTable::read(dir / "alignment.csv");
  const std::size_t cols[5] = {t.require_column("row"), t.require_column("subject_id"), t.require_column("event_time"),
                               t.require_column("prediction_time"), t.require_column("label")};
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::int64_t v[5];
    for (int k = 0; k < 5; ++k) {
      auto parsed = parse_int(t.row(i).at(cols[k]));
      if (!parsed) throw DataError((dir / "alignment.csv").string() + ": bad row " + std::to_string(i + 1));
      v[k] = *parsed;
    }
    out.alignment.push_back({static_cast<std::size_t>(v[0]), v[1], v[2], v[3], v[4] != 0});
  }
  try {
    out.validate();
  } catch (const InvariantError& e) {
    throw DataError(dir.string() + ": " + e.what());
  }
  return out;
}

json CacheTaskReport::to_json() const {
  std::vector<std::string> shards;
  for (std::size_t i = 0; i < shard_rows.size(); ++i) shards.push_back(shard_name(i));
  return json{{"task", task},
              {"mode", std::string(align_mode_name(mode))},
              {"schema_hash", schema_hash},
              {"n_labels", n_labels},
              {"n_aligned", n_aligned},
              {"n_dropped", n_dropped},
              {"shards", shards},
              {"shard_rows", shard_rows},
              {"drop_reasons", drop_reasons}};
}

CacheTaskReport cache_task(const ShardedDataset& dataset, const fs::path& features_dir,
                           std::vector<LabelRecord> labels, AlignMode mode, const std::string& task,
                           const fs::path& out_dir, int jobs) {
  labels = dedup_labels(std::move(labels));
  const std::size_t n_shards = dataset.shard_count();
  std::vector<std::vector<LabelRecord>> routed(n_shards);
  for (const auto& l : labels) routed[dataset.shard_of(l.subject_id)].push_back(l);

  // All shards must come from one tabularization.
  std::string schema_hash;
  std::uint64_t n_cols = 0;
  for (std::size_t s = 0; s < n_shards; ++s) {
    const fs::path meta = features_dir / shard_name(s) / "meta.json";
    if (!fs::exists(meta)) throw UserError("missing tabularized shard " + meta.parent_path().string());
    const json j = json::parse(read_file(meta));
    const auto hash = j.at("schema_hash").get<std::string>();
    if (s == 0) {
      schema_hash = hash;
      n_cols = j.at("n_cols").get<std::uint64_t>();
    } else if (hash != schema_hash) {
      throw DataError("schema_hash mismatch between tabularized shards (" + shard_name(0) + " vs " + shard_name(s) +
                      "): stale tabularization, rerun tabularize-time-series");
    }
  }

  const fs::path staging = staging_path(out_dir);
  fs::create_directories(staging);
  std::vector<AlignmentResult> results(n_shards);
  parallel_for(n_shards, jobs, [&](std::size_t s) {
    const SparseShardMatrix features = read_matrix(features_dir / shard_name(s));
    results[s] = align_labels(routed[s], features.rows, mode);
    TaskShard shard = build_task_shard(features, results[s]);
    write_task_shard(staging / shard_name(s), shard);
  });

  CacheTaskReport report;
  report.task = task;
  report.mode = mode;
  report.schema_hash = schema_hash;
  CsvWriter drops({"subject_id", "prediction_time", "label", "reason"});
  for (std::size_t s = 0; s < n_shards; ++s) {
    report.n_labels += routed[s].size();
    report.n_aligned += results[s].aligned.size();
    report.n_dropped += results[s].dropped.size();
    report.shard_rows.push_back(results[s].aligned.size());
    for (const auto& d : results[s].dropped) {
      ++report.drop_reasons[d.reason];
      drops.field(d.label.subject_id).field(d.label.prediction_time).field(std::int64_t{d.label.label ? 1 : 0});
      drops.field(d.reason);
      drops.end_row();
    }
  }
  MEDTAB_CHECK(report.n_labels == report.n_aligned + report.n_dropped, "label conservation");
  json manifest = report.to_json();
  manifest["n_cols"] = n_cols;
  write_file_atomic(staging / "drops.csv", drops.str());
  write_file_atomic(staging / "task_manifest.json", manifest.dump(2) + "\n");
  publish_directory(staging, out_dir);
  if (report.n_dropped > 0) {
    log_warn("labels dropped during alignment", {{"task", task}, {"dropped", report.n_dropped}});
  }
  return report;
}

namespace {

struct TaskManifestInfo {
  std::vector<fs::path> shard_dirs;
  std::uint64_t n_cols = 0;
  std::string schema_hash;
};

TaskManifestInfo read_task_manifest(const fs::path& task_dir) {
  const fs::path path = task_dir / "task_manifest.json";
  if (!fs::exists(path)) throw UserError("no cached task at " + task_dir.string() + " (run cache-task first)");
  const json j = json::parse(read_file(path));
  TaskManifestInfo info;
  info.n_cols = j.at("n_cols").get<std::uint64_t>();
  info.schema_hash = j.at("schema_hash").get<std::string>();
  for (const auto& s : j.at("shards")) info.shard_dirs.push_back(task_dir / s.get<std::string>());
  return info;
}

}  // namespace

InMemoryTaskSource::InMemoryTaskSource(std::vector<TaskShard> shards) {
  for (std::size_t i = 0; i < shards.size(); ++i) {
    if (i == 0) {
      n_cols_ = shards[i].x.n_cols;
      schema_hash_ = shards[i].x.schema_hash;
    } else if (shards[i].x.schema_hash != schema_hash_ || shards[i].x.n_cols != n_cols_) {
      throw DataError("task shards disagree on schema");
    }
    shards_.push_back(std::make_shared<const TaskShard>(std::move(shards[i])));
  }
}

InMemoryTaskSource InMemoryTaskSource::load(const fs::path& task_dir) {
  const TaskManifestInfo info = read_task_manifest(task_dir);
  std::vector<TaskShard> shards;
  for (const auto& dir : info.shard_dirs) shards.push_back(read_task_shard(dir));
  InMemoryTaskSource source(std::move(shards));
  source.n_cols_ = info.n_cols;
  source.schema_hash_ = info.schema_hash;
  return source;
}

DiskTaskSource::DiskTaskSource(fs::path task_dir) {
  TaskManifestInfo info = read_task_manifest(task_dir);
  shard_dirs_ = std::move(info.shard_dirs);
  n_cols_ = info.n_cols;
  schema_hash_ = std::move(info.schema_hash);
}

std::shared_ptr<const TaskShard> DiskTaskSource::shard(std::size_t i) const {
  auto shard = std::make_shared<TaskShard>(read_task_shard(shard_dirs_.at(i)));
  if (shard->x.schema_hash != schema_hash_) {
    throw DataError("task shard " + shard_dirs_[i].string() + " has a different schema_hash than its manifest");
  }
  return shard;
}

std::vector<std::size_t> filtered_rows(const TaskShard& shard, const RowFilter& filter) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < shard.n_rows(); ++i) {
    if (filter(shard.alignment[i].subject_id)) out.push_back(i);
  }
  return out;
}

}  // namespace medtab
