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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medtab/common.hpp"

namespace medtab {

/// One long-form observation. A missing time marks a static observation.
struct Event {
  std::int64_t subject_id = 0;
  std::optional<Timestamp> time;
  std::string code;
  std::optional<double> numeric_value;

  bool operator==(const Event&) const = default;
};

/// Shard order: subject, static rows first, time, code. Ties keep input order.
bool event_less(const Event& a, const Event& b);

/// Events of a subject-disjoint slice of the dataset, sorted by event_less.
struct EventShard {
  std::vector<Event> events;

  std::vector<std::int64_t> subjects() const;
};

inline constexpr const char* kSchemaVersion = "medtab-events/1";

struct DatasetManifest {
  std::string schema_version = kSchemaVersion;
  std::vector<std::string> shard_paths;  // relative to the dataset root
  std::vector<std::uint64_t> shard_subjects;
  std::vector<std::uint64_t> shard_events;
  std::uint64_t n_subjects = 0;
  std::uint64_t n_events = 0;
  std::uint64_t shard_count = 0;
  std::uint64_t seed = 0;
  std::string created_config_hash;
  json source;  // free-form provenance (input digests or generator spec)

  json to_json() const;
  static DatasetManifest from_json(const json& j);
};

struct IngestConfig {
  std::uint64_t shard_count = 1;
  std::uint64_t seed = 0;
};

/// Shard assigned to a subject: seeded 64-bit hash modulo shard count.
std::size_t assign_shard(std::int64_t subject_id, std::uint64_t seed, std::uint64_t shard_count);

struct RowDiagnostic {
  std::string source;
  std::size_t line = 0;
  std::string message;
};

struct ParsedEvents {
  std::vector<Event> events;
  std::vector<RowDiagnostic> errors;
  std::size_t truncated_timestamps = 0;
};

/// Parses an ISO-8601 timestamp or an integer count of epoch microseconds.
/// Sets `truncated` when sub-microsecond digits were dropped.
std::optional<Timestamp> parse_timestamp(std::string_view text, bool* truncated = nullptr);

/// Reads a long-form CSV (subject_id, time, code, numeric_value).
/// Malformed rows are reported in `errors`, never silently dropped.
ParsedEvents read_event_csv(const fs::path& path);

class ShardedDataset {
 public:
  static ShardedDataset open(const fs::path& root);

  const fs::path& root() const { return root_; }
  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t shard_count() const { return manifest_.shard_paths.size(); }
  fs::path shard_path(std::size_t i) const { return root_ / manifest_.shard_paths.at(i); }
  std::size_t shard_of(std::int64_t subject_id) const {
    return assign_shard(subject_id, manifest_.seed, manifest_.shard_count);
  }
  EventShard load_shard(std::size_t i) const;

 private:
  fs::path root_;
  DatasetManifest manifest_;
};

EventShard read_event_shard(const fs::path& path);
std::string serialize_event_shard(const EventShard& shard);

/// Partitions, sorts and writes `events` as a dataset rooted at `root`.
/// If `root` already holds a dataset built from the same config hash, it is
/// left untouched.
ShardedDataset write_dataset(std::vector<Event> events, const fs::path& root, const IngestConfig& config,
                             const json& source_description);

/// Ingests long-form CSV files. Any malformed row aborts with a DataError
/// listing every offending row.
ShardedDataset ingest(const std::vector<fs::path>& sources, const fs::path& root, const IngestConfig& config);

// ---------------------------------------------------------------------------
// Code metadata

enum CodeKind : std::uint8_t {
  kStaticCode = 1 << 0,
  kStaticValue = 1 << 1,
  kTsCode = 1 << 2,
  kTsValue = 1 << 3,
};

struct CodeStats {
  std::uint64_t static_occurrences = 0;
  std::uint64_t static_value_occurrences = 0;
  std::uint64_t ts_occurrences = 0;
  std::uint64_t ts_value_occurrences = 0;

  std::uint64_t code_occurrences() const { return static_occurrences + ts_occurrences; }
  std::uint64_t value_occurrences() const { return static_value_occurrences + ts_value_occurrences; }

  /// Code-kind flags mark observations without a value; value-kind flags
  /// mark observations with one.
  std::uint8_t kinds() const;

  CodeStats& operator+=(const CodeStats& o);
  bool operator==(const CodeStats&) const = default;
};

std::string kinds_to_string(std::uint8_t kinds);

/// Per-code counts keyed (and therefore ordered) by code.
using CodeMetadata = std::map<std::string, CodeStats>;

CodeMetadata describe_shard(const EventShard& shard);
CodeMetadata describe(const ShardedDataset& dataset, int jobs = 1);

std::string serialize_code_metadata(const CodeMetadata& metadata);
CodeMetadata read_code_metadata(const fs::path& path);

}  // namespace medtab
