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

#include "medtab/event_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "medtab/csv.hpp"

namespace medtab {

bool event_less(const Event& a, const Event& b) {
  if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
  if (a.time.has_value() != b.time.has_value()) return !a.time.has_value();
  if (a.time && *a.time != *b.time) return *a.time < *b.time;
  return a.code < b.code;
}

std::vector<std::int64_t> EventShard::subjects() const {
  std::vector<std::int64_t> out;
  for (const auto& e : events) {
    if (out.empty() || out.back() != e.subject_id) out.push_back(e.subject_id);
  }
  return out;
}

json DatasetManifest::to_json() const {
  return json{{"schema_version", schema_version},
              {"shard_paths", shard_paths},
              {"shard_subjects", shard_subjects},
              {"shard_events", shard_events},
              {"n_subjects", n_subjects},
              {"n_events", n_events},
              {"shard_count", shard_count},
              {"seed", seed},
              {"created_config_hash", created_config_hash},
              {"source", source}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  DatasetManifest m;
  try {
    m.schema_version = j.at("schema_version").get<std::string>();
    m.shard_paths = j.at("shard_paths").get<std::vector<std::string>>();
    m.shard_subjects = j.at("shard_subjects").get<std::vector<std::uint64_t>>();
    m.shard_events = j.at("shard_events").get<std::vector<std::uint64_t>>();
    m.n_subjects = j.at("n_subjects").get<std::uint64_t>();
    m.n_events = j.at("n_events").get<std::uint64_t>();
    m.shard_count = j.at("shard_count").get<std::uint64_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.created_config_hash = j.at("created_config_hash").get<std::string>();
    m.source = j.value("source", json::object());
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid dataset manifest: ") + e.what());
  }
  if (m.schema_version != kSchemaVersion) {
    throw DataError("unsupported dataset schema version: " + m.schema_version);
  }
  if (m.shard_paths.size() != m.shard_count || m.shard_subjects.size() != m.shard_count ||
      m.shard_events.size() != m.shard_count) {
    throw DataError("dataset manifest: per-shard lists do not match shard_count");
  }
  std::uint64_t subjects = 0, events = 0;
  for (std::size_t i = 0; i < m.shard_count; ++i) {
    subjects += m.shard_subjects[i];
    events += m.shard_events[i];
  }
  if (subjects != m.n_subjects || events != m.n_events) {
    throw DataError("dataset manifest: totals do not equal the per-shard sums");
  }
  return m;
}

std::size_t assign_shard(std::int64_t subject_id, std::uint64_t seed, std::uint64_t shard_count) {
  if (shard_count == 0) throw UserError("shard count must be positive");
  return static_cast<std::size_t>(subject_hash(subject_id, seed) % shard_count);
}

// ---------------------------------------------------------------------------
// Timestamps

namespace {

bool read_digits(std::string_view s, std::size_t& pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  pos += count;
  out = v;
  return true;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text, bool* truncated) {
  if (truncated) *truncated = false;
  if (text.empty()) return std::nullopt;
  if (auto micros = parse_int(text)) return *micros;

  std::size_t pos = 0;
  int year = 0, month = 0, day = 0;
  if (!read_digits(text, pos, 4, year) || pos >= text.size() || text[pos++] != '-' ||
      !read_digits(text, pos, 2, month) || pos >= text.size() || text[pos++] != '-' ||
      !read_digits(text, pos, 2, day)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) return std::nullopt;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();

  int hour = 0, minute = 0, second = 0;
  std::int64_t micros = 0;
  std::int64_t offset = 0;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    ++pos;
    if (!read_digits(text, pos, 2, hour) || pos >= text.size() || text[pos++] != ':' ||
        !read_digits(text, pos, 2, minute)) {
      return std::nullopt;
    }
    if (pos < text.size() && text[pos] == ':') {
      ++pos;
      if (!read_digits(text, pos, 2, second)) return std::nullopt;
      if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
        ++pos;
        std::size_t digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
          if (digits < 6) {
            micros = micros * 10 + (text[pos] - '0');
          } else if (truncated) {
            *truncated = true;
          }
          ++digits;
          ++pos;
        }
        if (digits == 0) return std::nullopt;
        for (std::size_t d = digits; d < 6; ++d) micros *= 10;
      }
    }
    if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
    if (pos < text.size()) {
      const char c = text[pos];
      if (c == 'Z') {
        ++pos;
      } else if (c == '+' || c == '-') {
        ++pos;
        int oh = 0, om = 0;
        if (!read_digits(text, pos, 2, oh)) return std::nullopt;
        if (pos < text.size() && text[pos] == ':') ++pos;
        if (!read_digits(text, pos, 2, om)) return std::nullopt;
        offset = (oh * 60 + om) * kMicrosPerMinute;
        if (c == '-') offset = -offset;
      }
    }
  }
  if (pos != text.size()) return std::nullopt;
  return days * kMicrosPerDay + hour * kMicrosPerHour + minute * kMicrosPerMinute +
         second * kMicrosPerSecond + micros - offset;
}

// ---------------------------------------------------------------------------
// Reading and writing event files

ParsedEvents read_event_csv(const fs::path& path) {
  const CsvTable table = CsvTable::read(path);
  const std::size_t c_subject = table.require_column("subject_id");
  const std::size_t c_code = table.require_column("code");
  const auto c_time = table.column("time");
  const auto c_value = table.column("numeric_value");

  ParsedEvents out;
  out.events.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table.row(i);
    auto fail = [&](std::string msg) {
      out.errors.push_back({path.string(), table.line(i), std::move(msg)});
    };
    if (row.size() != table.header().size()) {
      fail("expected " + std::to_string(table.header().size()) + " fields, found " + std::to_string(row.size()));
      continue;
    }
    Event e;
    auto subject = parse_int(row[c_subject]);
    if (!subject) {
      fail("missing or non-integer subject_id");
      continue;
    }
    e.subject_id = *subject;
    e.code = row[c_code];
    if (e.code.empty()) {
      fail("missing code");
      continue;
    }
    if (c_time && !row[*c_time].empty()) {
      bool truncated = false;
      auto t = parse_timestamp(row[*c_time], &truncated);
      if (!t) {
        fail("unparseable time '" + row[*c_time] + "'");
        continue;
      }
      if (truncated) ++out.truncated_timestamps;
      e.time = *t;
    }
    if (c_value && !row[*c_value].empty()) {
      auto v = parse_double(row[*c_value]);
      if (!v) {
        fail("unparseable numeric_value '" + row[*c_value] + "'");
        continue;
      }
      if (!std::isfinite(*v)) {
        fail("non-finite numeric_value '" + row[*c_value] + "'");
        continue;
      }
      e.numeric_value = *v;
    }
    out.events.push_back(std::move(e));
  }
  return out;
}

EventShard read_event_shard(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing shard file: " + path.string());
  ParsedEvents parsed = read_event_csv(path);
  if (!parsed.errors.empty()) {
    const auto& e = parsed.errors.front();
    throw DataError(e.source + ":" + std::to_string(e.line) + ": " + e.message);
  }
  EventShard shard{std::move(parsed.events)};
  for (std::size_t i = 1; i < shard.events.size(); ++i) {
    if (event_less(shard.events[i], shard.events[i - 1])) {
      throw DataError(path.string() + ": shard is not sorted at row " + std::to_string(i + 1));
    }
  }
  return shard;
}

std::string serialize_event_shard(const EventShard& shard) {
  CsvWriter w({"subject_id", "time", "code", "numeric_value"});
  for (const auto& e : shard.events) {
    w.field(e.subject_id);
    if (e.time) {
      w.field(*e.time);
    } else {
      w.empty();
    }
    w.field(e.code);
    if (e.numeric_value) {
      w.field(*e.numeric_value);
    } else {
      w.empty();
    }
    w.end_row();
  }
  return w.str();
}

ShardedDataset ShardedDataset::open(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path)) throw UserError("no dataset manifest at " + manifest_path.string());
  ShardedDataset ds;
  ds.root_ = root;
  json j;
  try {
    j = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  ds.manifest_ = DatasetManifest::from_json(j);
  return ds;
}

EventShard ShardedDataset::load_shard(std::size_t i) const { return read_event_shard(shard_path(i)); }

ShardedDataset write_dataset(std::vector<Event> events, const fs::path& root, const IngestConfig& config,
                             const json& source_description) {
  if (config.shard_count == 0) throw UserError("--shards must be positive");
  for (const auto& e : events) {
    if (e.code.empty()) throw DataError("event with empty code for subject " + std::to_string(e.subject_id));
    if (e.numeric_value && !std::isfinite(*e.numeric_value)) {
      throw DataError("non-finite numeric_value for subject " + std::to_string(e.subject_id));
    }
  }
  const json config_json{{"schema_version", kSchemaVersion},
                         {"shard_count", config.shard_count},
                         {"seed", config.seed},
                         {"source", source_description}};
  const std::string config_hash = canonical_hash(config_json);
  const fs::path manifest_path = root / "manifest.json";
  if (fs::exists(manifest_path)) {
    try {
      auto existing = ShardedDataset::open(root);
      if (existing.manifest().created_config_hash == config_hash) {
        bool complete = true;
        for (std::size_t i = 0; i < existing.shard_count(); ++i) complete &= fs::exists(existing.shard_path(i));
        if (complete) {
          log_info("ingest cached", {{"root", root.string()}, {"config_hash", config_hash}});
          return existing;
        }
      }
    } catch (const Error&) {
      // Unreadable manifest: rebuild below.
    }
  }

  std::vector<std::vector<Event>> buckets(config.shard_count);
  for (auto& e : events) buckets[assign_shard(e.subject_id, config.seed, config.shard_count)].push_back(std::move(e));

  DatasetManifest manifest;
  manifest.shard_count = config.shard_count;
  manifest.seed = config.seed;
  manifest.created_config_hash = config_hash;
  manifest.source = source_description;

  fs::create_directories(root);
  const fs::path staging = staging_path(root / "data");
  fs::create_directories(staging);
  for (std::size_t s = 0; s < buckets.size(); ++s) {
    EventShard shard;
    shard.events = std::move(buckets[s]);
    std::stable_sort(shard.events.begin(), shard.events.end(), event_less);
    const std::string name = shard_name(s) + ".csv";
    write_file_atomic(staging / name, serialize_event_shard(shard));
    manifest.shard_paths.push_back("data/" + name);
    manifest.shard_subjects.push_back(shard.subjects().size());
    manifest.shard_events.push_back(shard.events.size());
    manifest.n_subjects += manifest.shard_subjects.back();
    manifest.n_events += shard.events.size();
  }
  publish_directory(staging, root / "data");
  write_file_atomic(manifest_path, manifest.to_json().dump(2) + "\n");
  log_info("ingest complete", {{"root", root.string()},
                               {"shards", manifest.shard_count},
                               {"subjects", manifest.n_subjects},
                               {"events", manifest.n_events}});
  return ShardedDataset::open(root);
}

ShardedDataset ingest(const std::vector<fs::path>& sources, const fs::path& root, const IngestConfig& config) {
  if (sources.empty()) throw UserError("ingest: no input files");
  if (config.shard_count == 0) throw UserError("--shards must be positive");
  std::vector<Event> events;
  std::vector<RowDiagnostic> errors;
  std::size_t truncated = 0;
  json inputs = json::array();
  for (const auto& path : sources) {
    ParsedEvents parsed = read_event_csv(path);
    errors.insert(errors.end(), parsed.errors.begin(), parsed.errors.end());
    truncated += parsed.truncated_timestamps;
    std::move(parsed.events.begin(), parsed.events.end(), std::back_inserter(events));
    inputs.push_back({{"path", path.filename().string()}, {"sha256", sha256_file(path)}});
  }
  if (truncated > 0) {
    log_warn("sub-microsecond timestamp digits truncated", {{"rows", truncated}});
  }
  if (!errors.empty()) {
    std::ostringstream msg;
    msg << errors.size() << " malformed input row(s):";
    for (const auto& e : errors) msg << "\n  " << e.source << ":" << e.line << ": " << e.message;
    throw DataError(msg.str());
  }
  return write_dataset(std::move(events), root, config, json{{"inputs", inputs}});
}

// ---------------------------------------------------------------------------
// Code metadata

std::uint8_t CodeStats::kinds() const {
  std::uint8_t k = 0;
  if (static_occurrences > static_value_occurrences) k |= kStaticCode;
  if (static_value_occurrences > 0) k |= kStaticValue;
  if (ts_occurrences > ts_value_occurrences) k |= kTsCode;
  if (ts_value_occurrences > 0) k |= kTsValue;
  return k;
}

CodeStats& CodeStats::operator+=(const CodeStats& o) {
  static_occurrences += o.static_occurrences;
  static_value_occurrences += o.static_value_occurrences;
  ts_occurrences += o.ts_occurrences;
  ts_value_occurrences += o.ts_value_occurrences;
  return *this;
}

std::string kinds_to_string(std::uint8_t kinds) {
  std::string out;
  auto add = [&](std::uint8_t flag, const char* name) {
    if (kinds & flag) {
      if (!out.empty()) out += '|';
      out += name;
    }
  };
  add(kStaticCode, "static_code");
  add(kStaticValue, "static_value");
  add(kTsCode, "ts_code");
  add(kTsValue, "ts_value");
  return out;
}

CodeMetadata describe_shard(const EventShard& shard) {
  CodeMetadata out;
  for (const auto& e : shard.events) {
    CodeStats& s = out[e.code];
    if (e.time) {
      ++s.ts_occurrences;
      if (e.numeric_value) ++s.ts_value_occurrences;
    } else {
      ++s.static_occurrences;
      if (e.numeric_value) ++s.static_value_occurrences;
    }
  }
  return out;
}

CodeMetadata describe(const ShardedDataset& dataset, int jobs) {
  std::vector<CodeMetadata> partial(dataset.shard_count());
  parallel_for(dataset.shard_count(), jobs, [&](std::size_t i) { partial[i] = describe_shard(dataset.load_shard(i)); });
  CodeMetadata out;
  for (const auto& p : partial) {
    for (const auto& [code, stats] : p) out[code] += stats;
  }
  return out;
}

std::string serialize_code_metadata(const CodeMetadata& metadata) {
  CsvWriter w({"code", "kinds", "code_occurrences", "value_occurrences", "static_occurrences",
               "static_value_occurrences", "ts_occurrences", "ts_value_occurrences"});
  for (const auto& [code, s] : metadata) {
    w.field(code)
        .field(kinds_to_string(s.kinds()))
        .field(static_cast<std::int64_t>(s.code_occurrences()))
        .field(static_cast<std::int64_t>(s.value_occurrences()))
        .field(static_cast<std::int64_t>(s.static_occurrences))
        .field(static_cast<std::int64_t>(s.static_value_occurrences))
        .field(static_cast<std::int64_t>(s.ts_occurrences))
        .field(static_cast<std::int64_t>(s.ts_value_occurrences));
    w.end_row();
  }
  return w.str();
}

CodeMetadata read_code_metadata(const fs::path& path) {
  if (!fs::exists(path)) throw UserError("no code metadata at " + path.string() + " (run describe first)");
  const CsvTable t = CsvTable::read(path);
  const std::size_t c_code = t.require_column("code");
  const std::size_t cols[4] = {t.require_column("static_occurrences"), t.require_column("static_value_occurrences"),
                               t.require_column("ts_occurrences"), t.require_column("ts_value_occurrences")};
  CodeMetadata out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& row = t.row(i);
    std::uint64_t v[4];
    for (int k = 0; k < 4; ++k) {
      auto parsed = parse_int(row.at(cols[k]));
      if (!parsed || *parsed < 0) throw DataError(path.string() + ":" + std::to_string(t.line(i)) + ": bad count");
      v[k] = static_cast<std::uint64_t>(*parsed);
    }
    out[row.at(c_code)] = CodeStats{v[0], v[1], v[2], v[3]};
  }
  return out;
}

}  // namespace medtab
