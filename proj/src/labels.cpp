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

#include "medtab/labels.hpp"

#include <algorithm>

#include "medtab/csv.hpp"
#include "medtab/event_store.hpp"

namespace medtab {

namespace {

std::optional<bool> parse_label(std::string_view s) {
  if (s == "1" || s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "0" || s == "false" || s == "False" || s == "FALSE") return false;
  return std::nullopt;
}

void read_label_file(const fs::path& path, std::vector<LabelRecord>& out) {
  const CsvTable t = CsvTable::read(path);
  const std::size_t c_subject = t.require_column("subject_id");
  const std::size_t c_time = t.require_column("prediction_time");
  const std::size_t c_label = t.require_column("label");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& row = t.row(i);
    const std::string where = path.string() + ":" + std::to_string(t.line(i)) + ": ";
    if (row.size() != t.header().size()) throw DataError(where + "wrong field count");
    auto subject = parse_int(row[c_subject]);
    if (!subject) throw DataError(where + "bad subject_id");
    if (row[c_time].empty()) throw DataError(where + "prediction_time is required");
    auto time = parse_timestamp(row[c_time]);
    if (!time) throw DataError(where + "bad prediction_time '" + row[c_time] + "'");
    auto label = parse_label(row[c_label]);
    if (!label) throw DataError(where + "label must be binary, got '" + row[c_label] + "'");
    out.push_back({*subject, *time, *label});
  }
}

}  // namespace

std::vector<LabelRecord> read_labels(const fs::path& path) {
  std::vector<LabelRecord> out;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) read_label_file(f, out);
  } else {
    if (!fs::exists(path)) throw UserError("labels not found: " + path.string());
    read_label_file(path, out);
  }
  return out;
}

std::string serialize_labels(std::span<const LabelRecord> labels) {
  CsvWriter w({"subject_id", "prediction_time", "label"});
  for (const auto& l : labels) {
    w.field(l.subject_id).field(l.prediction_time).field(std::int64_t{l.label ? 1 : 0});
    w.end_row();
  }
  return w.str();
}

std::vector<LabelRecord> dedup_labels(std::vector<LabelRecord> labels) {
  std::stable_sort(labels.begin(), labels.end(), [](const LabelRecord& a, const LabelRecord& b) {
    return std::tie(a.subject_id, a.prediction_time) < std::tie(b.subject_id, b.prediction_time);
  });
  std::vector<LabelRecord> out;
  out.reserve(labels.size());
  std::size_t duplicates = 0;
  for (const auto& l : labels) {
    if (!out.empty() && out.back().subject_id == l.subject_id && out.back().prediction_time == l.prediction_time) {
      if (out.back().label != l.label) {
        throw DataError("conflicting labels for subject " + std::to_string(l.subject_id) + " at prediction_time " +
                        std::to_string(l.prediction_time));
      }
      ++duplicates;
      continue;
    }
    out.push_back(l);
  }
  if (duplicates > 0) log_warn("duplicate label rows removed", {{"count", duplicates}});
  return out;
}

}  // namespace medtab
