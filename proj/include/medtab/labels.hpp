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
#include <span>
#include <vector>

#include "medtab/common.hpp"

namespace medtab {

/// One prediction target: a subject, the time the prediction is made, and
/// the binary outcome.
struct LabelRecord {
  std::int64_t subject_id = 0;
  Timestamp prediction_time = 0;
  bool label = false;

  bool operator==(const LabelRecord&) const = default;
};

/// Reads a label table (subject_id, prediction_time, label). `label` accepts
/// 0/1/true/false. A directory path reads every *.csv inside it.
std::vector<LabelRecord> read_labels(const fs::path& path);
std::string serialize_labels(std::span<const LabelRecord> labels);

/// Sorts by (subject, prediction_time) and removes duplicates. Agreeing
/// duplicates are dropped with a warning; conflicting ones are a DataError.
std::vector<LabelRecord> dedup_labels(std::vector<LabelRecord> labels);

}  // namespace medtab
