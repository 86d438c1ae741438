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

#include <string>
#include <vector>

#include "medtab/event_store.hpp"
#include "medtab/labels.hpp"

namespace medtab {

/// Labels are 1 iff at least `threshold` events of `code` fall in the
/// half-open interval (t - window, t) before the prediction time t. With
/// probability `noise` the label is then replaced by a fair coin flip, so
/// noise = 1 yields labels independent of the data.
struct PlantedRule {
  std::string code = "SIG";
  Timestamp window = 7 * kMicrosPerDay;
  std::uint32_t threshold = 3;
  double noise = 0.0;

  json to_json() const;
  /// The rule before noise: count of `code` events in (t - window, t).
  bool evaluate(std::span<const Event> subject_events, Timestamp prediction_time) const;
};

struct SynthSpec {
  std::uint64_t n_subjects = 100;
  std::uint64_t n_codes = 10;  // including the signal code
  std::uint64_t events_per_subject = 40;
  std::uint64_t seed = 0;
  PlantedRule rule;
  std::uint32_t labels_per_subject = 2;
  std::uint32_t span_days = 60;
  double signal_rate = 0.4;  // probability an event carries the signal code

  json to_json() const;
  void validate() const;
};

struct SynthData {
  std::vector<Event> events;  // generation order, not shard order
  std::vector<LabelRecord> labels;
};

/// Epoch of every synthetic timeline (2020-01-01T00:00:00Z).
inline constexpr Timestamp kSynthEpoch = 1577836800LL * kMicrosPerSecond;

/// Events sit on a whole-minute grid and prediction times fall 30 s after
/// an event, so the row aligned to a label sees exactly the label window.
SynthData generate_synthetic(const SynthSpec& spec);

/// Draws labels for `events` under `rule`; prediction points are chosen to
/// balance the classes of the noiseless rule.
std::vector<LabelRecord> generate_labels(std::span<const Event> events, const PlantedRule& rule,
                                         std::uint32_t labels_per_subject, std::uint64_t seed);

/// Writes a dataset at `root` plus `labels/<task>.csv` and `labels/<task>.json`.
ShardedDataset write_synthetic(const fs::path& root, const SynthSpec& spec, std::uint64_t shard_count,
                               const std::string& task);

/// Writes an additional label set on an existing synthetic event list.
void write_label_set(const fs::path& root, const std::string& task, std::span<const LabelRecord> labels,
                     const json& provenance);

}  // namespace medtab
