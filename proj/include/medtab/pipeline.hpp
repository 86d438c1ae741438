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

#include <optional>
#include <string>
#include <vector>

#include "medtab/common.hpp"
#include "medtab/config.hpp"
#include "medtab/feature_schema.hpp"
#include "medtab/gbdt.hpp"
#include "medtab/sgd.hpp"
#include "medtab/task_cache.hpp"
#include "medtab/tuner.hpp"

namespace medtab {

/// Dataset-relative output locations.
namespace layout {
inline fs::path code_metadata(const fs::path& root) { return root / "code_metadata.csv"; }
inline fs::path static_dir(const fs::path& root) { return root / "tabularized" / "static"; }
inline fs::path time_series_dir(const fs::path& root) { return root / "tabularized" / "time_series"; }
inline fs::path full_dir(const fs::path& root) { return time_series_dir(root) / "full"; }
inline fs::path schema_file(const fs::path& root) { return time_series_dir(root) / "schema.json"; }
inline fs::path task_dir(const fs::path& root, const std::string& task) { return root / "tasks" / task; }
inline fs::path model_dir(const fs::path& root, const std::string& task) { return root / "models" / task; }
inline fs::path default_labels(const fs::path& root, const std::string& task) {
  return root / "labels" / (task + ".csv");
}
inline fs::path stamp(const fs::path& root, const std::string& stage) {
  return root / ".stages" / (stage + ".json");
}
}  // namespace layout

struct ModelSettings {
  std::string learner = "gbdt";  // gbdt | sgd
  MemoryMode memory = MemoryMode::InMemory;
  GbdtParams gbdt;
  SgdParams sgd;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> max_by_correlation;
  std::optional<double> min_correlation;
  bool sweep = false;
  std::uint32_t budget = 20;
  json space_overrides = json::object();  // sweep.space.* keys without the prefix

  json to_json() const;
};

struct PipelineSettings {
  int jobs = 1;
  TabConfig tab;
  std::string task;
  fs::path labels;  // empty: labels/<task>.csv under the data root
  AlignMode align = AlignMode::StrictBefore;
  ModelSettings model;
};

/// Every key accepted in a config file or as a key=value override.
const std::set<std::string>& known_config_keys();
PipelineSettings settings_from_config(const Config& config);

struct StageOutcome {
  std::string stage;
  bool cached = false;
  std::string config_hash;
  double wall_seconds = 0.0;
  std::uint64_t peak_rss_bytes = 0;
  json summary = json::object();

  json to_json() const;
};

/// Reads `<root>/.stages/<stage>.json`, if present.
std::optional<json> read_stamp(const fs::path& root, const std::string& stage);

StageOutcome stage_describe(const fs::path& root, int jobs);
StageOutcome stage_tabularize_static(const fs::path& root, const TabConfig& config, int jobs);
StageOutcome stage_tabularize_time_series(const fs::path& root, const TabConfig& config, int jobs);
StageOutcome stage_cache_task(const fs::path& root, const std::string& task, const fs::path& labels, AlignMode mode,
                              int jobs);
StageOutcome stage_model(const fs::path& root, const std::string& task, const ModelSettings& settings, int jobs);

/// describe, tabularize-static, tabularize-time-series, cache-task, model.
std::vector<StageOutcome> run_pipeline(const fs::path& root, const PipelineSettings& settings);

/// Search space of a sweep: the tabularized superset with overrides applied.
SearchSpace sweep_space(const FeatureSchema& schema, const json& overrides);

}  // namespace medtab
