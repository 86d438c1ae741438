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
#include <optional>
#include <string>
#include <vector>

#include "medtab/event_store.hpp"
#include "medtab/feature_ops.hpp"
#include "medtab/feature_schema.hpp"
#include "medtab/gbdt.hpp"
#include "medtab/task_cache.hpp"

namespace medtab {

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  json to_json() const { return json::array({lo, hi}); }
};

struct RealRange {
  double lo = 0;
  double hi = 0;
  bool log_scale = false;
  json to_json() const { return {{"lo", lo}, {"hi", hi}, {"log", log_scale}}; }
};

struct SearchSpace {
  std::vector<WindowSpec> windows;
  std::vector<AggKind> aggs;
  IntRange min_code_count{1, 1};
  std::optional<IntRange> max_included_codes;
  std::optional<IntRange> max_by_correlation;
  IntRange max_depth{2, 10};
  RealRange learning_rate{0.01, 0.5, true};
  RealRange lambda{0.1, 100.0, true};
  RealRange gamma{0.0, 5.0, false};
  RealRange colsample{0.3, 1.0, false};
  IntRange n_trees{50, 1000};
  std::uint32_t max_bins = 64;
  double min_child_hessian = 1.0;

  /// Windows and aggregations of the tabularized superset, default learner ranges.
  static SearchSpace for_schema(const FeatureSchema& schema);
  void validate() const;
  json to_json() const;
};

struct TrialConfig {
  std::uint32_t trial_id = 0;
  std::vector<WindowSpec> windows;
  std::vector<AggKind> aggs;
  std::uint64_t min_code_count = 1;
  std::optional<std::uint64_t> max_included_codes;
  std::optional<std::uint64_t> max_by_correlation;
  GbdtParams params;

  json to_json() const;
};

/// Deterministic in (space, master_seed, trial_id). Subsets use independent
/// inclusion with one element forced when none is drawn.
TrialConfig sample_trial(const SearchSpace& space, std::uint64_t master_seed, std::uint32_t trial_id);

/// Every window and aggregation, the smallest code threshold and learner
/// defaults clamped into the space.
TrialConfig default_trial(const SearchSpace& space, std::uint64_t master_seed);

enum class Split : std::uint8_t { Train, Tuning, Test };
std::string_view split_name(Split s);

/// Subject-level split by seeded hash: 70% train, 15% tuning, 15% test.
struct SplitPlan {
  std::uint64_t seed = 0;
  double train_fraction = 0.70;
  double tuning_fraction = 0.15;

  Split of(std::int64_t subject_id) const;
  RowFilter filter(std::initializer_list<Split> splits) const;
  json to_json() const;
};

struct Evaluation {
  std::size_t n_rows = 0;
  std::size_t n_positive = 0;
  std::optional<double> auroc;
  double logloss = 0.0;
  json to_json() const;
};

Evaluation evaluate(const GbdtModel& model, const TaskSource& source, const RowFilter& filter);

struct TrialResult {
  TrialConfig config;
  bool ok = false;
  std::string error;
  std::size_t n_columns = 0;
  Evaluation tuning;
  double wall_seconds = 0.0;
  std::string model_path;
};

struct SweepOptions {
  std::uint32_t budget = 20;
  std::uint64_t master_seed = 0;
  int jobs = 1;
  MemoryMode memory = MemoryMode::InMemory;
  bool include_default = true;  // trial 0 is the default configuration
  fs::path trial_model_dir;     // when set, each trial's model is written here
};

struct SweepResult {
  std::vector<TrialResult> trials;
  std::uint32_t best_trial = 0;
  GbdtModel final_model;
  Evaluation final_train;
  Evaluation final_test;
  json report;   // deterministic; no wall times
  json timings;  // wall times per trial
};

/// Masks a fitted superset per trial, fits on train, scores on tuning, refits
/// the winner on train + tuning and scores it once on test.
SweepResult run_sweep(const TaskSource& source, const FeatureSchema& schema, const CodeMetadata& metadata,
                      const SearchSpace& space, const SplitPlan& plan, const SweepOptions& options);

/// Column mask realizing the featurization part of a trial. `correlations`
/// is required when the trial sets max_by_correlation.
ColumnMask trial_mask(const TrialConfig& trial, const FeatureSchema& schema, const CodeMetadata& metadata,
                      const std::vector<double>* correlations);

}  // namespace medtab
