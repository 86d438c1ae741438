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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "medtab/binning.hpp"
#include "medtab/common.hpp"
#include "medtab/histogram.hpp"
#include "medtab/task_cache.hpp"

namespace medtab {

enum class MemoryMode { InMemory, External };
MemoryMode parse_memory_mode(std::string_view s);
std::string memory_mode_name(MemoryMode m);

struct GbdtParams {
  std::uint32_t n_trees = 100;
  std::uint32_t max_depth = 6;
  std::uint32_t max_bins = 64;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_hessian = 1.0;
  double colsample = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  json to_json() const;
  static GbdtParams from_json(const json& j);
  bool operator==(const GbdtParams&) const = default;
};

struct TreeNode {
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t column = 0;
  std::uint32_t bin = 0;
  float threshold = std::numeric_limits<float>::infinity();  // observed v <= threshold goes left
  bool default_left = true;
  double weight = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const std::uint32_t> cols, std::span<const float> vals) const;
  /// Leaf: [weight]. Split: [column, bin, threshold|null, default_left, left, right].
  json to_json() const;
  static Tree from_json(const json& j);
};

struct GbdtModel {
  GbdtParams params;
  double base_score = 0.0;
  BinningTable bins;
  std::vector<Tree> trees;
  std::vector<std::uint32_t> feature_mask;  // columns eligible for splits
  std::string schema_hash;
  std::uint64_t n_cols = 0;

  double predict_margin(std::span<const std::uint32_t> cols, std::span<const float> vals) const;
  std::vector<double> predict_margin(const SparseShardMatrix& x) const;
  std::vector<double> predict_proba(const SparseShardMatrix& x) const;

  json to_json() const;
  std::string serialize() const;
  /// Fails with DataError when `expected_schema_hash` is non-empty and differs.
  static GbdtModel from_json(const json& j, const std::string& expected_schema_hash = "");
  static GbdtModel load(const fs::path& path, const std::string& expected_schema_hash = "");
};

struct GbdtFitReport {
  std::vector<double> train_logloss;  // after each tree
  std::size_t n_rows = 0;
  std::size_t data_passes = 0;
};

/// Trains on the rows of `source` accepted by `filter`. External mode keeps
/// only per-row state in memory and rereads every shard once per tree level.
GbdtModel fit_gbdt(const TaskSource& source, const RowFilter& filter, const GbdtParams& params, MemoryMode mode,
                   const std::vector<bool>* mask = nullptr, GbdtFitReport* report = nullptr);

}  // namespace medtab
