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
#include <vector>

#include "medtab/common.hpp"
#include "medtab/feature_ops.hpp"
#include "medtab/task_cache.hpp"

namespace medtab {

struct SgdParams {
  std::uint32_t epochs = 20;
  double learning_rate = 0.05;
  double decay = 0.1;  // rate at epoch e is learning_rate / (1 + decay * e)
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  std::optional<ImputeStrategy> impute;  // missing -> 0 when unset
  bool standardize = true;

  void validate() const;
  json to_json() const;
  static SgdParams from_json(const json& j);
};

struct LinearModel {
  SgdParams params;
  std::vector<std::uint32_t> columns;
  std::vector<double> weights;  // one per entry of columns
  double bias = 0.0;
  std::vector<double> fill;     // per column, used for missing entries
  std::optional<Standardizer> scaler;
  std::string schema_hash;
  std::uint64_t n_cols = 0;

  /// Dense, imputed and scaled features of the given rows.
  DenseMatrix features(const SparseShardMatrix& x, std::span<const std::size_t> rows) const;
  std::vector<double> predict_margin(const SparseShardMatrix& x) const;

  json to_json() const;
  std::string serialize() const;
  static LinearModel from_json(const json& j, const std::string& expected_schema_hash = "");
};

struct SgdFitReport {
  std::vector<double> epoch_loss;  // mean per-row loss seen during each epoch
  std::size_t n_rows = 0;
};

/// Per-row SGD on L2-regularized logistic loss. Each epoch visits shards in
/// order and the rows of a shard in a seeded random order.
LinearModel fit_sgd_logistic(const TaskSource& source, const RowFilter& filter, const SgdParams& params,
                             const std::vector<bool>* mask = nullptr, SgdFitReport* report = nullptr);

}  // namespace medtab
