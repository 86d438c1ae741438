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

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "medtab/common.hpp"

namespace medtab {

/// Identifies one tabularized row: a subject at one of its event times.
struct RowKey {
  std::int64_t subject_id = 0;
  Timestamp time = 0;

  auto operator<=>(const RowKey&) const = default;
};

/// CSR matrix for one shard. A stored entry is an observed aggregate; an
/// absent entry means nothing was observed, never zero.
struct SparseShardMatrix {
  std::uint64_t n_cols = 0;
  std::vector<std::uint64_t> indptr{0};
  std::vector<std::uint32_t> indices;
  std::vector<float> data;
  std::vector<RowKey> rows;
  std::string schema_hash;

  std::size_t n_rows() const { return indptr.size() - 1; }
  std::size_t nnz() const { return indices.size(); }

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {indices.data() + indptr[r], indices.data() + indptr[r + 1]};
  }
  std::span<const float> row_values(std::size_t r) const {
    return {data.data() + indptr[r], data.data() + indptr[r + 1]};
  }

  /// Appends a row; `cols` must be strictly increasing.
  void push_row(const RowKey& key, std::span<const std::uint32_t> cols, std::span<const float> values);

  /// Throws InvariantError on any broken CSR invariant.
  void validate() const;

  bool operator==(const SparseShardMatrix&) const = default;
};

/// Column-wise concatenation of matrices sharing the same rows.
SparseShardMatrix hstack(std::span<const SparseShardMatrix* const> parts, const std::string& schema_hash);

/// Rows `selection` (in that order, repeats allowed).
SparseShardMatrix select_rows(const SparseShardMatrix& m, std::span<const std::size_t> selection);

/// Writes meta.json, indptr.bin, indices.bin, data.bin and rows.csv into `dir`.
void write_matrix(const fs::path& dir, const SparseShardMatrix& m);
SparseShardMatrix read_matrix(const fs::path& dir);
bool matrix_exists(const fs::path& dir);

}  // namespace medtab
