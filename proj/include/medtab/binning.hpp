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

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "medtab/common.hpp"
#include "medtab/task_cache.hpp"

namespace medtab {

inline constexpr std::size_t kReservoirCapacity = std::size_t{1} << 18;

/// Seeded Algorithm-R reservoir over a stream of values.
class Reservoir {
 public:
  Reservoir(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}
  void add(float v);
  const std::vector<float>& sample() const { return sample_; }
  std::uint64_t seen() const { return seen_; }

 private:
  std::size_t capacity_;
  std::uint64_t seen_ = 0;
  Rng rng_;
  std::vector<float> sample_;
};

/// Upper bin edges from a sample: at most max_bins - 1 strictly increasing
/// values, none of them >= the sample maximum. Empty for <= 1 distinct value.
std::vector<float> quantile_edges(std::vector<float> sample, std::uint32_t max_bins);

/// Per-column bin edges. Bin k holds values in (edge[k-1], edge[k]]; the
/// last observed bin holds values above every edge. Structurally missing
/// entries have no bin; histograms keep them in a separate slot.
struct BinningTable {
  std::uint32_t max_bins = 0;
  std::vector<std::vector<float>> edges;
  std::vector<std::uint64_t> observed;  // observed training entries per column

  std::size_t n_cols() const { return edges.size(); }
  std::uint32_t n_bins(std::uint32_t col) const { return static_cast<std::uint32_t>(edges[col].size()) + 1; }
  std::uint8_t bin(std::uint32_t col, float v) const {
    const auto& e = edges[col];
    return static_cast<std::uint8_t>(std::lower_bound(e.begin(), e.end(), v) - e.begin());
  }

  bool operator==(const BinningTable&) const = default;
};

/// Fits edges from a per-column reservoir (capacity 2^18, seeded per column)
/// over the observed entries of the filtered rows. Columns outside `mask`
/// get no edges and no observations.
BinningTable fit_bins(const TaskSource& source, const RowFilter& filter, std::uint32_t max_bins, std::uint64_t seed,
                      const std::vector<bool>* mask = nullptr);

/// Bins of the selected rows of a task matrix, CSR-shaped.
struct BinnedMatrix {
  std::vector<std::uint64_t> indptr{0};
  std::vector<std::uint32_t> cols;
  std::vector<std::uint8_t> bins;

  std::size_t n_rows() const { return indptr.size() - 1; }
  /// Bin of `col` in row r, or -1 when the entry is missing.
  int find(std::size_t r, std::uint32_t col) const;
};

BinnedMatrix bin_rows(const SparseShardMatrix& x, std::span<const std::size_t> rows, const BinningTable& table);

}  // namespace medtab
