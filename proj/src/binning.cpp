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

#include "medtab/binning.hpp"

namespace medtab {

void Reservoir::add(float v) {
  ++seen_;
  if (sample_.size() < capacity_) {
    sample_.push_back(v);
    return;
  }
  const std::uint64_t j = rng_.below(seen_);
  if (j < capacity_) sample_[j] = v;
}

std::vector<float> quantile_edges(std::vector<float> sample, std::uint32_t max_bins) {
  if (max_bins < 2) throw UserError("max_bins must be at least 2");
  std::sort(sample.begin(), sample.end());
  std::vector<float> distinct = sample;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= 1) return {};
  std::vector<float> edges;
  if (distinct.size() <= max_bins) {
    edges.assign(distinct.begin(), distinct.end() - 1);
    return edges;
  }
  const std::size_t n = sample.size();
  for (std::uint32_t k = 1; k < max_bins; ++k) {
    const std::size_t idx = static_cast<std::size_t>((static_cast<unsigned __int128>(k) * (n - 1)) / max_bins);
    const float e = sample[idx];
    if (e >= distinct.back()) break;
    if (edges.empty() || edges.back() < e) edges.push_back(e);
  }
  return edges;
}

BinningTable fit_bins(const TaskSource& source, const RowFilter& filter, std::uint32_t max_bins, std::uint64_t seed,
                      const std::vector<bool>* mask) {
  if (max_bins < 2 || max_bins > 256) throw UserError("max_bins must lie in [2, 256]");
  const std::size_t n_cols = source.n_cols();
  if (mask && mask->size() != n_cols) throw InvariantError("fit_bins: mask width differs from the task schema");
  std::vector<Reservoir> reservoirs;
  reservoirs.reserve(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) reservoirs.emplace_back(kReservoirCapacity, derive_seed(seed, c));
  for (std::size_t s = 0; s < source.shard_count(); ++s) {
    const auto shard = source.shard(s);
    for (std::size_t r = 0; r < shard->n_rows(); ++r) {
      if (!filter(shard->alignment[r].subject_id)) continue;
      auto cols = shard->x.row_indices(r);
      auto vals = shard->x.row_values(r);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (mask && !(*mask)[cols[k]]) continue;
        reservoirs[cols[k]].add(vals[k]);
      }
    }
  }
  BinningTable table;
  table.max_bins = max_bins;
  table.edges.resize(n_cols);
  table.observed.resize(n_cols);
  for (std::size_t c = 0; c < n_cols; ++c) {
    table.observed[c] = reservoirs[c].seen();
    if (reservoirs[c].seen() > 0) table.edges[c] = quantile_edges(reservoirs[c].sample(), max_bins);
  }
  return table;
}

int BinnedMatrix::find(std::size_t r, std::uint32_t col) const {
  const auto begin = cols.begin() + static_cast<std::ptrdiff_t>(indptr[r]);
  const auto end = cols.begin() + static_cast<std::ptrdiff_t>(indptr[r + 1]);
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return -1;
  return bins[static_cast<std::size_t>(it - cols.begin())];
}

BinnedMatrix bin_rows(const SparseShardMatrix& x, std::span<const std::size_t> rows, const BinningTable& table) {
  BinnedMatrix out;
  out.indptr.reserve(rows.size() + 1);
  for (std::size_t r : rows) {
    auto cols = x.row_indices(r);
    auto vals = x.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      // Columns never observed in training (or masked out) carry no signal.
      if (table.observed[cols[k]] == 0) continue;
      out.cols.push_back(cols[k]);
      out.bins.push_back(table.bin(cols[k], vals[k]));
    }
    out.indptr.push_back(out.cols.size());
  }
  return out;
}

}  // namespace medtab
