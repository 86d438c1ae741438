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

#include "medtab/histogram.hpp"

namespace medtab {

HistLayout HistLayout::make(std::span<const std::uint32_t> columns, const BinningTable& table) {
  HistLayout layout;
  layout.columns.assign(columns.begin(), columns.end());
  layout.local.assign(table.n_cols(), -1);
  layout.offset.reserve(columns.size() + 1);
  layout.offset.push_back(0);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const std::uint32_t c = columns[j];
    if (c >= table.n_cols()) throw InvariantError("histogram column outside the binning table");
    if (j > 0 && columns[j - 1] >= c) throw InvariantError("histogram columns must be strictly increasing");
    layout.local[c] = static_cast<std::int32_t>(j);
    layout.offset.push_back(layout.offset.back() + table.n_bins(c) + 1);
  }
  return layout;
}

void accumulate_row(NodeHistogram& hist, const HistLayout& layout, const BinnedMatrix& m, std::size_t row,
                    const GradStat& gh) {
  hist.total += gh;
  for (std::uint64_t k = m.indptr[row]; k < m.indptr[row + 1]; ++k) {
    const std::int32_t j = layout.local[m.cols[k]];
    if (j < 0) continue;
    hist.cells[layout.offset[static_cast<std::size_t>(j)] + m.bins[k]] += gh;
  }
}

void finalize_missing(NodeHistogram& hist, const HistLayout& layout) {
  for (std::size_t j = 0; j < layout.columns.size(); ++j) {
    const std::size_t begin = layout.offset[j];
    const std::size_t miss = layout.offset[j + 1] - 1;
    GradStat observed;
    for (std::size_t k = begin; k < miss; ++k) observed += hist.cells[k];
    hist.cells[miss] = hist.total - observed;
  }
}

NodeHistogram build_histogram(const HistLayout& layout, const BinnedMatrix& m, std::span<const std::size_t> rows,
                              std::span<const GradStat> gh) {
  NodeHistogram hist(layout.cells());
  for (std::size_t r : rows) accumulate_row(hist, layout, m, r, gh[r]);
  finalize_missing(hist, layout);
  return hist;
}

NodeHistogram subtract(const NodeHistogram& parent, const NodeHistogram& child) {
  if (parent.cells.size() != child.cells.size()) throw InvariantError("histogram layouts differ");
  NodeHistogram out(parent.cells.size());
  for (std::size_t k = 0; k < out.cells.size(); ++k) out.cells[k] = parent.cells[k] - child.cells[k];
  out.total = parent.total - child.total;
  return out;
}

double leaf_weight(const GradStat& s, double lambda) { return -s.grad() / (s.hess() + lambda); }

namespace {
double score(const GradStat& s, double lambda) {
  const double g = s.grad();
  return g * g / (s.hess() + lambda);
}
}  // namespace

double split_gain(const GradStat& left, const GradStat& right, double lambda, double gamma) {
  return 0.5 * (score(left, lambda) + score(right, lambda) - score(left + right, lambda)) - gamma;
}

std::optional<SplitCandidate> find_best_split(const NodeHistogram& hist, const HistLayout& layout,
                                              const BinningTable& table, const SplitParams& params) {
  std::optional<SplitCandidate> best;
  const auto valid = [&](const GradStat& s) { return s.count > 0 && s.hess() >= params.min_child_hessian; };
  const auto consider = [&](std::uint32_t col, std::uint32_t bin, bool default_left, const GradStat& l,
                            const GradStat& r) {
    if (!valid(l) || !valid(r)) return;
    const double gain = split_gain(l, r, params.lambda, params.gamma);
    if (!(gain > 0)) return;
    if (best && !(gain > best->gain)) return;
    best = SplitCandidate{col, bin, default_left, gain, l, r};
  };
  for (std::size_t j = 0; j < layout.columns.size(); ++j) {
    const std::uint32_t col = layout.columns[j];
    const std::uint32_t nb = table.n_bins(col);
    const std::size_t base = layout.offset[j];
    const GradStat missing = hist.cells[base + nb];
    const GradStat observed = hist.total - missing;
    GradStat left_obs;
    for (std::uint32_t b = 0; b < nb; ++b) {
      left_obs += hist.cells[base + b];
      const GradStat right_obs = observed - left_obs;
      consider(col, b, true, left_obs + missing, right_obs);
      consider(col, b, false, left_obs, right_obs + missing);
    }
  }
  return best;
}

}  // namespace medtab
