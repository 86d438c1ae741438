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

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "medtab/binning.hpp"

namespace medtab {

/// Gradients and hessians are summed in fixed point so that histogram
/// totals, and parent minus child, are exact and order independent.
inline constexpr double kGradScale = 1099511627776.0;  // 2^40

struct GradStat {
  std::int64_t g = 0;
  std::int64_t h = 0;
  std::int64_t count = 0;

  static GradStat from(double grad, double hess) {
    return {std::llround(grad * kGradScale), std::llround(hess * kGradScale), 1};
  }
  double grad() const { return static_cast<double>(g) / kGradScale; }
  double hess() const { return static_cast<double>(h) / kGradScale; }

  GradStat& operator+=(const GradStat& o) {
    g += o.g;
    h += o.h;
    count += o.count;
    return *this;
  }
  GradStat& operator-=(const GradStat& o) {
    g -= o.g;
    h -= o.h;
    count -= o.count;
    return *this;
  }
  friend GradStat operator+(GradStat a, const GradStat& b) { return a += b; }
  friend GradStat operator-(GradStat a, const GradStat& b) { return a -= b; }
  bool operator==(const GradStat&) const = default;
};

/// Cell layout of one node histogram over a subset of columns. Column j
/// owns n_bins(col) observed cells followed by one MISSING cell.
struct HistLayout {
  std::vector<std::uint32_t> columns;
  std::vector<std::size_t> offset;  // size columns + 1
  std::vector<std::int32_t> local;  // global column -> index in columns, or -1

  static HistLayout make(std::span<const std::uint32_t> columns, const BinningTable& table);
  std::size_t cells() const { return offset.back(); }
};

struct NodeHistogram {
  std::vector<GradStat> cells;
  GradStat total;

  explicit NodeHistogram(std::size_t n_cells = 0) : cells(n_cells) {}
  bool operator==(const NodeHistogram&) const = default;
};

/// Adds one row to the observed cells and to the node total.
void accumulate_row(NodeHistogram& hist, const HistLayout& layout, const BinnedMatrix& m, std::size_t row,
                    const GradStat& gh);

/// Sets each MISSING cell to the node total minus that column's observed mass.
void finalize_missing(NodeHistogram& hist, const HistLayout& layout);

NodeHistogram build_histogram(const HistLayout& layout, const BinnedMatrix& m, std::span<const std::size_t> rows,
                              std::span<const GradStat> gh);

NodeHistogram subtract(const NodeHistogram& parent, const NodeHistogram& child);

struct SplitParams {
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_hessian = 1.0;
};

/// Observed bins <= bin go left. bin == n_bins - 1 separates observed from
/// missing. MISSING follows default_left.
struct SplitCandidate {
  std::uint32_t column = 0;
  std::uint32_t bin = 0;
  bool default_left = true;
  double gain = 0;
  GradStat left, right;
};

double leaf_weight(const GradStat& s, double lambda);
double split_gain(const GradStat& left, const GradStat& right, double lambda, double gamma);

/// Best positive-gain split of a finalized histogram. Ties keep the lowest
/// column, then the lowest bin, then default-left.
std::optional<SplitCandidate> find_best_split(const NodeHistogram& hist, const HistLayout& layout,
                                              const BinningTable& table, const SplitParams& params);

}  // namespace medtab
