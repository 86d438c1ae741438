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

#include "medtab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "medtab/common.hpp"

namespace medtab {

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

GradHess logistic_grad_hess(double s, std::uint8_t y) {
  const double p = sigmoid(s);
  return {p - static_cast<double>(y), std::max(p * (1.0 - p), 1e-16)};
}

std::optional<double> auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  MEDTAB_CHECK(scores.size() == labels.size(), "auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::uint64_t n_pos = 0;
  for (auto y : labels) n_pos += y != 0;
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of 1-based average ranks of the positives; ranks are half-integers,
  // so the sum is exact in double for any realistic n.
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) positive_rank_sum += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double logloss(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  MEDTAB_CHECK(scores.size() == labels.size(), "logloss: scores and labels differ in length");
  if (scores.empty()) return 0.0;
  long double total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(sigmoid(scores[i]), 1e-12, 1.0 - 1e-12);
    total -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return static_cast<double>(total / static_cast<long double>(scores.size()));
}

}  // namespace medtab
