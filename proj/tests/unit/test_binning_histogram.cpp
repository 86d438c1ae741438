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

#include <doctest.h>

#include "helpers.hpp"
#include "medtab/histogram.hpp"
#include "medtab/metrics.hpp"

using namespace medtab;
using namespace medtab::testing;

namespace {

InMemoryTaskSource source_of(const DenseRows& x, const std::vector<std::uint8_t>& y) {
  std::vector<TaskShard> shards;
  shards.push_back(task_shard(x, y));
  return InMemoryTaskSource(std::move(shards));
}

std::vector<std::size_t> all_of(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

}  // namespace

TEST_CASE("quantile edges") {
  std::vector<float> sample;
  for (int i = 1; i <= 100; ++i) sample.push_back(static_cast<float>(i));
  const auto e = quantile_edges(sample, 4);
  REQUIRE(e.size() == 3);
  CHECK(std::abs(e[0] - 25.0f) <= 1.0f);
  CHECK(std::abs(e[1] - 50.0f) <= 1.0f);
  CHECK(std::abs(e[2] - 75.0f) <= 1.0f);
  CHECK(quantile_edges({3.0f, 3.0f, 3.0f}, 4).empty());
  // Few distinct values: one bin each.
  CHECK(quantile_edges({2.0f, 1.0f, 2.0f, 9.0f}, 8) == std::vector<float>{1.0f, 2.0f});
  CHECK(quantile_edges({}, 8).empty());
}

TEST_CASE("bin fitting is deterministic and skips unobserved columns") {
  Rng rng(1);
  DenseRows x(400, std::vector<std::optional<double>>(3));
  std::vector<std::uint8_t> y(400);
  for (auto& row : x) {
    row[0] = rng.normal();
    row[1] = 4.0;
  }
  const auto src = source_of(x, y);
  const auto a = fit_bins(src, all_rows, 16, 5);
  const auto b = fit_bins(src, all_rows, 16, 5);
  CHECK(a == b);
  CHECK(a.edges[0].size() == 15);
  CHECK(a.edges[1].empty());
  CHECK(a.observed[2] == 0);
  CHECK(a.observed[0] == 400);
  CHECK_THROWS(fit_bins(src, all_rows, 1, 5));
  CHECK_THROWS(fit_bins(src, all_rows, 257, 5));

  const auto binned = bin_rows(src.shard(0)->x, all_of(400), a);
  CHECK(binned.find(0, 2) == -1);
  CHECK(binned.find(0, 1) == 0);
  for (std::size_t r = 0; r < 400; ++r) {
    const int bin = binned.find(r, 0);
    const float v = static_cast<float>(*x[r][0]);
    if (bin > 0) CHECK(v > a.edges[0][static_cast<std::size_t>(bin) - 1]);
    if (bin < 15) CHECK(v <= a.edges[0][static_cast<std::size_t>(bin)]);
  }
}

TEST_CASE("a single row lands in its bin") {
  BinningTable table;
  table.max_bins = 4;
  table.edges = {{1.0f, 2.0f, 3.0f}, {0.5f}};
  table.observed = {1, 1};
  const auto t = task_shard({{2.5, std::nullopt}}, {1});
  const std::vector<std::size_t> rows{0};
  const auto m = bin_rows(t.x, rows, table);
  const std::vector<std::uint32_t> cols{0, 1};
  const auto layout = HistLayout::make(cols, table);
  CHECK(layout.cells() == 5 + 3);
  const std::vector<GradStat> gh{GradStat::from(-0.5, 0.25)};
  const auto hist = build_histogram(layout, m, rows, gh);
  for (std::size_t k = 0; k < layout.cells(); ++k) {
    if (k == 2) {
      CHECK(hist.cells[k].grad() == -0.5);
      CHECK(hist.cells[k].hess() == 0.25);
      CHECK(hist.cells[k].count == 1);
    } else if (k == 7) {
      CHECK(hist.cells[k].count == 1);  // column 1 missing
    } else {
      CHECK(hist.cells[k] == GradStat{});
    }
  }
}

TEST_CASE("sibling histogram by subtraction is exact") {
  Rng rng(12);
  DenseRows x(300, std::vector<std::optional<double>>(5));
  std::vector<std::uint8_t> y(300);
  for (auto& row : x)
    for (auto& v : row)
      if (rng.bernoulli(0.7)) v = rng.normal();
  const auto src = source_of(x, y);
  const auto table = fit_bins(src, all_rows, 8, 0);
  const auto m = bin_rows(src.shard(0)->x, all_of(300), table);
  const std::vector<std::uint32_t> cols{0, 1, 2, 3, 4};
  const auto layout = HistLayout::make(cols, table);
  std::vector<GradStat> gh;
  for (int i = 0; i < 300; ++i) gh.push_back(GradStat::from(rng.uniform(-1, 1), rng.uniform(0, 0.25)));
  std::vector<std::size_t> left, right;
  for (std::size_t r = 0; r < 300; ++r) (rng.bernoulli(0.3) ? left : right).push_back(r);
  const auto parent = build_histogram(layout, m, all_of(300), gh);
  const auto l = build_histogram(layout, m, left, gh);
  const auto r = build_histogram(layout, m, right, gh);
  CHECK(subtract(parent, l) == r);
}

TEST_CASE("fully missing column contributes only to its missing cell") {
  BinningTable table;
  table.max_bins = 4;
  table.edges = {{0.0f}};
  table.observed = {0};
  const auto t = task_shard({{std::nullopt}, {std::nullopt}}, {0, 1}, 0, 1);
  const auto m = bin_rows(t.x, all_of(2), table);
  const std::vector<std::uint32_t> cols{0};
  const auto layout = HistLayout::make(cols, table);
  const std::vector<GradStat> gh{GradStat::from(0.5, 0.25), GradStat::from(-0.5, 0.25)};
  const auto hist = build_histogram(layout, m, all_of(2), gh);
  CHECK(hist.cells[0].count == 0);
  CHECK(hist.cells[1].count == 0);
  CHECK(hist.cells[2].count == 2);
  CHECK_FALSE(find_best_split(hist, layout, table, SplitParams{1.0, 0.0, 0.0}).has_value());
}

TEST_CASE("two-row split gives leaf weights of -0.4 and +0.4") {
  const auto t = task_shard({{0.0}, {1.0}}, {0, 1});
  BinningTable table;
  table.max_bins = 2;
  table.edges = {{0.0f}};
  table.observed = {2};
  const auto m = bin_rows(t.x, all_of(2), table);
  const std::vector<std::uint32_t> cols{0};
  const auto layout = HistLayout::make(cols, table);
  const auto g0 = logistic_grad_hess(0.0, 0), g1 = logistic_grad_hess(0.0, 1);
  const std::vector<GradStat> gh{GradStat::from(g0.g, g0.h), GradStat::from(g1.g, g1.h)};
  const auto hist = build_histogram(layout, m, all_of(2), gh);
  const auto split = find_best_split(hist, layout, table, SplitParams{1.0, 0.0, 0.0});
  REQUIRE(split.has_value());
  CHECK(split->column == 0);
  CHECK(split->bin == 0);
  CHECK(leaf_weight(split->left, 1.0) == doctest::Approx(-0.4));
  CHECK(leaf_weight(split->right, 1.0) == doctest::Approx(0.4));
}

TEST_CASE("missing direction matches an exhaustive two-sided search") {
  Rng rng(30);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 80, n_cols = 3;
    DenseRows x(n, std::vector<std::optional<double>>(n_cols));
    std::vector<std::uint8_t> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      y[r] = rng.bernoulli(0.5);
      for (std::size_t c = 0; c < n_cols; ++c) {
        // Column 0 carries signal only through missingness.
        const double p_missing = c == 0 ? (y[r] ? 0.8 : 0.1) : 0.3;
        if (!rng.bernoulli(p_missing)) x[r][c] = static_cast<double>(rng.between(0, 5));
      }
    }
    const auto src = source_of(x, y);
    const auto table = fit_bins(src, all_rows, 8, 0);
    const auto m = bin_rows(src.shard(0)->x, all_of(n), table);
    const std::vector<std::uint32_t> cols{0, 1, 2};
    const auto layout = HistLayout::make(cols, table);
    std::vector<GradStat> gh;
    for (std::size_t r = 0; r < n; ++r) {
      const auto d = logistic_grad_hess(0.3, y[r]);
      gh.push_back(GradStat::from(d.g, d.h));
    }
    const SplitParams params{1.0, 0.0, 0.5};
    const auto split = find_best_split(build_histogram(layout, m, all_of(n), gh), layout, table, params);

    // Brute force over rows: every column, bin and missing side.
    double best_gain = 0;
    std::optional<std::tuple<std::uint32_t, std::uint32_t, bool>> best;
    for (std::uint32_t c = 0; c < n_cols; ++c) {
      for (std::uint32_t b = 0; b < table.n_bins(c); ++b) {
        for (bool miss_left : {true, false}) {
          GradStat l, rr;
          for (std::size_t r = 0; r < n; ++r) {
            const int bin = m.find(r, c);
            const bool go_left = bin < 0 ? miss_left : static_cast<std::uint32_t>(bin) <= b;
            (go_left ? l : rr) += gh[r];
          }
          if (l.count == 0 || rr.count == 0 || l.hess() < params.min_child_hessian ||
              rr.hess() < params.min_child_hessian)
            continue;
          const double g = split_gain(l, rr, params.lambda, params.gamma);
          if (g > best_gain) {
            best_gain = g;
            best = {c, b, miss_left};
          }
        }
      }
    }
    REQUIRE(split.has_value() == best.has_value());
    if (!best) continue;
    CHECK(split->gain == best_gain);
    CHECK(split->column == std::get<0>(*best));
    CHECK(split->bin == std::get<1>(*best));
    CHECK(split->default_left == std::get<2>(*best));
  }
}

TEST_CASE("reservoir keeps everything below capacity") {
  Reservoir r(10, 3);
  for (int i = 0; i < 7; ++i) r.add(static_cast<float>(i));
  CHECK(r.sample().size() == 7);
  for (int i = 0; i < 100; ++i) r.add(static_cast<float>(i));
  CHECK(r.sample().size() == 10);
  CHECK(r.seen() == 107);
}
