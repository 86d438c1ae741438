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

#include "../acceptance/oracles.hpp"
#include "helpers.hpp"
#include "medtab/code_selection.hpp"
#include "medtab/feature_ops.hpp"

using namespace medtab;
using namespace medtab::testing;

namespace {

CodeMetadata counts(std::initializer_list<std::pair<const char*, std::uint64_t>> items) {
  CodeMetadata m;
  for (auto [code, n] : items) m[code].ts_occurrences = n;
  return m;
}

InMemoryTaskSource single(const DenseRows& x, const std::vector<std::uint8_t>& y) {
  std::vector<TaskShard> shards;
  shards.push_back(task_shard(x, y));
  return InMemoryTaskSource(std::move(shards));
}

}  // namespace

TEST_CASE("code selection by count, rank and allow-list") {
  CHECK(select_codes_min_count(counts({{"A", 5}, {"B", 3}, {"C", 1}}), 3) == std::set<std::string>{"A", "B"});
  CHECK(select_codes_top_n(counts({{"A", 5}, {"C", 3}, {"B", 3}}), 2) == std::set<std::string>{"A", "B"});
  CHECK(select_codes_allowed(counts({{"A", 5}, {"B", 3}}), {"A", "Z"}) == std::set<std::string>{"A"});
  CHECK_THROWS_AS(select_codes_min_count(counts({{"A", 1}}), 0), UserError);
  CodeFilter f;
  f.min_code_count = 2;
  f.max_included_codes = 1;
  CHECK(select_codes(counts({{"A", 5}, {"B", 7}, {"C", 1}}), f) == std::set<std::string>{"B"});
}

TEST_CASE("raising min_code_count never adds codes") {
  Rng rng(8);
  CodeMetadata m;
  for (int i = 0; i < 60; ++i) m["C" + std::to_string(i)].ts_occurrences = rng.between(1, 100);
  std::set<std::string> prev = select_codes_min_count(m, 1);
  for (std::uint64_t t = 2; t <= 101; ++t) {
    const auto next = select_codes_min_count(m, t);
    CHECK(std::includes(prev.begin(), prev.end(), next.begin(), next.end()));
    prev = next;
  }
  CHECK(prev.empty());
}

TEST_CASE("Pearson correlation on small examples") {
  auto r = column_correlations(single({{0.0}, {1.0}, {2.0}, {3.0}}, {0, 0, 1, 1}));
  CHECK(r[0] == doctest::Approx(0.894427191).epsilon(1e-9));
  // Missing entries count as zero.
  r = column_correlations(single({{std::nullopt}, {1.0}, {2.0}, {3.0}}, {0, 0, 1, 1}));
  CHECK(r[0] == doctest::Approx(0.894427191).epsilon(1e-9));
  r = column_correlations(single({{5.0, 0.0}, {5.0, 1.0}, {5.0, 0.0}, {5.0, 1.0}}, {0, 1, 0, 1}));
  CHECK(r[0] == 0.0);
  CHECK(r[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(column_correlations(single({{1.0}, {2.0}}, {1, 1})), DataError);
}

TEST_CASE("sparse correlations equal a dense recomputation across shards") {
  Rng rng(21);
  const std::size_t n_rows = 1000, n_cols = 200;
  DenseRows x(n_rows, std::vector<std::optional<double>>(n_cols));
  std::vector<std::uint8_t> y(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    y[r] = rng.bernoulli(0.3);
    for (std::size_t c = 0; c < n_cols; ++c)
      if (rng.bernoulli(0.1)) x[r][c] = static_cast<float>(rng.normal() + (y[r] ? 0.01 * c : 0.0));
  }
  std::vector<TaskShard> shards;
  for (std::size_t s = 0; s < 4; ++s) {
    DenseRows part(x.begin() + s * 250, x.begin() + (s + 1) * 250);
    std::vector<std::uint8_t> py(y.begin() + s * 250, y.begin() + (s + 1) * 250);
    shards.push_back(task_shard(part, py, static_cast<std::int64_t>(s * 250)));
  }
  const InMemoryTaskSource src(std::move(shards));
  const auto r = column_correlations(src, all_rows, 3);
  std::vector<double> yd(y.begin(), y.end());
  for (std::size_t c = 0; c < n_cols; ++c) {
    std::vector<double> col(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) col[i] = x[i][c] ? static_cast<double>(static_cast<float>(*x[i][c])) : 0.0;
    CHECK(std::abs(r[c] - oracle::pearson(col, yd)) <= 1e-9);
  }

  // Top-R agrees with a dense ranking by |r| (ties by column index).
  std::vector<std::size_t> order(n_cols);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return std::fabs(r[a]) > std::fabs(r[b]); });
  const auto mask = select_top_correlated(r, 25);
  CHECK(mask.count() == 25);
  for (std::size_t i = 0; i < 25; ++i) CHECK(mask.keep[order[i]]);

  // A subject filter only sees its rows.
  const auto half = column_correlations(src, [](std::int64_t s) { return s < 500; });
  std::vector<double> yh(yd.begin(), yd.begin() + 500);
  std::vector<double> col(500);
  for (std::size_t i = 0; i < 500; ++i) col[i] = x[i][7] ? static_cast<double>(static_cast<float>(*x[i][7])) : 0.0;
  CHECK(std::abs(half[7] - oracle::pearson(col, yh)) <= 1e-9);
}

TEST_CASE("column selection by correlation") {
  const std::vector<double> r{0.9, -0.95, 0.1};
  auto top = select_top_correlated(r, 1);
  CHECK(top.keep == std::vector<bool>{false, true, false});
  auto min = select_min_correlation(r, 0.5);
  CHECK(min.keep == std::vector<bool>{true, true, false});
  CHECK(select_min_correlation(r, 0.0).count() == 3);
  CHECK(select_top_correlated(r, 10).count() == 3);
  CHECK_THROWS_AS(select_top_correlated(r, 0), UserError);
  // Ties keep schema order.
  const std::vector<double> tied{0.5, -0.5, 0.5};
  CHECK(select_top_correlated(tied, 2).keep == std::vector<bool>{true, true, false});
  ColumnMask base = ColumnMask::all(3);
  base.keep[1] = false;
  CHECK(select_top_correlated(r, 1, &base).keep == std::vector<bool>{true, false, false});
  const auto back = ColumnMask::from_json(top.to_json());
  CHECK(back.keep == top.keep);
}

TEST_CASE("raising min_correlation never adds columns") {
  Rng rng(4);
  std::vector<double> r(100);
  for (auto& v : r) v = rng.uniform(-1, 1);
  auto prev = select_min_correlation(r, 0.0);
  for (int i = 1; i <= 100; ++i) {
    const auto next = select_min_correlation(r, i / 100.0);
    for (std::size_t c = 0; c < r.size(); ++c) CHECK((!next.keep[c] || prev.keep[c]));
    prev = next;
  }
}

TEST_CASE("imputation strategies") {
  const auto t = task_shard({{2.0, 1.0}, {std::nullopt, 1.0}, {4.0, 7.0}, {std::nullopt, std::nullopt}},
                            {0, 1, 0, 1});
  auto mean = impute(t.x, ImputeStrategy::Mean);
  CHECK(mean.at(1, 0) == 3.0);
  CHECK(mean.at(0, 0) == 2.0);
  CHECK(mean.at(2, 0) == 4.0);
  auto mode = impute(t.x, ImputeStrategy::Mode);
  CHECK(mode.at(3, 1) == 1.0);
  auto median = impute(t.x, ImputeStrategy::Median);
  CHECK(median.at(3, 1) == 1.0);
  CHECK(median.at(1, 0) == 3.0);

  const auto full = task_shard({{1.5}, {2.5}}, {0, 1});
  CHECK(impute(full.x, ImputeStrategy::Mean).values == std::vector<double>{1.5, 2.5});
  const auto empty = task_shard({{std::nullopt}, {std::nullopt}}, {0, 1}, 0, 1);
  CHECK(impute(empty.x, ImputeStrategy::Mean).values == std::vector<double>{0.0, 0.0});

  // Statistics come from the filtered training rows only.
  std::vector<TaskShard> shards;
  shards.push_back(task_shard({{2.0}, {4.0}, {100.0}}, {0, 1, 0}));
  const InMemoryTaskSource src(std::move(shards));
  const std::vector<std::uint32_t> cols{0};
  CHECK(fit_imputer(src, [](std::int64_t s) { return s < 2; }, ImputeStrategy::Mean, cols) ==
        std::vector<double>{3.0});
  CHECK(parse_impute_strategy("median_imputer") == ImputeStrategy::Median);
  CHECK_THROWS_AS(parse_impute_strategy("knn"), UserError);
}

TEST_CASE("imputation preserves observed entries bit-exactly") {
  Rng rng(9);
  DenseRows x(50, std::vector<std::optional<double>>(6));
  std::vector<std::uint8_t> y(50);
  for (auto& row : x)
    for (auto& v : row)
      if (rng.bernoulli(0.6)) v = rng.normal() * 1e3;
  const auto t = task_shard(x, y);
  for (auto s : {ImputeStrategy::Mean, ImputeStrategy::Median, ImputeStrategy::Mode}) {
    const auto d = impute(t.x, s);
    for (std::size_t r = 0; r < 50; ++r)
      for (std::size_t c = 0; c < 6; ++c)
        if (x[r][c]) CHECK(d.at(r, c) == static_cast<double>(static_cast<float>(*x[r][c])));
  }
}

TEST_CASE("standardization uses training statistics") {
  DenseMatrix train(2, 2);
  train.values = {0.0, 5.0, 2.0, 5.0};
  const auto st = Standardizer::fit(train);
  const auto z = standardize(train, st);
  CHECK(z.values == std::vector<double>{-1.0, 0.0, 1.0, 0.0});
  DenseMatrix test(1, 2);
  test.values = {4.0, 9.0};
  CHECK(standardize(test, st).values == std::vector<double>{3.0, 0.0});
}

TEST_CASE("mask for options keeps static columns and matching blocks") {
  CodeMetadata m = counts({{"A", 3}, {"B", 3}});
  m["S"].static_occurrences = 1;
  TabConfig c;
  c.windows = parse_windows("7d,full");
  c.aggs = parse_aggs("static/present,code/count,code/present");
  const auto schema = build_feature_schema(m, c);
  const std::vector<WindowSpec> w{WindowSpec::full()};
  const std::vector<AggKind> a{AggKind::StaticPresent, AggKind::CodeCount};
  const auto mask = mask_for_options(schema, w, a, {"A", "S"});
  std::vector<std::string> kept;
  for (auto col : mask.columns()) kept.push_back(schema.columns()[col].name());
  CHECK(kept == std::vector<std::string>{"S/static/present", "A/full/code/count"});
}
