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

#include <cmath>

#include "helpers.hpp"
#include "medtab/metrics.hpp"
#include "medtab/sgd.hpp"

using namespace medtab;
using namespace medtab::testing;

namespace {

/// Two blobs separated by the line x0 + x1 = 0 with a margin.
InMemoryTaskSource separable(std::size_t n, std::uint64_t seed, bool with_missing = false) {
  Rng rng(seed);
  DenseRows x;
  std::vector<std::uint8_t> y;
  while (x.size() < n) {
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    if (std::abs(a + b) < 0.5) continue;
    std::vector<std::optional<double>> row{a, b, std::nullopt};
    if (with_missing && rng.bernoulli(0.5)) row[2] = rng.normal();
    x.push_back(row);
    y.push_back(a + b > 0);
  }
  std::vector<TaskShard> shards;
  shards.push_back(task_shard(x, y));
  return InMemoryTaskSource(std::move(shards));
}

double accuracy(const LinearModel& m, const TaskShard& t) {
  const auto z = m.predict_margin(t.x);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < z.size(); ++i) ok += (z[i] > 0) == (t.y[i] != 0);
  return static_cast<double>(ok) / static_cast<double>(z.size());
}

double norm(const LinearModel& m) {
  double s = 0;
  for (double w : m.weights) s += w * w;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("separable data is fit perfectly within 50 epochs") {
  const auto src = separable(300, 1);
  SgdParams p;
  p.epochs = 50;
  p.learning_rate = 0.5;
  p.l2 = 0;
  const auto m = fit_sgd_logistic(src, all_rows, p);
  CHECK(accuracy(m, *src.shard(0)) == 1.0);
}

TEST_CASE("zero epochs predicts one half") {
  const auto src = separable(50, 2);
  SgdParams p;
  p.epochs = 0;
  const auto m = fit_sgd_logistic(src, all_rows, p);
  for (double z : m.predict_margin(src.shard(0)->x)) CHECK(sigmoid(z) == 0.5);
}

TEST_CASE("weight norm shrinks as l2 grows") {
  const auto src = separable(200, 3);
  double prev = INFINITY, unregularized = 0;
  for (double l2 : {0.0, 0.01, 0.1, 1.0, 3.0, 10.0}) {
    SgdParams p;
    p.epochs = 30;
    p.l2 = l2;
    const double n = norm(fit_sgd_logistic(src, all_rows, p));
    if (l2 == 0.0) unregularized = n;
    CHECK(n <= prev);
    prev = n;
  }
  CHECK(prev < 0.1 * unregularized);
}

TEST_CASE("sgd is deterministic and round-trips through JSON") {
  const auto src = separable(120, 4, true);
  SgdParams p;
  p.impute = ImputeStrategy::Mean;
  p.seed = 9;
  const auto a = fit_sgd_logistic(src, all_rows, p);
  const auto b = fit_sgd_logistic(src, all_rows, p);
  CHECK(a.serialize() == b.serialize());
  const auto back = LinearModel::from_json(json::parse(a.serialize()), "test");
  CHECK(back.predict_margin(src.shard(0)->x) == a.predict_margin(src.shard(0)->x));
  CHECK_THROWS_AS(LinearModel::from_json(json::parse(a.serialize()), "nope"), DataError);
  p.seed = 10;
  CHECK(fit_sgd_logistic(src, all_rows, p).serialize() != a.serialize());
}

TEST_CASE("mask and class checks") {
  const auto src = separable(80, 5);
  const std::vector<bool> mask{true, false, false};
  const auto m = fit_sgd_logistic(src, all_rows, SgdParams{}, &mask);
  CHECK(m.columns == std::vector<std::uint32_t>{0});
  CHECK_THROWS_AS(fit_sgd_logistic(src, [](std::int64_t) { return false; }, SgdParams{}), DataError);
  SgdParams bad;
  bad.learning_rate = -1;
  CHECK_THROWS_AS(fit_sgd_logistic(src, all_rows, bad), UserError);
}

TEST_CASE("divergence is reported, not silently continued") {
  std::vector<TaskShard> shards;
  shards.push_back(task_shard({{1e10}, {-1e10}, {2e10}}, {1, 0, 0}));
  const InMemoryTaskSource src(std::move(shards));
  SgdParams p;
  p.standardize = false;
  p.learning_rate = 1e300;
  p.decay = 0;
  CHECK_THROWS_AS(fit_sgd_logistic(src, all_rows, p), DataError);
}
