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
#include "medtab/gbdt.hpp"
#include "medtab/metrics.hpp"

using namespace medtab;
using namespace medtab::testing;

namespace {

struct Toy {
  DenseRows x;
  std::vector<std::uint8_t> y;
};

/// y depends on column 0 (threshold), column 1 (missingness) and noise.
Toy toy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::optional<double>> row(4);
    row[0] = rng.normal();
    if (rng.bernoulli(0.5)) row[1] = rng.uniform();
    if (rng.bernoulli(0.8)) row[2] = static_cast<double>(rng.between(0, 3));
    if (rng.bernoulli(0.3)) row[3] = rng.normal();
    const double logit = 1.5 * *row[0] + (row[1] ? -1.0 : 1.0) + 0.5 * rng.normal();
    t.y.push_back(logit > 0);
    t.x.push_back(std::move(row));
  }
  return t;
}

InMemoryTaskSource sharded(const Toy& t, std::size_t n_shards) {
  std::vector<TaskShard> shards;
  const std::size_t per = (t.x.size() + n_shards - 1) / n_shards;
  for (std::size_t s = 0; s < n_shards; ++s) {
    const std::size_t lo = std::min(t.x.size(), s * per), hi = std::min(t.x.size(), lo + per);
    DenseRows x(t.x.begin() + lo, t.x.begin() + hi);
    std::vector<std::uint8_t> y(t.y.begin() + lo, t.y.begin() + hi);
    shards.push_back(task_shard(x, y, static_cast<std::int64_t>(lo), 4));
  }
  return InMemoryTaskSource(std::move(shards));
}

std::vector<double> predict_all(const GbdtModel& m, const InMemoryTaskSource& src) {
  std::vector<double> out;
  for (std::size_t s = 0; s < src.shard_count(); ++s) {
    const auto p = m.predict_margin(src.shard(s)->x);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

GbdtParams small_params() {
  GbdtParams p;
  p.n_trees = 15;
  p.max_depth = 3;
  p.max_bins = 16;
  p.learning_rate = 0.3;
  p.seed = 4;
  return p;
}

}  // namespace

TEST_CASE("one split on two rows gives leaf weights -0.4 and +0.4") {
  std::vector<TaskShard> shards;
  shards.push_back(task_shard({{0.0}, {1.0}}, {0, 1}));
  const InMemoryTaskSource src(std::move(shards));
  GbdtParams p;
  p.n_trees = 1;
  p.max_depth = 1;
  p.learning_rate = 1.0;
  p.min_child_hessian = 0.0;
  const auto m = fit_gbdt(src, all_rows, p, MemoryMode::InMemory);
  CHECK(m.base_score == 0.0);
  REQUIRE(m.trees.size() == 1);
  REQUIRE(m.trees[0].nodes.size() == 3);
  const auto pred = m.predict_margin(src.shard(0)->x);
  CHECK(pred[0] == doctest::Approx(-0.4));
  CHECK(pred[1] == doctest::Approx(0.4));
}

TEST_CASE("zero trees predict the training prevalence") {
  const Toy t = toy(200, 1);
  const auto src = sharded(t, 1);
  GbdtParams p;
  p.n_trees = 0;
  const auto m = fit_gbdt(src, all_rows, p, MemoryMode::InMemory);
  const double prevalence = std::count(t.y.begin(), t.y.end(), 1) / 200.0;
  for (double q : m.predict_proba(src.shard(0)->x)) CHECK(q == doctest::Approx(prevalence).epsilon(1e-12));
}

TEST_CASE("training loss never increases with a small learning rate") {
  const Toy t = toy(600, 2);
  const auto src = sharded(t, 3);
  for (double lr : {0.05, 0.3}) {
    GbdtParams p = small_params();
    p.learning_rate = lr;
    GbdtFitReport report;
    fit_gbdt(src, all_rows, p, MemoryMode::InMemory, nullptr, &report);
    REQUIRE(report.train_logloss.size() == p.n_trees);
    for (std::size_t i = 1; i < report.train_logloss.size(); ++i)
      CHECK(report.train_logloss[i] <= report.train_logloss[i - 1] + 1e-12);
  }
}

TEST_CASE("external and in-memory training produce identical bytes") {
  const Toy t = toy(500, 3);
  const auto src = sharded(t, 4);
  GbdtParams p = small_params();
  p.colsample = 0.6;
  GbdtFitReport ext_report;
  const auto a = fit_gbdt(src, all_rows, p, MemoryMode::InMemory);
  const auto b = fit_gbdt(src, all_rows, p, MemoryMode::External, nullptr, &ext_report);
  CHECK(a.serialize() == b.serialize());
  // One pass to load labels, then at least one per tree.
  CHECK(ext_report.data_passes >= p.n_trees + 1);
}

TEST_CASE("the fitted model does not depend on sharding or row order") {
  const Toy t = toy(500, 4);
  const auto one = fit_gbdt(sharded(t, 1), all_rows, small_params(), MemoryMode::InMemory);
  const auto five = fit_gbdt(sharded(t, 5), all_rows, small_params(), MemoryMode::InMemory);
  CHECK(one.serialize() == five.serialize());

  // Predictions per row are unaffected by the order rows are scored in.
  const auto src = sharded(t, 1);
  const auto base = one.predict_margin(src.shard(0)->x);
  std::vector<std::size_t> perm(500);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::reverse(perm.begin(), perm.end());
  const auto permuted = one.predict_margin(select_rows(src.shard(0)->x, perm));
  for (std::size_t i = 0; i < 500; ++i) CHECK(permuted[i] == base[perm[i]]);
}

TEST_CASE("training routing agrees with threshold routing") {
  const Toy t = toy(400, 5);
  const auto src = sharded(t, 1);
  GbdtParams p = small_params();
  p.n_trees = 1;
  p.learning_rate = 1.0;
  const auto m = fit_gbdt(src, all_rows, p, MemoryMode::InMemory);
  // One tree fit from base_score: its train loss equals the loss of predictions.
  GbdtFitReport report;
  fit_gbdt(src, all_rows, p, MemoryMode::InMemory, nullptr, &report);
  const auto pred = m.predict_margin(src.shard(0)->x);
  CHECK(logloss(pred, t.y) == doctest::Approx(report.train_logloss[0]).epsilon(1e-12));
}

TEST_CASE("missingness alone is learnable") {
  Rng rng(8);
  DenseRows x;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 1000; ++i) {
    const bool label = rng.bernoulli(0.5);
    std::vector<std::optional<double>> row(2);
    if (label) row[0] = rng.normal();  // same distribution when present
    row[1] = rng.normal();
    x.push_back(row);
    y.push_back(label);
  }
  std::vector<TaskShard> shards;
  shards.push_back(task_shard(x, y));
  const InMemoryTaskSource src(std::move(shards));
  const auto m = fit_gbdt(src, [](std::int64_t s) { return s < 700; }, small_params(), MemoryMode::InMemory);
  const auto pred = m.predict_margin(src.shard(0)->x);
  std::vector<double> held(pred.begin() + 700, pred.end());
  std::vector<std::uint8_t> held_y(y.begin() + 700, y.end());
  CHECK(*auroc(held, held_y) >= 0.95);
}

TEST_CASE("model JSON round trip and schema check") {
  const Toy t = toy(300, 6);
  const auto src = sharded(t, 2);
  const auto m = fit_gbdt(src, all_rows, small_params(), MemoryMode::InMemory);
  const auto back = GbdtModel::from_json(json::parse(m.serialize()), "test");
  CHECK(back.serialize() == m.serialize());
  CHECK(predict_all(back, src) == predict_all(m, src));
  CHECK_THROWS_AS(GbdtModel::from_json(json::parse(m.serialize()), "other"), DataError);
}

TEST_CASE("feature mask restricts split columns") {
  const Toy t = toy(300, 7);
  const auto src = sharded(t, 1);
  const std::vector<bool> mask{false, true, false, true};
  const auto m = fit_gbdt(src, all_rows, small_params(), MemoryMode::InMemory, &mask);
  CHECK(m.feature_mask == std::vector<std::uint32_t>{1, 3});
  for (const auto& tree : m.trees)
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) CHECK((node.column == 1 || node.column == 3));
}

TEST_CASE("invalid inputs are rejected") {
  std::vector<TaskShard> shards;
  shards.push_back(task_shard({{1.0}, {2.0}}, {1, 1}));
  const InMemoryTaskSource src(std::move(shards));
  CHECK_THROWS_AS(fit_gbdt(src, all_rows, GbdtParams{}, MemoryMode::InMemory), DataError);
  GbdtParams bad;
  bad.max_bins = 300;
  CHECK_THROWS_AS(bad.validate(), UserError);
  bad = GbdtParams{};
  bad.learning_rate = 0;
  CHECK_THROWS_AS(bad.validate(), UserError);
  CHECK(parse_memory_mode("true") == MemoryMode::InMemory);
  CHECK(parse_memory_mode("external") == MemoryMode::External);
  CHECK_THROWS_AS(parse_memory_mode("maybe"), UserError);
}
