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

#include "medtab/sgd.hpp"

#include <cmath>
#include <numeric>

#include "medtab/metrics.hpp"

namespace medtab {

void SgdParams::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw UserError("sgd learning_rate must be positive");
  if (!(decay >= 0)) throw UserError("sgd decay must be >= 0");
  if (!(l2 >= 0) || !std::isfinite(l2)) throw UserError("sgd l2 must be >= 0");
}

json SgdParams::to_json() const {
  return {{"epochs", epochs},
          {"learning_rate", learning_rate},
          {"decay", decay},
          {"l2", l2},
          {"seed", seed},
          {"impute", impute ? json(std::string(impute_strategy_name(*impute))) : json(nullptr)},
          {"standardize", standardize}};
}

SgdParams SgdParams::from_json(const json& j) {
  SgdParams p;
  p.epochs = j.value("epochs", p.epochs);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.decay = j.value("decay", p.decay);
  p.l2 = j.value("l2", p.l2);
  p.seed = j.value("seed", p.seed);
  if (j.contains("impute") && !j["impute"].is_null())
    p.impute = parse_impute_strategy(j["impute"].get<std::string>());
  p.standardize = j.value("standardize", p.standardize);
  return p;
}

DenseMatrix LinearModel::features(const SparseShardMatrix& x, std::span<const std::size_t> rows) const {
  DenseMatrix d = densify(x, rows, columns, fill);
  if (scaler) d = scaler->apply(d);
  return d;
}

std::vector<double> LinearModel::predict_margin(const SparseShardMatrix& x) const {
  if (x.n_cols != n_cols) throw DataError("matrix has " + std::to_string(x.n_cols) + " columns, model expects " +
                                          std::to_string(n_cols));
  std::vector<std::size_t> rows(x.n_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const DenseMatrix d = features(x, rows);
  std::vector<double> out(d.rows, bias);
  for (std::size_t r = 0; r < d.rows; ++r)
    for (std::size_t c = 0; c < d.cols; ++c) out[r] += weights[c] * d.at(r, c);
  return out;
}

json LinearModel::to_json() const {
  json j = {{"format", "medtab-linear/1"}, {"params", params.to_json()}, {"seed", params.seed},
            {"columns", columns},         {"weights", weights},          {"bias", bias},
            {"fill", fill},               {"schema_hash", schema_hash},  {"n_cols", n_cols}};
  if (scaler) j["scaler"] = {{"mean", scaler->mean}, {"stddev", scaler->stddev}};
  return j;
}

std::string LinearModel::serialize() const { return to_json().dump() + "\n"; }

LinearModel LinearModel::from_json(const json& j, const std::string& expected_schema_hash) {
  try {
    if (j.at("format") != "medtab-linear/1") throw DataError("unsupported model format");
    LinearModel m;
    m.params = SgdParams::from_json(j.at("params"));
    m.columns = j.at("columns").get<std::vector<std::uint32_t>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.fill = j.at("fill").get<std::vector<double>>();
    m.schema_hash = j.at("schema_hash").get<std::string>();
    m.n_cols = j.at("n_cols").get<std::uint64_t>();
    if (!expected_schema_hash.empty() && m.schema_hash != expected_schema_hash)
      throw DataError("model was trained on schema " + m.schema_hash + " but the data has schema " +
                      expected_schema_hash);
    if (j.contains("scaler"))
      m.scaler = Standardizer{j["scaler"].at("mean").get<std::vector<double>>(),
                              j["scaler"].at("stddev").get<std::vector<double>>()};
    if (m.weights.size() != m.columns.size() || m.fill.size() != m.columns.size())
      throw DataError("linear model arrays disagree in length");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

LinearModel fit_sgd_logistic(const TaskSource& source, const RowFilter& filter, const SgdParams& params,
                             const std::vector<bool>* mask, SgdFitReport* report) {
  params.validate();
  LinearModel model;
  model.params = params;
  model.schema_hash = source.schema_hash();
  model.n_cols = source.n_cols();
  for (std::uint32_t c = 0; c < model.n_cols; ++c)
    if (!mask || (*mask)[c]) model.columns.push_back(c);
  const std::size_t k = model.columns.size();
  model.weights.assign(k, 0.0);
  model.fill = params.impute ? fit_imputer(source, filter, *params.impute, model.columns) : std::vector<double>(k, 0.0);

  std::size_t n = 0, positives = 0;
  if (params.standardize) {
    std::vector<long double> sum(k), sum_sq(k);
    for (std::size_t s = 0; s < source.shard_count(); ++s) {
      const auto shard = source.shard(s);
      const auto rows = filtered_rows(*shard, filter);
      const DenseMatrix d = densify(shard->x, rows, model.columns, model.fill);
      for (std::size_t r = 0; r < d.rows; ++r)
        for (std::size_t c = 0; c < k; ++c) {
          sum[c] += d.at(r, c);
          sum_sq[c] += static_cast<long double>(d.at(r, c)) * d.at(r, c);
        }
      n += d.rows;
    }
    Standardizer sc;
    sc.mean.resize(k);
    sc.stddev.resize(k);
    for (std::size_t c = 0; c < k && n > 0; ++c) {
      const long double mu = sum[c] / static_cast<long double>(n);
      const long double var = std::max(0.0L, sum_sq[c] / static_cast<long double>(n) - mu * mu);
      sc.mean[c] = static_cast<double>(mu);
      sc.stddev[c] = static_cast<double>(std::sqrt(var));
    }
    model.scaler = std::move(sc);
  }

  std::vector<double> losses;
  for (std::uint32_t e = 0; e < params.epochs; ++e) {
    const double rate = params.learning_rate / (1.0 + params.decay * e);
    const double shrink = std::max(0.0, 1.0 - rate * params.l2);
    long double loss = 0;
    std::size_t seen = 0;
    positives = 0;
    for (std::size_t s = 0; s < source.shard_count(); ++s) {
      const auto shard = source.shard(s);
      if (shard->x.n_cols != model.n_cols || shard->x.schema_hash != model.schema_hash)
        throw DataError("task shard " + shard_name(s) + " does not match the task schema");
      const auto rows = filtered_rows(*shard, filter);
      const DenseMatrix d = model.features(shard->x, rows);
      std::vector<std::size_t> order(d.rows);
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(derive_seed(derive_seed(params.seed, e), s));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t i : order) {
        const std::uint8_t y = shard->y[rows[i]];
        positives += y;
        double z = model.bias;
        for (std::size_t c = 0; c < k; ++c) z += model.weights[c] * d.at(i, c);
        const double p = sigmoid(z);
        const double row_loss = y ? -std::log(std::max(p, 1e-300)) : -std::log(std::max(1.0 - p, 1e-300));
        if (!std::isfinite(z) || !std::isfinite(row_loss))
          throw DataError("sgd diverged: non-finite loss at epoch " + std::to_string(e) + ", shard " +
                          shard_name(s) + ", learning rate " + format_double(rate) +
                          "; lower the learning rate or enable standardization");
        loss += row_loss;
        ++seen;
        const double g = p - y;
        for (std::size_t c = 0; c < k; ++c) model.weights[c] = model.weights[c] * shrink - rate * g * d.at(i, c);
        model.bias -= rate * g;
      }
    }
    if (e == 0 && (seen == 0 || positives == 0 || positives == seen))
      throw DataError("training rows must contain both classes");
    losses.push_back(seen ? static_cast<double>(loss / static_cast<long double>(seen)) : 0.0);
    n = seen;
  }
  if (report) {
    report->epoch_loss = std::move(losses);
    report->n_rows = n;
  }
  return model;
}

}  // namespace medtab
