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

#include "medtab/tuner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "medtab/code_selection.hpp"
#include "medtab/metrics.hpp"

namespace medtab {

namespace {

std::int64_t draw(Rng& rng, const IntRange& r) { return r.lo == r.hi ? r.lo : rng.between(r.lo, r.hi); }

double draw(Rng& rng, const RealRange& r) {
  if (r.lo == r.hi) return r.lo;
  if (r.log_scale) return std::exp(rng.uniform(std::log(r.lo), std::log(r.hi)));
  return rng.uniform(r.lo, r.hi);
}

template <class T>
std::vector<T> draw_subset(Rng& rng, const std::vector<T>& items) {
  std::vector<T> out;
  for (const auto& item : items)
    if (rng.bernoulli(0.5)) out.push_back(item);
  if (out.empty() && !items.empty()) out.push_back(items[rng.below(items.size())]);
  return out;
}

void check(const IntRange& r, std::string_view name, std::int64_t min) {
  if (r.lo < min || r.hi < r.lo) throw UserError("invalid search range for " + std::string(name));
}

void check(const RealRange& r, std::string_view name, double min, double max) {
  if (!(r.lo >= min) || !(r.hi >= r.lo) || !(r.hi <= max) || (r.log_scale && !(r.lo > 0)))
    throw UserError("invalid search range for " + std::string(name));
}

template <class T>
T clamp_to(T v, T lo, T hi) {
  return std::min(std::max(v, lo), hi);
}

}  // namespace

SearchSpace SearchSpace::for_schema(const FeatureSchema& schema) {
  SearchSpace space;
  for (const auto& block : schema.blocks()) {
    if (std::find(space.windows.begin(), space.windows.end(), block.window) == space.windows.end())
      space.windows.push_back(block.window);
  }
  for (const auto& c : schema.columns())
    if (std::find(space.aggs.begin(), space.aggs.end(), c.agg) == space.aggs.end()) space.aggs.push_back(c.agg);
  std::sort(space.aggs.begin(), space.aggs.end());
  return space;
}

void SearchSpace::validate() const {
  if (aggs.empty()) throw UserError("search space has no aggregations");
  check(min_code_count, "min_code_count", 1);
  if (max_included_codes) check(*max_included_codes, "max_included_codes", 1);
  if (max_by_correlation) check(*max_by_correlation, "max_by_correlation", 1);
  check(max_depth, "max_depth", 1);
  check(n_trees, "n_trees", 0);
  check(learning_rate, "learning_rate", 1e-12, 1e9);
  check(lambda, "lambda", 0.0, 1e12);
  check(gamma, "gamma", 0.0, 1e12);
  check(colsample, "colsample", 1e-12, 1.0);
  if (max_bins < 2 || max_bins > 256) throw UserError("max_bins must lie in [2, 256]");
}

json SearchSpace::to_json() const {
  json w = json::array(), a = json::array();
  for (const auto& x : windows) w.push_back(x.name());
  for (auto x : aggs) a.push_back(std::string(agg_name(x)));
  return {{"windows", w},
          {"aggs", a},
          {"min_code_count", min_code_count.to_json()},
          {"max_included_codes", max_included_codes ? max_included_codes->to_json() : json(nullptr)},
          {"max_by_correlation", max_by_correlation ? max_by_correlation->to_json() : json(nullptr)},
          {"max_depth", max_depth.to_json()},
          {"learning_rate", learning_rate.to_json()},
          {"lambda", lambda.to_json()},
          {"gamma", gamma.to_json()},
          {"colsample", colsample.to_json()},
          {"n_trees", n_trees.to_json()},
          {"max_bins", max_bins},
          {"min_child_hessian", min_child_hessian}};
}

json TrialConfig::to_json() const {
  json w = json::array(), a = json::array();
  for (const auto& x : windows) w.push_back(x.name());
  for (auto x : aggs) a.push_back(std::string(agg_name(x)));
  return {{"trial_id", trial_id},
          {"windows", w},
          {"aggs", a},
          {"min_code_count", min_code_count},
          {"max_included_codes", max_included_codes ? json(*max_included_codes) : json(nullptr)},
          {"max_by_correlation", max_by_correlation ? json(*max_by_correlation) : json(nullptr)},
          {"params", params.to_json()}};
}

TrialConfig sample_trial(const SearchSpace& space, std::uint64_t master_seed, std::uint32_t trial_id) {
  Rng rng(derive_seed(master_seed, trial_id));
  TrialConfig t;
  t.trial_id = trial_id;
  t.windows = draw_subset(rng, space.windows);
  t.aggs = draw_subset(rng, space.aggs);
  t.min_code_count = static_cast<std::uint64_t>(draw(rng, space.min_code_count));
  if (space.max_included_codes && rng.bernoulli(0.5))
    t.max_included_codes = static_cast<std::uint64_t>(draw(rng, *space.max_included_codes));
  if (space.max_by_correlation && rng.bernoulli(0.5))
    t.max_by_correlation = static_cast<std::uint64_t>(draw(rng, *space.max_by_correlation));
  t.params.max_depth = static_cast<std::uint32_t>(draw(rng, space.max_depth));
  t.params.learning_rate = draw(rng, space.learning_rate);
  t.params.lambda = draw(rng, space.lambda);
  t.params.gamma = draw(rng, space.gamma);
  t.params.colsample = draw(rng, space.colsample);
  t.params.n_trees = static_cast<std::uint32_t>(draw(rng, space.n_trees));
  t.params.max_bins = space.max_bins;
  t.params.min_child_hessian = space.min_child_hessian;
  t.params.seed = master_seed;
  return t;
}

TrialConfig default_trial(const SearchSpace& space, std::uint64_t master_seed) {
  TrialConfig t;
  t.windows = space.windows;
  t.aggs = space.aggs;
  t.min_code_count = static_cast<std::uint64_t>(space.min_code_count.lo);
  const GbdtParams d;
  t.params.max_depth = static_cast<std::uint32_t>(
      clamp_to<std::int64_t>(d.max_depth, space.max_depth.lo, space.max_depth.hi));
  t.params.learning_rate = clamp_to(d.learning_rate, space.learning_rate.lo, space.learning_rate.hi);
  t.params.lambda = clamp_to(d.lambda, space.lambda.lo, space.lambda.hi);
  t.params.gamma = clamp_to(d.gamma, space.gamma.lo, space.gamma.hi);
  t.params.colsample = clamp_to(d.colsample, space.colsample.lo, space.colsample.hi);
  t.params.n_trees =
      static_cast<std::uint32_t>(clamp_to<std::int64_t>(d.n_trees, space.n_trees.lo, space.n_trees.hi));
  t.params.max_bins = space.max_bins;
  t.params.min_child_hessian = space.min_child_hessian;
  t.params.seed = master_seed;
  return t;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Tuning: return "tuning";
    case Split::Test: return "test";
  }
  return "?";
}

Split SplitPlan::of(std::int64_t subject_id) const {
  const double u = static_cast<double>(subject_hash(derive_seed(seed, 0x5b117), subject_id) >> 11) * 0x1.0p-53;
  if (u < train_fraction) return Split::Train;
  if (u < train_fraction + tuning_fraction) return Split::Tuning;
  return Split::Test;
}

RowFilter SplitPlan::filter(std::initializer_list<Split> splits) const {
  std::vector<Split> keep(splits);
  SplitPlan plan = *this;
  return [plan, keep](std::int64_t subject) {
    const Split s = plan.of(subject);
    return std::find(keep.begin(), keep.end(), s) != keep.end();
  };
}

json SplitPlan::to_json() const {
  return {{"seed", seed},
          {"train_fraction", train_fraction},
          {"tuning_fraction", tuning_fraction},
          {"test_fraction", 1.0 - train_fraction - tuning_fraction},
          {"unit", "subject"}};
}

json Evaluation::to_json() const {
  return {{"n_rows", n_rows}, {"n_positive", n_positive}, {"auroc", auroc ? json(*auroc) : json(nullptr)},
          {"logloss", logloss}};
}

Evaluation evaluate(const GbdtModel& model, const TaskSource& source, const RowFilter& filter) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (std::size_t s = 0; s < source.shard_count(); ++s) {
    const auto shard = source.shard(s);
    if (shard->x.schema_hash != model.schema_hash)
      throw DataError("task shard " + shard_name(s) + " does not match the model schema");
    for (std::size_t r : filtered_rows(*shard, filter)) {
      scores.push_back(model.predict_margin(shard->x.row_indices(r), shard->x.row_values(r)));
      labels.push_back(shard->y[r]);
    }
  }
  Evaluation e;
  e.n_rows = scores.size();
  e.n_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  e.auroc = auroc(scores, labels);
  e.logloss = scores.empty() ? 0.0 : logloss(scores, labels);
  return e;
}

ColumnMask trial_mask(const TrialConfig& trial, const FeatureSchema& schema, const CodeMetadata& metadata,
                      const std::vector<double>* correlations) {
  CodeFilter filter;
  filter.min_code_count = trial.min_code_count;
  filter.max_included_codes = trial.max_included_codes;
  const auto codes = select_codes(metadata, filter);
  ColumnMask mask = mask_for_options(schema, trial.windows, trial.aggs, codes);
  json provenance = mask.provenance;
  provenance["min_code_count"] = trial.min_code_count;
  provenance["max_included_codes"] = trial.max_included_codes ? json(*trial.max_included_codes) : json(nullptr);
  if (trial.max_by_correlation) {
    if (!correlations) throw InvariantError("trial needs column correlations");
    mask = select_top_correlated(*correlations, *trial.max_by_correlation, &mask);
    provenance["max_by_correlation"] = *trial.max_by_correlation;
  }
  mask.provenance = provenance;
  return mask;
}

SweepResult run_sweep(const TaskSource& source, const FeatureSchema& schema, const CodeMetadata& metadata,
                      const SearchSpace& space, const SplitPlan& plan, const SweepOptions& options) {
  space.validate();
  if (options.budget < 1) throw UserError("sweep budget must be at least 1");
  if (schema.hash() != source.schema_hash())
    throw DataError("task cache schema " + source.schema_hash() + " differs from the tabularization schema " +
                    schema.hash() + "; rerun cache-task");

  const RowFilter train = plan.filter({Split::Train});
  const RowFilter tuning = plan.filter({Split::Tuning});

  std::vector<TrialResult> results(options.budget);
  for (std::uint32_t i = 0; i < options.budget; ++i) {
    results[i].config = (i == 0 && options.include_default) ? default_trial(space, options.master_seed)
                                                            : sample_trial(space, options.master_seed, i);
    results[i].config.trial_id = i;
  }

  std::vector<double> correlations;
  const bool need_corr = std::any_of(results.begin(), results.end(),
                                     [](const TrialResult& t) { return t.config.max_by_correlation.has_value(); });
  if (need_corr) correlations = column_correlations(source, train, options.jobs);

  if (!options.trial_model_dir.empty()) fs::create_directories(options.trial_model_dir);
  parallel_for(results.size(), options.jobs, [&](std::size_t i) {
    TrialResult& t = results[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      const ColumnMask mask = trial_mask(t.config, schema, metadata, need_corr ? &correlations : nullptr);
      t.n_columns = mask.count();
      if (t.n_columns == 0) throw DataError("trial mask selects no columns");
      const GbdtModel model = fit_gbdt(source, train, t.config.params, options.memory, &mask.keep);
      t.tuning = evaluate(model, source, tuning);
      if (!t.tuning.auroc) throw DataError("tuning split contains a single class");
      if (!options.trial_model_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "trial_%04zu.json", i);
        write_file_atomic(options.trial_model_dir / name, model.serialize());
        t.model_path = (options.trial_model_dir.filename() / name).string();
      }
      t.ok = true;
    } catch (const std::exception& e) {
      t.error = e.what();
      log_warn("trial failed", {{"trial", i}, {"error", t.error}});
    }
    t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log_info("trial", {{"trial", i},
                       {"ok", t.ok},
                       {"tuning_auroc", t.ok ? json(*t.tuning.auroc) : json(nullptr)},
                       {"wall_seconds", t.wall_seconds}});
  });

  std::optional<std::uint32_t> best;
  for (std::uint32_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok) continue;
    if (!best || *results[i].tuning.auroc > *results[*best].tuning.auroc) best = i;
  }
  if (!best) throw DataError("all " + std::to_string(results.size()) + " trials failed; first error: " +
                             results.front().error);

  SweepResult out;
  out.best_trial = *best;
  const TrialConfig& cfg = results[*best].config;
  const ColumnMask mask = trial_mask(cfg, schema, metadata, need_corr ? &correlations : nullptr);
  const RowFilter refit = plan.filter({Split::Train, Split::Tuning});
  const auto start = std::chrono::steady_clock::now();
  out.final_model = fit_gbdt(source, refit, cfg.params, options.memory, &mask.keep);
  out.final_train = evaluate(out.final_model, source, refit);
  out.final_test = evaluate(out.final_model, source, plan.filter({Split::Test}));
  const double refit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json trials = json::array(), timings = json::array();
  for (const auto& t : results) {
    json j = {{"trial_id", t.config.trial_id}, {"config", t.config.to_json()}, {"status", t.ok ? "ok" : "failed"}};
    if (t.ok) {
      j["n_columns"] = t.n_columns;
      j["tuning"] = t.tuning.to_json();
      j["model_path"] = t.model_path.empty() ? json(nullptr) : json(t.model_path);
    } else {
      j["error"] = t.error;
    }
    trials.push_back(j);
    timings.push_back({{"trial_id", t.config.trial_id}, {"wall_seconds", t.wall_seconds}});
  }
  out.report = {{"format", "medtab-sweep/1"},
                {"master_seed", options.master_seed},
                {"budget", options.budget},
                {"memory_mode", memory_mode_name(options.memory)},
                {"schema_hash", schema.hash()},
                {"space", space.to_json()},
                {"split", plan.to_json()},
                {"trials", trials},
                {"best_trial_id", *best},
                {"best_config", cfg.to_json()},
                {"final", {{"mask", mask.to_json()},
                           {"refit_rows", out.final_train.to_json()},
                           {"test", out.final_test.to_json()}}}};
  out.timings = {{"trials", timings}, {"refit_seconds", refit_seconds}};
  out.trials = std::move(results);
  return out;
}

}  // namespace medtab
