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

#include "medtab/pipeline.hpp"

#include <chrono>
#include <regex>

#include "medtab/code_selection.hpp"
#include "medtab/event_store.hpp"
#include "medtab/feature_ops.hpp"
#include "medtab/labels.hpp"
#include "medtab/metrics.hpp"
#include "medtab/sparse_matrix.hpp"
#include "medtab/tabularizer.hpp"

namespace medtab {

namespace {

const char* const kDefaultWindows = "1d,7d,30d,365d,full";

class StageTimer {
 public:
  explicit StageTimer(std::string stage) { outcome_.stage = std::move(stage); }

  StageOutcome finish(bool cached, std::string hash, json summary) {
    outcome_.cached = cached;
    outcome_.config_hash = std::move(hash);
    outcome_.summary = std::move(summary);
    outcome_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    outcome_.peak_rss_bytes = peak_rss_bytes();
    log_info(cached ? "stage cached" : "stage built", outcome_.to_json());
    return outcome_;
  }

 private:
  StageOutcome outcome_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string dataset_hash(const fs::path& root) {
  return ShardedDataset::open(root).manifest().created_config_hash;
}

std::string current_hash(const fs::path& root, const std::string& stage) {
  if (stage == "dataset") return dataset_hash(root);
  const auto stamp = read_stamp(root, stage);
  if (!stamp) throw UserError("stage '" + stage + "' has not been run for " + root.string() + "; run it first");
  return stamp->at("config_hash").get<std::string>();
}

// Verifies that `stage` and everything upstream of it were built from the
// current outputs of their inputs.
void check_fresh(const fs::path& root, const std::string& stage) {
  const auto stamp = read_stamp(root, stage);
  if (!stamp) throw UserError("stage '" + stage + "' has not been run for " + root.string() + "; run it first");
  for (const auto& [upstream, hash] : stamp->at("upstream").items()) {
    const std::string now = current_hash(root, upstream);
    if (now != hash.get<std::string>())
      throw UserError("stage '" + stage + "' is stale: it was built from " + upstream + " " +
                      hash.get<std::string>().substr(0, 12) + " but " + upstream + " is now " + now.substr(0, 12) +
                      "; rerun " + stage);
    if (upstream != "dataset") check_fresh(root, upstream);
  }
}

bool stamp_matches(const fs::path& root, const std::string& stage, const std::string& hash) {
  const auto stamp = read_stamp(root, stage);
  return stamp && stamp->value("config_hash", "") == hash;
}

void write_stamp(const fs::path& root, const std::string& stage, const std::string& hash, const json& upstream,
                 const json& params, const json& summary) {
  fs::create_directories(root / ".stages");
  const json doc = {{"stage", stage},
                    {"config_hash", hash},
                    {"upstream", upstream},
                    {"params", params},
                    {"summary", summary}};
  write_file_atomic(layout::stamp(root, stage), doc.dump(2) + "\n");
}

json cached_summary(const fs::path& root, const std::string& stage) {
  return read_stamp(root, stage)->value("summary", json::object());
}

void check_task_name(const std::string& task) {
  static const std::regex ok("[A-Za-z0-9_.-]+");
  if (task.empty() || !std::regex_match(task, ok) || task == "." || task == "..")
    throw UserError("task name '" + task + "' must use letters, digits, '_', '-' or '.'");
}

AlignMode parse_align(const std::string& s) {
  if (s == "strict_before") return AlignMode::StrictBefore;
  if (s == "at_or_before") return AlignMode::AtOrBefore;
  throw UserError("unknown alignment '" + s + "' (expected strict_before or at_or_before)");
}

FeatureSchema schema_for(const fs::path& root, const TabConfig& config) {
  return build_feature_schema(read_code_metadata(layout::code_metadata(root)), config);
}

json tab_params(const TabConfig& config) { return config.to_json(); }

template <class Margins>
Evaluation evaluate_with(const TaskSource& source, const RowFilter& filter, Margins&& margins) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (std::size_t s = 0; s < source.shard_count(); ++s) {
    const auto shard = source.shard(s);
    const auto rows = filtered_rows(*shard, filter);
    const SparseShardMatrix x = select_rows(shard->x, rows);
    const std::vector<double> m = margins(x);
    scores.insert(scores.end(), m.begin(), m.end());
    for (std::size_t r : rows) labels.push_back(shard->y[r]);
  }
  Evaluation e;
  e.n_rows = scores.size();
  e.n_positive = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  e.auroc = auroc(scores, labels);
  e.logloss = scores.empty() ? 0.0 : logloss(scores, labels);
  return e;
}

IntRange int_range(const json& v, const std::string& key) {
  if (v.is_number_integer()) return {v.get<std::int64_t>(), v.get<std::int64_t>()};
  if (v.is_array() && v.size() == 2) return {v[0].get<std::int64_t>(), v[1].get<std::int64_t>()};
  throw UserError("sweep.space." + key + " must be an integer or [lo, hi]");
}

RealRange real_range(const json& v, RealRange base, const std::string& key) {
  if (v.is_number()) {
    base.lo = base.hi = v.get<double>();
  } else if (v.is_array() && v.size() == 2) {
    base.lo = v[0].get<double>();
    base.hi = v[1].get<double>();
  } else {
    throw UserError("sweep.space." + key + " must be a number or [lo, hi]");
  }
  return base;
}

}  // namespace

json ModelSettings::to_json() const {
  json j = {{"learner", learner}, {"memory", memory_mode_name(memory)}, {"seed", seed}};
  if (learner == "gbdt") j["gbdt"] = gbdt.to_json();
  if (learner == "sgd") j["sgd"] = sgd.to_json();
  j["max_by_correlation"] = max_by_correlation ? json(*max_by_correlation) : json(nullptr);
  j["min_correlation"] = min_correlation ? json(*min_correlation) : json(nullptr);
  if (sweep) {
    j["sweep"] = {{"budget", budget}, {"space", space_overrides}};
  }
  return j;
}

json StageOutcome::to_json() const {
  return {{"stage", stage},
          {"cached", cached},
          {"config_hash", config_hash},
          {"wall_seconds", wall_seconds},
          {"peak_rss_bytes", peak_rss_bytes},
          {"summary", summary}};
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = {"jobs",
                               "seed",
                               "tabularization.window_sizes",
                               "tabularization.aggs",
                               "tabularization.min_code_inclusion_count",
                               "tabularization.max_included_codes",
                               "tabularization.allowed_codes",
                               "tabularization.max_by_correlation",
                               "tabularization.min_correlation",
                               "task.name",
                               "task.labels",
                               "task.alignment",
                               "model.learner",
                               "model_params.iterator.keep_data_in_memory",
                               "sweep.enabled",
                               "sweep.budget"};
    for (const char* p : {"n_trees", "max_depth", "max_bins", "learning_rate", "lambda", "gamma", "min_child_hessian",
                          "colsample"})
      k.insert(std::string("model_params.gbdt.") + p);
    for (const char* p : {"epochs", "learning_rate", "decay", "l2", "impute", "standardize"})
      k.insert(std::string("model_params.sgd.") + p);
    for (const char* p : {"windows", "aggs", "min_code_count", "max_included_codes", "max_by_correlation", "max_depth",
                          "learning_rate", "lambda", "gamma", "colsample", "n_trees", "max_bins", "min_child_hessian"})
      k.insert(std::string("sweep.space.") + p);
    return k;
  }();
  return keys;
}

PipelineSettings settings_from_config(const Config& c) {
  c.require_known(known_config_keys());
  PipelineSettings s;
  s.jobs = c.get<int>("jobs", 1);
  if (s.jobs < 1) throw UserError("jobs must be at least 1");
  const auto seed = c.get<std::uint64_t>("seed", 0);

  const auto windows = c.get_list("tabularization.window_sizes");
  std::string wl;
  for (const auto& w : windows.value_or(split_list(kDefaultWindows))) wl += (wl.empty() ? "" : ",") + w;
  s.tab.windows = parse_windows(wl);
  if (const auto aggs = c.get_list("tabularization.aggs")) {
    std::string al;
    for (const auto& a : *aggs) al += (al.empty() ? "" : ",") + a;
    s.tab.aggs = parse_aggs(al);
  } else {
    s.tab.aggs.assign(std::begin(kAllAggs), std::end(kAllAggs));
  }
  s.tab.filter.min_code_count = c.get_optional<std::uint64_t>("tabularization.min_code_inclusion_count");
  s.tab.filter.max_included_codes = c.get_optional<std::uint64_t>("tabularization.max_included_codes");
  s.tab.filter.allowed_codes = c.get_list("tabularization.allowed_codes");

  s.task = c.get<std::string>("task.name", "");
  s.labels = c.get<std::string>("task.labels", "");
  s.align = parse_align(c.get<std::string>("task.alignment", "strict_before"));

  ModelSettings& m = s.model;
  m.seed = seed;
  m.learner = c.get<std::string>("model.learner", "gbdt");
  if (m.learner != "gbdt" && m.learner != "sgd") throw UserError("model.learner must be gbdt or sgd");
  m.memory = c.get<bool>("model_params.iterator.keep_data_in_memory", true) ? MemoryMode::InMemory
                                                                            : MemoryMode::External;
  m.gbdt.n_trees = c.get<std::uint32_t>("model_params.gbdt.n_trees", m.gbdt.n_trees);
  m.gbdt.max_depth = c.get<std::uint32_t>("model_params.gbdt.max_depth", m.gbdt.max_depth);
  m.gbdt.max_bins = c.get<std::uint32_t>("model_params.gbdt.max_bins", m.gbdt.max_bins);
  m.gbdt.learning_rate = c.get<double>("model_params.gbdt.learning_rate", m.gbdt.learning_rate);
  m.gbdt.lambda = c.get<double>("model_params.gbdt.lambda", m.gbdt.lambda);
  m.gbdt.gamma = c.get<double>("model_params.gbdt.gamma", m.gbdt.gamma);
  m.gbdt.min_child_hessian = c.get<double>("model_params.gbdt.min_child_hessian", m.gbdt.min_child_hessian);
  m.gbdt.colsample = c.get<double>("model_params.gbdt.colsample", m.gbdt.colsample);
  m.gbdt.seed = seed;
  m.gbdt.validate();
  m.sgd.epochs = c.get<std::uint32_t>("model_params.sgd.epochs", m.sgd.epochs);
  m.sgd.learning_rate = c.get<double>("model_params.sgd.learning_rate", m.sgd.learning_rate);
  m.sgd.decay = c.get<double>("model_params.sgd.decay", m.sgd.decay);
  m.sgd.l2 = c.get<double>("model_params.sgd.l2", m.sgd.l2);
  if (const auto imp = c.get_optional<std::string>("model_params.sgd.impute"))
    m.sgd.impute = parse_impute_strategy(*imp);
  m.sgd.standardize = c.get<bool>("model_params.sgd.standardize", m.sgd.standardize);
  m.sgd.seed = seed;
  m.sgd.validate();
  m.max_by_correlation = c.get_optional<std::uint64_t>("tabularization.max_by_correlation");
  m.min_correlation = c.get_optional<double>("tabularization.min_correlation");
  m.sweep = c.get<bool>("sweep.enabled", false);
  m.budget = c.get<std::uint32_t>("sweep.budget", m.budget);
  for (const auto& [k, v] : c.values().items()) {
    const std::string prefix = "sweep.space.";
    if (k.rfind(prefix, 0) == 0) m.space_overrides[k.substr(prefix.size())] = v;
  }
  if (m.sweep && m.learner != "gbdt") throw UserError("sweeps are supported for the gbdt learner only");
  return s;
}

SearchSpace sweep_space(const FeatureSchema& schema, const json& overrides) {
  SearchSpace space = SearchSpace::for_schema(schema);
  for (const auto& [k, v] : overrides.items()) {
    if (k == "windows" || k == "aggs") {
      std::string list;
      if (v.is_string()) {
        list = v.get<std::string>();
      } else {
        for (const auto& item : v) list += (list.empty() ? "" : ",") + item.get<std::string>();
      }
      if (k == "windows") {
        std::vector<WindowSpec> keep;
        for (const auto& w : parse_windows(list)) {
          if (std::find(space.windows.begin(), space.windows.end(), w) == space.windows.end())
            throw UserError("sweep window " + w.name() + " is not in the tabularized superset");
          keep.push_back(w);
        }
        space.windows = keep;
      } else {
        std::vector<AggKind> keep;
        for (auto a : parse_aggs(list)) {
          if (std::find(space.aggs.begin(), space.aggs.end(), a) == space.aggs.end())
            throw UserError("sweep aggregation " + std::string(agg_name(a)) + " is not in the tabularized superset");
          keep.push_back(a);
        }
        space.aggs = keep;
      }
    } else if (k == "min_code_count") {
      space.min_code_count = int_range(v, k);
    } else if (k == "max_included_codes") {
      space.max_included_codes = v.is_null() ? std::nullopt : std::optional(int_range(v, k));
    } else if (k == "max_by_correlation") {
      space.max_by_correlation = v.is_null() ? std::nullopt : std::optional(int_range(v, k));
    } else if (k == "max_depth") {
      space.max_depth = int_range(v, k);
    } else if (k == "n_trees") {
      space.n_trees = int_range(v, k);
    } else if (k == "learning_rate") {
      space.learning_rate = real_range(v, space.learning_rate, k);
    } else if (k == "lambda") {
      space.lambda = real_range(v, space.lambda, k);
    } else if (k == "gamma") {
      space.gamma = real_range(v, space.gamma, k);
    } else if (k == "colsample") {
      space.colsample = real_range(v, space.colsample, k);
    } else if (k == "max_bins") {
      space.max_bins = v.get<std::uint32_t>();
    } else if (k == "min_child_hessian") {
      space.min_child_hessian = v.get<double>();
    } else {
      throw UserError("unknown sweep.space key '" + k + "'");
    }
  }
  space.validate();
  return space;
}

std::optional<json> read_stamp(const fs::path& root, const std::string& stage) {
  const fs::path p = layout::stamp(root, stage);
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw DataError("corrupt stage stamp " + p.string() + ": " + e.what());
  }
}

StageOutcome stage_describe(const fs::path& root, int jobs) {
  StageTimer timer("describe");
  const auto dataset = ShardedDataset::open(root);
  const std::string upstream = dataset.manifest().created_config_hash;
  const std::string hash = canonical_hash({{"stage", "describe"}, {"dataset", upstream}});
  if (stamp_matches(root, "describe", hash) && fs::exists(layout::code_metadata(root)))
    return timer.finish(true, hash, cached_summary(root, "describe"));
  const CodeMetadata metadata = describe(dataset, jobs);
  write_file_atomic(layout::code_metadata(root), serialize_code_metadata(metadata));
  const json summary = {{"n_codes", metadata.size()}, {"n_events", dataset.manifest().n_events}};
  write_stamp(root, "describe", hash, {{"dataset", upstream}}, json::object(), summary);
  return timer.finish(false, hash, summary);
}

StageOutcome stage_tabularize_static(const fs::path& root, const TabConfig& config, int jobs) {
  StageTimer timer("tabularize-static");
  check_fresh(root, "describe");
  const std::string upstream = current_hash(root, "describe");
  const FeatureSchema schema = schema_for(root, config);
  const FeatureSchema static_schema = schema.static_part();
  const std::string hash =
      canonical_hash({{"stage", "tabularize-static"}, {"describe", upstream}, {"schema", static_schema.hash()}});
  const fs::path out = layout::static_dir(root);
  if (stamp_matches(root, "tabularize-static", hash) && fs::exists(out / "schema.json"))
    return timer.finish(true, hash, cached_summary(root, "tabularize-static"));

  const auto dataset = ShardedDataset::open(root);
  const fs::path staging = staging_path(out);
  fs::create_directories(staging);
  std::vector<std::uint64_t> nnz(dataset.shard_count());
  parallel_for(dataset.shard_count(), jobs, [&](std::size_t s) {
    const SparseShardMatrix m = tabularize_static(dataset.load_shard(s), schema);
    nnz[s] = m.nnz();
    write_matrix(staging / shard_name(s), m);
  });
  write_file_atomic(staging / "schema.json", static_schema.to_json().dump(2) + "\n");
  publish_directory(staging, out);
  std::uint64_t total = 0;
  for (auto v : nnz) total += v;
  const json summary = {{"n_cols", static_schema.size()}, {"nnz", total}, {"static_schema_hash", static_schema.hash()}};
  write_stamp(root, "tabularize-static", hash, {{"describe", upstream}}, tab_params(config), summary);
  return timer.finish(false, hash, summary);
}

StageOutcome stage_tabularize_time_series(const fs::path& root, const TabConfig& config, int jobs) {
  StageTimer timer("tabularize-time-series");
  check_fresh(root, "tabularize-static");
  const std::string upstream = current_hash(root, "tabularize-static");
  const FeatureSchema schema = schema_for(root, config);
  const json static_summary = cached_summary(root, "tabularize-static");
  if (static_summary.value("static_schema_hash", "") != schema.static_part().hash())
    throw UserError(
        "stage 'tabularize-static' is stale: it was built with different code filters; rerun tabularize-static "
        "with the same tabularization options");
  const std::string hash =
      canonical_hash({{"stage", "tabularize-time-series"}, {"tabularize-static", upstream}, {"schema", schema.hash()}});
  const fs::path out = layout::time_series_dir(root);
  if (stamp_matches(root, "tabularize-time-series", hash) && fs::exists(out / "schema.json"))
    return timer.finish(true, hash, cached_summary(root, "tabularize-time-series"));

  const auto dataset = ShardedDataset::open(root);
  const std::size_t n_shards = dataset.shard_count();
  const int inner = std::max<int>(1, jobs / static_cast<int>(std::max<std::size_t>(1, n_shards)));
  const fs::path staging = staging_path(out);
  fs::create_directories(staging);
  std::vector<std::uint64_t> nnz(n_shards);
  parallel_for(n_shards, jobs, [&](std::size_t s) {
    const SparseShardMatrix static_block = read_matrix(layout::static_dir(root) / shard_name(s));
    const TimeSeriesOutput result = tabularize_time_series(dataset.load_shard(s), schema, &static_block, inner);
    for (std::size_t b = 0; b < schema.blocks().size(); ++b)
      write_matrix(staging / "blocks" / schema.blocks()[b].name() / shard_name(s), result.blocks[b]);
    write_matrix(staging / "full" / shard_name(s), result.assembled);
    nnz[s] = result.assembled.nnz();
  });
  write_file_atomic(staging / "schema.json", schema.to_json().dump(2) + "\n");
  publish_directory(staging, out);
  std::uint64_t total = 0;
  for (auto v : nnz) total += v;
  const json summary = {{"n_cols", schema.size()}, {"nnz", total}, {"schema_hash", schema.hash()}};
  write_stamp(root, "tabularize-time-series", hash, {{"tabularize-static", upstream}}, tab_params(config), summary);
  return timer.finish(false, hash, summary);
}

StageOutcome stage_cache_task(const fs::path& root, const std::string& task, const fs::path& labels, AlignMode mode,
                              int jobs) {
  check_task_name(task);
  const std::string stage = "cache-task." + task;
  StageTimer timer(stage);
  check_fresh(root, "tabularize-time-series");
  const std::string upstream = current_hash(root, "tabularize-time-series");
  const fs::path label_path = labels.empty() ? layout::default_labels(root, task) : labels;
  if (!fs::exists(label_path)) throw UserError("label file not found: " + label_path.string());
  std::vector<LabelRecord> records = read_labels(label_path);
  const std::string labels_hash = sha256_hex(serialize_labels(records));
  const std::string hash = canonical_hash({{"stage", "cache-task"},
                                           {"task", task},
                                           {"tabularize-time-series", upstream},
                                           {"labels", labels_hash},
                                           {"alignment", std::string(align_mode_name(mode))}});
  const fs::path out = layout::task_dir(root, task);
  if (stamp_matches(root, stage, hash) && fs::exists(out / "task_manifest.json"))
    return timer.finish(true, hash, cached_summary(root, stage));
  const auto dataset = ShardedDataset::open(root);
  const CacheTaskReport report = cache_task(dataset, layout::full_dir(root), std::move(records), mode, task, out, jobs);
  json summary = report.to_json();
  summary.erase("shards");
  write_stamp(root, stage, hash, {{"tabularize-time-series", upstream}},
              {{"labels", label_path.string()}, {"labels_sha256", labels_hash}}, summary);
  return timer.finish(false, hash, summary);
}

StageOutcome stage_model(const fs::path& root, const std::string& task, const ModelSettings& settings, int jobs) {
  check_task_name(task);
  const std::string stage = "model." + task;
  const std::string upstream_stage = "cache-task." + task;
  StageTimer timer(stage);
  check_fresh(root, upstream_stage);
  const std::string upstream = current_hash(root, upstream_stage);
  const std::string hash = canonical_hash(
      {{"stage", "model"}, {"task", task}, {upstream_stage, upstream}, {"settings", settings.to_json()}});
  const fs::path out = layout::model_dir(root, task);
  if (stamp_matches(root, stage, hash) && fs::exists(out / "model.json"))
    return timer.finish(true, hash, cached_summary(root, stage));

  const FeatureSchema schema = FeatureSchema::from_json(json::parse(read_file(layout::schema_file(root))));
  const fs::path tdir = layout::task_dir(root, task);
  std::unique_ptr<TaskSource> source;
  if (settings.memory == MemoryMode::InMemory)
    source = std::make_unique<InMemoryTaskSource>(InMemoryTaskSource::load(tdir));
  else
    source = std::make_unique<DiskTaskSource>(tdir);
  if (source->schema_hash() != schema.hash())
    throw UserError("stage '" + upstream_stage + "' is stale: task shards do not match the current tabularization");

  const SplitPlan plan{settings.seed};
  const RowFilter train = plan.filter({Split::Train});
  const RowFilter refit = plan.filter({Split::Train, Split::Tuning});
  const RowFilter test = plan.filter({Split::Test});
  const fs::path staging = staging_path(out);
  fs::create_directories(staging);
  json summary = {{"learner", settings.learner}, {"sweep", settings.sweep}};

  if (settings.sweep) {
    const CodeMetadata metadata = read_code_metadata(layout::code_metadata(root));
    SweepOptions options;
    options.budget = settings.budget;
    options.master_seed = settings.seed;
    options.jobs = jobs;
    options.memory = settings.memory;
    options.trial_model_dir = staging / "trials";
    const SweepResult result =
        run_sweep(*source, schema, metadata, sweep_space(schema, settings.space_overrides), plan, options);
    write_file_atomic(staging / "model.json", result.final_model.serialize());
    write_file_atomic(staging / "sweep_report.json", result.report.dump(2) + "\n");
    write_file_atomic(staging / "sweep_timings.json", result.timings.dump(2) + "\n");
    summary["best_trial_id"] = result.best_trial;
    summary["tuning_auroc"] = *result.trials[result.best_trial].tuning.auroc;
    summary["test"] = result.final_test.to_json();
  } else {
    ColumnMask mask = ColumnMask::all(schema.size());
    mask.provenance = {{"criterion", "all"}};
    if (settings.max_by_correlation || settings.min_correlation) {
      const auto r = column_correlations(*source, train, jobs);
      if (settings.max_by_correlation) mask = select_top_correlated(r, *settings.max_by_correlation, &mask);
      if (settings.min_correlation) {
        const ColumnMask base = mask;
        mask = select_min_correlation(r, *settings.min_correlation, &base);
      }
    }
    json report = {{"learner", settings.learner},
                   {"memory_mode", memory_mode_name(settings.memory)},
                   {"schema_hash", schema.hash()},
                   {"split", plan.to_json()},
                   {"mask", {{"n_columns", mask.count()}, {"provenance", mask.provenance}}}};
    Evaluation test_eval, fit_eval;
    if (settings.learner == "gbdt") {
      GbdtParams params = settings.gbdt;
      params.seed = settings.seed;
      GbdtFitReport fit;
      const GbdtModel model = fit_gbdt(*source, refit, params, settings.memory, &mask.keep, &fit);
      fit_eval = evaluate(model, *source, refit);
      test_eval = evaluate(model, *source, test);
      write_file_atomic(staging / "model.json", model.serialize());
      report["params"] = params.to_json();
      report["train_logloss"] = fit.train_logloss;
    } else {
      SgdParams params = settings.sgd;
      params.seed = settings.seed;
      SgdFitReport fit;
      const LinearModel model = fit_sgd_logistic(*source, refit, params, &mask.keep, &fit);
      const auto margins = [&](const SparseShardMatrix& x) { return model.predict_margin(x); };
      fit_eval = evaluate_with(*source, refit, margins);
      test_eval = evaluate_with(*source, test, margins);
      write_file_atomic(staging / "model.json", model.serialize());
      report["params"] = params.to_json();
      report["epoch_loss"] = fit.epoch_loss;
    }
    write_file_atomic(staging / "mask.json", mask.to_json().dump(2) + "\n");
    report["fit_rows"] = fit_eval.to_json();
    report["test"] = test_eval.to_json();
    write_file_atomic(staging / "model_report.json", report.dump(2) + "\n");
    summary["test"] = test_eval.to_json();
  }
  publish_directory(staging, out);
  write_stamp(root, stage, hash, {{upstream_stage, upstream}}, settings.to_json(), summary);
  return timer.finish(false, hash, summary);
}

std::vector<StageOutcome> run_pipeline(const fs::path& root, const PipelineSettings& settings) {
  if (settings.task.empty()) throw UserError("task.name is required to run the pipeline");
  std::vector<StageOutcome> out;
  out.push_back(stage_describe(root, settings.jobs));
  out.push_back(stage_tabularize_static(root, settings.tab, settings.jobs));
  out.push_back(stage_tabularize_time_series(root, settings.tab, settings.jobs));
  out.push_back(stage_cache_task(root, settings.task, settings.labels, settings.align, settings.jobs));
  out.push_back(stage_model(root, settings.task, settings.model, settings.jobs));
  return out;
}

}  // namespace medtab
