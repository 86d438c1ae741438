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

// medtab command-line interface.

#include <unistd.h>

#include <CLI11.hpp>
#include <climits>
#include <cstdlib>
#include <iostream>

#include "medtab/bench.hpp"
#include "medtab/common.hpp"
#include "medtab/config.hpp"
#include "medtab/event_store.hpp"
#include "medtab/pipeline.hpp"
#include "medtab/synthetic.hpp"

namespace {

using namespace medtab;

// Options shared by the stage commands. Flags become config keys; trailing
// key=value arguments override everything else.
struct StageArgs {
  std::vector<std::string> positional;
  std::string config_file;
  std::map<std::string, std::string> flags;
  bool at_or_before = false;
  bool sweep = false;

  fs::path root() const {
    for (const auto& p : positional)
      if (p.find('=') == std::string::npos) return p;
    if (const char* env = std::getenv("MEDTAB_DATA_ROOT"); env && *env) return env;
    throw UserError("no data directory given and MEDTAB_DATA_ROOT is not set");
  }

  Config config() const {
    Config c;
    if (!config_file.empty()) c = Config::load(config_file);
    for (const auto& [k, v] : flags)
      if (!v.empty()) c.set(k, v);
    if (at_or_before) c.set_value("task.alignment", "at_or_before");
    if (sweep) c.set_value("sweep.enabled", true);
    std::vector<std::string> overrides;
    bool root_seen = false;
    for (const auto& p : positional) {
      if (p.find('=') != std::string::npos) {
        overrides.push_back(p);
      } else if (root_seen) {
        throw UserError("unexpected argument '" + p + "'");
      } else {
        root_seen = true;
      }
    }
    c.apply_overrides(overrides);
    return c;
  }
};

void add_stage_options(CLI::App* cmd, StageArgs& args, bool tab, bool task, bool model) {
  cmd->add_option("args", args.positional, "Data directory, then key=value overrides");
  cmd->add_option("--config", args.config_file, "JSON or YAML config with dotted keys");
  cmd->add_option("--jobs,-j", args.flags["jobs"], "Worker threads");
  if (tab) {
    cmd->add_option("--windows", args.flags["tabularization.window_sizes"], "Comma list, e.g. 1d,7d,30d,full");
    cmd->add_option("--aggs", args.flags["tabularization.aggs"], "Comma list of aggregations");
    cmd->add_option("--min-code-count", args.flags["tabularization.min_code_inclusion_count"]);
    cmd->add_option("--max-included-codes", args.flags["tabularization.max_included_codes"]);
    cmd->add_option("--allowed-codes", args.flags["tabularization.allowed_codes"], "Comma list of codes");
  }
  if (task) {
    cmd->add_option("--task", args.flags["task.name"], "Task name")->required();
    cmd->add_option("--labels", args.flags["task.labels"], "Label CSV file or directory");
    cmd->add_flag("--at-or-before", args.at_or_before, "Allow an event at the prediction time itself");
  }
  if (model) {
    cmd->add_option("--learner", args.flags["model.learner"], "gbdt or sgd");
    cmd->add_option("--in-memory", args.flags["model_params.iterator.keep_data_in_memory"], "true or false");
    cmd->add_flag("--sweep", args.sweep, "Random-search sweep over featurization and learner options");
    cmd->add_option("--budget", args.flags["sweep.budget"], "Number of sweep trials");
    cmd->add_option("--seed", args.flags["seed"], "Master seed");
    cmd->add_option("--max-by-correlation", args.flags["tabularization.max_by_correlation"]);
    cmd->add_option("--min-correlation", args.flags["tabularization.min_correlation"]);
  }
}

void print(const json& j) { std::cout << j.dump() << std::endl; }

fs::path self_exe() {
  char buf[PATH_MAX];
  const ssize_t n = readlink("/proc/self/exe", buf, sizeof buf - 1);
  if (n <= 0) throw InvariantError("cannot resolve the running executable");
  return std::string(buf, static_cast<std::size_t>(n));
}

int run(int argc, char** argv) {
  CLI::App app{"medtab: tabularize medical event streams and train baseline models"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Shard long-form event CSV files into a dataset");
  std::string ingest_root;
  std::vector<std::string> ingest_inputs;
  std::uint64_t ingest_shards = 1, ingest_seed = 0;
  ingest_cmd->add_option("root", ingest_root, "Output data directory");
  ingest_cmd->add_option("--input,-i", ingest_inputs, "Event CSV (subject_id,time,code,numeric_value)")->required();
  ingest_cmd->add_option("--shards", ingest_shards, "Number of subject shards");
  ingest_cmd->add_option("--seed", ingest_seed, "Shard assignment seed");

  StageArgs describe_args, static_args, ts_args, cache_args, model_args, run_args;
  auto* describe_cmd = app.add_subcommand("describe", "Count code occurrences");
  add_stage_options(describe_cmd, describe_args, false, false, false);
  auto* static_cmd = app.add_subcommand("tabularize-static", "Static features per subject");
  add_stage_options(static_cmd, static_args, true, false, false);
  auto* ts_cmd = app.add_subcommand("tabularize-time-series", "Rolling-window features per event row");
  add_stage_options(ts_cmd, ts_args, true, false, false);
  auto* cache_cmd = app.add_subcommand("cache-task", "Align task labels to feature rows");
  add_stage_options(cache_cmd, cache_args, false, true, false);
  auto* model_cmd = app.add_subcommand("model", "Train and evaluate a model on a cached task");
  add_stage_options(model_cmd, model_args, false, false, true);
  model_cmd->add_option("--task", model_args.flags["task.name"], "Task name")->required();
  auto* run_cmd = app.add_subcommand("run", "Run all five stages from a config");
  add_stage_options(run_cmd, run_args, true, false, true);
  run_cmd->add_option("--task", run_args.flags["task.name"], "Task name");
  run_cmd->add_option("--labels", run_args.flags["task.labels"], "Label CSV file or directory");
  run_cmd->add_flag("--at-or-before", run_args.at_or_before, "Allow an event at the prediction time itself");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset with a planted label rule");
  std::string synth_root, synth_task = "planted", synth_noise_task;
  SynthSpec spec;
  std::uint64_t synth_shards = 1;
  synth_cmd->add_option("root", synth_root, "Output data directory")->required();
  synth_cmd->add_option("--subjects", spec.n_subjects);
  synth_cmd->add_option("--codes", spec.n_codes);
  synth_cmd->add_option("--events-per-subject", spec.events_per_subject);
  synth_cmd->add_option("--labels-per-subject", spec.labels_per_subject);
  synth_cmd->add_option("--seed", spec.seed);
  synth_cmd->add_option("--noise", spec.rule.noise, "Probability a label is replaced by a fair coin");
  synth_cmd->add_option("--shards", synth_shards);
  synth_cmd->add_option("--task", synth_task, "Name of the planted-rule label set");
  synth_cmd->add_option("--noise-task", synth_noise_task, "Also write a pure-noise label set with this name");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Scaling benchmark on the code/count full-window workload");
  BenchConfig bench;
  std::string bench_sizes = "25000,50000,100000", bench_unit = "events", bench_out, bench_work;
  bench_cmd->add_option("--sizes", bench_sizes, "Comma list of sizes");
  bench_cmd->add_option("--unit", bench_unit, "events or subjects");
  bench_cmd->add_option("--events-per-subject", bench.events_per_subject);
  bench_cmd->add_option("--codes", bench.n_codes);
  bench_cmd->add_option("--shard-subjects", bench.shard_subjects, "Subjects per shard (held fixed)");
  bench_cmd->add_option("--repeats", bench.repeats);
  bench_cmd->add_option("--time-limit", bench.time_limit_seconds, "Seconds per run before DNF");
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--work-dir", bench_work, "Scratch directory for generated datasets")->required();
  bench_cmd->add_option("--out", bench_out, "Write the JSON report here");

  auto* worker_cmd = app.add_subcommand("bench-worker");
  worker_cmd->group("");
  std::string worker_root;
  worker_cmd->add_option("root", worker_root)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (log_level == "debug") set_log_level(LogLevel::Debug);
  else if (log_level == "info") set_log_level(LogLevel::Info);
  else if (log_level == "warn") set_log_level(LogLevel::Warn);
  else if (log_level == "error") set_log_level(LogLevel::Error);
  else if (log_level == "off") set_log_level(LogLevel::Off);
  else throw UserError("unknown log level '" + log_level + "'");

  if (*ingest_cmd) {
    if (ingest_root.empty()) {
      const char* env = std::getenv("MEDTAB_DATA_ROOT");
      if (!env || !*env) throw UserError("no data directory given and MEDTAB_DATA_ROOT is not set");
      ingest_root = env;
    }
    std::vector<fs::path> inputs(ingest_inputs.begin(), ingest_inputs.end());
    const auto ds = ingest(inputs, ingest_root, IngestConfig{ingest_shards, ingest_seed});
    print(ds.manifest().to_json());
    return 0;
  }
  if (*describe_cmd) {
    const auto s = settings_from_config(describe_args.config());
    print(stage_describe(describe_args.root(), s.jobs).to_json());
    return 0;
  }
  if (*static_cmd) {
    const auto s = settings_from_config(static_args.config());
    print(stage_tabularize_static(static_args.root(), s.tab, s.jobs).to_json());
    return 0;
  }
  if (*ts_cmd) {
    const auto s = settings_from_config(ts_args.config());
    print(stage_tabularize_time_series(ts_args.root(), s.tab, s.jobs).to_json());
    return 0;
  }
  if (*cache_cmd) {
    const auto s = settings_from_config(cache_args.config());
    print(stage_cache_task(cache_args.root(), s.task, s.labels, s.align, s.jobs).to_json());
    return 0;
  }
  if (*model_cmd) {
    const auto s = settings_from_config(model_args.config());
    print(stage_model(model_args.root(), s.task, s.model, s.jobs).to_json());
    return 0;
  }
  if (*run_cmd) {
    const auto s = settings_from_config(run_args.config());
    for (const auto& outcome : run_pipeline(run_args.root(), s)) print(outcome.to_json());
    return 0;
  }
  if (*synth_cmd) {
    spec.validate();
    if (synth_shards < 1) throw UserError("--shards must be at least 1");
    SynthData data = generate_synthetic(spec);
    write_label_set(synth_root, synth_task, data.labels, {{"task", synth_task}, {"synth", spec.to_json()}});
    if (!synth_noise_task.empty()) {
      PlantedRule noise = spec.rule;
      noise.noise = 1.0;
      const auto labels = generate_labels(data.events, noise, spec.labels_per_subject, derive_seed(spec.seed, 0x401));
      write_label_set(synth_root, synth_noise_task, labels,
                      {{"task", synth_noise_task}, {"synth", spec.to_json()}, {"rule", noise.to_json()}});
    }
    const auto ds = write_dataset(std::move(data.events), synth_root, IngestConfig{synth_shards, spec.seed},
                                  {{"synth", spec.to_json()}});
    print(ds.manifest().to_json());
    return 0;
  }
  if (*bench_cmd) {
    bench.sizes.clear();
    for (const auto& s : split_list(bench_sizes)) {
      try {
        bench.sizes.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw UserError("bad size '" + s + "'");
      }
    }
    if (bench_unit != "events" && bench_unit != "subjects") throw UserError("--unit must be events or subjects");
    bench.sizes_are_events = bench_unit == "events";
    bench.work_dir = bench_work;
    bench.worker_exe = self_exe();
    const auto runs = run_bench(bench);
    const json report = bench_report(bench, runs);
    if (!bench_out.empty()) write_file_atomic(bench_out, report.dump(2) + "\n");
    std::cerr << bench_table(runs);
    print(report);
    return 0;
  }
  if (*worker_cmd) return bench_worker_main(worker_root);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const medtab::Error& e) {
    medtab::log_event(medtab::LogLevel::Error, e.what(), {{"exit_code", e.exit_code()}});
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    medtab::log_event(medtab::LogLevel::Error, e.what(), {{"exit_code", 3}});
    return 3;
  } catch (const nlohmann::json::exception& e) {
    medtab::log_event(medtab::LogLevel::Error, e.what(), {{"exit_code", 3}});
    return 3;
  } catch (const std::exception& e) {
    medtab::log_event(medtab::LogLevel::Error, e.what(), {{"exit_code", 4}});
    return 4;
  }
}
