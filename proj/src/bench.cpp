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

#include "medtab/bench.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <thread>

#include "medtab/event_store.hpp"
#include "medtab/feature_schema.hpp"
#include "medtab/sparse_matrix.hpp"
#include "medtab/synthetic.hpp"
#include "medtab/tabularizer.hpp"

namespace medtab {

json BenchRun::to_json() const {
  json j = {{"subjects", subjects}, {"events", events},   {"codes", codes},
            {"shards", shards},     {"nnz", nnz},         {"dnf", dnf},
            {"wall_seconds", dnf ? json(nullptr) : json(wall_seconds)},
            {"peak_rss_bytes", peak_rss_bytes}, {"avg_rss_bytes", avg_rss_bytes}};
  if (!error.empty()) j["error"] = error;
  return j;
}

json WorkerResult::to_json() const {
  return {{"nnz", nnz}, {"wall_seconds", wall_seconds}, {"avg_rss_bytes", avg_rss_bytes},
          {"peak_rss_bytes", peak_rss_bytes}};
}

WorkerResult run_bench_workload(const fs::path& dataset_root) {
  std::atomic<bool> done{false};
  std::uint64_t samples = 0;
  long double rss_sum = 0;
  std::jthread sampler([&] {
    while (!done.load()) {
      rss_sum += static_cast<long double>(current_rss_bytes());
      ++samples;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  });

  const auto start = std::chrono::steady_clock::now();
  WorkerResult result;
  const auto dataset = ShardedDataset::open(dataset_root);
  const CodeMetadata metadata = read_code_metadata(dataset_root / "code_metadata.csv");
  TabConfig config;
  config.windows = {WindowSpec::full()};
  config.aggs = {AggKind::CodeCount};
  const FeatureSchema schema = build_feature_schema(metadata, config);
  const fs::path out = dataset_root / "bench_out";
  for (std::size_t s = 0; s < dataset.shard_count(); ++s) {
    const EventShard shard = dataset.load_shard(s);
    const ShardIndex index(shard);
    const SparseShardMatrix m = tabularize_block(index, schema.blocks().front(), schema.hash());
    write_matrix(out / shard_name(s), m);
    result.nnz += m.nnz();
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  done = true;
  sampler.join();
  const std::uint64_t last = current_rss_bytes();
  result.avg_rss_bytes = samples ? static_cast<std::uint64_t>(rss_sum / samples) : last;
  result.peak_rss_bytes = peak_rss_bytes();
  return result;
}

int bench_worker_main(const fs::path& dataset_root) {
  const WorkerResult r = run_bench_workload(dataset_root);
  std::cout << r.to_json().dump() << std::endl;
  return 0;
}

namespace {

struct ChildOutcome {
  bool finished = false;
  int status = 0;
  std::string output;
};

ChildOutcome run_worker(const fs::path& exe, const fs::path& dataset, double limit_seconds) {
  int fds[2];
  if (pipe(fds) != 0) throw InvariantError("pipe() failed");
  const pid_t pid = fork();
  if (pid < 0) throw InvariantError("fork() failed");
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    const std::string e = exe.string(), d = dataset.string();
    execl(e.c_str(), e.c_str(), "bench-worker", d.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  ChildOutcome out;
  std::jthread reader([&] {
    char buf[4096];
    ssize_t n;
    while ((n = read(fds[0], buf, sizeof buf)) > 0) out.output.append(buf, static_cast<std::size_t>(n));
  });
  const auto start = std::chrono::steady_clock::now();
  while (true) {
    const pid_t r = waitpid(pid, &out.status, WNOHANG);
    if (r == pid) {
      out.finished = true;
      break;
    }
    if (std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > limit_seconds) {
      kill(pid, SIGKILL);
      waitpid(pid, &out.status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  reader.join();
  close(fds[0]);
  return out;
}

}  // namespace

std::vector<BenchRun> run_bench(const BenchConfig& config) {
  if (config.sizes.empty()) throw UserError("bench needs at least one size");
  if (config.work_dir.empty()) throw UserError("bench needs a work directory");
  if (config.repeats < 1) throw UserError("bench repeats must be >= 1");
  if (config.events_per_subject < 1 || config.shard_subjects < 1) throw UserError("bench shape must be positive");
  if (!fs::exists(config.worker_exe)) throw UserError("bench worker executable not found: " + config.worker_exe.string());
  std::vector<BenchRun> runs;
  for (std::uint64_t size : config.sizes) {
    BenchRun run;
    SynthSpec spec;
    spec.n_subjects = config.sizes_are_events ? std::max<std::uint64_t>(1, size / config.events_per_subject) : size;
    spec.events_per_subject = config.events_per_subject;
    spec.n_codes = config.n_codes;
    spec.signal_rate = 0.05;
    spec.seed = derive_seed(config.seed, size);
    spec.validate();
    const std::uint64_t shards = (spec.n_subjects + config.shard_subjects - 1) / config.shard_subjects;
    const fs::path root = config.work_dir / ("size_" + std::to_string(size));
    SynthData data = generate_synthetic(spec);
    const auto dataset = write_dataset(std::move(data.events), root, IngestConfig{shards, config.seed},
                                       {{"synthetic", spec.to_json()}});
    const CodeMetadata metadata = describe(dataset);
    write_file_atomic(root / "code_metadata.csv", serialize_code_metadata(metadata));
    run.subjects = dataset.manifest().n_subjects;
    run.events = dataset.manifest().n_events;
    run.codes = metadata.size();
    run.shards = shards;

    bool have = false;
    for (std::uint32_t k = 0; k < config.repeats; ++k) {
      const ChildOutcome child = run_worker(config.worker_exe, root, config.time_limit_seconds);
      if (!child.finished) {
        run.dnf = true;
        break;
      }
      if (!WIFEXITED(child.status) || WEXITSTATUS(child.status) != 0) {
        run.dnf = true;
        run.error = "worker exited with status " + std::to_string(child.status);
        break;
      }
      WorkerResult w;
      try {
        const json j = json::parse(child.output.substr(child.output.find('{')));
        w.nnz = j.at("nnz");
        w.wall_seconds = j.at("wall_seconds");
        w.avg_rss_bytes = j.at("avg_rss_bytes");
        w.peak_rss_bytes = j.at("peak_rss_bytes");
      } catch (const std::exception& e) {
        throw InvariantError("unreadable bench worker output: " + child.output);
      }
      if (!have || w.wall_seconds < run.wall_seconds) {
        run.wall_seconds = w.wall_seconds;
        run.nnz = w.nnz;
      }
      run.peak_rss_bytes = have ? std::min(run.peak_rss_bytes, w.peak_rss_bytes) : w.peak_rss_bytes;
      run.avg_rss_bytes = have ? std::min(run.avg_rss_bytes, w.avg_rss_bytes) : w.avg_rss_bytes;
      have = true;
    }
    log_info("bench run", run.to_json());
    runs.push_back(run);
  }
  return runs;
}

json bench_report(const BenchConfig& config, const std::vector<BenchRun>& runs) {
  json rows = json::array();
  for (const auto& r : runs) rows.push_back(r.to_json());
  json ratios = json::array();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto& a = runs[i - 1];
    const auto& b = runs[i];
    json r = {{"from_events", a.events}, {"to_events", b.events},
              {"event_ratio", static_cast<double>(b.events) / static_cast<double>(a.events)}};
    r["time_ratio"] = (a.dnf || b.dnf || a.wall_seconds <= 0) ? json(nullptr) : json(b.wall_seconds / a.wall_seconds);
    r["peak_rss_ratio"] = (a.peak_rss_bytes == 0) ? json(nullptr)
                                                  : json(static_cast<double>(b.peak_rss_bytes) /
                                                         static_cast<double>(a.peak_rss_bytes));
    ratios.push_back(r);
  }
  return {{"workload", "code/count over the full window, shards processed sequentially"},
          {"events_per_subject", config.events_per_subject},
          {"shard_subjects", config.shard_subjects},
          {"repeats", config.repeats},
          {"time_limit_seconds", config.time_limit_seconds},
          {"seed", config.seed},
          {"runs", rows},
          {"ratios", ratios}};
}

std::string bench_table(const std::vector<BenchRun>& runs) {
  std::string out = "subjects     events  codes shards        nnz    wall_s  peak_MiB   avg_MiB\n";
  char line[256];
  for (const auto& r : runs) {
    if (r.dnf) {
      std::snprintf(line, sizeof line, "%8llu %10llu %6llu %6llu %10s %9s %9s %9s\n",
                    static_cast<unsigned long long>(r.subjects), static_cast<unsigned long long>(r.events),
                    static_cast<unsigned long long>(r.codes), static_cast<unsigned long long>(r.shards), "-", "DNF",
                    "-", "-");
    } else {
      std::snprintf(line, sizeof line, "%8llu %10llu %6llu %6llu %10llu %9.3f %9.1f %9.1f\n",
                    static_cast<unsigned long long>(r.subjects), static_cast<unsigned long long>(r.events),
                    static_cast<unsigned long long>(r.codes), static_cast<unsigned long long>(r.shards),
                    static_cast<unsigned long long>(r.nnz), r.wall_seconds, r.peak_rss_bytes / 1048576.0,
                    r.avg_rss_bytes / 1048576.0);
    }
    out += line;
  }
  return out;
}

}  // namespace medtab
