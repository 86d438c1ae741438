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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medtab/common.hpp"

namespace medtab {

struct BenchRun {
  std::uint64_t subjects = 0;
  std::uint64_t events = 0;
  std::uint64_t codes = 0;
  std::uint64_t shards = 0;
  std::uint64_t nnz = 0;
  double wall_seconds = 0.0;
  std::uint64_t peak_rss_bytes = 0;
  std::uint64_t avg_rss_bytes = 0;
  bool dnf = false;
  std::string error;

  json to_json() const;
};

struct BenchConfig {
  std::vector<std::uint64_t> sizes{25000, 50000, 100000};
  bool sizes_are_events = true;           // otherwise subjects
  std::uint64_t events_per_subject = 50;
  std::uint64_t n_codes = 200;
  std::uint64_t shard_subjects = 100;     // fixed shard size
  std::uint32_t repeats = 3;
  double time_limit_seconds = 600.0;
  std::uint64_t seed = 0;
  fs::path work_dir;
  fs::path worker_exe;                    // executable that understands `bench-worker <dir>`
};

/// Result of the stress workload measured inside the worker process.
struct WorkerResult {
  std::uint64_t nnz = 0;
  double wall_seconds = 0.0;
  std::uint64_t avg_rss_bytes = 0;
  std::uint64_t peak_rss_bytes = 0;
  json to_json() const;
};

/// code/count over the full history, shards processed one at a time.
WorkerResult run_bench_workload(const fs::path& dataset_root);

/// Entry point of the `bench-worker` command; prints one JSON line.
int bench_worker_main(const fs::path& dataset_root);

/// Generates one dataset per size, then runs each `repeats` times in a
/// fresh worker process and keeps the fastest run.
std::vector<BenchRun> run_bench(const BenchConfig& config);

json bench_report(const BenchConfig& config, const std::vector<BenchRun>& runs);
std::string bench_table(const std::vector<BenchRun>& runs);

}  // namespace medtab
