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

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "medtab/common.hpp"
#include "medtab/event_store.hpp"
#include "medtab/task_cache.hpp"

namespace medtab::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "medtab_test_XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline Timestamp days(double d) { return static_cast<Timestamp>(d * static_cast<double>(kMicrosPerDay)); }

inline Event ev(std::int64_t subject, std::optional<Timestamp> t, std::string code,
                std::optional<double> value = std::nullopt) {
  return Event{subject, t, std::move(code), value};
}

/// HR 80@1d, 90@3d, 100@10d; SEX//F static; DX_A@1d. One subject.
inline std::vector<Event> worked_example() {
  return {ev(1, days(1), "HR", 80), ev(1, days(3), "HR", 90), ev(1, days(10), "HR", 100),
          ev(1, std::nullopt, "SEX//F"), ev(1, days(1), "DX_A")};
}

inline EventShard sorted_shard(std::vector<Event> events) {
  std::stable_sort(events.begin(), events.end(), event_less);
  return EventShard{std::move(events)};
}

using DenseRows = std::vector<std::vector<std::optional<double>>>;

/// Task shard with one row per entry of `x` (empty optionals are not stored).
/// Row i belongs to subject `first_subject + i` at time i.
inline TaskShard task_shard(const DenseRows& x, const std::vector<std::uint8_t>& y, std::int64_t first_subject = 0,
                            std::uint64_t n_cols = 0) {
  TaskShard t;
  t.x.n_cols = n_cols ? n_cols : (x.empty() ? 0 : x[0].size());
  t.x.schema_hash = "test";
  for (std::size_t r = 0; r < x.size(); ++r) {
    std::vector<std::uint32_t> cols;
    std::vector<float> vals;
    for (std::size_t c = 0; c < x[r].size(); ++c) {
      if (!x[r][c]) continue;
      cols.push_back(static_cast<std::uint32_t>(c));
      vals.push_back(static_cast<float>(*x[r][c]));
    }
    const RowKey key{first_subject + static_cast<std::int64_t>(r), static_cast<Timestamp>(r)};
    t.x.push_row(key, cols, vals);
    t.y.push_back(y[r]);
    t.alignment.push_back({r, key.subject_id, key.time, key.time + 1, y[r] != 0});
  }
  return t;
}

}  // namespace medtab::testing
