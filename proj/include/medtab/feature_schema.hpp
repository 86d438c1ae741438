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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medtab/code_selection.hpp"
#include "medtab/common.hpp"
#include "medtab/event_store.hpp"

namespace medtab {

/// A trailing window (t - w, t], or the full history.
class WindowSpec {
 public:
  static WindowSpec full() { return WindowSpec(0, 'f'); }
  static WindowSpec of(std::int64_t count, char unit);
  /// Accepts "<n>m", "<n>h", "<n>d" and "full".
  static WindowSpec parse(std::string_view text);

  bool is_full() const { return unit_ == 'f'; }
  Timestamp duration() const;
  std::string name() const;

  bool operator==(const WindowSpec& o) const { return unit_ == o.unit_ && count_ == o.count_; }

 private:
  WindowSpec(std::int64_t count, char unit) : count_(count), unit_(unit) {}
  std::int64_t count_;
  char unit_;
};

std::vector<WindowSpec> parse_windows(std::string_view comma_list);

/// Declaration order is the canonical column order.
enum class AggKind : std::uint8_t {
  StaticPresent,
  StaticFirst,
  CodeCount,
  CodePresent,
  ValueCount,
  ValueSum,
  ValueSumSqd,
  ValueMin,
  ValueMax,
  ValueMean,
};

inline constexpr AggKind kAllAggs[] = {AggKind::StaticPresent, AggKind::StaticFirst, AggKind::CodeCount,
                                       AggKind::CodePresent,   AggKind::ValueCount,  AggKind::ValueSum,
                                       AggKind::ValueSumSqd,   AggKind::ValueMin,    AggKind::ValueMax,
                                       AggKind::ValueMean};

std::string_view agg_name(AggKind agg);
AggKind parse_agg(std::string_view name);
std::vector<AggKind> parse_aggs(std::string_view comma_list);
bool is_static_agg(AggKind agg);
bool is_value_agg(AggKind agg);

struct FeatureColumn {
  std::string code;
  std::optional<WindowSpec> window;  // absent for static columns
  AggKind agg = AggKind::CodeCount;

  std::string name() const;
  bool operator==(const FeatureColumn&) const = default;
};

/// A contiguous run of time-series columns sharing (window, agg), one
/// column per code in lexicographic order.
struct FeatureBlock {
  WindowSpec window = WindowSpec::full();
  AggKind agg = AggKind::CodeCount;
  std::size_t offset = 0;
  std::vector<std::string> codes;

  std::string name() const;
};

class FeatureSchema {
 public:
  FeatureSchema() : FeatureSchema(std::vector<FeatureColumn>{}) {}
  explicit FeatureSchema(std::vector<FeatureColumn> columns);

  const std::vector<FeatureColumn>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const std::string& hash() const { return hash_; }
  std::size_t static_width() const { return static_width_; }
  const std::vector<FeatureBlock>& blocks() const { return blocks_; }

  /// Schema restricted to the leading static columns.
  FeatureSchema static_part() const;

  json to_json() const;
  static FeatureSchema from_json(const json& j);

 private:
  std::vector<FeatureColumn> columns_;
  std::vector<FeatureBlock> blocks_;
  std::size_t static_width_ = 0;
  std::string hash_;
};

struct TabConfig {
  std::vector<WindowSpec> windows;
  std::vector<AggKind> aggs;
  CodeFilter filter;

  json to_json() const;
};

/// Static columns first (code-major, canonical static agg order), then for
/// each configured window, each time-series agg in canonical order, each
/// applicable code in lexicographic order.
FeatureSchema build_feature_schema(const CodeMetadata& metadata, const TabConfig& config);

}  // namespace medtab
