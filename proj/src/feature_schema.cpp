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

#include "medtab/feature_schema.hpp"

#include <algorithm>
#include <limits>

#include "medtab/csv.hpp"

namespace medtab {

WindowSpec WindowSpec::of(std::int64_t count, char unit) {
  if (unit != 'm' && unit != 'h' && unit != 'd') throw UserError(std::string("unknown window unit '") + unit + "'");
  if (count <= 0) throw UserError("window duration must be strictly positive");
  return WindowSpec(count, unit);
}

WindowSpec WindowSpec::parse(std::string_view text) {
  if (text == "full" || text == "FULL") return full();
  if (text.size() < 2) throw UserError("bad window '" + std::string(text) + "'");
  auto count = parse_int(text.substr(0, text.size() - 1));
  if (!count) throw UserError("bad window '" + std::string(text) + "'");
  return of(*count, text.back());
}

Timestamp WindowSpec::duration() const {
  switch (unit_) {
    case 'm': return count_ * kMicrosPerMinute;
    case 'h': return count_ * kMicrosPerHour;
    case 'd': return count_ * kMicrosPerDay;
    default: return std::numeric_limits<Timestamp>::max();
  }
}

std::string WindowSpec::name() const { return is_full() ? "full" : std::to_string(count_) + unit_; }

namespace {

std::vector<std::string_view> split_list(std::string_view list) {
  std::vector<std::string_view> out;
  while (!list.empty()) {
    const auto comma = list.find(',');
    auto item = list.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

std::vector<WindowSpec> parse_windows(std::string_view comma_list) {
  std::vector<WindowSpec> out;
  for (auto item : split_list(comma_list)) out.push_back(WindowSpec::parse(item));
  return out;
}

std::string_view agg_name(AggKind agg) {
  switch (agg) {
    case AggKind::StaticPresent: return "static/present";
    case AggKind::StaticFirst: return "static/first";
    case AggKind::CodeCount: return "code/count";
    case AggKind::CodePresent: return "code/present";
    case AggKind::ValueCount: return "value/count";
    case AggKind::ValueSum: return "value/sum";
    case AggKind::ValueSumSqd: return "value/sum_sqd";
    case AggKind::ValueMin: return "value/min";
    case AggKind::ValueMax: return "value/max";
    case AggKind::ValueMean: return "value/mean";
  }
  return "?";
}

AggKind parse_agg(std::string_view name) {
  for (AggKind a : kAllAggs) {
    if (agg_name(a) == name) return a;
  }
  throw UserError("unknown aggregation '" + std::string(name) + "'");
}

std::vector<AggKind> parse_aggs(std::string_view comma_list) {
  std::vector<AggKind> out;
  for (auto item : split_list(comma_list)) out.push_back(parse_agg(item));
  return out;
}

bool is_static_agg(AggKind agg) { return agg == AggKind::StaticPresent || agg == AggKind::StaticFirst; }

bool is_value_agg(AggKind agg) {
  return agg == AggKind::StaticFirst || (agg >= AggKind::ValueCount && agg <= AggKind::ValueMean);
}

std::string FeatureColumn::name() const {
  // Static agg names already carry the "static/" prefix.
  return code + "/" + (window ? window->name() + "/" : std::string()) + std::string(agg_name(agg));
}

std::string FeatureBlock::name() const {
  std::string agg(agg_name(this->agg));
  std::replace(agg.begin(), agg.end(), '/', '_');
  return window.name() + "__" + agg;
}

FeatureSchema::FeatureSchema(std::vector<FeatureColumn> columns) : columns_(std::move(columns)) {
  json descriptor = json::array();
  for (const auto& c : columns_) {
    if (c.code.empty()) throw InvariantError("feature column with empty code");
    if (c.window.has_value() == is_static_agg(c.agg)) {
      throw InvariantError("column " + c.name() + ": static aggs take no window, time-series aggs need one");
    }
    descriptor.push_back(json::array({c.code, c.window ? json(c.window->name()) : json(nullptr),
                                      std::string(agg_name(c.agg))}));
  }
  hash_ = canonical_hash(descriptor);

  std::size_t i = 0;
  while (i < columns_.size() && !columns_[i].window) ++i;
  static_width_ = i;
  for (; i < columns_.size(); ++i) {
    const auto& c = columns_[i];
    if (!c.window) throw InvariantError("static column " + c.name() + " after time-series columns");
    if (blocks_.empty() || !(blocks_.back().window == *c.window) || blocks_.back().agg != c.agg) {
      for (const auto& b : blocks_) {
        if (b.window == *c.window && b.agg == c.agg) {
          throw InvariantError("block " + b.name() + " is not contiguous in the schema");
        }
      }
      blocks_.push_back(FeatureBlock{*c.window, c.agg, i, {}});
    } else if (blocks_.back().codes.back() >= c.code) {
      throw InvariantError("codes within block " + blocks_.back().name() + " must be strictly increasing");
    }
    blocks_.back().codes.push_back(c.code);
  }
  for (std::size_t a = 0; a < static_width_; ++a) {
    for (std::size_t b = a + 1; b < static_width_ && columns_[b].code == columns_[a].code; ++b) {
      if (columns_[b].agg == columns_[a].agg) throw InvariantError("duplicate column " + columns_[a].name());
    }
  }
}

FeatureSchema FeatureSchema::static_part() const {
  return FeatureSchema(std::vector<FeatureColumn>(columns_.begin(), columns_.begin() + static_width_));
}

json FeatureSchema::to_json() const {
  json cols = json::array();
  for (const auto& c : columns_) {
    cols.push_back({{"code", c.code},
                    {"window", c.window ? json(c.window->name()) : json(nullptr)},
                    {"agg", std::string(agg_name(c.agg))}});
  }
  return json{{"schema_hash", hash_}, {"n_cols", columns_.size()}, {"columns", cols}};
}

FeatureSchema FeatureSchema::from_json(const json& j) {
  std::vector<FeatureColumn> cols;
  try {
    for (const auto& c : j.at("columns")) {
      FeatureColumn col;
      col.code = c.at("code").get<std::string>();
      if (!c.at("window").is_null()) col.window = WindowSpec::parse(c.at("window").get<std::string>());
      col.agg = parse_agg(c.at("agg").get<std::string>());
      cols.push_back(std::move(col));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid schema document: ") + e.what());
  }
  FeatureSchema schema(std::move(cols));
  if (j.contains("schema_hash") && j["schema_hash"].get<std::string>() != schema.hash()) {
    throw DataError("schema document hash does not match its columns");
  }
  return schema;
}

json TabConfig::to_json() const {
  json w = json::array();
  for (const auto& win : windows) w.push_back(win.name());
  json a = json::array();
  for (auto agg : aggs) a.push_back(std::string(agg_name(agg)));
  return json{{"window_sizes", w}, {"aggs", a}, {"filter", filter.to_json()}};
}

FeatureSchema build_feature_schema(const CodeMetadata& metadata, const TabConfig& config) {
  bool requested[std::size(kAllAggs)] = {};
  bool any_ts = false;
  for (auto a : config.aggs) {
    requested[static_cast<std::size_t>(a)] = true;
    any_ts |= !is_static_agg(a);
  }
  if (any_ts && config.windows.empty()) throw UserError("time-series aggregations requested but no windows given");
  for (std::size_t i = 0; i < config.windows.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (config.windows[i].duration() == config.windows[k].duration()) {
        throw UserError("duplicate window " + config.windows[i].name());
      }
    }
  }

  const std::set<std::string> codes = select_codes(metadata, config.filter);
  std::vector<FeatureColumn> columns;
  std::size_t omitted = 0;
  for (const auto& code : codes) {
    const CodeStats& s = metadata.at(code);
    if (requested[static_cast<std::size_t>(AggKind::StaticPresent)] && s.static_occurrences > 0) {
      columns.push_back({code, std::nullopt, AggKind::StaticPresent});
    }
    if (requested[static_cast<std::size_t>(AggKind::StaticFirst)]) {
      if (s.static_value_occurrences > 0) {
        columns.push_back({code, std::nullopt, AggKind::StaticFirst});
      } else if (s.static_occurrences > 0) {
        ++omitted;
      }
    }
  }
  for (const auto& window : config.windows) {
    for (AggKind agg : kAllAggs) {
      if (is_static_agg(agg) || !requested[static_cast<std::size_t>(agg)]) continue;
      for (const auto& code : codes) {
        const CodeStats& s = metadata.at(code);
        if (s.ts_occurrences == 0) continue;
        if (is_value_agg(agg) && s.ts_value_occurrences == 0) {
          ++omitted;
          continue;
        }
        columns.push_back({code, window, agg});
      }
    }
  }
  if (omitted > 0) log_debug("value aggregations skipped for codes without values", {{"columns", omitted}});
  if (columns.size() >= (std::uint64_t{1} << 32)) {
    throw DataError("schema has " + std::to_string(columns.size()) + " columns; column indices are 32-bit");
  }
  return FeatureSchema(std::move(columns));
}

}  // namespace medtab
