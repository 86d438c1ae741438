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

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "medtab/common.hpp"

namespace medtab {

/// Flat map of dotted keys to JSON values. Nested objects in a file are
/// flattened ({"a": {"b": 1}} becomes "a.b"); arrays stay values.
class Config {
 public:
  Config() = default;

  /// Reads JSON, or YAML when the extension is .yaml or .yml.
  static Config load(const fs::path& path);
  static Config from_json(const json& j);
  static Config from_yaml(const std::string& text);

  /// Parses the value as JSON when possible, otherwise keeps it as a string.
  void set(const std::string& key, const std::string& text);
  void set_value(const std::string& key, json value) { values_[key] = std::move(value); }
  /// Applies "key=value" overrides in order.
  void apply_overrides(std::span<const std::string> assignments);
  /// Later configs win.
  void merge(const Config& other);

  bool has(const std::string& key) const { return values_.contains(key); }
  const json* find(const std::string& key) const;

  template <class T>
  T get(const std::string& key, T fallback) const {
    const json* v = find(key);
    if (!v || v->is_null()) return fallback;
    try {
      return v->get<T>();
    } catch (const json::exception&) {
      throw UserError("config key '" + key + "' has the wrong type: " + v->dump());
    }
  }
  template <class T>
  std::optional<T> get_optional(const std::string& key) const {
    const json* v = find(key);
    if (!v || v->is_null()) return std::nullopt;
    return get<T>(key, T{});
  }
  /// A list given either as an array or as a comma-separated string.
  std::optional<std::vector<std::string>> get_list(const std::string& key) const;

  /// Fails on keys outside `known`, naming the first offender.
  void require_known(const std::set<std::string>& known) const;

  const json& values() const { return values_; }

 private:
  json values_ = json::object();
};

std::vector<std::string> split_list(std::string_view text);

}  // namespace medtab
