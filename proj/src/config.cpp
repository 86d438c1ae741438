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

#include "medtab/config.hpp"

#include <yaml-cpp/yaml.h>

namespace medtab {

namespace {

void flatten(const json& j, const std::string& prefix, json& out) {
  if (j.is_object() && !(j.empty() && !prefix.empty())) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    return;
  }
  out[prefix] = j;
}

json scalar_json(const YAML::Node& node) {
  const std::string text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted
  if (text == "~" || text == "null" || text.empty()) return nullptr;
  try {
    json v = json::parse(text);
    if (v.is_primitive()) return v;
  } catch (const json::exception&) {
  }
  if (text == "True" || text == "yes") return true;
  if (text == "False" || text == "no") return false;
  return text;
}

json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Scalar: return scalar_json(node);
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& item : node) a.push_back(yaml_to_json(item));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : node) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return o;
    }
  }
  return nullptr;
}

}  // namespace

Config Config::from_json(const json& j) {
  if (!j.is_object()) throw UserError("config must be a mapping of keys to values");
  Config c;
  flatten(j, "", c.values_);
  return c;
}

Config Config::from_yaml(const std::string& text) {
  try {
    const YAML::Node root = YAML::Load(text);
    if (root.IsNull()) return Config{};
    return from_json(yaml_to_json(root));
  } catch (const YAML::Exception& e) {
    throw UserError(std::string("invalid YAML config: ") + e.what());
  }
}

Config Config::load(const fs::path& path) {
  if (!fs::exists(path)) throw UserError("config file not found: " + path.string());
  const std::string text = read_file(path);
  const auto ext = path.extension().string();
  if (ext == ".yaml" || ext == ".yml") return from_yaml(text);
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw UserError("invalid JSON config " + path.string() + ": " + e.what());
  }
}

void Config::set(const std::string& key, const std::string& text) {
  if (key.empty()) throw UserError("empty config key");
  try {
    values_[key] = json::parse(text);
  } catch (const json::exception&) {
    values_[key] = text;
  }
}

void Config::apply_overrides(std::span<const std::string> assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw UserError("override '" + a + "' is not of the form key=value");
    set(a.substr(0, eq), a.substr(eq + 1));
  }
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_.items()) values_[k] = v;
}

const json* Config::find(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &*it;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    std::string item(text.substr(start, end - start));
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<std::vector<std::string>> Config::get_list(const std::string& key) const {
  const json* v = find(key);
  if (!v || v->is_null()) return std::nullopt;
  if (v->is_string()) return split_list(v->get<std::string>());
  if (!v->is_array()) throw UserError("config key '" + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& item : *v) out.push_back(item.is_string() ? item.get<std::string>() : item.dump());
  return out;
}

void Config::require_known(const std::set<std::string>& known) const {
  for (const auto& [k, v] : values_.items())
    if (!known.contains(k)) throw UserError("unknown config key '" + k + "'");
}

}  // namespace medtab
