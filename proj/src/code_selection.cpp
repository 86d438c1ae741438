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

#include "medtab/code_selection.hpp"

#include <algorithm>

namespace medtab {

json CodeFilter::to_json() const {
  json j = json::object();
  if (allowed_codes) {
    auto sorted = *allowed_codes;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    j["allowed_codes"] = sorted;
  }
  if (min_code_count) j["min_code_inclusion_count"] = *min_code_count;
  if (max_included_codes) j["max_included_codes"] = *max_included_codes;
  return j;
}

std::set<std::string> select_codes_min_count(const CodeMetadata& metadata, std::uint64_t threshold) {
  if (threshold == 0) throw UserError("min_code_inclusion_count must be positive");
  std::set<std::string> out;
  for (const auto& [code, stats] : metadata) {
    if (stats.code_occurrences() >= threshold) out.insert(code);
  }
  return out;
}

std::set<std::string> select_codes_top_n(const CodeMetadata& metadata, std::uint64_t n) {
  if (n == 0) throw UserError("max_included_codes must be positive");
  std::vector<std::pair<std::uint64_t, const std::string*>> ranked;
  ranked.reserve(metadata.size());
  for (const auto& [code, stats] : metadata) ranked.emplace_back(stats.code_occurrences(), &code);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::set<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.insert(*ranked[i].second);
  return out;
}

std::set<std::string> select_codes_allowed(const CodeMetadata& metadata, const std::vector<std::string>& allowed) {
  std::set<std::string> out;
  for (const auto& code : allowed) {
    if (metadata.contains(code)) {
      out.insert(code);
    } else {
      log_warn("allowed code not present in metadata; ignored", {{"code", code}});
    }
  }
  return out;
}

std::set<std::string> select_codes(const CodeMetadata& metadata, const CodeFilter& filter) {
  CodeMetadata remaining = metadata;
  auto restrict_to = [&](const std::set<std::string>& keep) {
    std::erase_if(remaining, [&](const auto& kv) { return !keep.contains(kv.first); });
  };
  if (filter.allowed_codes) restrict_to(select_codes_allowed(remaining, *filter.allowed_codes));
  if (filter.min_code_count) restrict_to(select_codes_min_count(remaining, *filter.min_code_count));
  if (filter.max_included_codes) restrict_to(select_codes_top_n(remaining, *filter.max_included_codes));
  std::set<std::string> out;
  for (const auto& kv : remaining) out.insert(kv.first);
  return out;
}

}  // namespace medtab
