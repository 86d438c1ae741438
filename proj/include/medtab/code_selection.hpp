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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "medtab/event_store.hpp"

namespace medtab {

/// Code-level inclusion filters, applied before featurization in the order
/// allowed_codes, min_code_count, max_included_codes.
struct CodeFilter {
  std::optional<std::vector<std::string>> allowed_codes;
  std::optional<std::uint64_t> min_code_count;
  std::optional<std::uint64_t> max_included_codes;

  json to_json() const;
  bool operator==(const CodeFilter&) const = default;
};

/// Codes whose total occurrences reach `threshold`.
std::set<std::string> select_codes_min_count(const CodeMetadata& metadata, std::uint64_t threshold);
/// The `n` most frequent codes; equal counts are ordered by code.
std::set<std::string> select_codes_top_n(const CodeMetadata& metadata, std::uint64_t n);
/// `allowed` intersected with the metadata; unknown codes are warned about.
std::set<std::string> select_codes_allowed(const CodeMetadata& metadata, const std::vector<std::string>& allowed);

/// Applies every criterion set in `filter`.
std::set<std::string> select_codes(const CodeMetadata& metadata, const CodeFilter& filter);

}  // namespace medtab
