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

#include "medtab/csv.hpp"

#include <charconv>

namespace medtab {

namespace {

// Splits one record starting at `pos`; advances `pos` past the line break.
std::vector<std::string> split_record(std::string_view text, std::size_t& pos, std::size_t& line,
                                      const std::string& source) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  const std::size_t start_line = line;
  while (pos < text.size()) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          current.push_back('"');
          pos += 2;
          continue;
        }
        quoted = false;
      } else {
        if (c == '\n') ++line;
        current.push_back(c);
      }
      ++pos;
      continue;
    }
    if (c == '"' && current.empty()) {
      quoted = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
      ++pos;
    } else if (c == '\r') {
      ++pos;
    } else if (c == '\n') {
      ++pos;
      ++line;
      fields.push_back(std::move(current));
      return fields;
    } else {
      current.push_back(c);
      ++pos;
    }
  }
  if (quoted) throw DataError(source + ":" + std::to_string(start_line) + ": unterminated quote");
  fields.push_back(std::move(current));
  ++line;
  return fields;
}

bool needs_quotes(std::string_view v) {
  return v.find_first_of(",\"\n\r") != std::string_view::npos;
}

}  // namespace

CsvTable CsvTable::parse(std::string_view text, const std::string& source_name) {
  CsvTable table;
  table.source_ = source_name;
  std::size_t pos = 0;
  std::size_t line = 1;
  if (text.empty()) throw DataError(source_name + ": empty file (header required)");
  table.header_ = split_record(text, pos, line, source_name);
  while (pos < text.size()) {
    const std::size_t row_line = line;
    auto fields = split_record(text, pos, line, source_name);
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    table.rows_.push_back(std::move(fields));
    table.lines_.push_back(row_line);
  }
  return table;
}

CsvTable CsvTable::read(const fs::path& path) { return parse(read_file(path), path.string()); }

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t CsvTable::require_column(std::string_view name) const {
  auto idx = column(name);
  if (!idx) throw DataError(source_ + ": missing required column '" + std::string(name) + "'");
  return *idx;
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) {
  for (const auto& h : header) field(h);
  end_row();
}

CsvWriter& CsvWriter::field(std::string_view value) {
  if (row_open_) out_.push_back(',');
  row_open_ = true;
  if (needs_quotes(value)) {
    out_.push_back('"');
    for (char c : value) {
      if (c == '"') out_.push_back('"');
      out_.push_back(c);
    }
    out_.push_back('"');
  } else {
    out_.append(value);
  }
  return *this;
}

CsvWriter& CsvWriter::field(std::int64_t value) { return field(std::to_string(value)); }
CsvWriter& CsvWriter::field(double value) { return field(format_double(value)); }
CsvWriter& CsvWriter::empty() { return field(std::string_view{}); }

void CsvWriter::end_row() {
  out_.push_back('\n');
  row_open_ = false;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  if (ec == std::errc::result_out_of_range) {
    // from_chars reports overflow; surface it as infinity so callers reject it.
    return text.front() == '-' ? -HUGE_VAL : HUGE_VAL;
  }
  if (ec != std::errc()) return std::nullopt;
  return value;
}

}  // namespace medtab
