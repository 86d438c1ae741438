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

#include "medtab/sparse_matrix.hpp"

#include <bit>
#include <cstring>

#include "medtab/csv.hpp"

namespace medtab {

static_assert(std::endian::native == std::endian::little, "binary matrix files are little-endian");

void SparseShardMatrix::push_row(const RowKey& key, std::span<const std::uint32_t> cols,
                                 std::span<const float> values) {
  indices.insert(indices.end(), cols.begin(), cols.end());
  data.insert(data.end(), values.begin(), values.end());
  indptr.push_back(indices.size());
  rows.push_back(key);
}

void SparseShardMatrix::validate() const {
  MEDTAB_CHECK(!indptr.empty() && indptr.front() == 0, "indptr must start at 0");
  MEDTAB_CHECK(indptr.back() == indices.size(), "last indptr must equal nnz");
  MEDTAB_CHECK(indices.size() == data.size(), "indices and data differ in length");
  MEDTAB_CHECK(rows.size() == n_rows(), "row index length differs from n_rows");
  for (std::size_t r = 0; r < n_rows(); ++r) {
    MEDTAB_CHECK(indptr[r] <= indptr[r + 1], "indptr must be non-decreasing");
    for (std::uint64_t k = indptr[r]; k < indptr[r + 1]; ++k) {
      MEDTAB_CHECK(indices[k] < n_cols, "column index out of range");
      MEDTAB_CHECK(k == indptr[r] || indices[k - 1] < indices[k], "column indices must increase within a row");
    }
  }
}

SparseShardMatrix hstack(std::span<const SparseShardMatrix* const> parts, const std::string& schema_hash) {
  SparseShardMatrix out;
  out.schema_hash = schema_hash;
  if (parts.empty()) return out;
  const std::size_t n_rows = parts.front()->n_rows();
  std::size_t nnz = 0;
  for (const auto* p : parts) {
    if (p->n_rows() != n_rows || p->rows != parts.front()->rows) {
      throw InvariantError("hstack: parts do not share the same rows");
    }
    nnz += p->nnz();
    out.n_cols += p->n_cols;
  }
  if (out.n_cols >= (std::uint64_t{1} << 32)) {
    throw DataError("assembled matrix has " + std::to_string(out.n_cols) + " columns; indices are 32-bit");
  }
  out.rows = parts.front()->rows;
  out.indices.reserve(nnz);
  out.data.reserve(nnz);
  out.indptr.reserve(n_rows + 1);
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::uint32_t offset = 0;
    for (const auto* p : parts) {
      for (std::uint64_t k = p->indptr[r]; k < p->indptr[r + 1]; ++k) {
        out.indices.push_back(p->indices[k] + offset);
        out.data.push_back(p->data[k]);
      }
      offset += static_cast<std::uint32_t>(p->n_cols);
    }
    out.indptr.push_back(out.indices.size());
  }
  return out;
}

SparseShardMatrix select_rows(const SparseShardMatrix& m, std::span<const std::size_t> selection) {
  SparseShardMatrix out;
  out.n_cols = m.n_cols;
  out.schema_hash = m.schema_hash;
  for (std::size_t r : selection) {
    MEDTAB_CHECK(r < m.n_rows(), "row selection out of range");
    out.push_row(m.rows[r], m.row_indices(r), m.row_values(r));
  }
  return out;
}

namespace {

template <typename T>
std::string_view as_bytes(const std::vector<T>& v) {
  return {reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T)};
}

template <typename T>
std::vector<T> read_binary(const fs::path& path, std::size_t expected) {
  const std::string bytes = read_file(path);
  if (bytes.size() != expected * sizeof(T)) {
    throw DataError(path.string() + ": expected " + std::to_string(expected * sizeof(T)) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  std::vector<T> out(expected);
  if (expected > 0) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace

void write_matrix(const fs::path& dir, const SparseShardMatrix& m) {
  fs::create_directories(dir);
  write_file_atomic(dir / "indptr.bin", as_bytes(m.indptr));
  write_file_atomic(dir / "indices.bin", as_bytes(m.indices));
  write_file_atomic(dir / "data.bin", as_bytes(m.data));
  CsvWriter rows({"subject_id", "time"});
  for (const auto& r : m.rows) {
    rows.field(r.subject_id).field(r.time);
    rows.end_row();
  }
  write_file_atomic(dir / "rows.csv", rows.str());
  const json meta{{"n_rows", m.n_rows()},   {"n_cols", m.n_cols},        {"nnz", m.nnz()},
                  {"value_dtype", "f32"},   {"index_dtype", "u32"},      {"ptr_dtype", "u64"},
                  {"schema_hash", m.schema_hash}};
  // meta.json last: its presence marks a complete matrix directory.
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

bool matrix_exists(const fs::path& dir) { return fs::exists(dir / "meta.json"); }

SparseShardMatrix read_matrix(const fs::path& dir) {
  if (!matrix_exists(dir)) throw DataError("no sparse matrix at " + dir.string());
  json meta;
  try {
    meta = json::parse(read_file(dir / "meta.json"));
  } catch (const json::parse_error& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }
  if (meta.value("value_dtype", "") != "f32" || meta.value("index_dtype", "") != "u32" ||
      meta.value("ptr_dtype", "") != "u64") {
    throw DataError(dir.string() + ": unsupported matrix dtypes");
  }
  SparseShardMatrix m;
  const auto n_rows = meta.at("n_rows").get<std::size_t>();
  const auto nnz = meta.at("nnz").get<std::size_t>();
  m.n_cols = meta.at("n_cols").get<std::uint64_t>();
  m.schema_hash = meta.at("schema_hash").get<std::string>();
  m.indptr = read_binary<std::uint64_t>(dir / "indptr.bin", n_rows + 1);
  m.indices = read_binary<std::uint32_t>(dir / "indices.bin", nnz);
  m.data = read_binary<float>(dir / "data.bin", nnz);
  const CsvTable rows = CsvTable::read(dir / "rows.csv");
  if (rows.size() != n_rows) throw DataError(dir.string() + ": rows table length differs from n_rows");
  const std::size_t c_subject = rows.require_column("subject_id");
  const std::size_t c_time = rows.require_column("time");
  m.rows.reserve(n_rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto s = parse_int(rows.row(i).at(c_subject));
    auto t = parse_int(rows.row(i).at(c_time));
    if (!s || !t) throw DataError(dir.string() + "/rows.csv: bad row " + std::to_string(i + 1));
    m.rows.push_back({*s, *t});
  }
  try {
    m.validate();
  } catch (const InvariantError& e) {
    throw DataError(dir.string() + ": " + e.what());
  }
  return m;
}

}  // namespace medtab
