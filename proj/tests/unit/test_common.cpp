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

#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "medtab/config.hpp"
#include "medtab/csv.hpp"
#include "medtab/labels.hpp"

using namespace medtab;
using medtab::testing::TempDir;

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("canonical hash ignores key insertion order") {
  json a = json::object();
  a["b"] = 1;
  a["a"] = {{"y", 2}, {"x", 3}};
  json b = json::parse(R"({"a": {"x": 3, "y": 2}, "b": 1})");
  CHECK(canonical_hash(a) == canonical_hash(b));
  b["b"] = 2;
  CHECK(canonical_hash(a) != canonical_hash(b));
}

TEST_CASE("derive_seed separates streams and is stable") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("rng below is in range and roughly uniform") {
  Rng rng(42);
  std::vector<int> counts(7);
  for (int i = 0; i < 70000; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("atomic write and publish replace contents") {
  TempDir tmp;
  write_file_atomic(tmp / "f.txt", "one");
  write_file_atomic(tmp / "f.txt", "two");
  CHECK(read_file(tmp / "f.txt") == "two");

  const fs::path target = tmp / "out";
  for (const char* content : {"first", "second"}) {
    const fs::path staging = staging_path(target);
    fs::create_directories(staging);
    write_file_atomic(staging / "x", content);
    publish_directory(staging, target);
    CHECK(read_file(target / "x") == content);
  }
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path())) ++entries;
  CHECK(entries == 2);  // f.txt and out, no leftovers
}

TEST_CASE("claim files are exclusive") {
  TempDir tmp;
  {
    ClaimFile a(tmp / "lock");
    ClaimFile b(tmp / "lock");
    CHECK(a.held());
    CHECK_FALSE(b.held());
  }
  ClaimFile c(tmp / "lock");
  CHECK(c.held());
}

TEST_CASE("parallel_for visits every index and rethrows") {
  std::vector<int> seen(100);
  parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i] += 1; });
  for (int v : seen) CHECK(v == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw DataError("boom");
                  }),
                  DataError);
}

TEST_CASE("error classes carry exit codes") {
  CHECK(UserError("x").exit_code() == 2);
  CHECK(DataError("x").exit_code() == 3);
  CHECK(InvariantError("x").exit_code() == 4);
}

TEST_CASE("csv round trip with quoting") {
  CsvWriter w({"a", "b"});
  w.field("x,y").field(std::int64_t{3});
  w.end_row();
  w.field("say \"hi\"").empty();
  w.end_row();
  const CsvTable t = CsvTable::parse(w.str(), "mem");
  REQUIRE(t.size() == 2);
  CHECK(t.row(0)[0] == "x,y");
  CHECK(t.row(0)[1] == "3");
  CHECK(t.row(1)[0] == "say \"hi\"");
  CHECK(t.row(1)[1].empty());
  CHECK(t.require_column("b") == 1);
  CHECK_THROWS_AS(t.require_column("zz"), DataError);
  CHECK(parse_int("-12") == -12);
  CHECK_FALSE(parse_int("1.5").has_value());
  CHECK(parse_double("2.5") == 2.5);
  CHECK_FALSE(parse_double("abc").has_value());
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("labels: read, dedup agreeing, reject conflicting") {
  TempDir tmp;
  write_file_atomic(tmp / "l.csv", "subject_id,prediction_time,label\n2,10,true\n1,5,0\n2,10,1\n");
  auto labels = dedup_labels(read_labels(tmp / "l.csv"));
  REQUIRE(labels.size() == 2);
  CHECK(labels[0] == LabelRecord{1, 5, false});
  CHECK(labels[1] == LabelRecord{2, 10, true});
  CHECK_THROWS_AS(dedup_labels({{1, 5, false}, {1, 5, true}}), DataError);
  write_file_atomic(tmp / "bad.csv", "subject_id,prediction_time,label\n1,5,maybe\n");
  CHECK_THROWS_AS(read_labels(tmp / "bad.csv"), DataError);
}

TEST_CASE("config flattens nested documents and applies overrides") {
  const Config j = Config::from_json(json::parse(R"({"tabularization": {"min_code_inclusion_count": 3}, "seed": 1})"));
  CHECK(j.get<int>("tabularization.min_code_inclusion_count", 0) == 3);
  Config y = Config::from_yaml("tabularization:\n  window_sizes: [1d, 7d]\n  aggs: code/count\nseed: 4\nname: '12'\n");
  CHECK(*y.get_list("tabularization.window_sizes") == std::vector<std::string>{"1d", "7d"});
  CHECK(*y.get_list("tabularization.aggs") == std::vector<std::string>{"code/count"});
  CHECK(y.get<int>("seed", 0) == 4);
  CHECK(y.get<std::string>("name", "") == "12");
  const std::vector<std::string> ov = {"seed=9", "tabularization.window_sizes=1d,full", "flag=true"};
  y.apply_overrides(ov);
  CHECK(y.get<int>("seed", 0) == 9);
  CHECK(*y.get_list("tabularization.window_sizes") == std::vector<std::string>{"1d", "full"});
  CHECK(y.get<bool>("flag", false));
  CHECK_THROWS_AS(y.get<int>("name", 0), UserError);
  CHECK_THROWS_AS(y.require_known({"seed"}), UserError);
  const std::vector<std::string> bad = {"novalue"};
  CHECK_THROWS_AS(y.apply_overrides(bad), UserError);
}
