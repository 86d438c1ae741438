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

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

namespace medtab {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Microseconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

constexpr Timestamp kMicrosPerSecond = 1'000'000;
constexpr Timestamp kMicrosPerMinute = 60 * kMicrosPerSecond;
constexpr Timestamp kMicrosPerHour = 60 * kMicrosPerMinute;
constexpr Timestamp kMicrosPerDay = 24 * kMicrosPerHour;

// Error taxonomy. The CLI maps each class onto its exit code.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int exit_code) : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

/// Bad flags, bad config, missing upstream stage.
class UserError : public Error {
 public:
  explicit UserError(const std::string& what) : Error(what, 2) {}
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, 3) {}
};

/// A broken internal invariant.
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error(what, 4) {}
};

#define MEDTAB_CHECK(cond, msg)                                                  \
  do {                                                                           \
    if (!(cond)) throw ::medtab::InvariantError(std::string("check failed: ") + \
                                                #cond + ": " + (msg));           \
  } while (0)

// ---------------------------------------------------------------------------
// Hashing and seeded randomness

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a stream id.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(mix64(master) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Seeded hash of a subject id, uniform over 64 bits.
constexpr std::uint64_t subject_hash(std::int64_t subject_id, std::uint64_t seed) {
  return derive_seed(seed, static_cast<std::uint64_t>(subject_id));
}

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const fs::path& path);

/// Hash of the canonical (sorted-key, compact) JSON serialization.
std::string canonical_hash(const json& value);

/// Deterministic generator. The underlying engine is fully specified by the
/// standard; distributions are implemented here so results do not depend on
/// the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Files

/// Writes `bytes` to `path` through a sibling temporary file and rename.
void write_file_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

/// Replaces `target` with the fully written directory `staging`.
void publish_directory(const fs::path& staging, const fs::path& target);

/// Unique sibling path for staging output of `target`.
fs::path staging_path(const fs::path& target);

/// Create-exclusive claim file. Released (deleted) on destruction when held.
class ClaimFile {
 public:
  explicit ClaimFile(fs::path path);
  ~ClaimFile();
  ClaimFile(const ClaimFile&) = delete;
  ClaimFile& operator=(const ClaimFile&) = delete;
  bool held() const { return held_; }

 private:
  fs::path path_;
  bool held_ = false;
};

std::string shard_name(std::size_t index);

// ---------------------------------------------------------------------------
// Logging: one JSON object per line on stderr.

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };
void set_log_level(LogLevel level);
LogLevel log_level();
void log_event(LogLevel level, std::string_view message, json fields = json::object());
inline void log_info(std::string_view m, json f = json::object()) { log_event(LogLevel::Info, m, std::move(f)); }
inline void log_warn(std::string_view m, json f = json::object()) { log_event(LogLevel::Warn, m, std::move(f)); }
inline void log_debug(std::string_view m, json f = json::object()) { log_event(LogLevel::Debug, m, std::move(f)); }

// ---------------------------------------------------------------------------
// Resources

std::uint64_t peak_rss_bytes();
std::uint64_t current_rss_bytes();

// ---------------------------------------------------------------------------
// Parallelism

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// (lowest index) is rethrown after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Number formatting

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace medtab
