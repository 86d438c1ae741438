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

#include "medtab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace medtab {

json PlantedRule::to_json() const {
  return json{{"code", code}, {"window_us", window}, {"threshold", threshold}, {"noise", noise},
              {"definition", "label = count(code in (t - window, t)) >= threshold; with probability noise "
                             "the label is replaced by a fair coin flip"}};
}

bool PlantedRule::evaluate(std::span<const Event> subject_events, Timestamp prediction_time) const {
  std::uint32_t count = 0;
  for (const auto& e : subject_events) {
    if (e.time && e.code == code && *e.time > prediction_time - window && *e.time < prediction_time) ++count;
  }
  return count >= threshold;
}

json SynthSpec::to_json() const {
  return json{{"generator", "medtab-synth/1"},
              {"n_subjects", n_subjects},
              {"n_codes", n_codes},
              {"events_per_subject", events_per_subject},
              {"seed", seed},
              {"rule", rule.to_json()},
              {"labels_per_subject", labels_per_subject},
              {"span_days", span_days},
              {"signal_rate", signal_rate}};
}

void SynthSpec::validate() const {
  if (n_subjects == 0) throw UserError("synth: n_subjects must be positive");
  if (n_codes == 0) throw UserError("synth: n_codes must be positive");
  if (events_per_subject == 0) throw UserError("synth: events_per_subject must be positive");
  if (span_days == 0) throw UserError("synth: span_days must be positive");
  if (rule.window <= 0) throw UserError("synth: rule window must be positive");
  if (rule.noise < 0.0 || rule.noise > 1.0) throw UserError("synth: noise must lie in [0, 1]");
  if (signal_rate < 0.0 || signal_rate > 1.0) throw UserError("synth: signal_rate must lie in [0, 1]");
}

namespace {

std::string code_name(std::uint64_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "C%03llu", static_cast<unsigned long long>(k));
  return buf;
}

std::int64_t subject_id_for(std::uint64_t i) { return 10'000 + static_cast<std::int64_t>(i); }

}  // namespace

SynthData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthData out;
  out.events.reserve(spec.n_subjects * (spec.events_per_subject + 2));
  const std::int64_t span_minutes = static_cast<std::int64_t>(spec.span_days) * 24 * 60;
  for (std::uint64_t i = 0; i < spec.n_subjects; ++i) {
    const std::int64_t subject = subject_id_for(i);
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(subject)));
    out.events.push_back({subject, std::nullopt, rng.bernoulli(0.5) ? "SEX//F" : "SEX//M", std::nullopt});
    out.events.push_back({subject, std::nullopt, "AGE", static_cast<double>(rng.between(18, 90))});
    for (std::uint64_t k = 0; k < spec.events_per_subject; ++k) {
      Event e;
      e.subject_id = subject;
      e.time = kSynthEpoch + rng.between(0, span_minutes - 1) * kMicrosPerMinute;
      if (spec.n_codes == 1 || rng.bernoulli(spec.signal_rate)) {
        e.code = spec.rule.code;
      } else {
        const std::uint64_t c = 1 + rng.below(spec.n_codes - 1);
        e.code = code_name(c);
        if (c % 2 == 1) e.numeric_value = std::round((static_cast<double>(c) + rng.normal()) * 100.0) / 100.0;
      }
      out.events.push_back(std::move(e));
    }
  }
  out.labels = generate_labels(out.events, spec.rule, spec.labels_per_subject, spec.seed);
  return out;
}

std::vector<LabelRecord> generate_labels(std::span<const Event> events, const PlantedRule& rule,
                                         std::uint32_t labels_per_subject, std::uint64_t seed) {
  std::vector<Event> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(), event_less);
  std::vector<LabelRecord> labels;
  const Timestamp offset = 30 * kMicrosPerSecond;
  std::size_t begin = 0;
  while (begin < sorted.size()) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].subject_id == sorted[begin].subject_id) ++end;
    const std::int64_t subject = sorted[begin].subject_id;
    std::span<const Event> subject_events(sorted.data() + begin, end - begin);

    // Signal-code times for the sliding count.
    std::vector<Timestamp> signal;
    std::vector<Timestamp> times;
    for (const auto& e : subject_events) {
      if (!e.time) continue;
      if (e.code == rule.code) signal.push_back(*e.time);
      if (times.empty() || times.back() != *e.time) times.push_back(*e.time);
    }
    std::vector<char> truth(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      const Timestamp t = times[i] + offset;
      const auto hi = std::lower_bound(signal.begin(), signal.end(), t);
      const auto lo = std::upper_bound(signal.begin(), signal.end(), t - rule.window);
      truth[i] = (hi - lo) >= static_cast<std::ptrdiff_t>(rule.threshold);
    }

    Rng rng(derive_seed(derive_seed(seed, 0x1abe1), static_cast<std::uint64_t>(subject)));
    std::vector<char> used(times.size(), 0);
    for (std::uint32_t k = 0; k < labels_per_subject && !times.empty(); ++k) {
      const bool target = rng.bernoulli(0.5);
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < times.size(); ++i) {
        if (!used[i] && static_cast<bool>(truth[i]) == target) candidates.push_back(i);
      }
      if (candidates.empty()) {
        for (std::size_t i = 0; i < times.size(); ++i) {
          if (!used[i]) candidates.push_back(i);
        }
      }
      if (candidates.empty()) break;
      const std::size_t pick = candidates[rng.below(candidates.size())];
      used[pick] = 1;
      bool label = truth[pick];
      if (rng.bernoulli(rule.noise)) label = rng.bernoulli(0.5);
      labels.push_back({subject, times[pick] + offset, label});
    }
    begin = end;
  }
  std::sort(labels.begin(), labels.end(), [](const LabelRecord& a, const LabelRecord& b) {
    return std::tie(a.subject_id, a.prediction_time) < std::tie(b.subject_id, b.prediction_time);
  });
  return labels;
}

void write_label_set(const fs::path& root, const std::string& task, std::span<const LabelRecord> labels,
                     const json& provenance) {
  write_file_atomic(root / "labels" / (task + ".csv"), serialize_labels(labels));
  write_file_atomic(root / "labels" / (task + ".json"), provenance.dump(2) + "\n");
}

ShardedDataset write_synthetic(const fs::path& root, const SynthSpec& spec, std::uint64_t shard_count,
                               const std::string& task) {
  SynthData data = generate_synthetic(spec);
  write_label_set(root, task, data.labels, json{{"task", task}, {"synth", spec.to_json()}});
  return write_dataset(std::move(data.events), root, IngestConfig{shard_count, spec.seed},
                       json{{"synth", spec.to_json()}});
}

}  // namespace medtab
