#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tseq/common.hpp"
#include "tseq/rng.hpp"

namespace tseq {

// Duration floor applied before any log transform.
inline constexpr double kMinDuration = 1e-3;
// Gaps shorter than this are treated as timestamp noise, not idle periods.
inline constexpr double kDefaultMinGap = 1.0;

inline constexpr const char* kIdleLabel = "<idle>";
inline constexpr const char* kOovLabel = "<oov>";

struct RawEvent {
  std::string label;
  double start = 0.0;
  double duration = 0.0;
  bool has_duration = false;
};

struct RawSequence {
  std::string id;
  std::vector<RawEvent> events;
  // Optional recommendation-style target set (labels to rank after the
  // history); empty for ordinary next-event data.
  std::vector<std::string> targets;

  bool all_durations_present() const {
    for (const auto& e : events)
      if (!e.has_duration) return false;
    return !events.empty();
  }
};

struct EventToken {
  int index = 0;
  double duration = kMinDuration;
};

// ---- JSON Lines ingestion ----

namespace detail {

inline void validate_sequence(const RawSequence& seq, const std::string& where) {
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    const RawEvent& e = seq.events[i];
    if (e.start < 0) throw ParseError(where + ": negative timestamp at index " + std::to_string(i));
    if (e.has_duration && e.duration < 0)
      throw ParseError(where + ": negative duration at index " + std::to_string(i));
    if (i > 0 && e.start < seq.events[i - 1].start)
      throw ParseError(where + ": non-monotone timestamp at index " + std::to_string(i));
    if (i + 1 < seq.events.size() && e.has_duration &&
        e.start + e.duration > seq.events[i + 1].start + 1e-6)
      throw ParseError(where + ": event overlaps successor at index " + std::to_string(i));
  }
}

}  // namespace detail

inline RawSequence parse_sequence_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": record is not an object");
  if (!j.contains("id") || !j["id"].is_string())
    throw ParseError(where + ": missing required field \"id\"");
  if (!j.contains("events") || !j["events"].is_array())
    throw ParseError(where + ": missing required field \"events\"");
  RawSequence seq;
  seq.id = j["id"].get<std::string>();
  for (std::size_t i = 0; i < j["events"].size(); ++i) {
    const auto& je = j["events"][i];
    const std::string at = where + ": event " + std::to_string(i);
    if (!je.is_object()) throw ParseError(at + " is not an object");
    if (!je.contains("e") || !je["e"].is_string())
      throw ParseError(at + ": missing required field \"e\"");
    if (!je.contains("t") || !je["t"].is_number())
      throw ParseError(at + ": missing required field \"t\"");
    RawEvent e;
    e.label = je["e"].get<std::string>();
    e.start = je["t"].get<double>();
    if (je.contains("d")) {
      if (!je["d"].is_number()) throw ParseError(at + ": field \"d\" must be a number");
      e.duration = je["d"].get<double>();
      e.has_duration = true;
    }
    seq.events.push_back(std::move(e));
  }
  if (j.contains("targets")) {
    if (!j["targets"].is_array()) throw ParseError(where + ": field \"targets\" must be an array");
    for (const auto& t : j["targets"]) {
      if (!t.is_string()) throw ParseError(where + ": targets entries must be strings");
      seq.targets.push_back(t.get<std::string>());
    }
  }
  detail::validate_sequence(seq, where);
  return seq;
}

inline std::vector<RawSequence> parse_sequences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sequence file: " + path);
  std::vector<RawSequence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(where + ": invalid JSON: " + ex.what());
    }
    out.push_back(parse_sequence_json(j, where));
  }
  return out;
}

inline nlohmann::ordered_json sequence_to_json(const RawSequence& seq) {
  nlohmann::ordered_json j;
  j["id"] = seq.id;
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : seq.events) {
    nlohmann::ordered_json je;
    je["e"] = e.label;
    je["t"] = e.start;
    if (e.has_duration) je["d"] = e.duration;
    j["events"].push_back(std::move(je));
  }
  if (!seq.targets.empty()) j["targets"] = seq.targets;
  return j;
}

inline void serialize_sequences(const std::string& path, const std::vector<RawSequence>& seqs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write sequence file: " + path);
  for (const auto& seq : seqs) out << sequence_to_json(seq).dump() << "\n";
}

// ---- Idle events and durations ----

// Inserts an idle event into every gap longer than min_gap. Requires every
// event to carry an explicit duration; interval-only data encodes its gaps
// in d_t instead (see compute_durations).
inline RawSequence inject_idle_events(const RawSequence& seq, double min_gap = kDefaultMinGap) {
  if (!seq.all_durations_present()) return seq;
  RawSequence out;
  out.id = seq.id;
  out.targets = seq.targets;
  out.events.reserve(seq.events.size());
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    out.events.push_back(seq.events[i]);
    if (i + 1 == seq.events.size()) break;
    const RawEvent& cur = seq.events[i];
    const RawEvent& next = seq.events[i + 1];
    const double gap = next.start - (cur.start + cur.duration);
    if (gap > min_gap) {
      RawEvent idle;
      idle.label = kIdleLabel;
      idle.start = cur.start + cur.duration;
      idle.duration = gap;
      idle.has_duration = true;
      out.events.push_back(std::move(idle));
    }
  }
  return out;
}

// Fills missing durations with the inter-event interval (last missing one
// gets the sequence's median interval) and clamps everything to d_min.
inline RawSequence compute_durations(const RawSequence& seq) {
  RawSequence out = seq;
  const std::size_t n = out.events.size();
  if (n == 0) return out;
  std::vector<double> intervals;
  intervals.reserve(n > 1 ? n - 1 : 0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    intervals.push_back(out.events[i + 1].start - out.events[i].start);
  double median = kMinDuration;
  if (!intervals.empty()) {
    std::vector<double> sorted = intervals;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    median = (m % 2 == 1) ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    RawEvent& e = out.events[i];
    if (!e.has_duration) {
      e.duration = (i + 1 < n) ? intervals[i] : median;
      e.has_duration = true;
    }
    e.duration = std::max(e.duration, kMinDuration);
  }
  return out;
}

// ---- Vocabulary ----

class Vocabulary {
 public:
  static constexpr int kIdleIndex = 0;
  static constexpr int kOovIndex = 1;

  Vocabulary() {
    labels_ = {kIdleLabel, kOovLabel};
    index_ = {{kIdleLabel, kIdleIndex}, {kOovLabel, kOovIndex}};
  }

  // Counts labels over the training split; labels seen fewer than min_count
  // times collapse into OOV. Kept labels are indexed by (count desc, label
  // asc) after the reserved entries, independent of sequence order.
  static Vocabulary build(const std::vector<RawSequence>& train_sequences, int min_count = 5) {
    if (train_sequences.empty()) throw Error("build_vocabulary: empty training set");
    std::unordered_map<std::string, std::int64_t> counts;
    for (const auto& seq : train_sequences)
      for (const auto& e : seq.events)
        if (e.label != kIdleLabel && e.label != kOovLabel) ++counts[e.label];
    std::vector<std::pair<std::string, std::int64_t>> kept;
    for (const auto& [label, count] : counts)
      if (count >= min_count) kept.emplace_back(label, count);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    v.min_count_ = min_count;
    for (auto& [label, count] : kept) {
      v.index_[label] = static_cast<int>(v.labels_.size());
      v.labels_.push_back(label);
    }
    return v;
  }

  static Vocabulary from_labels(const std::vector<std::string>& labels, int min_count) {
    if (labels.size() < 2 || labels[0] != kIdleLabel || labels[1] != kOovLabel)
      throw Error("vocabulary labels must start with the reserved idle/oov entries");
    Vocabulary v;
    v.min_count_ = min_count;
    v.labels_ = labels;
    v.index_.clear();
    for (std::size_t i = 0; i < labels.size(); ++i) v.index_[labels[i]] = static_cast<int>(i);
    return v;
  }

  int lookup(const std::string& label) const {
    auto it = index_.find(label);
    return it == index_.end() ? kOovIndex : it->second;
  }

  bool contains(const std::string& label) const { return index_.count(label) > 0; }

  const std::string& label(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= labels_.size())
      throw DimensionError("vocabulary index out of range: " + std::to_string(index));
    return labels_[static_cast<std::size_t>(index)];
  }

  int size() const { return static_cast<int>(labels_.size()); }
  int min_count() const { return min_count_; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
  int min_count_ = 5;
};

inline std::vector<EventToken> encode(const RawSequence& seq, const Vocabulary& vocab) {
  std::vector<EventToken> out;
  out.reserve(seq.events.size());
  for (const auto& e : seq.events) {
    if (!e.has_duration) throw Error("encode: durations not computed for sequence " + seq.id);
    out.push_back({vocab.lookup(e.label), std::max(e.duration, kMinDuration)});
  }
  return out;
}

// Full ingestion pipeline for one sequence: idle injection, duration fill,
// clamping.
inline RawSequence normalize_sequence(const RawSequence& seq, double min_gap = kDefaultMinGap) {
  return compute_durations(inject_idle_events(seq, min_gap));
}

// ---- Dataset split ----

struct DatasetSplit {
  std::vector<RawSequence> train, valid, test;
};

// Sequence-level split; deterministic in seed. Largest-remainder rounding,
// then every split with a positive ratio is guaranteed at least one
// sequence.
inline DatasetSplit split_dataset(std::vector<RawSequence> sequences,
                                  std::array<double, 3> ratios = {0.8, 0.1, 0.1},
                                  std::uint64_t seed = 0) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("split_dataset: ratios must sum to 1");
  for (double r : ratios)
    if (r < 0) throw DomainError("split_dataset: ratios must be nonnegative");
  const std::size_t n = sequences.size();
  if (n < 3) throw Error("split_dataset: need at least 3 sequences");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);

  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(exact);
    frac[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (frac[i] > frac[best]) best = i;
    ++sizes[best];
    frac[best] = -1;
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) {
    if (ratios[i] > 0 && sizes[i] == 0) {
      int largest = 0;
      for (int j = 1; j < 3; ++j)
        if (sizes[j] > sizes[largest]) largest = j;
      --sizes[largest];
      ++sizes[i];
    }
  }

  DatasetSplit split;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < sizes[0]; ++i) split.train.push_back(std::move(sequences[order[pos++]]));
  for (std::size_t i = 0; i < sizes[1]; ++i) split.valid.push_back(std::move(sequences[order[pos++]]));
  for (std::size_t i = 0; i < sizes[2]; ++i) split.test.push_back(std::move(sequences[order[pos++]]));
  return split;
}

}  // namespace tseq
