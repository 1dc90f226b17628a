#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tseq/common.hpp"
#include "tseq/dataio.hpp"
#include "tseq/kvfile.hpp"
#include "tseq/rng.hpp"

namespace tseq {

// Synthetic bucketed-transition generator. The next event is a table lookup
// on (current event, duration bucket) with probability 1-noise, uniform
// otherwise, so the Bayes-optimal predictor and its accuracy are known by
// construction.
struct SyntheticConfig {
  enum class DurationRule { kUniform, kEventDetermined };

  int vocab_size = 8;                 // K
  int buckets = 4;                    // B
  std::vector<double> bucket_edges;   // B+1 strictly increasing edges
  std::uint64_t table_seed = 1;
  int length = 100;                   // events per sequence
  int num_sequences = 100;
  double noise = 0.0;                 // epsilon
  DurationRule duration_rule = DurationRule::kUniform;

  void validate() const {
    if (vocab_size < 1) throw ConfigError("generator: vocab_size must be >= 1");
    if (buckets < 1) throw ConfigError("generator: buckets must be >= 1");
    if (bucket_edges.size() != static_cast<std::size_t>(buckets) + 1)
      throw ConfigError("generator: bucket_edges must have buckets+1 entries");
    for (std::size_t i = 0; i + 1 < bucket_edges.size(); ++i)
      if (!(bucket_edges[i] < bucket_edges[i + 1]))
        throw ConfigError("generator: bucket_edges must be strictly increasing");
    if (bucket_edges.front() < kMinDuration)
      throw ConfigError("generator: bucket_edges must start at or above the duration floor");
    if (length < 1) throw ConfigError("generator: length must be >= 1");
    if (num_sequences < 1) throw ConfigError("generator: num_sequences must be >= 1");
    if (noise < 0 || noise > 1) throw ConfigError("generator: noise must be in [0, 1]");
  }

  static SyntheticConfig from_kv(const KvFile& kv) {
    kv.reject_unknown_keys({"vocab_size", "buckets", "bucket_edges", "table_seed", "length",
                            "num_sequences", "noise", "duration_rule"});
    SyntheticConfig c;
    c.vocab_size = static_cast<int>(kv.get_int("vocab_size", c.vocab_size));
    c.buckets = static_cast<int>(kv.get_int("buckets", c.buckets));
    c.bucket_edges = kv.get_double_list("bucket_edges");
    if (c.bucket_edges.empty()) {
      // Log-spaced defaults covering sub-second to minutes.
      c.bucket_edges.resize(static_cast<std::size_t>(c.buckets) + 1);
      for (int i = 0; i <= c.buckets; ++i) c.bucket_edges[static_cast<std::size_t>(i)] = 0.25 * std::pow(4.0, i);
    }
    c.table_seed = static_cast<std::uint64_t>(kv.get_int("table_seed", static_cast<std::int64_t>(c.table_seed)));
    c.length = static_cast<int>(kv.get_int("length", c.length));
    c.num_sequences = static_cast<int>(kv.get_int("num_sequences", c.num_sequences));
    c.noise = kv.get_double("noise", c.noise);
    const std::string rule = kv.get_string("duration_rule", "uniform");
    if (rule == "uniform")
      c.duration_rule = DurationRule::kUniform;
    else if (rule == "event_determined")
      c.duration_rule = DurationRule::kEventDetermined;
    else
      throw ConfigError("generator: duration_rule must be uniform or event_determined");
    c.validate();
    return c;
  }

  static SyntheticConfig from_file(const std::string& path) {
    return from_kv(KvFile::parse_file(path));
  }
};

// Ground-truth lookup predictor for generated data.
struct OracleTable {
  std::vector<double> edges;            // B+1
  std::vector<std::vector<int>> table;  // K rows of B targets
  double noise = 0.0;

  int num_events() const { return static_cast<int>(table.size()); }
  int num_buckets() const { return static_cast<int>(edges.size()) - 1; }

  int bucket(double d) const {
    const int b = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), d) - edges.begin()) - 1;
    return std::clamp(b, 0, num_buckets() - 1);
  }

  int predict(int event, double duration) const {
    if (event < 0 || event >= num_events()) throw DimensionError("oracle: event out of range");
    return table[static_cast<std::size_t>(event)][static_cast<std::size_t>(bucket(duration))];
  }

  // P(correct) = (1-eps) + eps/K: the noise draw is uniform over all K
  // events, so it agrees with the table lookup 1/K of the time.
  double theoretical_accuracy() const {
    return 1.0 - noise + noise / static_cast<double>(num_events());
  }

  void validate() const {
    if (edges.size() < 2) throw ConfigError("oracle: need at least one bucket");
    for (const auto& row : table) {
      if (row.size() != static_cast<std::size_t>(num_buckets()))
        throw ConfigError("oracle: table row width mismatch");
      for (int t : row)
        if (t < 0 || t >= num_events()) throw ConfigError("oracle: table entry out of range");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["vocab_size"] = num_events();
    j["bucket_edges"] = edges;
    j["table"] = table;
    j["noise"] = noise;
    return j;
  }

  static OracleTable from_json(const nlohmann::json& j) {
    OracleTable o;
    o.edges = j.at("bucket_edges").get<std::vector<double>>();
    o.table = j.at("table").get<std::vector<std::vector<int>>>();
    o.noise = j.at("noise").get<double>();
    if (j.at("vocab_size").get<int>() != o.num_events())
      throw ConfigError("oracle: vocab_size disagrees with table");
    o.validate();
    return o;
  }

  static OracleTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open oracle file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path + ": invalid JSON: " + std::string(ex.what()));
    }
    return from_json(j);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write oracle file: " + path);
    out << to_json().dump(2) << "\n";
  }
};

inline std::string synthetic_label(int event) { return "e" + std::to_string(event); }

// Table rows are B distinct targets sampled from the table_seed stream, so
// a duration-blind predictor tops out near (1-eps)/B + eps/K.
inline OracleTable make_oracle(const SyntheticConfig& config) {
  config.validate();
  OracleTable oracle;
  oracle.edges = config.bucket_edges;
  oracle.noise = config.noise;
  auto rng = make_rng(config.table_seed, "transition-table");
  const int k = config.vocab_size;
  std::vector<int> candidates(static_cast<std::size_t>(k));
  std::iota(candidates.begin(), candidates.end(), 0);
  oracle.table.resize(static_cast<std::size_t>(k));
  for (int e = 0; e < k; ++e) {
    std::shuffle(candidates.begin(), candidates.end(), rng);
    auto& row = oracle.table[static_cast<std::size_t>(e)];
    if (config.buckets <= k) {
      row.assign(candidates.begin(), candidates.begin() + config.buckets);
    } else {
      row.resize(static_cast<std::size_t>(config.buckets));
      std::uniform_int_distribution<int> pick(0, k - 1);
      for (int b = 0; b < config.buckets; ++b)
        row[static_cast<std::size_t>(b)] = b < k ? candidates[static_cast<std::size_t>(b)] : pick(rng);
    }
  }
  return oracle;
}

// Duration assigned by the event-determined rule: geometric midpoint of
// bucket (event mod B).
inline double event_determined_duration(const SyntheticConfig& config, int event) {
  const int b = event % config.buckets;
  return std::sqrt(config.bucket_edges[static_cast<std::size_t>(b)] *
                   config.bucket_edges[static_cast<std::size_t>(b) + 1]);
}

struct SyntheticDataset {
  std::vector<RawSequence> sequences;
  OracleTable oracle;
};

inline SyntheticDataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  SyntheticDataset data;
  data.oracle = make_oracle(config);
  auto rng = make_rng(seed, "synthetic-data");
  std::uniform_int_distribution<int> uniform_event(0, config.vocab_size - 1);
  std::uniform_int_distribution<int> uniform_bucket(0, config.buckets - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  data.sequences.reserve(static_cast<std::size_t>(config.num_sequences));
  for (int s = 0; s < config.num_sequences; ++s) {
    RawSequence seq;
    seq.id = "synthetic-" + std::to_string(s);
    seq.events.reserve(static_cast<std::size_t>(config.length));
    int event = uniform_event(rng);
    int prev_event = -1;
    double t = 0.0;
    for (int i = 0; i < config.length; ++i) {
      double duration;
      if (config.duration_rule == SyntheticConfig::DurationRule::kEventDetermined) {
        // d_{t+1} = f(e_t); the first duration has no predecessor and uses
        // the event's own bucket midpoint.
        duration = event_determined_duration(config, prev_event >= 0 ? prev_event : event);
      } else {
        const int b = uniform_bucket(rng);
        std::uniform_real_distribution<double> in_bucket(config.bucket_edges[static_cast<std::size_t>(b)],
                                                         config.bucket_edges[static_cast<std::size_t>(b) + 1]);
        duration = in_bucket(rng);
      }

      RawEvent e;
      e.label = synthetic_label(event);
      e.start = t;
      e.duration = duration;
      e.has_duration = true;
      seq.events.push_back(std::move(e));
      t += duration;

      const int table_next = data.oracle.predict(event, duration);
      prev_event = event;
      event = (unit(rng) < config.noise) ? uniform_event(rng) : table_next;
    }
    data.sequences.push_back(std::move(seq));
  }
  return data;
}

// Empirical accuracy of the lookup oracle over the generated transitions.
inline double measure_oracle_accuracy(const SyntheticDataset& data) {
  std::int64_t hits = 0, total = 0;
  for (const auto& seq : data.sequences) {
    for (std::size_t i = 0; i + 1 < seq.events.size(); ++i) {
      const int cur = std::stoi(seq.events[i].label.substr(1));
      const int next = std::stoi(seq.events[i + 1].label.substr(1));
      hits += data.oracle.predict(cur, seq.events[i].duration) == next;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace tseq
