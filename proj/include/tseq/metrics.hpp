#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "tseq/common.hpp"
#include "tseq/dataio.hpp"
#include "tseq/losses.hpp"
#include "tseq/model.hpp"

namespace tseq {

struct EvalReport {
  double accuracy = 0.0;
  std::map<int, double> precision_at_k;
  std::map<int, double> map_at_k;
  double event_loss = 0.0;
  double duration_mae = 0.0;
  std::int64_t steps = 0;     // prediction steps scored
  std::int64_t examples = 0;  // recommendation examples scored
};

// Truncated mean average precision: (1/min(K,|relevant|)) * sum over hits
// in the top K of precision-at-their-rank.
inline double map_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                       int k) {
  if (relevant.empty()) return 0.0;
  double score = 0.0;
  int hits = 0;
  const int limit = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int i = 0; i < limit; ++i) {
    if (relevant.count(ranked[static_cast<std::size_t>(i)])) {
      ++hits;
      score += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return score / static_cast<double>(std::min<int>(k, static_cast<int>(relevant.size())));
}

struct EvalOptions {
  std::vector<int> k_list = {1, 5, 10, 20};
  bool exclude_idle_targets = false;
  // Recommendation mode only: drop history items from the ranking, as in
  // "next five unique songs that the user has not listened".
  bool exclude_history = false;
};

// Per-step next-event evaluation. A sequence carrying an explicit target
// set is instead scored as one recommendation example with the set
// formulas; when any such examples exist, they own precision@K / MAP@K and
// the per-step sequences still own accuracy / loss / MAE.
template <class T>
EvalReport evaluate(const Model<T>& model, const std::vector<std::vector<EventToken>>& sequences,
                    const std::vector<std::vector<int>>& target_sets, const EvalOptions& opts) {
  EvalReport report;
  int k_max = 1;
  for (int k : opts.k_list) {
    if (k < 1) throw DomainError("evaluate: K must be >= 1");
    k_max = std::max(k_max, k);
  }
  std::map<int, std::int64_t> step_hits;
  std::map<int, double> step_map, rec_prec, rec_map;
  std::int64_t correct = 0;
  double loss_sum = 0.0, mae_sum = 0.0;

  for (std::size_t si = 0; si < sequences.size(); ++si) {
    const auto& tokens = sequences[si];
    if (tokens.empty()) continue;
    const bool rec_mode = si < target_sets.size() && !target_sets[si].empty();
    const auto outputs = model.forward(tokens);

    if (rec_mode) {
      const Vec<T>& logits = outputs.back().event_logits;
      std::unordered_set<int> exclude;
      if (opts.exclude_history)
        for (const auto& t : tokens) exclude.insert(t.index);
      std::unordered_set<int> relevant(target_sets[si].begin(), target_sets[si].end());
      for (int t : relevant) exclude.erase(t);
      const int avail = static_cast<int>(logits.size()) - static_cast<int>(exclude.size());
      const auto ranked = predict_topk(logits, std::min(k_max, avail), &exclude);
      for (int k : opts.k_list) {
        std::int64_t inter = 0;
        for (int i = 0; i < std::min<int>(k, static_cast<int>(ranked.size())); ++i)
          inter += relevant.count(ranked[static_cast<std::size_t>(i)]);
        rec_prec[k] += static_cast<double>(inter) / static_cast<double>(k);
        rec_map[k] += map_at_k(ranked, relevant, k);
      }
      ++report.examples;
      continue;
    }

    for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
      const int target = tokens[t + 1].index;
      if (opts.exclude_idle_targets && target == Vocabulary::kIdleIndex) continue;
      const Vec<T>& logits = outputs[t].event_logits;
      const auto ranked = predict_topk(logits, std::min<int>(k_max, static_cast<int>(logits.size())));
      correct += ranked[0] == target;
      for (int k : opts.k_list) {
        bool hit = false;
        for (int i = 0; i < std::min<int>(k, static_cast<int>(ranked.size())); ++i)
          hit |= ranked[static_cast<std::size_t>(i)] == target;
        step_hits[k] += hit;
        const std::unordered_set<int> relevant{target};
        step_map[k] += map_at_k(ranked, relevant, k);
      }
      loss_sum += static_cast<double>(event_loss(logits, target));
      mae_sum += std::abs(static_cast<double>(outputs[t].duration_pred) - tokens[t + 1].duration);
      ++report.steps;
    }
  }

  if (report.steps > 0) {
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.steps);
    report.event_loss = loss_sum / static_cast<double>(report.steps);
    report.duration_mae = mae_sum / static_cast<double>(report.steps);
  }
  for (int k : opts.k_list) {
    if (report.examples > 0) {
      report.precision_at_k[k] = rec_prec[k] / static_cast<double>(report.examples);
      report.map_at_k[k] = rec_map[k] / static_cast<double>(report.examples);
    } else if (report.steps > 0) {
      report.precision_at_k[k] =
          static_cast<double>(step_hits[k]) / static_cast<double>(report.steps);
      report.map_at_k[k] = step_map[k] / static_cast<double>(report.steps);
    } else {
      report.precision_at_k[k] = 0.0;
      report.map_at_k[k] = 0.0;
    }
  }
  return report;
}

template <class T>
EvalReport evaluate(const Model<T>& model, const std::vector<std::vector<EventToken>>& sequences,
                    const EvalOptions& opts = {}) {
  return evaluate(model, sequences, std::vector<std::vector<int>>{}, opts);
}

}  // namespace tseq
