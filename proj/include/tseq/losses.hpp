#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tseq/common.hpp"
#include "tseq/numerics.hpp"
#include "tseq/timerep.hpp"

namespace tseq {

inline constexpr double kSigmaMin = 1e-3;

// -log softmax(logits)[target]
template <class T>
T event_loss(const Vec<T>& logits, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= logits.size())
    throw DimensionError("event_loss: target out of range");
  const Vec<T> probs = softmax(logits);
  const double p = std::max(static_cast<double>(probs[static_cast<std::size_t>(target)]), kLogFloor);
  return static_cast<T>(-std::log(p));
}

// R^N: squared duration prediction error under a zero-mean Gaussian with
// scale sigma.
template <class T>
T reg_nll(T predicted, T observed, T sigma) {
  if (!(sigma >= static_cast<T>(kSigmaMin))) throw DomainError("reg_nll: sigma below floor");
  const T diff = predicted - observed;
  return diff * diff / (T(2) * sigma * sigma);
}

// R^X: cross entropy between the soft one-hot projections of the observed
// and predicted next durations. The observed-side projection is a constant
// for backpropagation purposes; this plain form just computes the value.
template <class T>
T reg_xent(T predicted, T observed, const TimeJointParams<T>& proj, bool log_input = false) {
  const double dp = std::max(static_cast<double>(predicted), kMinDuration);
  const double dt = std::max(static_cast<double>(observed), kMinDuration);
  return cross_entropy(project_duration(dt, proj, log_input), project_duration(dp, proj, log_input));
}

// Running scale of duration prediction errors for R^N. Seeded from the
// training-set duration std; refreshed once per update interval (one epoch
// by default) with the population std of the errors seen since the last
// update. Constant in between, so it carries no gradient.
template <class T>
struct SigmaState {
  T sigma = T(1);
  std::vector<T> window;
  std::uint64_t update_interval = 1;  // epochs between updates
  std::uint64_t intervals_seen = 0;

  static SigmaState seeded(T initial_sigma) {
    SigmaState s;
    s.sigma = std::max(initial_sigma, static_cast<T>(kSigmaMin));
    return s;
  }

  void record(T error) { window.push_back(error); }

  // Population std about the window mean, floored at sigma_min. No-op when
  // the window is empty or the interval has not elapsed.
  void update() {
    ++intervals_seen;
    if (intervals_seen % update_interval != 0) return;
    if (window.empty()) return;
    double mean = 0;
    for (T e : window) mean += static_cast<double>(e);
    mean /= static_cast<double>(window.size());
    double var = 0;
    for (T e : window) {
      const double d = static_cast<double>(e) - mean;
      var += d * d;
    }
    var /= static_cast<double>(window.size());
    sigma = std::max(static_cast<T>(std::sqrt(var)), static_cast<T>(kSigmaMin));
    window.clear();
  }
};

template <class T>
SigmaState<T> update_sigma(SigmaState<T> state, const std::vector<T>& new_errors) {
  for (T e : new_errors) state.record(e);
  state.update();
  return state;
}

// Mean over steps of event loss + lambda * regularizer loss. reg_losses may
// be empty when no regularizer is configured.
template <class T>
T total_loss(const std::vector<T>& event_losses, const std::vector<T>& reg_losses, T lambda) {
  if (lambda < T(0)) throw DomainError("total_loss: lambda must be nonnegative");
  if (!reg_losses.empty() && reg_losses.size() != event_losses.size())
    throw DimensionError("total_loss: step count mismatch");
  if (event_losses.empty()) return T(0);
  double sum = 0;
  for (std::size_t i = 0; i < event_losses.size(); ++i) {
    sum += static_cast<double>(event_losses[i]);
    if (!reg_losses.empty()) sum += static_cast<double>(lambda) * static_cast<double>(reg_losses[i]);
  }
  return static_cast<T>(sum / static_cast<double>(event_losses.size()));
}

// Population std of a sample (used to seed sigma from training durations).
template <class T>
T population_std(const std::vector<T>& values) {
  if (values.empty()) return T(0);
  double mean = 0;
  for (T v : values) mean += static_cast<double>(v);
  mean /= static_cast<double>(values.size());
  double var = 0;
  for (T v : values) {
    const double d = static_cast<double>(v) - mean;
    var += d * d;
  }
  return static_cast<T>(std::sqrt(var / static_cast<double>(values.size())));
}

}  // namespace tseq
