#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tseq/common.hpp"
#include "tseq/losses.hpp"
#include "tseq/metrics.hpp"
#include "tseq/model.hpp"
#include "tseq/params.hpp"
#include "tseq/tape.hpp"

namespace tseq {

enum class Optimizer { kSgd, kAdagrad, kAdam };

inline std::string to_string(Optimizer o) {
  switch (o) {
    case Optimizer::kSgd: return "sgd";
    case Optimizer::kAdagrad: return "adagrad";
    case Optimizer::kAdam: return "adam";
  }
  return "?";
}

inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::kSgd;
  if (s == "adagrad") return Optimizer::kAdagrad;
  if (s == "adam") return Optimizer::kAdam;
  throw ConfigError("unknown optimizer: " + s + " (expected sgd|adagrad|adam)");
}

struct TrainConfig {
  Optimizer optimizer = Optimizer::kAdagrad;
  double learning_rate = 0.024;
  double clip_norm = 1.0;
  int batch_size = 32;
  int unroll_steps = 30;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t max_steps = 0;  // optimizer steps; 0 = no cap
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool exclude_idle_targets = false;
  bool verbose = false;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be positive");
    if (!(clip_norm > 0)) throw ConfigError("train: clip_norm must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (unroll_steps < 1) throw ConfigError("train: unroll_steps must be >= 1");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
  }
};

// Scales all gradients by clip_norm/g when the global L2 norm g exceeds
// clip_norm. Returns the pre-clip norm.
template <class T>
double clip_gradients(ParamStore<T>& params, double clip_norm) {
  if (!(clip_norm > 0)) throw DomainError("clip_gradients: clip_norm must be positive");
  double sq = 0.0;
  for (const auto& e : params.entries())
    for (std::size_t i = 0; i < e.grad.size(); ++i) {
      const double g = static_cast<double>(e.grad.data()[i]);
      sq += g * g;
    }
  const double norm = std::sqrt(sq);
  if (norm > clip_norm) {
    const T scale = static_cast<T>(clip_norm / norm);
    for (auto& e : params.entries())
      for (std::size_t i = 0; i < e.grad.size(); ++i) e.grad.data()[i] *= scale;
  }
  return norm;
}

// Per-parameter adaptive optimizers; state is keyed by entry order.
template <class T>
class OptimizerState {
 public:
  OptimizerState(Optimizer kind, double learning_rate, const ParamStore<T>& params)
      : kind_(kind), lr_(learning_rate) {
    if (kind_ != Optimizer::kSgd) {
      acc_.reserve(params.count());
      for (const auto& e : params.entries()) acc_.emplace_back(e.value.size(), T(0));
    }
    if (kind_ == Optimizer::kAdam) {
      moment_.reserve(params.count());
      for (const auto& e : params.entries()) moment_.emplace_back(e.value.size(), T(0));
    }
  }

  void step(ParamStore<T>& params) {
    ++t_;
    const T lr = static_cast<T>(lr_);
    switch (kind_) {
      case Optimizer::kSgd: {
        for (auto& e : params.entries())
          for (std::size_t i = 0; i < e.value.size(); ++i)
            e.value.data()[i] -= lr * e.grad.data()[i];
        break;
      }
      case Optimizer::kAdagrad: {
        for (std::size_t p = 0; p < params.count(); ++p) {
          auto& e = params.at(static_cast<int>(p));
          auto& acc = acc_[p];
          for (std::size_t i = 0; i < e.value.size(); ++i) {
            const T g = e.grad.data()[i];
            acc[i] += g * g;
            e.value.data()[i] -= lr * g / (std::sqrt(acc[i]) + kEps);
          }
        }
        break;
      }
      case Optimizer::kAdam: {
        const double b1t = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double b2t = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        for (std::size_t p = 0; p < params.count(); ++p) {
          auto& e = params.at(static_cast<int>(p));
          auto& m = moment_[p];
          auto& v = acc_[p];
          for (std::size_t i = 0; i < e.value.size(); ++i) {
            const T g = e.grad.data()[i];
            m[i] = static_cast<T>(kBeta1) * m[i] + static_cast<T>(1.0 - kBeta1) * g;
            v[i] = static_cast<T>(kBeta2) * v[i] + static_cast<T>(1.0 - kBeta2) * g * g;
            const T mhat = m[i] / static_cast<T>(b1t);
            const T vhat = v[i] / static_cast<T>(b2t);
            e.value.data()[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
          }
        }
        break;
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr T kEps = T(1e-8);

  Optimizer kind_;
  double lr_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<T>> acc_;     // adagrad accumulator / adam v
  std::vector<std::vector<T>> moment_;  // adam m
};

// Streams unroll windows over batch lanes. Each lane works through whole
// sequences one at a time; a sequence ending mid-window leaves masked
// padding and the lane picks up its next sequence (with reset state) at the
// following window boundary.
template <class T>
class WindowBatcher {
 public:
  WindowBatcher(const std::vector<std::vector<EventToken>>* sequences,
                std::vector<std::size_t> order, int batch, int unroll, bool exclude_idle_targets)
      : sequences_(sequences),
        order_(std::move(order)),
        unroll_(unroll),
        exclude_idle_(exclude_idle_targets),
        lanes_(static_cast<std::size_t>(batch)) {}

  // Fills the next window; zeroes h/c rows for lanes that start a new
  // sequence. Returns false when all sequences are consumed.
  bool next(WindowBatch<T>& win, Mat<T>& h, Mat<T>& c) {
    const int B = static_cast<int>(lanes_.size());
    bool any = false;
    for (int b = 0; b < B; ++b) {
      Lane& lane = lanes_[static_cast<std::size_t>(b)];
      if (lane.seq < 0 || finished(lane)) {
        if (!advance_lane(lane)) continue;
        for (std::size_t j = 0; j < h.cols(); ++j) {
          h(static_cast<std::size_t>(b), j) = T(0);
          c(static_cast<std::size_t>(b), j) = T(0);
        }
      }
      any = true;
    }
    if (!any) return false;

    win.resize(unroll_, B);
    for (int b = 0; b < B; ++b) {
      Lane& lane = lanes_[static_cast<std::size_t>(b)];
      if (lane.seq < 0) continue;
      const auto& tokens = (*sequences_)[static_cast<std::size_t>(lane.seq)];
      for (int s = 0; s < unroll_; ++s) {
        if (lane.pos + 1 >= tokens.size()) break;
        const EventToken& cur = tokens[lane.pos];
        const EventToken& next_tok = tokens[lane.pos + 1];
        win.inputs[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)] = cur.index;
        win.durations[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)] = cur.duration;
        win.targets[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)] = next_tok.index;
        win.target_durations[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)] =
            next_tok.duration;
        const bool masked = exclude_idle_ && next_tok.index == Vocabulary::kIdleIndex;
        win.mask[static_cast<std::size_t>(s)][static_cast<std::size_t>(b)] = masked ? T(0) : T(1);
        ++lane.pos;
      }
    }
    return true;
  }

 private:
  struct Lane {
    int seq = -1;
    std::size_t pos = 0;
  };

  bool finished(const Lane& lane) const {
    return lane.pos + 1 >= (*sequences_)[static_cast<std::size_t>(lane.seq)].size();
  }

  bool advance_lane(Lane& lane) {
    lane.seq = -1;
    while (next_ < order_.size()) {
      const std::size_t candidate = order_[next_++];
      if ((*sequences_)[candidate].size() >= 2) {
        lane.seq = static_cast<int>(candidate);
        lane.pos = 0;
        return true;
      }
    }
    return false;
  }

  const std::vector<std::vector<EventToken>>* sequences_;
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
  int unroll_;
  bool exclude_idle_;
  std::vector<Lane> lanes_;
};

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
  double valid_p_at_5 = 0.0;
  double sigma = 0.0;
};

inline void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write history file: " + path);
  out << "epoch,train_loss,valid_loss,valid_accuracy,valid_p_at_5,sigma\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.train_loss,
                  r.valid_loss, r.valid_accuracy, r.valid_p_at_5, r.sigma);
    out << buf;
  }
}

template <class T>
struct TrainResult {
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  double best_valid_loss = 0.0;
  double sigma = 0.0;  // sigma as of the returned checkpoint
  std::uint64_t steps = 0;
};

// Truncated-BPTT training with gradient clipping and early stopping on the
// validation event loss. The model is left holding the best-validation
// parameters. Single-threaded and deterministic in the seed.
template <class T>
TrainResult<T> train(Model<T>& model, const std::vector<std::vector<EventToken>>& train_data,
                     const std::vector<std::vector<EventToken>>& valid_data,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (train_data.empty()) throw Error("train: empty training set");
  if (valid_data.empty()) throw Error("train: empty validation set");

  const bool uses_sigma = model.config().regularizer == Regularizer::kNll;
  SigmaState<T> sigma_state;
  if (uses_sigma) {
    std::vector<T> durations;
    for (const auto& seq : train_data)
      for (const auto& tok : seq)
        durations.push_back(model.config().duration_target_log
                                ? static_cast<T>(std::log(std::max(tok.duration, kMinDuration)))
                                : static_cast<T>(tok.duration));
    sigma_state = SigmaState<T>::seeded(population_std(durations));
  }

  Tape<T> tape(model.params());
  OptimizerState<T> optimizer(cfg.optimizer, cfg.learning_rate, model.params());
  std::mt19937_64 dropout_rng = make_rng(cfg.seed, "dropout");

  TrainResult<T> result;
  std::vector<Mat<T>> best_snapshot = model.params().snapshot();
  double best_sigma = uses_sigma ? static_cast<double>(sigma_state.sigma) : 0.0;
  double best_valid = std::numeric_limits<double>::infinity();
  int epochs_without_improvement = 0;
  std::uint64_t steps = 0;
  bool stop = false;

  EvalOptions valid_opts;
  valid_opts.k_list = {1, 5};
  valid_opts.exclude_idle_targets = cfg.exclude_idle_targets;

  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs && !stop; ++epoch) {
    if (cfg.shuffle) {
      auto rng = make_rng(cfg.seed, "shuffle:" + std::to_string(epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    WindowBatcher<T> batcher(&train_data, order, cfg.batch_size, cfg.unroll_steps,
                             cfg.exclude_idle_targets);
    Mat<T> h(static_cast<std::size_t>(cfg.batch_size),
             static_cast<std::size_t>(model.config().hidden_dim));
    Mat<T> c = h;
    WindowBatch<T> win;
    double loss_sum = 0.0;
    std::int64_t loss_steps = 0;

    while (batcher.next(win, h, c)) {
      if (win.active_steps() == 0) continue;
      tape.reset();
      model.params().zero_grad();
      const BuiltWindow<T> built =
          model.build_window(tape, win, h, c, uses_sigma ? sigma_state.sigma : T(1), &dropout_rng);
      const double loss = static_cast<double>(tape.scalar_value(built.loss));
      if (!std::isfinite(loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(steps));
      tape.backward(built.loss);
      clip_gradients(model.params(), cfg.clip_norm);
      optimizer.step(model.params());

      if (uses_sigma)
        for (T e : built.duration_errors) sigma_state.record(e);
      h = built.h_out;
      c = built.c_out;
      loss_sum += loss * static_cast<double>(built.active);
      loss_steps += built.active;
      ++steps;
      if (cfg.max_steps > 0 && steps >= cfg.max_steps) {
        stop = true;
        break;
      }
    }

    if (uses_sigma) sigma_state.update();

    const EvalReport valid = evaluate(model, valid_data, valid_opts);
    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = loss_steps > 0 ? loss_sum / static_cast<double>(loss_steps) : 0.0;
    row.valid_loss = valid.event_loss;
    row.valid_accuracy = valid.accuracy;
    row.valid_p_at_5 = valid.precision_at_k.count(5) ? valid.precision_at_k.at(5) : 0.0;
    row.sigma = uses_sigma ? static_cast<double>(sigma_state.sigma) : 0.0;
    result.history.push_back(row);
    if (cfg.verbose) {
      std::fprintf(stderr,
                   "epoch %d: train_loss=%.5f valid_loss=%.5f valid_acc=%.4f valid_p@5=%.4f\n",
                   epoch, row.train_loss, row.valid_loss, row.valid_accuracy, row.valid_p_at_5);
    }

    if (valid.event_loss < best_valid) {
      best_valid = valid.event_loss;
      best_snapshot = model.params().snapshot();
      best_sigma = row.sigma;
      result.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= cfg.patience) stop = true;
    }
  }

  model.params().restore(best_snapshot);
  result.best_valid_loss = best_valid;
  result.sigma = best_sigma;
  result.steps = steps;
  return result;
}

}  // namespace tseq
