#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tseq/common.hpp"
#include "tseq/dataio.hpp"
#include "tseq/mat.hpp"
#include "tseq/numerics.hpp"
#include "tseq/params.hpp"
#include "tseq/tape.hpp"
#include "tseq/timerep.hpp"

namespace tseq {

enum class Variant { kNoTime, kTimeConcat, kTimeMask, kTimeJoint };
enum class Regularizer { kNone, kNll, kXent };
enum class DurationHeadInput { kRecurrent, kRecurrentPlusHidden };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kNoTime: return "no_time";
    case Variant::kTimeConcat: return "time_concat";
    case Variant::kTimeMask: return "time_mask";
    case Variant::kTimeJoint: return "time_joint";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "no_time") return Variant::kNoTime;
  if (s == "time_concat") return Variant::kTimeConcat;
  if (s == "time_mask") return Variant::kTimeMask;
  if (s == "time_joint") return Variant::kTimeJoint;
  throw ConfigError("unknown variant: " + s +
                    " (expected no_time|time_concat|time_mask|time_joint)");
}

inline std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::kNone: return "none";
    case Regularizer::kNll: return "nll";
    case Regularizer::kXent: return "xent";
  }
  return "?";
}

inline Regularizer regularizer_from_string(const std::string& s) {
  if (s == "none") return Regularizer::kNone;
  if (s == "nll") return Regularizer::kNll;
  if (s == "xent") return Regularizer::kXent;
  throw ConfigError("unknown regularizer: " + s + " (expected none|nll|xent)");
}

inline std::string to_string(DurationHeadInput d) {
  return d == DurationHeadInput::kRecurrent ? "recurrent" : "recurrent_plus_hidden";
}

inline DurationHeadInput duration_head_input_from_string(const std::string& s) {
  if (s == "recurrent") return DurationHeadInput::kRecurrent;
  if (s == "recurrent_plus_hidden") return DurationHeadInput::kRecurrentPlusHidden;
  throw ConfigError("unknown duration_head_input: " + s);
}

struct ModelConfig {
  Variant variant = Variant::kNoTime;
  Regularizer regularizer = Regularizer::kNone;
  int embedding_dim = 128;   // E
  int hidden_dim = 128;      // H
  int context_dim = 32;      // C
  int projection_dim = 30;   // P
  int post_projection_dim = 0;  // 0 = no post-recurrent projection layer
  bool share_projection_weights = false;
  DurationHeadInput duration_head_input = DurationHeadInput::kRecurrent;
  bool joint_log_input = false;
  bool duration_head_linear = false;
  bool duration_target_log = false;
  double reg_weight = 1.0;  // lambda
  double dropout = 0.0;
  int vocab_size = 0;  // |V|, filled from the vocabulary

  int lstm_input_dim() const {
    return variant == Variant::kTimeConcat ? embedding_dim + 1 : embedding_dim;
  }

  int event_head_input_dim() const {
    return post_projection_dim > 0 ? post_projection_dim : hidden_dim;
  }

  int duration_head_dim() const {
    return duration_head_input == DurationHeadInput::kRecurrentPlusHidden
               ? hidden_dim + post_projection_dim
               : hidden_dim;
  }

  void validate() const {
    if (embedding_dim < 1 || hidden_dim < 1) throw ConfigError("model: dims must be positive");
    if (variant == Variant::kTimeMask && context_dim < 1)
      throw ConfigError("model: context_dim must be positive");
    if ((variant == Variant::kTimeJoint || regularizer == Regularizer::kXent) && projection_dim < 1)
      throw ConfigError("model: projection_dim must be positive");
    if (post_projection_dim < 0) throw ConfigError("model: post_projection_dim must be >= 0");
    if (vocab_size < 2) throw ConfigError("model: vocabulary not set");
    if (share_projection_weights &&
        !(variant == Variant::kTimeJoint && regularizer == Regularizer::kXent))
      throw ConfigError(
          "model: share_projection_weights requires variant=time_joint and regularizer=xent");
    if (duration_head_input == DurationHeadInput::kRecurrentPlusHidden && post_projection_dim == 0)
      throw ConfigError("model: duration_head_input=recurrent_plus_hidden needs a post projection");
    if (reg_weight < 0) throw ConfigError("model: reg_weight must be nonnegative");
    if (dropout < 0 || dropout >= 1) throw ConfigError("model: dropout must be in [0, 1)");
  }
};

template <class T>
struct StepOutput {
  Vec<T> event_logits;
  T duration_pred = T(0);  // predicted next duration, seconds
  Vec<T> hidden;
};

// One unroll window of batched step data; [steps][batch] layout. Padded
// lanes carry mask 0 and a valid dummy target.
template <class T>
struct WindowBatch {
  int batch = 0;
  int steps = 0;
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<double>> durations;
  std::vector<std::vector<int>> targets;
  std::vector<std::vector<double>> target_durations;
  std::vector<std::vector<T>> mask;

  void resize(int steps_, int batch_) {
    steps = steps_;
    batch = batch_;
    inputs.assign(steps, std::vector<int>(batch, 0));
    durations.assign(steps, std::vector<double>(batch, kMinDuration));
    targets.assign(steps, std::vector<int>(batch, 0));
    target_durations.assign(steps, std::vector<double>(batch, kMinDuration));
    mask.assign(steps, std::vector<T>(batch, T(0)));
  }

  std::int64_t active_steps() const {
    std::int64_t n = 0;
    for (const auto& row : mask)
      for (T m : row) n += m > T(0);
    return n;
  }
};

template <class T>
struct BuiltWindow {
  int loss = -1;           // scalar node: mean over active steps of ev + lambda*reg
  int event_loss_sum = -1; // scalar node: masked sum of event losses
  Mat<T> h_out, c_out;     // final states, detached for the next window
  std::vector<T> duration_errors;  // unmasked prediction errors (sigma window)
  std::int64_t active = 0;
};

// The recurrent predictor. Parameters live in a ParamStore in checkpoint
// order; the same store backs the plain forward pass and the training tape.
template <class T>
class Model {
 public:
  Model(ModelConfig config, Vocabulary vocab)
      : config_(std::move(config)), vocab_(std::move(vocab)) {
    config_.vocab_size = vocab_.size();
    config_.validate();
    build_params();
  }

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  void init(std::uint64_t seed) {
    params_.init_uniform("embedding", seed, 0.05);
    if (config_.variant == Variant::kTimeMask) {
      params_.init_fan_in("time_mask.phi_w", seed);
      params_.init_fan_in("time_mask.mask_w", seed);
    }
    if (config_.variant == Variant::kTimeJoint) {
      params_.init_fan_in("time_joint.proj_w", seed);
      params_.init_uniform("time_joint.embed", seed, 0.05);
    }
    if (has_dedicated_reg_projection()) {
      params_.init_fan_in("reg_proj.w", seed);
    }
    params_.init_fan_in("lstm.w", seed);
    if (config_.post_projection_dim > 0) params_.init_fan_in("post_proj.w", seed);
    params_.init_fan_in("out.w", seed);
    params_.init_fan_in("duration.w", seed);
  }

  // ---- Spec-surface single-vector operations ----

  Vec<T> embed_event(int index) const {
    const auto& e = params_.at(embedding_).value;
    if (index < 0 || static_cast<std::size_t>(index) >= e.rows())
      throw DimensionError("embed_event: index out of range");
    return e.row_vec(static_cast<std::size_t>(index));
  }

  TimeMaskParams<T> time_mask_params() const {
    if (config_.variant != Variant::kTimeMask) throw Error("model has no time-mask parameters");
    return {params_.at(tm_phi_w_).value, params_.at(tm_phi_b_).value.row_vec(0),
            params_.at(tm_mask_w_).value, params_.at(tm_mask_b_).value.row_vec(0)};
  }

  TimeJointParams<T> time_joint_params() const {
    if (config_.variant != Variant::kTimeJoint) throw Error("model has no time-joint parameters");
    return {params_.at(tj_proj_w_).value, params_.at(tj_proj_b_).value.row_vec(0),
            params_.at(tj_embed_).value};
  }

  // Projection parameters used by the R^X regularizer (shared or dedicated).
  TimeJointParams<T> reg_projection_params() const {
    if (config_.regularizer != Regularizer::kXent) throw Error("model has no R^X projection");
    if (config_.share_projection_weights) return time_joint_params();
    return {params_.at(reg_proj_w_).value, params_.at(reg_proj_b_).value.row_vec(0), Mat<T>()};
  }

  // Variant-specific input construction for a single step.
  Vec<T> build_input(const Vec<T>& x, double d) const {
    switch (config_.variant) {
      case Variant::kNoTime:
        return x;
      case Variant::kTimeConcat:
        return time_concat(x, d);
      case Variant::kTimeMask: {
        const Vec<T> ctx = relu(kern_affine(Vec<T>{static_cast<T>(std::log(std::max(d, kMinDuration)))},
                                            tm_phi_w_, tm_phi_b_));
        const Vec<T> mask = sigmoid(kern_affine(ctx, tm_mask_w_, tm_mask_b_));
        return apply_mask(x, mask);
      }
      case Variant::kTimeJoint: {
        const double input = config_.joint_log_input ? std::log(std::max(d, kMinDuration)) : d;
        const Vec<T> proj = kern_affine(Vec<T>{static_cast<T>(input)}, tj_proj_w_, tj_proj_b_);
        const Vec<T> soft = softmax(proj);
        const Vec<T> g = time_embedding(soft, params_.at(tj_embed_).value);
        return joint_embed(x, g);
      }
    }
    throw Error("bad variant");
  }

  std::pair<Vec<T>, Vec<T>> lstm_step(const Vec<T>& h_prev, const Vec<T>& c_prev,
                                      const Vec<T>& input) const {
    const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
    if (h_prev.size() != hd || c_prev.size() != hd)
      throw DimensionError("lstm_step: state dimension mismatch");
    Vec<T> xh(input.size() + hd);
    std::copy(input.begin(), input.end(), xh.begin());
    std::copy(h_prev.begin(), h_prev.end(), xh.begin() + static_cast<std::ptrdiff_t>(input.size()));
    const Vec<T> z = kern_affine(xh, lstm_w_, lstm_b_);
    Vec<T> h(hd), c(hd);
    for (std::size_t j = 0; j < hd; ++j) {
      const T ig = kern::sigmoid1(z[j]);
      const T fg = kern::sigmoid1(z[hd + j]);
      const T gc = std::tanh(z[2 * hd + j]);
      const T og = kern::sigmoid1(z[3 * hd + j]);
      c[j] = fg * c_prev[j] + ig * gc;
      h[j] = og * std::tanh(c[j]);
    }
    return {h, c};
  }

  // Full plain forward over a token sequence; one StepOutput per token.
  std::vector<StepOutput<T>> forward(const std::vector<EventToken>& tokens) const {
    if (tokens.empty()) throw DimensionError("forward: empty token sequence");
    const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
    Vec<T> h(hd, T(0)), c(hd, T(0));
    std::vector<StepOutput<T>> out;
    out.reserve(tokens.size());
    for (const EventToken& tok : tokens) {
      const Vec<T> x = embed_event(tok.index);
      const Vec<T> input = build_input(x, tok.duration);
      std::tie(h, c) = lstm_step(h, c, input);
      const Vec<T> rep = config_.post_projection_dim > 0
                             ? relu(kern_affine(h, pp_w_, pp_b_))
                             : h;
      StepOutput<T> step;
      step.event_logits = kern_affine(rep, out_w_, out_b_);
      Vec<T> din = h;
      if (config_.duration_head_input == DurationHeadInput::kRecurrentPlusHidden) {
        din.insert(din.end(), rep.begin(), rep.end());
      }
      const T raw = kern_affine(din, dur_w_, dur_b_)[0];
      step.duration_pred = duration_from_head(raw);
      step.hidden = h;
      out.push_back(std::move(step));
    }
    return out;
  }

  // Predicted seconds from the raw duration-head activation.
  T duration_from_head(T raw) const {
    if (config_.duration_target_log) return std::exp(raw);
    if (config_.duration_head_linear) return raw;
    return kern::softplus1(raw);
  }

  // ---- Training graph ----

  // Builds the loss graph for one unroll window. h0/c0 are constants (the
  // truncated-BPTT boundary); the returned h_out/c_out feed the next window.
  BuiltWindow<T> build_window(Tape<T>& tape, const WindowBatch<T>& win, const Mat<T>& h0,
                              const Mat<T>& c0, T sigma, std::mt19937_64* dropout_rng) const {
    const int B = win.batch;
    const std::size_t hd = static_cast<std::size_t>(config_.hidden_dim);
    BuiltWindow<T> built;
    built.active = win.active_steps();

    int h = tape.input(h0);
    int c = tape.input(c0);
    int ev_sum = -1;
    int reg_sum = -1;
    const bool use_reg = config_.regularizer != Regularizer::kNone && config_.reg_weight > 0;

    std::vector<T> logd(static_cast<std::size_t>(B));
    for (int s = 0; s < win.steps; ++s) {
      const int x = tape.embed_rows(embedding_, win.inputs[static_cast<std::size_t>(s)]);
      const int input = build_input_node(tape, x, win.durations[static_cast<std::size_t>(s)], logd);

      const int xh = tape.concat_cols(input, h);
      const int z = tape.param_bias(tape.param_matmul(xh, lstm_w_), lstm_b_);
      const int ig = tape.sigmoid(tape.slice_cols(z, 0, hd));
      const int fg = tape.sigmoid(tape.slice_cols(z, hd, hd));
      const int gc = tape.tanh_(tape.slice_cols(z, 2 * hd, hd));
      const int og = tape.sigmoid(tape.slice_cols(z, 3 * hd, hd));
      c = tape.add(tape.mul(fg, c), tape.mul(ig, gc));
      h = tape.mul(og, tape.tanh_(c));

      int h_vis = h;
      if (config_.dropout > 0 && dropout_rng) {
        h_vis = tape.mul(h, dropout_mask_node(tape, *dropout_rng, B));
      }
      const int rep = config_.post_projection_dim > 0
                          ? tape.relu(tape.param_bias(tape.param_matmul(h_vis, pp_w_), pp_b_))
                          : h_vis;
      const int logits = tape.param_bias(tape.param_matmul(rep, out_w_), out_b_);
      const int mask = tape.input_col(win.mask[static_cast<std::size_t>(s)]);
      const int ev = tape.mul(tape.pick_nll(logits, win.targets[static_cast<std::size_t>(s)]), mask);
      ev_sum = ev_sum < 0 ? ev : tape.add(ev_sum, ev);

      const int din = config_.duration_head_input == DurationHeadInput::kRecurrentPlusHidden
                          ? tape.concat_cols(h_vis, rep)
                          : h_vis;
      const int dur_raw = tape.param_bias(tape.param_matmul(din, dur_w_), dur_b_);

      if (use_reg) {
        const int reg = regularizer_node(tape, dur_raw, win.target_durations[static_cast<std::size_t>(s)], sigma);
        reg_sum = reg_sum < 0 ? tape.mul(reg, mask) : tape.add(reg_sum, tape.mul(reg, mask));
      }
      collect_duration_errors(tape, dur_raw, win.target_durations[static_cast<std::size_t>(s)],
                              win.mask[static_cast<std::size_t>(s)], built.duration_errors);
    }

    built.event_loss_sum = ev_sum;
    int total = ev_sum;
    if (use_reg) total = tape.add(ev_sum, tape.scale(reg_sum, static_cast<T>(config_.reg_weight)));
    const T inv = built.active > 0 ? T(1) / static_cast<T>(built.active) : T(0);
    built.loss = tape.scale(tape.reduce_sum(total), inv);
    built.h_out = tape.val(h);
    built.c_out = tape.val(c);
    return built;
  }

 private:
  bool has_dedicated_reg_projection() const {
    return config_.regularizer == Regularizer::kXent && !config_.share_projection_weights;
  }

  void build_params() {
    const int e = config_.embedding_dim;
    const int hd = config_.hidden_dim;
    embedding_ = params_.add("embedding", static_cast<std::size_t>(config_.vocab_size),
                             static_cast<std::size_t>(e));
    if (config_.variant == Variant::kTimeMask) {
      tm_phi_w_ = params_.add("time_mask.phi_w", 1, static_cast<std::size_t>(config_.context_dim));
      tm_phi_b_ = params_.add("time_mask.phi_b", 1, static_cast<std::size_t>(config_.context_dim));
      tm_mask_w_ = params_.add("time_mask.mask_w", static_cast<std::size_t>(config_.context_dim),
                               static_cast<std::size_t>(e));
      tm_mask_b_ = params_.add("time_mask.mask_b", 1, static_cast<std::size_t>(e));
    }
    if (config_.variant == Variant::kTimeJoint) {
      tj_proj_w_ = params_.add("time_joint.proj_w", 1, static_cast<std::size_t>(config_.projection_dim));
      tj_proj_b_ = params_.add("time_joint.proj_b", 1, static_cast<std::size_t>(config_.projection_dim));
      tj_embed_ = params_.add("time_joint.embed", static_cast<std::size_t>(config_.projection_dim),
                              static_cast<std::size_t>(e));
    }
    if (has_dedicated_reg_projection()) {
      reg_proj_w_ = params_.add("reg_proj.w", 1, static_cast<std::size_t>(config_.projection_dim));
      reg_proj_b_ = params_.add("reg_proj.b", 1, static_cast<std::size_t>(config_.projection_dim));
    }
    lstm_w_ = params_.add("lstm.w", static_cast<std::size_t>(config_.lstm_input_dim() + hd),
                          static_cast<std::size_t>(4 * hd));
    lstm_b_ = params_.add("lstm.b", 1, static_cast<std::size_t>(4 * hd));
    if (config_.post_projection_dim > 0) {
      pp_w_ = params_.add("post_proj.w", static_cast<std::size_t>(hd),
                          static_cast<std::size_t>(config_.post_projection_dim));
      pp_b_ = params_.add("post_proj.b", 1, static_cast<std::size_t>(config_.post_projection_dim));
    }
    out_w_ = params_.add("out.w", static_cast<std::size_t>(config_.event_head_input_dim()),
                         static_cast<std::size_t>(config_.vocab_size));
    out_b_ = params_.add("out.b", 1, static_cast<std::size_t>(config_.vocab_size));
    dur_w_ = params_.add("duration.w", static_cast<std::size_t>(config_.duration_head_dim()), 1);
    dur_b_ = params_.add("duration.b", 1, 1);
  }

  // y = x W + b through the shared kernels (matmul first, bias after), so
  // the plain path mirrors the tape path's arithmetic.
  Vec<T> kern_affine(const Vec<T>& x, int w_id, int b_id) const {
    const auto& w = params_.at(w_id).value;
    const auto& b = params_.at(b_id).value;
    if (x.size() != w.rows()) throw DimensionError("affine: input width mismatch");
    Vec<T> y(w.cols());
    kern::matmul(x.data(), w.data(), y.data(), 1, x.size(), w.cols());
    kern::add_bias(y.data(), b.data(), 1, w.cols());
    return y;
  }

  int build_input_node(Tape<T>& tape, int x, const std::vector<double>& durations,
                       std::vector<T>& scratch) const {
    const std::size_t B = durations.size();
    switch (config_.variant) {
      case Variant::kNoTime:
        return x;
      case Variant::kTimeConcat: {
        for (std::size_t b = 0; b < B; ++b)
          scratch[b] = static_cast<T>(std::log(std::max(durations[b], kMinDuration)));
        return tape.concat_cols(x, tape.input_col(scratch));
      }
      case Variant::kTimeMask: {
        for (std::size_t b = 0; b < B; ++b)
          scratch[b] = static_cast<T>(std::log(std::max(durations[b], kMinDuration)));
        const int d = tape.input_col(scratch);
        const int ctx = tape.relu(tape.param_bias(tape.param_matmul(d, tm_phi_w_), tm_phi_b_));
        const int mask = tape.sigmoid(tape.param_bias(tape.param_matmul(ctx, tm_mask_w_), tm_mask_b_));
        return tape.mul(x, mask);
      }
      case Variant::kTimeJoint: {
        for (std::size_t b = 0; b < B; ++b)
          scratch[b] = config_.joint_log_input
                           ? static_cast<T>(std::log(std::max(durations[b], kMinDuration)))
                           : static_cast<T>(durations[b]);
        const int d = tape.input_col(scratch);
        const int proj = tape.param_bias(tape.param_matmul(d, tj_proj_w_), tj_proj_b_);
        const int soft = tape.softmax_rows(proj);
        const int g = tape.param_matmul(soft, tj_embed_);
        return tape.scale(tape.add(x, g), T(0.5));
      }
    }
    throw Error("bad variant");
  }

  // Node holding the predicted next duration in seconds.
  int duration_seconds_node(Tape<T>& tape, int dur_raw) const {
    if (config_.duration_target_log) return tape.exp_(dur_raw);
    if (config_.duration_head_linear) return dur_raw;
    return tape.softplus(dur_raw);
  }

  int regularizer_node(Tape<T>& tape, int dur_raw, const std::vector<double>& target_durations,
                       T sigma) const {
    const std::size_t B = target_durations.size();
    std::vector<T> target(B);
    if (config_.regularizer == Regularizer::kNll) {
      int pred;
      if (config_.duration_target_log) {
        pred = dur_raw;  // head regresses log seconds directly
        for (std::size_t b = 0; b < B; ++b)
          target[b] = static_cast<T>(std::log(std::max(target_durations[b], kMinDuration)));
      } else {
        pred = duration_seconds_node(tape, dur_raw);
        for (std::size_t b = 0; b < B; ++b) target[b] = static_cast<T>(target_durations[b]);
      }
      const int err = tape.sq_err(pred, tape.input_col(target));
      return tape.scale(err, T(1) / (T(2) * sigma * sigma));
    }
    // R^X: cross entropy between projections of observed (constant) and
    // predicted next duration.
    const int pred_seconds = duration_seconds_node(tape, dur_raw);
    const int proj_in = config_.joint_log_input ? tape.log_(pred_seconds) : pred_seconds;
    const auto [w_id, b_id] = reg_projection_ids();
    const int pred_logits = tape.param_bias(tape.param_matmul(proj_in, w_id), b_id);

    // Observed-side soft one-hot, computed outside the tape: stop-gradient.
    const auto& w = params_.at(w_id).value;
    const auto& bb = params_.at(b_id).value;
    Mat<T> target_dist(B, w.cols());
    Vec<T> row(w.cols());
    for (std::size_t b = 0; b < B; ++b) {
      const double dt = std::max(target_durations[b], kMinDuration);
      const double in = config_.joint_log_input ? std::log(dt) : dt;
      for (std::size_t k = 0; k < w.cols(); ++k)
        row[k] = static_cast<T>(in) * w(0, k) + bb(0, k);
      const Vec<T> soft = softmax(row);
      std::copy(soft.begin(), soft.end(), target_dist.row(b));
    }
    return tape.xent_logits(tape.input(target_dist), pred_logits);
  }

  std::pair<int, int> reg_projection_ids() const {
    if (config_.share_projection_weights) return {tj_proj_w_, tj_proj_b_};
    return {reg_proj_w_, reg_proj_b_};
  }

  void collect_duration_errors(Tape<T>& tape, int dur_raw,
                               const std::vector<double>& target_durations,
                               const std::vector<T>& mask, std::vector<T>& out) const {
    const Mat<T>& raw = tape.val(dur_raw);
    for (std::size_t b = 0; b < target_durations.size(); ++b) {
      if (!(mask[b] > T(0))) continue;
      if (config_.duration_target_log) {
        out.push_back(raw(b, 0) -
                      static_cast<T>(std::log(std::max(target_durations[b], kMinDuration))));
      } else {
        out.push_back(duration_from_head(raw(b, 0)) - static_cast<T>(target_durations[b]));
      }
    }
  }

  int dropout_mask_node(Tape<T>& tape, std::mt19937_64& rng, int batch) const {
    const T keep = T(1) - static_cast<T>(config_.dropout);
    Mat<T> mask(static_cast<std::size_t>(batch), static_cast<std::size_t>(config_.hidden_dim));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < mask.size(); ++i)
      mask.data()[i] = unit(rng) < static_cast<double>(keep) ? T(1) / keep : T(0);
    return tape.input(mask);
  }

  ModelConfig config_;
  Vocabulary vocab_;
  ParamStore<T> params_;

  int embedding_ = -1;
  int tm_phi_w_ = -1, tm_phi_b_ = -1, tm_mask_w_ = -1, tm_mask_b_ = -1;
  int tj_proj_w_ = -1, tj_proj_b_ = -1, tj_embed_ = -1;
  int reg_proj_w_ = -1, reg_proj_b_ = -1;
  int lstm_w_ = -1, lstm_b_ = -1;
  int pp_w_ = -1, pp_b_ = -1;
  int out_w_ = -1, out_b_ = -1;
  int dur_w_ = -1, dur_b_ = -1;
};

// Indices of the K largest logits outside `exclude`, descending, ties to
// the lower index.
template <class T>
std::vector<int> predict_topk(const Vec<T>& logits, int k,
                              const std::unordered_set<int>* exclude = nullptr) {
  const int excluded = exclude ? static_cast<int>(exclude->size()) : 0;
  if (k < 0 || k > static_cast<int>(logits.size()) - excluded)
    throw DimensionError("predict_topk: K too large");
  std::vector<int> order;
  order.reserve(logits.size());
  for (int i = 0; i < static_cast<int>(logits.size()); ++i)
    if (!exclude || !exclude->count(i)) order.push_back(i);
  const auto cmp = [&logits](int a, int b) {
    const T la = logits[static_cast<std::size_t>(a)];
    const T lb = logits[static_cast<std::size_t>(b)];
    if (la != lb) return la > lb;
    return a < b;
  };
  if (static_cast<std::size_t>(k) < order.size()) {
    std::partial_sort(order.begin(), order.begin() + k, order.end(), cmp);
    order.resize(static_cast<std::size_t>(k));
  } else {
    std::sort(order.begin(), order.end(), cmp);
  }
  return order;
}

}  // namespace tseq
