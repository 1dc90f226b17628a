#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tseq/common.hpp"
#include "tseq/dataio.hpp"
#include "tseq/mat.hpp"
#include "tseq/numerics.hpp"

namespace tseq {

// Time-mask parameters: a one-hidden-layer ReLU network from log-duration
// to a context vector of size C, then an affine map to a sigmoid mask of
// size E.
template <class T>
struct TimeMaskParams {
  Mat<T> phi_w;   // 1 x C
  Vec<T> phi_b;   // C
  Mat<T> mask_w;  // C x E
  Vec<T> mask_b;  // E
};

// Event-time joint embedding parameters: scalar duration projected to P
// logits, soft one-hot via softmax, then a weighted sum of time-embedding
// rows of size E.
template <class T>
struct TimeJointParams {
  Mat<T> proj_w;      // 1 x P
  Vec<T> proj_b;      // P
  Mat<T> time_embed;  // P x E
};

// c^d = ReLU(W phi_w . log d + phi_b). The duration floor is dataio's job;
// values below it are rejected here.
template <class T>
Vec<T> time_context(double d, const TimeMaskParams<T>& p) {
  if (d < kMinDuration) throw DomainError("time_context: duration below floor");
  const Vec<T> input{static_cast<T>(std::log(d))};
  return relu(affine(input, p.phi_w, p.phi_b));
}

// m_d = sigmoid(c^d W + b), entries in (0,1).
template <class T>
Vec<T> time_mask(const Vec<T>& context, const TimeMaskParams<T>& p) {
  return sigmoid(affine(context, p.mask_w, p.mask_b));
}

template <class T>
Vec<T> apply_mask(const Vec<T>& x, const Vec<T>& mask) {
  if (x.size() != mask.size()) throw DimensionError("apply_mask: dimension mismatch");
  Vec<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask[i];
  return y;
}

// p^d = d W + b with raw d by default; log_input switches the projection
// input to log d.
template <class T>
Vec<T> time_projection(double d, const TimeJointParams<T>& p, bool log_input = false) {
  const double input = log_input ? std::log(std::max(d, kMinDuration)) : d;
  const Vec<T> x{static_cast<T>(input)};
  return affine(x, p.proj_w, p.proj_b);
}

template <class T>
Vec<T> soft_one_hot(const Vec<T>& projection) {
  return softmax(projection);
}

// g_d = s^d E^s: a convex combination of the time-embedding rows.
template <class T>
Vec<T> time_embedding(const Vec<T>& soft, const Mat<T>& time_embed) {
  if (soft.size() != time_embed.rows()) throw DimensionError("time_embedding: dimension mismatch");
  Vec<T> g(time_embed.cols(), T(0));
  for (std::size_t k = 0; k < soft.size(); ++k) {
    const T w = soft[k];
    const T* row = time_embed.row(k);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += w * row[j];
  }
  return g;
}

template <class T>
Vec<T> joint_embed(const Vec<T>& x, const Vec<T>& g) {
  if (x.size() != g.size()) throw DimensionError("joint_embed: dimension mismatch");
  Vec<T> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] + g[i]) / T(2);
  return y;
}

template <class T>
Vec<T> time_concat(const Vec<T>& x, double d) {
  Vec<T> y(x.begin(), x.end());
  y.push_back(static_cast<T>(std::log(std::max(d, kMinDuration))));
  return y;
}

// Full duration -> soft one-hot pipeline for one probe value.
template <class T>
Vec<T> project_duration(double d, const TimeJointParams<T>& p, bool log_input = false) {
  return soft_one_hot(time_projection(d, p, log_input));
}

// One row per probed duration: the probe in seconds followed by the full
// soft one-hot vector.
template <class T>
std::vector<std::pair<double, Vec<T>>> inspect_projection(const TimeJointParams<T>& p,
                                                          const std::vector<double>& durations,
                                                          bool log_input = false) {
  std::vector<std::pair<double, Vec<T>>> rows;
  rows.reserve(durations.size());
  for (double d : durations) rows.emplace_back(d, project_duration(d, p, log_input));
  return rows;
}

inline std::vector<double> probe_grid(double d_min, double d_max, int num_points, bool log_scale) {
  if (num_points < 1) throw DomainError("probe_grid: need at least one point");
  if (!(d_min > 0) || !(d_max >= d_min)) throw DomainError("probe_grid: invalid range");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(num_points));
  if (num_points == 1) {
    out.push_back(d_min);
    return out;
  }
  for (int i = 0; i < num_points; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(num_points - 1);
    out.push_back(log_scale ? d_min * std::pow(d_max / d_min, f) : d_min + f * (d_max - d_min));
  }
  return out;
}

}  // namespace tseq
