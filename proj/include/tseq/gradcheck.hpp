#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "tseq/common.hpp"
#include "tseq/params.hpp"

namespace tseq {

template <class T>
struct GradCheckReport {
  T max_rel_error = T(0);
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Central finite differences against the analytic gradient. loss_fn must
// compute the scalar loss from the current parameter values and accumulate
// the analytic gradient into the store (the store's grads are zeroed here
// before the analytic call). The finite-difference side touches only
// parameter values, never the backward pass, so it stays an independent
// oracle for whatever loss_fn runs internally.
template <class T>
GradCheckReport<T> grad_check(const std::function<T()>& loss_fn, ParamStore<T>& params, T eps) {
  if (!(eps >= T(1e-6) && eps <= T(1e-3))) throw DomainError("grad_check: eps outside [1e-6, 1e-3]");

  params.zero_grad();
  const T base = loss_fn();
  if (!std::isfinite(static_cast<double>(base))) throw NumericError("grad_check: non-finite loss");
  std::vector<Mat<T>> analytic;
  analytic.reserve(params.count());
  for (const auto& e : params.entries()) analytic.push_back(e.grad);

  GradCheckReport<T> report;
  for (std::size_t p = 0; p < params.count(); ++p) {
    auto& entry = params.at(static_cast<int>(p));
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const T saved = entry.value.data()[i];
      entry.value.data()[i] = saved + eps;
      const T up = loss_fn();
      entry.value.data()[i] = saved - eps;
      const T down = loss_fn();
      entry.value.data()[i] = saved;
      if (!std::isfinite(static_cast<double>(up)) || !std::isfinite(static_cast<double>(down)))
        throw NumericError("grad_check: non-finite loss at " + entry.name);
      const T numeric = (up - down) / (T(2) * eps);
      const T a = analytic[p].data()[i];
      const T denom = std::max(T(1e-8), std::abs(a) + std::abs(numeric));
      const T rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = entry.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace tseq
