#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cdjp/error.hpp"
#include "cdjp/tinynet.hpp"

namespace cdjp {

struct AdamHyper {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Learning rate is multiplied by decay_factor every decay_interval steps.
  std::uint64_t decay_interval = 100000;
  double decay_factor = 0.1;
};

template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;  ///< completed updates
  Grads<T> m, v;

  /// Rate used by the next update.
  double lr() const {
    const auto drops = hyper.decay_interval ? step / hyper.decay_interval : 0;
    return hyper.base_lr * std::pow(hyper.decay_factor, static_cast<double>(drops));
  }
};

/// One bias-corrected ADAM update of a single buffer; `t` is the 1-based step.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v, double lr,
                 const AdamHyper& h, std::uint64_t t) {
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    param[i] = static_cast<T>(param[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps));
  }
}

/// Throws Errc::ShapeMismatch when grads do not line up with params.
template <typename T>
void adam_step(std::vector<Param<T>>& params, const Grads<T>& grads, AdamState<T>& state) {
  if (grads.size() != params.size()) fail(Errc::ShapeMismatch, "adam_step: gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.size(), T{0});
      state.v.emplace_back(p.value.size(), T{0});
    }
  }
  if (state.m.size() != params.size()) fail(Errc::ShapeMismatch, "adam_step: moment buffers do not match params");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].size() != params[i].value.size() || state.m[i].size() != params[i].value.size())
      fail(Errc::ShapeMismatch, "adam_step: shape mismatch for " + params[i].name);
  const double lr = state.lr();
  const std::uint64_t t = state.step + 1;
  for (std::size_t i = 0; i < params.size(); ++i)
    adam_update<T>(params[i].value, grads[i], state.m[i], state.v[i], lr, state.hyper, t);
  state.step = t;
}

}  // namespace cdjp
