#include "cdjp/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cdjp/error.hpp"

namespace cdjp {

template <typename T>
T log_sum_exp(std::span<const T> x) {
  const T m = *std::max_element(x.begin(), x.end());
  T s{0};
  for (T v : x) s += std::exp(v - m);
  return m + std::log(s);
}

template <typename T>
LossValue<T> jigsaw_loss(std::span<const T> logits, std::uint32_t label) {
  if (logits.empty() || label >= logits.size()) fail(Errc::BadLabel, "jigsaw_loss: label out of range");
  const T lse = log_sum_exp(logits);
  LossValue<T> out;
  out.value = lse - logits[label];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - lse);
  out.grad[label] -= T{1};
  return out;
}

template <typename T>
LossValue<T> inpaint_l2_loss(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) fail(Errc::ShapeMismatch, "inpaint_l2_loss: shapes differ");
  LossValue<T> out;
  out.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    out.value += d * d;
    out.grad[i] = T{2} * d;
  }
  return out;
}

template <typename T>
LossValue<T> rebalanced_color_loss(std::span<const T> logits, std::span<const SoftLabel> targets,
                                   const ColorCodebook& cb) {
  const std::size_t q = cb.size();
  if (q == 0 || logits.size() != targets.size() * q)
    fail(Errc::ShapeMismatch, "rebalanced_color_loss: logits are not cells x Q");
  LossValue<T> out;
  out.grad.assign(logits.size(), T{0});
  for (std::size_t c = 0; c < targets.size(); ++c) {
    const auto cell = logits.subspan(c * q, q);
    const SoftLabel& t = targets[c];
    const T w = static_cast<T>(cb.weights[t.argmax()]);
    const T lse = log_sum_exp(cell);
    T ce{0}, mass{0};
    for (int j = 0; j < t.k; ++j) {
      if (t.indices[j] >= q) fail(Errc::ShapeMismatch, "rebalanced_color_loss: target bin out of range");
      const T tv = static_cast<T>(t.values[j]);
      ce += tv * (lse - cell[t.indices[j]]);
      mass += tv;
    }
    out.value += w * ce;
    T* g = out.grad.data() + c * q;
    for (std::size_t i = 0; i < q; ++i) g[i] = w * mass * std::exp(cell[i] - lse);
    for (int j = 0; j < t.k; ++j) g[t.indices[j]] -= w * static_cast<T>(t.values[j]);
  }
  return out;
}

template <typename T>
MultiLoss<T> nine_patch_color_loss(std::span<const std::span<const T>> logits,
                                   std::span<const std::span<const SoftLabel>> targets, const ColorCodebook& cb,
                                   std::span<const std::uint8_t> include) {
  if (logits.size() != targets.size() || (!include.empty() && include.size() != logits.size()))
    fail(Errc::ShapeMismatch, "nine_patch_color_loss: head/target count mismatch");
  MultiLoss<T> out;
  out.grads.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!include.empty() && !include[i]) {
      out.grads[i].assign(logits[i].size(), T{0});
      continue;
    }
    auto part = rebalanced_color_loss<T>(logits[i], targets[i], cb);
    out.value += part.value;
    out.grads[i] = std::move(part.grad);
  }
  return out;
}

template <typename T>
LossBundle<T> combined_loss(const HeadOutputs<T>& heads, const HeadTargets& targets, const ColorCodebook& cb,
                            const LossWeights& weights) {
  if (heads.colorize.size() != targets.colorize.size())
    fail(Errc::ShapeMismatch, "combined_loss: colorization head count mismatch");
  LossBundle<T> out;
  out.alpha = static_cast<T>(weights.alpha);
  out.beta = static_cast<T>(weights.beta);

  auto jig = jigsaw_loss<T>(heads.jigsaw, targets.perm_id);
  auto inp = inpaint_cls_loss<T>(heads.inpaint, targets.inpaint, cb);
  std::vector<std::span<const T>> col_logits;
  for (const auto& c : heads.colorize) col_logits.emplace_back(c);
  auto col = nine_patch_color_loss<T>(col_logits, targets.colorize, cb, targets.colorize_mask);

  out.l_jig = jig.value;
  out.l_inp_cls = inp.value;
  out.l_col = col.value;
  out.l_final = out.l_jig + out.alpha * out.l_inp_cls + out.beta * out.l_col;

  out.grads.jigsaw = std::move(jig.grad);
  out.grads.inpaint = std::move(inp.grad);
  for (auto& g : out.grads.inpaint) g *= out.alpha;
  out.grads.colorize = std::move(col.grads);
  for (auto& block : out.grads.colorize)
    for (auto& g : block) g *= out.beta;
  return out;
}

#define CDJP_INSTANTIATE_LOSSES(T)                                                                               \
  template T log_sum_exp<T>(std::span<const T>);                                                                \
  template LossValue<T> jigsaw_loss<T>(std::span<const T>, std::uint32_t);                                      \
  template LossValue<T> inpaint_l2_loss<T>(std::span<const T>, std::span<const T>);                             \
  template LossValue<T> rebalanced_color_loss<T>(std::span<const T>, std::span<const SoftLabel>,                \
                                                 const ColorCodebook&);                                         \
  template MultiLoss<T> nine_patch_color_loss<T>(std::span<const std::span<const T>>,                           \
                                                 std::span<const std::span<const SoftLabel>>,                   \
                                                 const ColorCodebook&, std::span<const std::uint8_t>);                  \
  template LossBundle<T> combined_loss<T>(const HeadOutputs<T>&, const HeadTargets&, const ColorCodebook&,      \
                                          const LossWeights&);

CDJP_INSTANTIATE_LOSSES(float)
CDJP_INSTANTIATE_LOSSES(double)

}  // namespace cdjp
