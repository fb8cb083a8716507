#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cdjp/codebook.hpp"

namespace cdjp {

template <typename T>
struct LossValue {
  T value{};
  std::vector<T> grad;
};

/// Softmax cross-entropy over K permutation classes. Throws Errc::BadLabel.
template <typename T>
LossValue<T> jigsaw_loss(std::span<const T> logits, std::uint32_t label);

/// Squared L2 distance; grad = 2 (pred - target). Throws Errc::ShapeMismatch.
template <typename T>
LossValue<T> inpaint_l2_loss(std::span<const T> pred, std::span<const T> target);

/// Per-cell weighted cross-entropy summed over cells. `logits` is cell-major:
/// cell c occupies [c*Q, (c+1)*Q). The weight of a cell is the rebalancing
/// weight of its target's argmax bin. Throws Errc::ShapeMismatch.
template <typename T>
LossValue<T> rebalanced_color_loss(std::span<const T> logits, std::span<const SoftLabel> targets,
                                   const ColorCodebook& cb);

/// Classification form of the inpainting loss on the missing piece's targets.
template <typename T>
LossValue<T> inpaint_cls_loss(std::span<const T> logits, std::span<const SoftLabel> targets,
                              const ColorCodebook& cb) {
  return rebalanced_color_loss<T>(logits, targets, cb);
}

/// Sum of per-patch color losses. `include[i] == false` drops patch i from the
/// sum (its gradient block is then zero).
template <typename T>
struct MultiLoss {
  T value{};
  std::vector<std::vector<T>> grads;
};

template <typename T>
MultiLoss<T> nine_patch_color_loss(std::span<const std::span<const T>> logits,
                                   std::span<const std::span<const SoftLabel>> targets, const ColorCodebook& cb,
                                   std::span<const std::uint8_t> include = {});

struct LossWeights {
  double alpha = 0.01;
  double beta = 0.01;
};

/// Head outputs for one damaged 3x3 puzzle.
template <typename T>
struct HeadOutputs {
  std::vector<T> jigsaw;                 ///< K logits
  std::vector<T> inpaint;                ///< S*S*Q, cell-major
  std::vector<std::vector<T>> colorize;  ///< per shuffled slot, S*S*Q, cell-major
};

/// Supervision for one damaged 3x3 puzzle, already aligned to the heads.
struct HeadTargets {
  std::uint32_t perm_id = 0;
  std::span<const SoftLabel> inpaint;                ///< targets of the missing piece
  std::vector<std::span<const SoftLabel>> colorize;  ///< per shuffled slot
  std::vector<std::uint8_t> colorize_mask;                 ///< slots that contribute to the color loss
};

template <typename T>
struct LossBundle {
  T l_jig{};
  T l_inp_cls{};
  T l_col{};
  T l_final{};
  T alpha{};
  T beta{};
  HeadOutputs<T> grads;  ///< d l_final / d logits
};

/// l_final = l_jig + alpha * l_inp_cls + beta * l_col.
template <typename T>
LossBundle<T> combined_loss(const HeadOutputs<T>& heads, const HeadTargets& targets, const ColorCodebook& cb,
                            const LossWeights& weights = {});

/// Stable log(sum(exp(x))).
template <typename T>
T log_sum_exp(std::span<const T> x);

}  // namespace cdjp
