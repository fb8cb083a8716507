#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cdjp/losses.hpp"
#include "cdjp/permutation.hpp"
#include "cdjp/puzzlegen.hpp"

namespace cdjp {

/// Shape of the reference network: a weight-shared tower applied to every
/// piece, then jigsaw, inpainting and colorization heads.
struct NetConfig {
  int patch_size = 26;
  int target_grid = 4;
  int codebook_size = 0;  ///< Q
  int perm_count = 0;     ///< K
  int pieces = 9;
  std::array<int, 3> conv_widths{16, 32, 64};     ///< 3x3 stride-2 convs
  std::array<int, 2> pointwise_widths{64, 64};    ///< 1x1 convs after pooling to S x S
  int jigsaw_patch_units = 64;
  int jigsaw_hidden = 256;
  int inpaint_patch_channels = 16;
  int inpaint_hidden = 128;
  int color_hidden = 64;
  bool share_color_heads = true;
  std::uint64_t init_seed = 1;

  static NetConfig desk(int codebook_size, int perm_count);
  /// Widths <= 8; used for full-model gradient checks.
  static NetConfig micro(int codebook_size, int perm_count);

  int feature_channels() const { return pointwise_widths[1]; }
  std::string to_json() const;
  static NetConfig from_json(const std::string& text);
  std::uint64_t hash() const;
};

/// Tower layers that can be probed, in forward order.
enum class TowerLayer : int { conv1 = 0, conv2 = 1, conv3 = 2, point1 = 3, point2 = 4 };
inline constexpr int kTowerLayers = 5;
const char* to_string(TowerLayer layer);
/// Throws Errc::UnknownLayer.
TowerLayer tower_layer_from_string(const std::string& name);

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
};

template <typename T>
using Grads = std::vector<std::vector<T>>;

template <typename T>
struct NetInput {
  std::vector<std::vector<T>> patches;  ///< normalized L (L/50 - 1), patch_size^2 each, shuffled order
  Permutation perm;
};

/// Throws Errc::ShapeMismatch when the sample does not fit the network.
template <typename T>
NetInput<T> make_input(const PuzzleSample& sample, const PermutationSet& pset, const NetConfig& cfg);

/// Aligns stored targets to the heads: slot i is supervised by piece perm[i];
/// the inpainting head by the missing piece. The missing slot is masked out of
/// the colorization sum. Spans point into `sample`.
HeadTargets make_targets(const PuzzleSample& sample, const PermutationSet& pset);

template <typename T>
struct TowerCache {
  int h = 0, w = 0;
  std::array<int, 3> conv_h{}, conv_w{};
  std::vector<T> x, a1, a2, a3, pooled, p1, p2;
};

template <typename T>
class TinyNet;

/// Activations kept for one backward pass.
template <typename T>
class ForwardCache {
 public:
  const HeadOutputs<T>& outputs() const { return out_; }
  bool valid() const { return valid_; }

 private:
  friend class TinyNet<T>;
  bool valid_ = false;
  Permutation perm_;
  std::vector<TowerCache<T>> towers_;
  std::vector<std::vector<T>> jig_pooled_, jig_units_;
  std::vector<T> jig_concat_, jig_hidden_;
  std::vector<std::vector<T>> inp_units_;
  std::vector<T> inp_arranged_, inp_hidden_;
  std::vector<std::vector<T>> col_hidden_;
  HeadOutputs<T> out_;
};

template <typename T>
class TinyNet {
 public:
  /// He-initialized weights from cfg.init_seed, zero biases.
  explicit TinyNet(const NetConfig& cfg);
  TinyNet(const NetConfig& cfg, std::vector<Param<T>> params);

  const NetConfig& config() const { return cfg_; }
  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  std::size_t parameter_count() const;
  Grads<T> zero_grads() const;

  /// Throws Errc::ShapeMismatch or Errc::NonFiniteActivation.
  ForwardCache<T> forward(const NetInput<T>& input) const;
  /// Consumes the cache; a second call without a new forward throws Errc::NoForwardCache.
  Grads<T> backward(ForwardCache<T>& cache, const HeadOutputs<T>& head_grads) const;

  /// Runs the tower on an arbitrary H x W normalized-L plane.
  TowerCache<T> tower(const std::vector<T>& plane, int h, int w) const;

  template <typename U>
  TinyNet<U> cast() const {
    std::vector<Param<U>> out;
    for (const auto& p : params_) out.push_back({p.name, p.shape, std::vector<U>(p.value.begin(), p.value.end())});
    return TinyNet<U>(cfg_, std::move(out));
  }

 private:
  struct Layout {
    int c1w, c1b, c2w, c2b, c3w, c3b, p1w, p1b, p2w, p2b;
    int j1w, j1b, j2w, j2b, j3w, j3b;
    int i0w, i0b, i1w, i1b, i2w, i2b;
    std::vector<std::array<int, 4>> color;  // (w1, b1, w2, b2) per head
  };

  void build_layout();
  void check_params() const;
  std::array<int, 4> color_head(int slot) const;
  void tower_backward(TowerCache<T>& tc, std::vector<T> d_feat, Grads<T>& g) const;

  NetConfig cfg_;
  std::vector<Param<T>> params_;
  Layout L_{};
};

extern template class TinyNet<float>;
extern template class TinyNet<double>;

}  // namespace cdjp
