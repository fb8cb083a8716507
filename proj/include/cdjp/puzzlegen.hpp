#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdjp/codebook.hpp"
#include "cdjp/colorspace.hpp"
#include "cdjp/permutation.hpp"

namespace cdjp {

enum class TaskMode : std::uint8_t {
  jigsaw2_plain = 0,
  jigsaw2_channel_drop = 1,
  jigsaw2_piece_removed = 2,
  inpaint_cross_channel = 3,
  colorize_narrow = 4,
  cdjp3 = 5,
};

const char* to_string(TaskMode mode);
TaskMode task_mode_from_string(const std::string& name);
/// 2 for every single-task mode, 3 for cdjp3.
int grid_of(TaskMode mode);

enum class Profile { paper, desk };
const char* to_string(Profile p);
Profile profile_from_string(const std::string& name);

struct GenConfig {
  int image_size = 312;
  int patch_2x2 = 140;
  int patch_3x3 = 85;
  /// Maximum jitter in pixels inside each grid cell; negative means the full
  /// slack (cell size - patch size).
  int jitter = -1;
  double drop_prob = 0.4;
  /// Gaussian fill statistics in normalized L units (L/50 - 1). When unset the
  /// codebook's corpus statistics are used.
  std::optional<double> noise_mean;
  std::optional<double> noise_std;
  int target_grid = 7;
  EncodeOptions encode;
  /// Debug switches: force a permutation id and/or skip all damage.
  std::optional<std::uint32_t> force_perm_id;
  bool no_damage = false;

  static GenConfig paper();
  /// 96^2 images, 32^2 / 26^2 patches, 4x4 targets.
  static GenConfig desk();
  static GenConfig for_profile(Profile p);

  int patch_size(int grid) const { return grid == 2 ? patch_2x2 : patch_3x3; }
  /// Throws Errc::ConfigMismatch when patches or jitter do not fit.
  void validate() const;
  std::string to_json() const;
  std::uint64_t hash() const;
};

/// Target grid for one original piece.
struct TargetGrid {
  int slot = 0;  ///< original piece index the targets describe
  std::vector<SoftLabel> cells;  ///< S*S labels, row-major
  bool operator==(const TargetGrid&) const = default;
};

struct PuzzleSample {
  TaskMode mode = TaskMode::cdjp3;
  int grid = 3;
  int target_grid = 7;
  /// Post-damage inputs in shuffled order; slot i shows original piece perm[i].
  std::vector<LabImage> patches;
  std::uint32_t perm_id = 0;
  /// Shuffled slot that was discarded and noise-filled.
  std::optional<int> missing_index;
  /// Color targets keyed by original piece index.
  std::vector<TargetGrid> color_targets;
  /// Raw ab of the removed region (inpaint_cross_channel only); feeds the L2 loss.
  std::optional<LabImage> target_region;
  std::uint64_t rng_seed = 0;

  const TargetGrid* target_for_piece(int piece) const;
  bool operator==(const PuzzleSample&) const = default;
};

/// grid^2 patches, one per regular grid cell, jittered within the cell.
/// Throws Errc::BadDimensions / Errc::MissingChannels on bad input.
std::vector<LabImage> extract_patches(const LabImage& img, const GenConfig& cfg, int grid, std::uint64_t seed);

/// Average-pool ab to S x S (adaptive bins) then encode each cell.
std::vector<SoftLabel> downsample_ab_targets(const LabImage& patch, const ColorCodebook& cb, int S,
                                             const EncodeOptions& opts = {});

/// Throws Errc::ConfigMismatch when the permutation set does not match the mode.
PuzzleSample make_sample(const LabImage& img, TaskMode mode, const PermutationSet& pset, const ColorCodebook& cb,
                         const GenConfig& cfg, std::uint64_t seed);

/// Sample i is built from images[i % images.size()] with seed derive_seed(base_seed, i).
std::vector<PuzzleSample> generate_batch(std::span<const LabImage> images, TaskMode mode, const PermutationSet& pset,
                                         const ColorCodebook& cb, const GenConfig& cfg, std::uint64_t base_seed,
                                         std::size_t first, std::size_t count);
std::vector<PuzzleSample> generate_batch_serial(std::span<const LabImage> images, TaskMode mode,
                                                const PermutationSet& pset, const ColorCodebook& cb,
                                                const GenConfig& cfg, std::uint64_t base_seed, std::size_t first,
                                                std::size_t count);

/// Adaptive pooling bin [begin, end) for output cell `i` of `out` over `in` inputs.
inline int pool_begin(int i, int in, int out) { return (i * in) / out; }
inline int pool_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }

}  // namespace cdjp
