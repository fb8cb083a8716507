#include "cdjp/puzzlegen.hpp"

#include <algorithm>
#include <cmath>

#include "cdjp/error.hpp"
#include "cdjp/hash.hpp"
#include "cdjp/parallel.hpp"
#include "cdjp/rng.hpp"
#include "json.hpp"

namespace cdjp {
namespace {

constexpr const char* kModeNames[] = {"jigsaw2_plain",         "jigsaw2_channel_drop", "jigsaw2_piece_removed",
                                      "inpaint_cross_channel", "colorize_narrow",      "cdjp3"};

// Discarded content: L plane of Gaussian noise (normalized units), no ab.
LabImage noise_patch(int w, int h, double mean, double stddev, Rng& rng) {
  LabImage out = LabImage::blank(w, h, false);
  for (auto& v : out.l) v = static_cast<float>(std::clamp(50.0 * (rng.normal(mean, stddev) + 1.0), 0.0, 100.0));
  return out;
}

void fill_noise(LabImage& img, int x0, int y0, int w, int h, double mean, double stddev, Rng& rng) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x)
      img.l[img.index(x, y)] = static_cast<float>(std::clamp(50.0 * (rng.normal(mean, stddev) + 1.0), 0.0, 100.0));
}

std::uint32_t identity_id(const PermutationSet& pset) {
  const auto id = Permutation::identity(pset.n_pieces());
  return pset.contains(id) ? pset.index(id) : 0;
}

}  // namespace

const char* to_string(TaskMode mode) { return kModeNames[static_cast<int>(mode)]; }

TaskMode task_mode_from_string(const std::string& name) {
  for (int i = 0; i < 6; ++i)
    if (name == kModeNames[i]) return static_cast<TaskMode>(i);
  fail(Errc::Config, "unknown task mode: " + name);
}

int grid_of(TaskMode mode) { return mode == TaskMode::cdjp3 ? 3 : 2; }

const char* to_string(Profile p) { return p == Profile::paper ? "paper" : "desk"; }

Profile profile_from_string(const std::string& name) {
  if (name == "paper") return Profile::paper;
  if (name == "desk") return Profile::desk;
  fail(Errc::Config, "unknown profile: " + name);
}

GenConfig GenConfig::paper() { return GenConfig{}; }

GenConfig GenConfig::desk() {
  GenConfig cfg;
  cfg.image_size = 96;
  cfg.patch_2x2 = 32;
  cfg.patch_3x3 = 26;
  cfg.target_grid = 4;
  return cfg;
}

GenConfig GenConfig::for_profile(Profile p) { return p == Profile::paper ? paper() : desk(); }

void GenConfig::validate() const {
  for (int grid : {2, 3}) {
    const int cell = image_size / grid;
    if (patch_size(grid) < 1 || patch_size(grid) > cell)
      fail(Errc::ConfigMismatch, "GenConfig: patch does not fit its grid cell");
  }
  if (target_grid < 1 || target_grid > patch_3x3 || target_grid > patch_2x2)
    fail(Errc::ConfigMismatch, "GenConfig: target grid larger than patch");
  if (drop_prob < 0.0 || drop_prob > 1.0) fail(Errc::ConfigMismatch, "GenConfig: drop_prob outside [0,1]");
}

std::string GenConfig::to_json() const {
  nlohmann::json j{{"image_size", image_size},
                   {"patch_2x2", patch_2x2},
                   {"patch_3x3", patch_3x3},
                   {"jitter", jitter},
                   {"drop_prob", drop_prob},
                   {"target_grid", target_grid},
                   {"encode_mode", encode.mode == EncodeMode::soft ? "soft" : "hard"},
                   {"encode_k", encode.k},
                   {"encode_sigma", encode.sigma},
                   {"no_damage", no_damage}};
  j["noise_mean"] = noise_mean ? nlohmann::json(*noise_mean) : nlohmann::json(nullptr);
  j["noise_std"] = noise_std ? nlohmann::json(*noise_std) : nlohmann::json(nullptr);
  j["force_perm_id"] = force_perm_id ? nlohmann::json(*force_perm_id) : nlohmann::json(nullptr);
  return j.dump();
}

std::uint64_t GenConfig::hash() const { return fnv1a(to_json()); }

const TargetGrid* PuzzleSample::target_for_piece(int piece) const {
  for (const auto& t : color_targets)
    if (t.slot == piece) return &t;
  return nullptr;
}

std::vector<LabImage> extract_patches(const LabImage& img, const GenConfig& cfg, int grid, std::uint64_t seed) {
  if (grid != 2 && grid != 3) fail(Errc::BadDimensions, "extract_patches: grid must be 2 or 3");
  if (img.width != cfg.image_size || img.height != cfg.image_size)
    fail(Errc::BadDimensions, "extract_patches: image is not image_size x image_size");
  if (!img.has_ab || !img.has_l) fail(Errc::MissingChannels, "extract_patches: both channels required");
  cfg.validate();
  const int cell = cfg.image_size / grid;
  const int patch = cfg.patch_size(grid);
  const int slack = cell - patch;
  const int jit = cfg.jitter < 0 ? slack : std::min(cfg.jitter, slack);
  const int base = (slack - jit) / 2;

  Rng rng(seed);
  std::vector<LabImage> out;
  out.reserve(static_cast<std::size_t>(grid * grid));
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      const int ox = base + rng.uniform_range(0, jit);
      const int oy = base + rng.uniform_range(0, jit);
      out.push_back(crop(img, gx * cell + ox, gy * cell + oy, patch, patch));
    }
  }
  return out;
}

std::vector<SoftLabel> downsample_ab_targets(const LabImage& patch, const ColorCodebook& cb, int S,
                                             const EncodeOptions& opts) {
  if (!patch.has_ab) fail(Errc::MissingChannels, "downsample_ab_targets: ab planes absent");
  if (S < 1 || S > patch.width || S > patch.height) fail(Errc::BadDimensions, "downsample_ab_targets: bad S");
  std::vector<SoftLabel> out;
  out.reserve(static_cast<std::size_t>(S) * S);
  for (int cy = 0; cy < S; ++cy) {
    const int y0 = pool_begin(cy, patch.height, S), y1 = pool_end(cy, patch.height, S);
    for (int cx = 0; cx < S; ++cx) {
      const int x0 = pool_begin(cx, patch.width, S), x1 = pool_end(cx, patch.width, S);
      double sa = 0.0, sb = 0.0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          sa += patch.a[patch.index(x, y)];
          sb += patch.b[patch.index(x, y)];
        }
      const double n = static_cast<double>((y1 - y0) * (x1 - x0));
      out.push_back(cb.encode(sa / n, sb / n, opts));
    }
  }
  return out;
}

PuzzleSample make_sample(const LabImage& img, TaskMode mode, const PermutationSet& pset, const ColorCodebook& cb,
                         const GenConfig& cfg, std::uint64_t seed) {
  const int grid = grid_of(mode);
  const int pieces = grid * grid;
  if (pset.n_pieces() != pieces || pset.size() == 0)
    fail(Errc::ConfigMismatch, "make_sample: permutation set does not match the task grid");
  if (cfg.force_perm_id && *cfg.force_perm_id >= pset.size())
    fail(Errc::ConfigMismatch, "make_sample: forced permutation id out of range");

  const int S = cfg.target_grid;
  const double noise_mean = cfg.noise_mean.value_or(cb.l_mean);
  const double noise_std = cfg.noise_std.value_or(cb.l_std);

  PuzzleSample s;
  s.mode = mode;
  s.grid = grid;
  s.target_grid = S;
  s.rng_seed = seed;
  Rng rng(derive_seed(seed, 1));

  if (mode == TaskMode::inpaint_cross_channel) {
    if (img.width != cfg.image_size || img.height != cfg.image_size)
      fail(Errc::BadDimensions, "make_sample: image is not image_size x image_size");
    if (!img.has_ab) fail(Errc::MissingChannels, "make_sample: ab planes required");
    const int side = cfg.image_size / 2;
    const int off = (cfg.image_size - side) / 2;
    const LabImage region = crop(img, off, off, side, side);
    s.color_targets.push_back({0, downsample_ab_targets(region, cb, S, cfg.encode)});
    s.target_region = drop_channels(region, ChannelKeep::keep_ab);
    LabImage input = drop_channels(img, ChannelKeep::keep_l);
    if (!cfg.no_damage) fill_noise(input, off, off, side, side, noise_mean, noise_std, rng);
    s.patches.push_back(std::move(input));
    s.perm_id = identity_id(pset);
    return s;
  }

  const auto original = extract_patches(img, cfg, grid, derive_seed(seed, 0));

  if (mode == TaskMode::colorize_narrow) {
    const int q = static_cast<int>(rng.uniform_int(4));
    s.color_targets.push_back({q, downsample_ab_targets(original[q], cb, S, cfg.encode)});
    s.patches.push_back(cfg.no_damage ? original[q] : drop_channels(original[q], ChannelKeep::keep_l));
    s.perm_id = identity_id(pset);
    return s;
  }

  s.perm_id = cfg.force_perm_id ? *cfg.force_perm_id : static_cast<std::uint32_t>(rng.uniform_int(pset.size()));
  const Permutation& perm = pset[s.perm_id];
  s.patches = apply(perm, original);
  const int P = cfg.patch_size(grid);

  switch (mode) {
    case TaskMode::jigsaw2_plain:
      break;
    case TaskMode::jigsaw2_channel_drop: {
      std::vector<ChannelKeep> assign{ChannelKeep::keep_l, ChannelKeep::keep_l, ChannelKeep::keep_ab,
                                      ChannelKeep::keep_ab};
      rng.shuffle(assign.begin(), assign.end());
      if (!cfg.no_damage)
        for (int i = 0; i < pieces; ++i) s.patches[i] = drop_channels(s.patches[i], assign[i]);
      break;
    }
    case TaskMode::jigsaw2_piece_removed: {
      const bool removed = rng.bernoulli(cfg.drop_prob);
      const int slot = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(pieces)));
      if (removed && !cfg.no_damage) {
        s.missing_index = slot;
        s.patches[slot] = noise_patch(P, P, noise_mean, noise_std, rng);
      }
      break;
    }
    case TaskMode::cdjp3: {
      for (int piece = 0; piece < pieces; ++piece)
        s.color_targets.push_back({piece, downsample_ab_targets(original[piece], cb, S, cfg.encode)});
      const int slot = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(pieces)));
      if (!cfg.no_damage) {
        for (auto& p : s.patches) p = drop_channels(p, ChannelKeep::keep_l);
        s.missing_index = slot;
        s.patches[slot] = noise_patch(P, P, noise_mean, noise_std, rng);
      }
      break;
    }
    default:
      break;
  }
  return s;
}

std::vector<PuzzleSample> generate_batch_serial(std::span<const LabImage> images, TaskMode mode,
                                                const PermutationSet& pset, const ColorCodebook& cb,
                                                const GenConfig& cfg, std::uint64_t base_seed, std::size_t first,
                                                std::size_t count) {
  if (images.empty()) fail(Errc::EmptyCorpus, "generate_batch: no images");
  std::vector<PuzzleSample> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t g = first + i;
    out[i] = make_sample(images[g % images.size()], mode, pset, cb, cfg, derive_seed(base_seed, g));
  }
  return out;
}

std::vector<PuzzleSample> generate_batch(std::span<const LabImage> images, TaskMode mode, const PermutationSet& pset,
                                         const ColorCodebook& cb, const GenConfig& cfg, std::uint64_t base_seed,
                                         std::size_t first, std::size_t count) {
  if (images.empty()) fail(Errc::EmptyCorpus, "generate_batch: no images");
  std::vector<PuzzleSample> out(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
  std::exception_ptr error;
  CDJP_PARALLEL_FOR_DYNAMIC
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const std::size_t g = first + static_cast<std::size_t>(i);
      out[i] = make_sample(images[g % images.size()], mode, pset, cb, cfg, derive_seed(base_seed, g));
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace cdjp
