#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdjp/colorspace.hpp"

namespace cdjp {

/// Quantized target over at most five codebook bins.
struct SoftLabel {
  static constexpr int kMaxK = 5;
  std::uint8_t k = 0;
  std::array<std::uint32_t, kMaxK> indices{};
  std::array<float, kMaxK> values{};

  /// Bin holding the largest mass; ties go to the lower slot.
  std::uint32_t argmax() const;
  bool operator==(const SoftLabel&) const = default;
};

enum class EncodeMode { hard, soft };

struct EncodeOptions {
  EncodeMode mode = EncodeMode::soft;
  int k = 5;
  double sigma = 5.0;
};

/// In-gamut ab bins plus the class-rebalancing weights.
class ColorCodebook {
 public:
  static constexpr double kRangeMin = -110.0;
  static constexpr double kRangeMax = 110.0;

  double grid_step = 10.0;
  int gamut_stride = 4;
  std::vector<std::array<double, 2>> bins;
  std::vector<double> prior;
  std::vector<double> weights;
  double lambda = 0.5;
  double smooth_sigma = 5.0;
  // Statistics of normalized L (L/50 - 1) over the fit corpus; used as the
  // Gaussian fill for discarded patches.
  double l_mean = 0.0;
  double l_std = 1.0;
  bool fitted = false;

  std::size_t size() const { return bins.size(); }

  /// Bin whose cell contains (a, b), or the nearest center when the cell is
  /// not in the codebook.
  std::uint32_t nearest(double a, double b) const;
  SoftLabel encode(double a, double b, const EncodeOptions& opts = {}) const;

  std::string to_json() const;
  static ColorCodebook from_json(const std::string& text);
  void save(const std::string& path) const;
  static ColorCodebook load(const std::string& path);
  /// Fingerprint of the serialized form.
  std::uint64_t hash() const;

  // Cell lookup table over the [-110,110)^2 grid; -1 for out-of-gamut cells.
  void rebuild_lookup();

 private:
  int cells_per_axis_ = 0;
  std::vector<std::int32_t> lookup_;
  std::uint32_t nearest_brute(double a, double b) const;
};

ColorCodebook build_codebook(double grid_step = 10.0, int gamut_stride = 4);

SoftLabel encode_ab(const ColorCodebook& cb, double a, double b, const EncodeOptions& opts = {});

/// Rebalancing weights for a given prior: w ∝ ((1-λ)p + λ/Q)^-1 with
/// Σ p·w = 1. Bins whose mixture is zero (only possible when λ = 0) receive
/// the largest finite weight.
std::vector<double> rebalance_weights(std::span<const double> prior, double lambda);

/// Fit prior (Gaussian-smoothed empirical histogram) and weights on a corpus.
/// smooth_sigma = 0 disables smoothing. Throws Errc::EmptyCorpus.
ColorCodebook fit_rebalance(const ColorCodebook& cb, std::span<const LabImage> corpus,
                            double lambda = 0.5, double smooth_sigma = 5.0);

}  // namespace cdjp
