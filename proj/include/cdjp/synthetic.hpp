#pragma once

#include <cstdint>
#include <vector>

#include "cdjp/colorspace.hpp"

namespace cdjp {

/// Procedurally structured stand-in for a natural-image corpus. Every image has
/// a lighting ramp whose direction falls in its class's sector and a hue tied to
/// the class, plus stripes of random orientation, random blobs and noise.
struct SyntheticCorpus {
  std::vector<RgbImage> images;
  std::vector<int> labels;
  int classes = 4;
};

struct SyntheticOptions {
  int size = 96;
  int classes = 4;
  int blobs = 5;
  double blob_contrast = 20.0;  ///< max L offset of a blob
  double stripe_amplitude = 16.0;  ///< max stripe amplitude in L
  double noise = 4.0;  ///< per-pixel L noise, standard deviation
};

RgbImage synthetic_image(int cls, const SyntheticOptions& opts, std::uint64_t seed);
/// Image i has class i % classes and seed derive_seed(seed, i).
SyntheticCorpus make_synthetic_corpus(std::size_t count, std::uint64_t seed, const SyntheticOptions& opts = {});

}  // namespace cdjp
