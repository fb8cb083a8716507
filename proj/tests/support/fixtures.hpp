#pragma once

#include <vector>

#include "cdjp/codebook.hpp"
#include "cdjp/permutation.hpp"
#include "cdjp/puzzlegen.hpp"
#include "cdjp/synthetic.hpp"
#include "cdjp/tinynet.hpp"

namespace fixtures {

// Small desk-profile cdjp3 world: synthetic images, a coarse codebook (fewer
// bins keeps the heads cheap) and a 24-permutation set.
struct World {
  cdjp::ColorCodebook cb;
  cdjp::PermutationSet pset;
  cdjp::GenConfig gen = cdjp::GenConfig::desk();
  std::vector<int> labels;
  std::vector<cdjp::LabImage> images;

  explicit World(std::size_t n_images = 8, std::uint64_t seed = 17, double grid_step = 20.0) {
    cdjp::SyntheticOptions o;
    o.size = gen.image_size;
    const auto corpus = cdjp::make_synthetic_corpus(n_images, seed, o);
    labels = corpus.labels;
    for (const auto& im : corpus.images) images.push_back(cdjp::rgb_to_lab(im));
    cb = cdjp::fit_rebalance(cdjp::build_codebook(grid_step, 8), images);
    pset = cdjp::greedy_max_hamming_set(9, 24, seed);
  }

  std::vector<cdjp::PuzzleSample> samples(std::size_t count, std::uint64_t seed) const {
    return cdjp::generate_batch(images, cdjp::TaskMode::cdjp3, pset, cb, gen, seed, 0, count);
  }

  cdjp::NetConfig micro() const {
    auto c = cdjp::NetConfig::micro(static_cast<int>(cb.size()), static_cast<int>(pset.size()));
    c.patch_size = gen.patch_3x3;
    c.target_grid = gen.target_grid;
    return c;
  }
};

}  // namespace fixtures
