#include <algorithm>

#include "cdjp/error.hpp"
#include "cdjp/puzzlegen.hpp"
#include "cdjp/rng.hpp"
#include "cdjp/shard.hpp"
#include "cdjp/synthetic.hpp"
#include "doctest.h"

using namespace cdjp;

namespace {

struct Fixture {
  ColorCodebook cb;
  PermutationSet p9, p4;
  GenConfig cfg = GenConfig::desk();
  std::vector<LabImage> images;

  Fixture() {
    SyntheticOptions o;
    o.size = cfg.image_size;
    const auto corpus = make_synthetic_corpus(6, 13, o);
    for (const auto& im : corpus.images) images.push_back(rgb_to_lab(im));
    cb = fit_rebalance(build_codebook(), images);
    p9 = greedy_max_hamming_set(9, 24, 5);
    p4 = full_set(4);
  }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

bool same_pixels(const LabImage& a, const LabImage& b) { return a.l == b.l && a.a == b.a && a.b == b.b; }

}  // namespace

TEST_CASE("config validation") {
  auto c = GenConfig::desk();
  CHECK_NOTHROW(c.validate());
  c.patch_2x2 = 60;  // 96 / 2 = 48 per cell
  CHECK_THROWS_AS(c.validate(), Error);
  c = GenConfig::paper();
  CHECK(c.image_size == 312);
  CHECK(c.patch_3x3 == 85);
  CHECK(c.drop_prob == 0.4);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("patches lie inside their own grid cell") {
  const auto& f = fx();
  const auto& img = f.images[0];
  for (int grid : {2, 3}) {
    const auto patches = extract_patches(img, f.cfg, grid, 77);
    const int P = f.cfg.patch_size(grid), cell = f.cfg.image_size / grid;
    REQUIRE(patches.size() == static_cast<std::size_t>(grid * grid));
    for (int i = 0; i < grid * grid; ++i) {
      CHECK(patches[i].width == P);
      const int cx = (i % grid) * cell, cy = (i / grid) * cell;
      bool found = false;
      for (int dy = 0; dy + P <= cell && !found; ++dy)
        for (int dx = 0; dx + P <= cell && !found; ++dx) found = same_pixels(crop(img, cx + dx, cy + dy, P, P), patches[i]);
      CHECK(found);
    }
  }
}

TEST_CASE("plain jigsaw: slot i shows piece perm[i]") {
  const auto& f = fx();
  const auto s = make_sample(f.images[1], TaskMode::jigsaw2_plain, f.p4, f.cb, f.cfg, 99);
  const auto original = extract_patches(f.images[1], f.cfg, 2, derive_seed(99, 0));
  const auto& perm = f.p4[s.perm_id];
  for (int i = 0; i < 4; ++i) CHECK(s.patches[i] == original[perm[i]]);
  CHECK_FALSE(s.missing_index);
}

TEST_CASE("channel drop keeps two L and two ab patches") {
  const auto& f = fx();
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto s = make_sample(f.images[seed % 6], TaskMode::jigsaw2_channel_drop, f.p4, f.cb, f.cfg, seed);
    int l_only = 0, ab_only = 0;
    for (const auto& p : s.patches) {
      l_only += p.has_l && !p.has_ab;
      ab_only += !p.has_l && p.has_ab;
    }
    CHECK(l_only == 2);
    CHECK(ab_only == 2);
  }
}

TEST_CASE("cdjp3 samples: one noise patch, all L-only, nine targets") {
  const auto& f = fx();
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto& img = f.images[seed % 6];
    const auto s = make_sample(img, TaskMode::cdjp3, f.p9, f.cb, f.cfg, seed);
    REQUIRE(s.missing_index);
    CHECK(s.patches.size() == 9);
    CHECK(s.color_targets.size() == 9);
    for (const auto& p : s.patches) {
      CHECK(p.has_l);
      CHECK_FALSE(p.has_ab);
    }
    for (int piece = 0; piece < 9; ++piece) {
      const auto* t = s.target_for_piece(piece);
      REQUIRE(t);
      CHECK(t->cells.size() == static_cast<std::size_t>(f.cfg.target_grid * f.cfg.target_grid));
    }
    // Only the missing slot differs from the decolorized original crop.
    const auto original = extract_patches(img, f.cfg, 3, derive_seed(seed, 0));
    const auto& perm = f.p9[s.perm_id];
    for (int slot = 0; slot < 9; ++slot) {
      const bool matches = s.patches[slot].l == original[perm[slot]].l;
      CHECK(matches == (slot != *s.missing_index));
    }
    for (float v : s.patches[*s.missing_index].l) {
      CHECK(v >= 0.0f);
      CHECK(v <= 100.0f);
    }
  }
}

TEST_CASE("piece removal happens at roughly the configured rate") {
  const auto& f = fx();
  const auto batch = generate_batch(f.images, TaskMode::jigsaw2_piece_removed, f.p4, f.cb, f.cfg, 3, 0, 2000);
  int removed = 0;
  for (const auto& s : batch) {
    if (!s.missing_index) continue;
    ++removed;
    const auto& p = s.patches[*s.missing_index];
    CHECK(p.has_l);
    CHECK_FALSE(p.has_ab);
  }
  CHECK(std::abs(removed / 2000.0 - 0.4) < 0.04);
}

TEST_CASE("single-task modes") {
  const auto& f = fx();
  const auto inp = make_sample(f.images[2], TaskMode::inpaint_cross_channel, f.p4, f.cb, f.cfg, 5);
  REQUIRE(inp.patches.size() == 1);
  CHECK(inp.patches[0].width == f.cfg.image_size);
  CHECK_FALSE(inp.patches[0].has_ab);
  REQUIRE(inp.target_region);
  CHECK(inp.target_region->width == f.cfg.image_size / 2);
  const auto col = make_sample(f.images[2], TaskMode::colorize_narrow, f.p4, f.cb, f.cfg, 5);
  REQUIRE(col.patches.size() == 1);
  CHECK_FALSE(col.patches[0].has_ab);
  REQUIRE(col.color_targets.size() == 1);
}

TEST_CASE("mismatched permutation set is rejected") {
  const auto& f = fx();
  try {
    make_sample(f.images[0], TaskMode::cdjp3, f.p4, f.cb, f.cfg, 1);
    FAIL("expected ConfigMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigMismatch);
  }
}

TEST_CASE("parallel generation equals the serial reference") {
  const auto& f = fx();
  for (auto mode : {TaskMode::cdjp3, TaskMode::jigsaw2_channel_drop}) {
    const auto& ps = grid_of(mode) == 3 ? f.p9 : f.p4;
    CHECK(generate_batch(f.images, mode, ps, f.cb, f.cfg, 8, 10, 50) ==
          generate_batch_serial(f.images, mode, ps, f.cb, f.cfg, 8, 10, 50));
  }
}

TEST_CASE("shards survive an encode/decode round trip byte for byte") {
  const auto& f = fx();
  for (auto mode : {TaskMode::cdjp3, TaskMode::jigsaw2_channel_drop, TaskMode::jigsaw2_piece_removed,
                    TaskMode::inpaint_cross_channel, TaskMode::colorize_narrow, TaskMode::jigsaw2_plain}) {
    const auto& ps = grid_of(mode) == 3 ? f.p9 : f.p4;
    const auto batch = generate_batch(f.images, mode, ps, f.cb, f.cfg, 4, 0, 12);
    ShardHeader h;
    h.mode = mode;
    h.grid = static_cast<std::uint8_t>(grid_of(mode));
    h.target_grid = static_cast<std::uint8_t>(f.cfg.target_grid);
    h.codebook_size = static_cast<std::uint32_t>(f.cb.size());
    h.count = batch.size();
    const auto bytes = encode_shard(h, batch);
    const auto shard = decode_shard(bytes);
    CHECK(shard.samples.size() == batch.size());
    CHECK(encode_shard(shard.header, shard.samples) == bytes);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(shard.samples[i].perm_id == batch[i].perm_id);
      CHECK(shard.samples[i].missing_index == batch[i].missing_index);
      CHECK(shard.samples[i].color_targets == batch[i].color_targets);
    }
    CHECK(encode_shard(h, generate_batch(f.images, mode, ps, f.cb, f.cfg, 4, 0, 12)) == bytes);
  }
}

TEST_CASE("corrupt shards are rejected") {
  const auto& f = fx();
  const auto batch = generate_batch(f.images, TaskMode::cdjp3, f.p9, f.cb, f.cfg, 4, 0, 2);
  ShardHeader h;
  h.codebook_size = static_cast<std::uint32_t>(f.cb.size());
  h.target_grid = static_cast<std::uint8_t>(f.cfg.target_grid);
  h.count = batch.size();
  auto bytes = encode_shard(h, batch);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_shard(truncated), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_shard(bad_magic), Error);
}

TEST_CASE("manifest hash covers the generator inputs") {
  ShardManifest m;
  m.gen_config = GenConfig::desk().to_json();
  m.codebook_hash = "aa";
  m.permset_hash = "bb";
  m.seed = 3;
  m.config_hash = m.compute_config_hash();
  const auto back = ShardManifest::from_json(m.to_json());
  CHECK(back.compute_config_hash() == m.config_hash);
  auto changed = m;
  changed.seed = 4;
  CHECK(changed.compute_config_hash() != m.config_hash);
}
