#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdjp/puzzlegen.hpp"

namespace cdjp {

// Little-endian shard layout:
//   header: "CDJP" | version u32 | mode u8 | grid u8 | S u8 | Q u32 | count u64
//   sample: seed u64 | perm_id u32 | missing_index i8 (-1 = none)
//           | n_patches u8 | per patch { width u16 | height u16 | flags u8 (1 = L, 2 = ab)
//                                        | L f32[w*h] (normalized L/50 - 1) | a f32[w*h] | b f32[w*h] }
//           | n_targets u8 | per target { piece u8 | per cell { k u8 | indices u32[k] | values f32[k] } }
//           | has_region u8 | [width u16 | height u16 | a f32[w*h] | b f32[w*h]]

inline constexpr std::uint32_t kShardVersion = 1;

struct ShardHeader {
  std::uint32_t version = kShardVersion;
  TaskMode mode = TaskMode::cdjp3;
  std::uint8_t grid = 3;
  std::uint8_t target_grid = 7;
  std::uint32_t codebook_size = 0;
  std::uint64_t count = 0;
};

struct Shard {
  ShardHeader header;
  std::vector<PuzzleSample> samples;
};

std::vector<std::uint8_t> encode_shard(const ShardHeader& header, std::span<const PuzzleSample> samples);
Shard decode_shard(std::span<const std::uint8_t> bytes);

void write_shard(const std::string& path, const ShardHeader& header, std::span<const PuzzleSample> samples);
Shard read_shard(const std::string& path);

/// Sidecar JSON describing where a shard came from.
struct ShardManifest {
  std::string shard_file;
  TaskMode mode = TaskMode::cdjp3;
  Profile profile = Profile::desk;
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  std::uint64_t first_index = 0;
  std::vector<std::string> source_images;
  std::string gen_config;  ///< GenConfig::to_json()
  std::string codebook_hash;
  std::string permset_hash;
  std::string config_hash;  ///< fingerprint of everything above that shapes the samples

  std::string to_json() const;
  static ShardManifest from_json(const std::string& text);
  void save(const std::string& path) const;
  static ShardManifest load(const std::string& path);
  std::string compute_config_hash() const;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace cdjp
