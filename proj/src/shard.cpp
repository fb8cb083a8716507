#include "cdjp/shard.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cdjp/error.hpp"
#include "cdjp/hash.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little, "shard I/O assumes a little-endian host");

namespace cdjp {
namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_plane(const std::vector<float>& v) { put_bytes(v.data(), v.size() * sizeof(float)); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<float> get_plane(std::size_t n) {
    need(n * sizeof(float));
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail(Errc::Format, "shard: truncated data");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<float> normalize_l(const std::vector<float>& l) {
  std::vector<float> out(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) out[i] = l[i] / 50.0f - 1.0f;
  return out;
}

std::vector<float> denormalize_l(const std::vector<float>& l) {
  std::vector<float> out(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) out[i] = (l[i] + 1.0f) * 50.0f;
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_shard(const ShardHeader& header, std::span<const PuzzleSample> samples) {
  Writer w;
  w.put_bytes("CDJP", 4);
  w.put<std::uint32_t>(header.version);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(header.mode));
  w.put<std::uint8_t>(header.grid);
  w.put<std::uint8_t>(header.target_grid);
  w.put<std::uint32_t>(header.codebook_size);
  w.put<std::uint64_t>(samples.size());
  for (const auto& s : samples) {
    w.put<std::uint64_t>(s.rng_seed);
    w.put<std::uint32_t>(s.perm_id);
    w.put<std::int8_t>(static_cast<std::int8_t>(s.missing_index.value_or(-1)));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.patches.size()));
    for (const auto& p : s.patches) {
      w.put<std::uint16_t>(static_cast<std::uint16_t>(p.width));
      w.put<std::uint16_t>(static_cast<std::uint16_t>(p.height));
      w.put<std::uint8_t>(static_cast<std::uint8_t>((p.has_l ? 1 : 0) | (p.has_ab ? 2 : 0)));
      if (p.has_l) w.put_plane(normalize_l(p.l));
      if (p.has_ab) {
        w.put_plane(p.a);
        w.put_plane(p.b);
      }
    }
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.color_targets.size()));
    for (const auto& t : s.color_targets) {
      w.put<std::uint8_t>(static_cast<std::uint8_t>(t.slot));
      for (const auto& c : t.cells) {
        w.put<std::uint8_t>(c.k);
        for (int i = 0; i < c.k; ++i) w.put<std::uint32_t>(c.indices[i]);
        for (int i = 0; i < c.k; ++i) w.put<float>(c.values[i]);
      }
    }
    w.put<std::uint8_t>(s.target_region ? 1 : 0);
    if (s.target_region) {
      w.put<std::uint16_t>(static_cast<std::uint16_t>(s.target_region->width));
      w.put<std::uint16_t>(static_cast<std::uint16_t>(s.target_region->height));
      w.put_plane(s.target_region->a);
      w.put_plane(s.target_region->b);
    }
  }
  return w.take();
}

Shard decode_shard(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>());
  if (std::memcmp(magic, "CDJP", 4) != 0) fail(Errc::Format, "shard: bad magic");
  Shard shard;
  auto& h = shard.header;
  h.version = r.get<std::uint32_t>();
  if (h.version != kShardVersion) fail(Errc::Format, "shard: unsupported version");
  const auto mode = r.get<std::uint8_t>();
  if (mode > static_cast<std::uint8_t>(TaskMode::cdjp3)) fail(Errc::Format, "shard: bad mode");
  h.mode = static_cast<TaskMode>(mode);
  h.grid = r.get<std::uint8_t>();
  h.target_grid = r.get<std::uint8_t>();
  h.codebook_size = r.get<std::uint32_t>();
  h.count = r.get<std::uint64_t>();

  const std::size_t cells = static_cast<std::size_t>(h.target_grid) * h.target_grid;
  shard.samples.reserve(h.count);
  for (std::uint64_t n = 0; n < h.count; ++n) {
    PuzzleSample s;
    s.mode = h.mode;
    s.grid = h.grid;
    s.target_grid = h.target_grid;
    s.rng_seed = r.get<std::uint64_t>();
    s.perm_id = r.get<std::uint32_t>();
    const auto missing = r.get<std::int8_t>();
    if (missing >= 0) s.missing_index = missing;
    const auto n_patches = r.get<std::uint8_t>();
    for (int i = 0; i < n_patches; ++i) {
      LabImage p;
      p.width = r.get<std::uint16_t>();
      p.height = r.get<std::uint16_t>();
      const auto flags = r.get<std::uint8_t>();
      const std::size_t px = p.pixel_count();
      p.has_l = flags & 1;
      p.has_ab = flags & 2;
      p.l = p.has_l ? denormalize_l(r.get_plane(px)) : std::vector<float>(px, 0.0f);
      if (p.has_ab) {
        p.a = r.get_plane(px);
        p.b = r.get_plane(px);
      }
      s.patches.push_back(std::move(p));
    }
    const auto n_targets = r.get<std::uint8_t>();
    for (int t = 0; t < n_targets; ++t) {
      TargetGrid tg;
      tg.slot = r.get<std::uint8_t>();
      for (std::size_t c = 0; c < cells; ++c) {
        SoftLabel lab;
        lab.k = r.get<std::uint8_t>();
        if (lab.k > SoftLabel::kMaxK) fail(Errc::Format, "shard: soft label too wide");
        for (int i = 0; i < lab.k; ++i) {
          lab.indices[i] = r.get<std::uint32_t>();
          if (lab.indices[i] >= h.codebook_size) fail(Errc::Format, "shard: target bin out of range");
        }
        for (int i = 0; i < lab.k; ++i) lab.values[i] = r.get<float>();
        tg.cells.push_back(lab);
      }
      s.color_targets.push_back(std::move(tg));
    }
    if (r.get<std::uint8_t>()) {
      LabImage region;
      region.width = r.get<std::uint16_t>();
      region.height = r.get<std::uint16_t>();
      region.has_l = false;
      region.l.assign(region.pixel_count(), 0.0f);
      region.a = r.get_plane(region.pixel_count());
      region.b = r.get_plane(region.pixel_count());
      s.target_region = std::move(region);
    }
    shard.samples.push_back(std::move(s));
  }
  if (!r.done()) fail(Errc::Format, "shard: trailing bytes");
  return shard;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::Io, "write failed: " + path);
}

void write_shard(const std::string& path, const ShardHeader& header, std::span<const PuzzleSample> samples) {
  write_file(path, encode_shard(header, samples));
}

Shard read_shard(const std::string& path) { return decode_shard(read_file(path)); }

std::string ShardManifest::compute_config_hash() const {
  nlohmann::json j{{"mode", to_string(mode)},       {"profile", to_string(profile)},
                   {"gen_config", gen_config},      {"codebook_hash", codebook_hash},
                   {"permset_hash", permset_hash},  {"seed", seed}};
  return hash_hex(fnv1a(j.dump()));
}

std::string ShardManifest::to_json() const {
  nlohmann::json j{{"shard_file", shard_file},
                   {"format_version", kShardVersion},
                   {"mode", to_string(mode)},
                   {"profile", to_string(profile)},
                   {"count", count},
                   {"seed", seed},
                   {"first_index", first_index},
                   {"source_images", source_images},
                   {"gen_config", nlohmann::json::parse(gen_config.empty() ? "{}" : gen_config)},
                   {"codebook_hash", codebook_hash},
                   {"permset_hash", permset_hash},
                   {"config_hash", config_hash},
                   {"assumptions",
                    {"patch jitter defaults to the full slack inside each grid cell",
                     "discarded pieces are filled with Gaussian noise using the corpus L statistics",
                     "L is serialized normalized as L/50 - 1",
                     "no chromatic aberration countermeasures are applied"}}};
  return j.dump(2);
}

ShardManifest ShardManifest::from_json(const std::string& text) {
  ShardManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.shard_file = j.at("shard_file").get<std::string>();
    m.mode = task_mode_from_string(j.at("mode").get<std::string>());
    m.profile = profile_from_string(j.at("profile").get<std::string>());
    m.count = j.at("count").get<std::uint64_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.first_index = j.value("first_index", std::uint64_t{0});
    m.source_images = j.at("source_images").get<std::vector<std::string>>();
    m.gen_config = j.at("gen_config").dump();
    m.codebook_hash = j.at("codebook_hash").get<std::string>();
    m.permset_hash = j.at("permset_hash").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Format, std::string("manifest JSON: ") + e.what());
  }
  return m;
}

void ShardManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out << to_json() << '\n';
}

ShardManifest ShardManifest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace cdjp
