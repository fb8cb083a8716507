#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdjp/codebook.hpp"
#include "cdjp/error.hpp"
#include "cdjp/evalkit.hpp"
#include "cdjp/hash.hpp"
#include "cdjp/image_io.hpp"
#include "cdjp/parallel.hpp"
#include "cdjp/permutation.hpp"
#include "cdjp/puzzlegen.hpp"
#include "cdjp/shard.hpp"
#include "cdjp/synthetic.hpp"
#include "cdjp/trainer.hpp"
#include "json.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cdjp;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kNumeric = 4, kMismatch = 5 };

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Io:
    case Errc::Format:
    case Errc::EmptyCorpus:
      return kIo;
    case Errc::NonFiniteActivation:
    case Errc::NonFiniteLoss:
      return kNumeric;
    case Errc::ManifestMismatch:
      return kMismatch;
    case Errc::NoForwardCache:
      return kInternal;
    default:
      return kConfig;
  }
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

void configure_workers(int flag) {
  int n = flag;
  if (n <= 0)
    if (const char* env = std::getenv("CDJP_WORKERS")) n = std::atoi(env);
  if (n > 0) set_threads(n);
}

std::string hash_of(std::uint64_t h) { return hash_hex(h); }

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out << text;
  if (!out) fail(Errc::Io, "write failed: " + path);
}

std::vector<std::string> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(Errc::Io, "not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(Errc::EmptyCorpus, "no PNG/JPEG images in " + dir);
  return out;
}

std::vector<LabImage> load_lab_images(const std::vector<std::string>& paths, int size) {
  std::vector<LabImage> out(paths.size());
  std::exception_ptr error;
  const auto n = static_cast<std::ptrdiff_t>(paths.size());
  CDJP_PARALLEL_FOR_DYNAMIC
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = rgb_to_lab(center_square(read_image(paths[i]), size));
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

std::string relative_names(const std::string& path) { return fs::path(path).filename().string(); }

// ---- codebook ----

struct CodebookArgs {
  double step = 10.0;
  int stride = 4;
  std::string codebook, images, out;
  int size = 96;
  double lambda = 0.5;
  double sigma = 5.0;
};

int cmd_codebook_build(const CodebookArgs& a) {
  const auto cb = build_codebook(a.step, a.stride);
  ensure_parent(a.out);
  cb.save(a.out);
  std::cout << json{{"codebook", a.out}, {"bins", cb.size()}, {"hash", hash_of(cb.hash())}}.dump() << '\n';
  return kOk;
}

int cmd_codebook_fit(const CodebookArgs& a) {
  const auto base = ColorCodebook::load(a.codebook);
  const auto images = load_lab_images(list_images(a.images), a.size);
  const auto cb = fit_rebalance(base, images, a.lambda, a.sigma);
  ensure_parent(a.out);
  cb.save(a.out);
  double check = 0;
  for (std::size_t q = 0; q < cb.size(); ++q) check += cb.prior[q] * cb.weights[q];
  std::cout << json{{"codebook", a.out},
                    {"bins", cb.size()},
                    {"images", images.size()},
                    {"sum_prior_weight", check},
                    {"hash", hash_of(cb.hash())}}
                   .dump()
            << '\n';
  return kOk;
}

// ---- permset ----

struct PermsetArgs {
  int pieces = 9;
  std::size_t k = 100;
  std::uint64_t seed = 1;
  std::size_t pool = 10000;
  std::string method = "greedy";
  std::string out;
};

int cmd_permset(const PermsetArgs& a) {
  PermutationSet set;
  if (a.method == "greedy") {
    GreedyOptions opts;
    opts.pool_size = a.pool;
    set = greedy_max_hamming_set(a.pieces, a.k, a.seed, opts);
  } else if (a.method == "random") {
    set = random_subset(a.pieces, a.k, a.seed);
  } else if (a.method == "full") {
    set = full_set(a.pieces);
  } else {
    fail(Errc::Config, "unknown permset method: " + a.method);
  }
  ensure_parent(a.out);
  set.save(a.out);
  std::cout << json{{"permset", a.out},
                    {"pieces", set.n_pieces()},
                    {"size", set.size()},
                    {"min_hamming", set.size() > 1 ? min_pairwise_hamming(set) : 0},
                    {"hash", hash_of(set.hash())}}
                   .dump()
            << '\n';
  return kOk;
}

// ---- generate ----

struct GenerateArgs {
  std::string images, mode = "cdjp3", profile = "desk", codebook, permset, out;
  int shards = 1;
  std::size_t per_shard = 1000;
  std::uint64_t seed = 1;
  std::optional<int> jitter;
  std::optional<double> drop_prob;
};

std::string shard_stem(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shard-%05d", i);
  return buf;
}

int cmd_generate(const GenerateArgs& a) {
  if (a.shards < 1 || a.per_shard < 1) fail(Errc::Config, "generate: --shards and --per-shard must be positive");
  const TaskMode mode = task_mode_from_string(a.mode);
  const Profile profile = profile_from_string(a.profile);
  GenConfig gc = GenConfig::for_profile(profile);
  if (a.jitter) gc.jitter = *a.jitter;
  if (a.drop_prob) gc.drop_prob = *a.drop_prob;
  gc.validate();
  const auto cb = ColorCodebook::load(a.codebook);
  const auto pset = PermutationSet::load(a.permset);
  const auto paths = list_images(a.images);
  const auto images = load_lab_images(paths, gc.image_size);
  std::vector<std::string> names;
  for (const auto& p : paths) names.push_back(relative_names(p));
  fs::create_directories(a.out);

  json report = json::array();
  for (int s = 0; s < a.shards; ++s) {
    const std::size_t first = static_cast<std::size_t>(s) * a.per_shard;
    const auto samples = generate_batch(images, mode, pset, cb, gc, a.seed, first, a.per_shard);
    ShardHeader h;
    h.mode = mode;
    h.grid = static_cast<std::uint8_t>(grid_of(mode));
    h.target_grid = static_cast<std::uint8_t>(gc.target_grid);
    h.codebook_size = static_cast<std::uint32_t>(cb.size());
    h.count = samples.size();
    const auto stem = shard_stem(s);
    const auto bin = (fs::path(a.out) / (stem + ".bin")).string();
    write_shard(bin, h, samples);

    ShardManifest m;
    m.shard_file = stem + ".bin";
    m.mode = mode;
    m.profile = profile;
    m.count = samples.size();
    m.seed = a.seed;
    m.first_index = first;
    m.source_images = names;
    m.gen_config = gc.to_json();
    m.codebook_hash = hash_of(cb.hash());
    m.permset_hash = hash_of(pset.hash());
    m.config_hash = m.compute_config_hash();
    const auto manifest = (fs::path(a.out) / (stem + ".json")).string();
    m.save(manifest);
    report.push_back({{"shard", bin}, {"manifest", manifest}, {"count", m.count}, {"config_hash", m.config_hash}});
  }
  std::cout << report.dump() << '\n';
  return kOk;
}

// ---- train ----

struct LoadedData {
  ColorCodebook cb;
  PermutationSet pset;
  std::vector<PuzzleSample> samples;
  std::string data_hash;
  Profile profile = Profile::desk;
  int target_grid = 0;
  int patch_size = 0;
};

// Loads every manifest's shard, checking each against the codebook, the
// permutation set and the others.
LoadedData load_training_data(const std::vector<std::string>& manifests, const std::string& codebook_path,
                              const std::string& permset_path) {
  if (manifests.empty()) fail(Errc::Config, "train: no shard manifests given");
  LoadedData d;
  d.cb = ColorCodebook::load(codebook_path);
  d.pset = PermutationSet::load(permset_path);
  const auto cb_hash = hash_of(d.cb.hash());
  const auto ps_hash = hash_of(d.pset.hash());
  std::string fingerprint = cb_hash + ps_hash;
  std::optional<Profile> profile;
  for (const auto& mpath : manifests) {
    const auto m = ShardManifest::load(mpath);
    if (m.compute_config_hash() != m.config_hash) fail(Errc::ManifestMismatch, mpath + ": config hash does not verify");
    if (m.codebook_hash != cb_hash) fail(Errc::ManifestMismatch, mpath + ": built with a different codebook");
    if (m.permset_hash != ps_hash) fail(Errc::ManifestMismatch, mpath + ": built with a different permutation set");
    if (m.mode != TaskMode::cdjp3) fail(Errc::Config, mpath + ": train consumes cdjp3 shards only");
    if (profile && *profile != m.profile) fail(Errc::ManifestMismatch, mpath + ": profile differs from other shards");
    profile = m.profile;
    const auto shard = read_shard((fs::path(mpath).parent_path() / m.shard_file).string());
    if (shard.header.count != m.count || shard.header.mode != m.mode)
      fail(Errc::ManifestMismatch, mpath + ": shard contents do not match the manifest");
    if (shard.header.codebook_size != d.cb.size())
      fail(Errc::ManifestMismatch, mpath + ": shard codebook size differs");
    if (d.target_grid && d.target_grid != shard.header.target_grid)
      fail(Errc::ManifestMismatch, mpath + ": target grid differs from other shards");
    d.target_grid = shard.header.target_grid;
    for (const auto& s : shard.samples) {
      if (s.patches.empty()) fail(Errc::Format, mpath + ": sample without patches");
      if (d.patch_size && d.patch_size != s.patches.front().width)
        fail(Errc::ManifestMismatch, mpath + ": patch size differs from other shards");
      d.patch_size = s.patches.front().width;
    }
    d.samples.insert(d.samples.end(), shard.samples.begin(), shard.samples.end());
    fingerprint += m.config_hash;
  }
  d.profile = *profile;
  d.data_hash = hash_of(fnv1a(fingerprint));
  return d;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
  auto kv = cli::KeyValues::load(config_path);
  for (const auto& o : overrides) kv.set(o);
  auto data = load_training_data(kv.list("shards"), kv.required("codebook"), kv.required("permset"));

  TrainConfig tc;
  tc.batch_size = static_cast<int>(kv.integer("batch_size", tc.batch_size));
  tc.steps = static_cast<std::uint64_t>(kv.integer("steps", static_cast<long long>(tc.steps)));
  tc.seed = static_cast<std::uint64_t>(kv.integer("seed", static_cast<long long>(tc.seed)));
  tc.adam.base_lr = kv.real("lr", tc.adam.base_lr);
  tc.adam.decay_interval =
      static_cast<std::uint64_t>(kv.integer("decay_interval", static_cast<long long>(tc.adam.decay_interval)));
  tc.adam.decay_factor = kv.real("decay_factor", tc.adam.decay_factor);
  tc.weights.alpha = kv.real("alpha", tc.weights.alpha);
  tc.weights.beta = kv.real("beta", tc.weights.beta);
  if (tc.batch_size < 1) fail(Errc::Config, "batch_size must be positive");
  if (!(tc.adam.base_lr > 0)) fail(Errc::Config, "lr must be positive");

  const auto arch = kv.str("net", "desk");
  NetConfig nc;
  if (arch == "desk") {
    nc = NetConfig::desk(static_cast<int>(data.cb.size()), static_cast<int>(data.pset.size()));
  } else if (arch == "micro") {
    nc = NetConfig::micro(static_cast<int>(data.cb.size()), static_cast<int>(data.pset.size()));
  } else {
    fail(Errc::Config, "net must be desk or micro");
  }
  nc.patch_size = data.patch_size;
  nc.target_grid = data.target_grid;
  nc.pieces = data.pset.n_pieces();
  nc.init_seed = static_cast<std::uint64_t>(kv.integer("init_seed", static_cast<long long>(nc.init_seed)));

  std::optional<Trainer> trainer;
  if (kv.has("resume") && !kv.str("resume", "").empty()) {
    const auto ckpt = load_checkpoint(kv.str("resume", ""));
    if (ckpt.data_hash != data.data_hash)
      fail(Errc::ManifestMismatch, "resume: checkpoint was trained on different data artifacts");
    if (ckpt.net.to_json() != nc.to_json()) fail(Errc::ManifestMismatch, "resume: network config differs");
    auto resumed = ckpt;
    resumed.train = tc;
    resumed.adam.hyper = tc.adam;
    trainer.emplace(resumed);
  } else {
    trainer.emplace(nc, tc);
  }

  const auto ckpt_path = kv.str("checkpoint", "model.ckpt");
  const auto metrics_path = kv.str("metrics", "metrics.csv");
  json dump{{"net", json::parse(nc.to_json())},
            {"train", json::parse(tc.to_json())},
            {"profile", to_string(data.profile)},
            {"samples", data.samples.size()},
            {"data_hash", data.data_hash},
            {"start_step", trainer->step_count()}};
  std::cout << dump.dump(2) << std::endl;

  ensure_parent(metrics_path);
  const bool append = trainer->step_count() > 0 && fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!metrics) fail(Errc::Io, "cannot write " + metrics_path);
  if (!append) metrics << metrics_csv_header() << '\n';
  const auto log_every = static_cast<std::uint64_t>(std::max(1LL, kv.integer("log_every", 50)));
  train_on_samples(*trainer, data.samples, data.pset, data.cb, tc.steps, [&](const StepMetrics& m) {
    metrics << metrics_csv_row(m) << '\n';
    if (m.step % log_every == 0) std::cerr << metrics_csv_row(m) << '\n';
  });
  metrics.flush();
  ensure_parent(ckpt_path);
  const auto ckpt = trainer->checkpoint(data.data_hash);
  save_checkpoint(ckpt_path, ckpt);
  std::cout << json{{"checkpoint", ckpt_path}, {"metrics", metrics_path}, {"steps", trainer->step_count()},
                    {"config_hash", ckpt.config_hash}}
                   .dump()
            << '\n';
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint, images, layer = "point2", metric = "cosine", out, html, index_out, labels;
  int size = 96;
  std::size_t k = 5;
  std::size_t queries = 10;
  int epochs = 100;
  double test_fraction = 0.3;
  std::uint64_t seed = 1;
  bool random_baseline = false;
};

std::map<std::string, int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot read labels " + path);
  std::map<std::string, int> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(Errc::Config, path + ":" + std::to_string(lineno) + ": expected file,label");
    const auto name = line.substr(0, comma);
    if (name == "file") continue;
    try {
      out[name] = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail(Errc::Config, path + ":" + std::to_string(lineno) + ": label is not an integer");
    }
  }
  return out;
}

std::vector<TowerLayer> parse_layers(const std::string& spec) {
  if (spec == "all") return {TowerLayer::conv1, TowerLayer::conv2, TowerLayer::conv3, TowerLayer::point1, TowerLayer::point2};
  return {tower_layer_from_string(spec)};
}

int cmd_eval_nn(const EvalArgs& a) {
  const auto ckpt = load_checkpoint(a.checkpoint);
  const TinyNet<float> net(ckpt.net, ckpt.params);
  const auto paths = list_images(a.images);
  std::vector<std::string> ids;
  for (const auto& p : paths) ids.push_back(relative_names(p));
  const auto images = load_lab_images(paths, a.size);
  const auto index =
      extract_features(net, images, tower_layer_from_string(a.layer), metric_from_string(a.metric), ids, ckpt.config_hash);
  if (!a.index_out.empty()) {
    ensure_parent(a.index_out);
    index.save(a.index_out);
  }
  std::vector<std::string> queries(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(a.queries, ids.size())));
  json result{{"checkpoint_hash", ckpt.config_hash}, {"layer", a.layer}, {"metric", a.metric}, {"k", a.k}};
  json rows = json::array();
  for (const auto& q : queries) {
    json nn = json::array();
    for (const auto& n : knn(index, q, a.k)) nn.push_back({{"id", n.id}, {"distance", n.distance}});
    rows.push_back({{"query", q}, {"neighbors", nn}});
  }
  result["results"] = rows;
  if (!a.html.empty()) {
    std::map<std::string, std::string> links;
    const auto base = fs::absolute(fs::path(a.html)).parent_path();
    for (std::size_t i = 0; i < paths.size(); ++i)
      links[ids[i]] = fs::relative(fs::absolute(paths[i]), base).generic_string();
    write_text(a.html, contact_sheet_html(index, queries, a.k, links));
  }
  const auto text = result.dump(2);
  if (a.out.empty()) std::cout << text << '\n';
  else write_text(a.out, text + "\n");
  return kOk;
}

int cmd_eval_probe(const EvalArgs& a) {
  if (a.labels.empty()) fail(Errc::Config, "probe: --labels is required");
  const auto ckpt = load_checkpoint(a.checkpoint);
  const TinyNet<float> trained(ckpt.net, ckpt.params);
  const auto labels_by_name = read_labels(a.labels);
  const auto paths = list_images(a.images);
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (const auto& p : paths) {
    const auto name = relative_names(p);
    const auto it = labels_by_name.find(name);
    if (it == labels_by_name.end()) fail(Errc::Config, "probe: no label for " + name);
    ids.push_back(name);
    labels.push_back(it->second);
  }
  const auto images = load_lab_images(paths, a.size);
  std::vector<std::size_t> train, test;
  split_indices(images.size(), a.test_fraction, a.seed, train, test);
  ProbeOptions opts;
  opts.epochs = a.epochs;
  opts.seed = a.seed;

  json results = json::array();
  auto run = [&](const TinyNet<float>& net, const std::string& which) {
    for (const auto layer : parse_layers(a.layer)) {
      const auto idx = extract_features(net, images, layer, Metric::l2, ids, ckpt.config_hash);
      const auto r = linear_probe(idx, labels, train, test, opts, to_string(layer));
      auto j = json::parse(r.to_json());
      j["weights"] = which;
      results.push_back(j);
    }
  };
  run(trained, "trained");
  if (a.random_baseline) run(TinyNet<float>(ckpt.net), "random");
  const auto text = json{{"checkpoint_hash", ckpt.config_hash}, {"probes", results}}.dump(2);
  if (a.out.empty()) std::cout << text << '\n';
  else write_text(a.out, text + "\n");
  return kOk;
}

// ---- inspect ----

struct InspectArgs {
  std::string shard, codebook, permset, out;
  std::size_t index = 0;
  int scale = 2;
};

void blit(RgbImage& canvas, const RgbImage& tile, int x0, int y0, int scale) {
  for (int y = 0; y < tile.height * scale; ++y)
    for (int x = 0; x < tile.width * scale; ++x) {
      const int cx = x0 + x, cy = y0 + y;
      if (cx < 0 || cy < 0 || cx >= canvas.width || cy >= canvas.height) continue;
      const auto* s = tile.at(x / scale, y / scale);
      auto* d = canvas.at(cx, cy);
      d[0] = s[0];
      d[1] = s[1];
      d[2] = s[2];
    }
}

// Patch as seen by the network: missing channels render as neutral.
RgbImage render_patch(const LabImage& p) {
  LabImage v = p;
  if (!v.has_l) {
    v.l.assign(v.pixel_count(), 50.0f);
    v.has_l = true;
  }
  if (!v.has_ab) {
    v.a.assign(v.pixel_count(), 0.0f);
    v.b.assign(v.pixel_count(), 0.0f);
    v.has_ab = true;
  }
  return lab_to_rgb(v);
}

// Targets decoded to their most likely bin, shown with the given L plane.
RgbImage render_targets(const LabImage& l_source, const TargetGrid& tg, int S, const ColorCodebook& cb) {
  LabImage v = LabImage::blank(l_source.width, l_source.height, true);
  if (l_source.has_l) v.l = l_source.l;
  else v.l.assign(v.pixel_count(), 50.0f);
  for (int y = 0; y < v.height; ++y)
    for (int x = 0; x < v.width; ++x) {
      const int cy = std::min(S - 1, y * S / v.height), cx = std::min(S - 1, x * S / v.width);
      const auto& bin = cb.bins[tg.cells[static_cast<std::size_t>(cy) * S + cx].argmax()];
      v.a[v.index(x, y)] = static_cast<float>(bin[0]);
      v.b[v.index(x, y)] = static_cast<float>(bin[1]);
    }
  return lab_to_rgb(v);
}

int cmd_inspect(const InspectArgs& a) {
  const auto shard = read_shard(a.shard);
  if (a.index >= shard.samples.size()) fail(Errc::Config, "inspect: --index out of range");
  const auto cb = ColorCodebook::load(a.codebook);
  const auto pset = PermutationSet::load(a.permset);
  if (shard.header.codebook_size != cb.size()) fail(Errc::ManifestMismatch, "inspect: codebook does not match shard");
  const auto& s = shard.samples[a.index];
  const int n = static_cast<int>(s.patches.size());
  const int side = s.patches.front().width;
  const int gap = 4, cell = side * a.scale + gap;
  const bool shuffled = s.mode != TaskMode::inpaint_cross_channel && s.mode != TaskMode::colorize_narrow;
  const Permutation perm = shuffled ? pset[s.perm_id] : Permutation::identity(n);

  // Row 0: damaged inputs in shuffled order. Row 1: decoded color targets in
  // original piece order, drawn over the L the network was given.
  RgbImage canvas(gap + n * cell, gap + 2 * (s.patches.front().height * a.scale + gap));
  std::fill(canvas.data.begin(), canvas.data.end(), std::uint8_t{255});
  const int row1 = gap + s.patches.front().height * a.scale + gap;
  int noise_patches = 0;
  for (int slot = 0; slot < n; ++slot) {
    blit(canvas, render_patch(s.patches[slot]), gap + slot * cell, gap, a.scale);
    if (s.missing_index && *s.missing_index == slot) ++noise_patches;
  }
  for (int slot = 0; slot < n; ++slot) {
    const int piece = perm[slot];
    const auto* tg = s.target_for_piece(piece);
    const auto tile = tg ? render_targets(s.patches[slot], *tg, s.target_grid, cb) : render_patch(s.patches[slot]);
    blit(canvas, tile, gap + piece * cell, row1, a.scale);
  }
  ensure_parent(a.out);
  write_png(a.out, canvas);
  std::cout << json{{"montage", a.out},
                    {"mode", to_string(s.mode)},
                    {"perm_id", s.perm_id},
                    {"patches", n},
                    {"missing_index", s.missing_index ? json(*s.missing_index) : json(nullptr)},
                    {"noise_patches", noise_patches},
                    {"targets", s.color_targets.size()}}
                   .dump()
            << '\n';
  return kOk;
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  std::size_t count = 200;
  std::uint64_t seed = 11;
  int size = 96;
  int classes = 4;
};

int cmd_synth(const SynthArgs& a) {
  SyntheticOptions opts;
  opts.size = a.size;
  opts.classes = a.classes;
  const auto corpus = make_synthetic_corpus(a.count, a.seed, opts);
  fs::create_directories(a.out);
  std::ofstream labels(fs::path(a.out) / "labels.csv");
  if (!labels) fail(Errc::Io, "cannot write labels.csv in " + a.out);
  labels << "file,label\n";
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img-%06zu.png", i);
    write_png((fs::path(a.out) / name).string(), corpus.images[i]);
    labels << name << ',' << corpus.labels[i] << '\n';
  }
  std::cout << json{{"dir", a.out}, {"images", corpus.images.size()}, {"classes", corpus.classes}}.dump() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Damaged-jigsaw pretext task toolkit"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "worker threads (default: CDJP_WORKERS or all cores)");

  CodebookArgs cba;
  auto* codebook = app.add_subcommand("codebook", "build or fit an ab color codebook");
  codebook->require_subcommand(1);
  auto* cb_build = codebook->add_subcommand("build", "quantize the in-gamut ab plane");
  cb_build->add_option("--step", cba.step, "grid step in ab units");
  cb_build->add_option("--stride", cba.stride, "RGB cube sampling stride for the gamut");
  cb_build->add_option("--out", cba.out, "output JSON")->required();
  auto* cb_fit = codebook->add_subcommand("fit", "fit the color prior and rebalancing weights on images");
  cb_fit->add_option("--codebook", cba.codebook, "codebook JSON")->required();
  cb_fit->add_option("--images", cba.images, "image directory")->required();
  cb_fit->add_option("--size", cba.size, "resize images to this square size");
  cb_fit->add_option("--lambda", cba.lambda, "uniform mixing weight");
  cb_fit->add_option("--sigma", cba.sigma, "prior smoothing sigma in ab units (0 disables)");
  cb_fit->add_option("--out", cba.out, "output JSON")->required();

  PermsetArgs psa;
  auto* permset = app.add_subcommand("permset", "build a permutation set");
  permset->add_option("--pieces", psa.pieces, "pieces per puzzle (4 or 9)");
  permset->add_option("--k", psa.k, "number of permutations");
  permset->add_option("--seed", psa.seed);
  permset->add_option("--pool", psa.pool, "candidates per greedy step");
  permset->add_option("--method", psa.method, "greedy | random | full");
  permset->add_option("--out", psa.out, "output JSON")->required();

  GenerateArgs ga;
  auto* generate = app.add_subcommand("generate", "write puzzle sample shards");
  generate->add_option("--images", ga.images, "image directory")->required();
  generate->add_option("--mode", ga.mode, "task mode");
  generate->add_option("--profile", ga.profile, "paper | desk");
  generate->add_option("--codebook", ga.codebook)->required();
  generate->add_option("--permset", ga.permset)->required();
  generate->add_option("--shards", ga.shards);
  generate->add_option("--per-shard", ga.per_shard);
  generate->add_option("--seed", ga.seed);
  generate->add_option("--jitter", ga.jitter, "max jitter in pixels, -1 for the full slack");
  generate->add_option("--drop-prob", ga.drop_prob, "piece removal probability");
  generate->add_option("--out", ga.out, "output directory")->required();

  std::string train_config;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "train the network on shards");
  train->add_option("--config", train_config, "key = value run config")->required();
  train->add_option("--set", overrides, "override a config key (key=value)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "evaluate learned features");
  eval->require_subcommand(1);
  auto* nn = eval->add_subcommand("nn", "nearest-neighbor retrieval");
  auto* probe = eval->add_subcommand("probe", "linear probe on frozen features");
  for (auto* sub : {nn, probe}) {
    sub->add_option("--checkpoint", ea.checkpoint)->required();
    sub->add_option("--images", ea.images)->required();
    sub->add_option("--size", ea.size, "resize images to this square size");
    sub->add_option("--layer", ea.layer, "tower layer (conv1..conv3, point1, point2; probe also accepts all)");
    sub->add_option("--out", ea.out, "JSON report path (default stdout)");
  }
  nn->add_option("--metric", ea.metric, "cosine | l2");
  nn->add_option("--k", ea.k);
  nn->add_option("--queries", ea.queries, "number of query images");
  nn->add_option("--html", ea.html, "HTML contact sheet path");
  nn->add_option("--index-out", ea.index_out, "save the feature index");
  probe->add_option("--labels", ea.labels, "CSV of file,label")->required();
  probe->add_option("--epochs", ea.epochs);
  probe->add_option("--test-fraction", ea.test_fraction);
  probe->add_option("--seed", ea.seed);
  probe->add_flag("--random-baseline", ea.random_baseline, "also probe a randomly initialized network");

  InspectArgs ia;
  auto* inspect = app.add_subcommand("inspect", "render a sample as a PNG montage");
  inspect->add_option("--shard", ia.shard)->required();
  inspect->add_option("--index", ia.index);
  inspect->add_option("--codebook", ia.codebook)->required();
  inspect->add_option("--permset", ia.permset)->required();
  inspect->add_option("--scale", ia.scale);
  inspect->add_option("--out", ia.out)->required();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "write a procedural labeled image corpus");
  synth->add_option("--out", sa.out)->required();
  synth->add_option("--count", sa.count);
  synth->add_option("--seed", sa.seed);
  synth->add_option("--size", sa.size);
  synth->add_option("--classes", sa.classes);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("Usage", e.what(), kConfig);
  }

  try {
    configure_workers(workers);
    if (*cb_build) return cmd_codebook_build(cba);
    if (*cb_fit) return cmd_codebook_fit(cba);
    if (*permset) return cmd_permset(psa);
    if (*generate) return cmd_generate(ga);
    if (*train) return cmd_train(train_config, overrides);
    if (*nn) return cmd_eval_nn(ea);
    if (*probe) return cmd_eval_probe(ea);
    if (*inspect) return cmd_inspect(ia);
    if (*synth) return cmd_synth(sa);
  } catch (const cdjp::Error& e) {
    return report_error(errc_name(e.code()), e.what(), exit_code_for(e.code()));
  } catch (const fs::filesystem_error& e) {
    return report_error("Io", e.what(), kIo);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), kInternal);
  }
  return kInternal;
}
