#include "cdjp/tinynet.hpp"

#include <cmath>

#include "cdjp/error.hpp"
#include "cdjp/hash.hpp"
#include "cdjp/nn_ops.hpp"
#include "cdjp/parallel.hpp"
#include "cdjp/rng.hpp"
#include "json.hpp"

namespace cdjp {
namespace {

constexpr const char* kLayerNames[] = {"conv1", "conv2", "conv3", "point1", "point2"};

nn::ConvGeom conv3x3(int in_c, int h, int w, int out_c) { return {in_c, h, w, out_c, 3, 2, 1}; }
nn::ConvGeom pointwise(int in_c, int s, int out_c) { return {in_c, s, s, out_c, 1, 1, 0}; }

template <typename T>
void check_finite(const std::vector<T>& v, const char* what) {
  for (T x : v)
    if (!std::isfinite(x)) fail(Errc::NonFiniteActivation, std::string("non-finite activation in ") + what);
}

template <typename T>
void add_into(std::vector<T>& dst, const std::vector<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

NetConfig NetConfig::desk(int codebook_size, int perm_count) {
  NetConfig c;
  c.codebook_size = codebook_size;
  c.perm_count = perm_count;
  return c;
}

NetConfig NetConfig::micro(int codebook_size, int perm_count) {
  NetConfig c = desk(codebook_size, perm_count);
  c.conv_widths = {3, 6, 8};
  c.pointwise_widths = {8, 8};
  c.jigsaw_patch_units = 6;
  c.jigsaw_hidden = 8;
  c.inpaint_patch_channels = 3;
  c.inpaint_hidden = 8;
  c.color_hidden = 6;
  return c;
}

std::string NetConfig::to_json() const {
  nlohmann::json j{{"patch_size", patch_size},
                   {"target_grid", target_grid},
                   {"codebook_size", codebook_size},
                   {"perm_count", perm_count},
                   {"pieces", pieces},
                   {"conv_widths", conv_widths},
                   {"pointwise_widths", pointwise_widths},
                   {"jigsaw_patch_units", jigsaw_patch_units},
                   {"jigsaw_hidden", jigsaw_hidden},
                   {"inpaint_patch_channels", inpaint_patch_channels},
                   {"inpaint_hidden", inpaint_hidden},
                   {"color_hidden", color_hidden},
                   {"share_color_heads", share_color_heads},
                   {"init_seed", init_seed}};
  return j.dump();
}

NetConfig NetConfig::from_json(const std::string& text) {
  NetConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.patch_size = j.at("patch_size");
    c.target_grid = j.at("target_grid");
    c.codebook_size = j.at("codebook_size");
    c.perm_count = j.at("perm_count");
    c.pieces = j.at("pieces");
    c.conv_widths = j.at("conv_widths").get<std::array<int, 3>>();
    c.pointwise_widths = j.at("pointwise_widths").get<std::array<int, 2>>();
    c.jigsaw_patch_units = j.at("jigsaw_patch_units");
    c.jigsaw_hidden = j.at("jigsaw_hidden");
    c.inpaint_patch_channels = j.at("inpaint_patch_channels");
    c.inpaint_hidden = j.at("inpaint_hidden");
    c.color_hidden = j.at("color_hidden");
    c.share_color_heads = j.at("share_color_heads");
    c.init_seed = j.at("init_seed");
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Format, std::string("net config JSON: ") + e.what());
  }
  return c;
}

std::uint64_t NetConfig::hash() const { return fnv1a(to_json()); }

const char* to_string(TowerLayer layer) { return kLayerNames[static_cast<int>(layer)]; }

TowerLayer tower_layer_from_string(const std::string& name) {
  for (int i = 0; i < kTowerLayers; ++i)
    if (name == kLayerNames[i]) return static_cast<TowerLayer>(i);
  fail(Errc::UnknownLayer, "unknown tower layer: " + name);
}

template <typename T>
NetInput<T> make_input(const PuzzleSample& sample, const PermutationSet& pset, const NetConfig& cfg) {
  if (static_cast<int>(sample.patches.size()) != cfg.pieces || pset.n_pieces() != cfg.pieces)
    fail(Errc::ShapeMismatch, "make_input: piece count does not match the network");
  if (sample.perm_id >= pset.size()) fail(Errc::ShapeMismatch, "make_input: perm_id outside the permutation set");
  NetInput<T> in;
  in.perm = pset[sample.perm_id];
  for (const auto& p : sample.patches) {
    if (p.width != cfg.patch_size || p.height != cfg.patch_size)
      fail(Errc::ShapeMismatch, "make_input: patch size does not match the network");
    std::vector<T> plane(p.pixel_count(), T{0});
    if (p.has_l)
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = static_cast<T>(p.l[i] / 50.0f - 1.0f);
    in.patches.push_back(std::move(plane));
  }
  return in;
}

template NetInput<float> make_input<float>(const PuzzleSample&, const PermutationSet&, const NetConfig&);
template NetInput<double> make_input<double>(const PuzzleSample&, const PermutationSet&, const NetConfig&);

HeadTargets make_targets(const PuzzleSample& sample, const PermutationSet& pset) {
  if (!sample.missing_index) fail(Errc::ShapeMismatch, "make_targets: sample has no missing piece");
  if (sample.perm_id >= pset.size()) fail(Errc::ShapeMismatch, "make_targets: perm_id outside the permutation set");
  const Permutation& perm = pset[sample.perm_id];
  HeadTargets t;
  t.perm_id = sample.perm_id;
  const int missing = *sample.missing_index;
  const auto* inp = sample.target_for_piece(perm[missing]);
  if (!inp) fail(Errc::ShapeMismatch, "make_targets: missing piece has no target");
  t.inpaint = inp->cells;
  for (int slot = 0; slot < perm.size(); ++slot) {
    const auto* tg = sample.target_for_piece(perm[slot]);
    if (!tg) fail(Errc::ShapeMismatch, "make_targets: piece has no color target");
    t.colorize.emplace_back(tg->cells);
    t.colorize_mask.push_back(slot == missing ? 0 : 1);
  }
  return t;
}

template <typename T>
TinyNet<T>::TinyNet(const NetConfig& cfg) : cfg_(cfg) {
  const int C = cfg.feature_channels();
  const int P = cfg.pieces;
  const int Q = cfg.codebook_size;
  if (Q < 1 || cfg.perm_count < 1 || P < 1) fail(Errc::ShapeMismatch, "TinyNet: Q, K and pieces must be positive");
  Rng rng(cfg.init_seed);
  auto add = [&](const std::string& name, std::vector<int> shape, int fan_in) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    Param<T> p{name, std::move(shape), std::vector<T>(n, T{0})};
    if (fan_in > 0) {
      const double stddev = std::sqrt(2.0 / fan_in);
      for (auto& v : p.value) v = static_cast<T>(rng.normal(0.0, stddev));
    }
    params_.push_back(std::move(p));
  };
  const auto& cw = cfg.conv_widths;
  const auto& pw = cfg.pointwise_widths;
  add("tower.conv1.w", {cw[0], 1, 3, 3}, 9);
  add("tower.conv1.b", {cw[0]}, 0);
  add("tower.conv2.w", {cw[1], cw[0], 3, 3}, 9 * cw[0]);
  add("tower.conv2.b", {cw[1]}, 0);
  add("tower.conv3.w", {cw[2], cw[1], 3, 3}, 9 * cw[1]);
  add("tower.conv3.b", {cw[2]}, 0);
  add("tower.point1.w", {pw[0], cw[2], 1, 1}, cw[2]);
  add("tower.point1.b", {pw[0]}, 0);
  add("tower.point2.w", {pw[1], pw[0], 1, 1}, pw[0]);
  add("tower.point2.b", {pw[1]}, 0);
  add("jigsaw.patch.w", {cfg.jigsaw_patch_units, C}, C);
  add("jigsaw.patch.b", {cfg.jigsaw_patch_units}, 0);
  add("jigsaw.hidden.w", {cfg.jigsaw_hidden, P * cfg.jigsaw_patch_units}, P * cfg.jigsaw_patch_units);
  add("jigsaw.hidden.b", {cfg.jigsaw_hidden}, 0);
  add("jigsaw.out.w", {cfg.perm_count, cfg.jigsaw_hidden}, cfg.jigsaw_hidden);
  add("jigsaw.out.b", {cfg.perm_count}, 0);
  add("inpaint.patch.w", {cfg.inpaint_patch_channels, C, 1, 1}, C);
  add("inpaint.patch.b", {cfg.inpaint_patch_channels}, 0);
  add("inpaint.hidden.w", {cfg.inpaint_hidden, P * cfg.inpaint_patch_channels, 1, 1}, P * cfg.inpaint_patch_channels);
  add("inpaint.hidden.b", {cfg.inpaint_hidden}, 0);
  add("inpaint.out.w", {Q, cfg.inpaint_hidden, 1, 1}, cfg.inpaint_hidden);
  add("inpaint.out.b", {Q}, 0);
  const int heads = cfg.share_color_heads ? 1 : P;
  for (int h = 0; h < heads; ++h) {
    const std::string prefix = cfg.share_color_heads ? "color" : "color" + std::to_string(h);
    add(prefix + ".hidden.w", {cfg.color_hidden, C, 1, 1}, C);
    add(prefix + ".hidden.b", {cfg.color_hidden}, 0);
    add(prefix + ".out.w", {Q, cfg.color_hidden, 1, 1}, cfg.color_hidden);
    add(prefix + ".out.b", {Q}, 0);
  }
  build_layout();
}

template <typename T>
TinyNet<T>::TinyNet(const NetConfig& cfg, std::vector<Param<T>> params) : cfg_(cfg), params_(std::move(params)) {
  build_layout();
  check_params();
}

template <typename T>
void TinyNet<T>::build_layout() {
  int i = 0;
  L_.c1w = i++, L_.c1b = i++, L_.c2w = i++, L_.c2b = i++, L_.c3w = i++, L_.c3b = i++;
  L_.p1w = i++, L_.p1b = i++, L_.p2w = i++, L_.p2b = i++;
  L_.j1w = i++, L_.j1b = i++, L_.j2w = i++, L_.j2b = i++, L_.j3w = i++, L_.j3b = i++;
  L_.i0w = i++, L_.i0b = i++, L_.i1w = i++, L_.i1b = i++, L_.i2w = i++, L_.i2b = i++;
  const int heads = cfg_.share_color_heads ? 1 : cfg_.pieces;
  L_.color.clear();
  for (int h = 0; h < heads; ++h) {
    L_.color.push_back({i, i + 1, i + 2, i + 3});
    i += 4;
  }
}

template <typename T>
void TinyNet<T>::check_params() const {
  const TinyNet<T> reference_shape(cfg_);
  if (reference_shape.params_.size() != params_.size())
    fail(Errc::ShapeMismatch, "TinyNet: parameter list does not match the config");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name != reference_shape.params_[i].name || params_[i].shape != reference_shape.params_[i].shape ||
        params_[i].value.size() != reference_shape.params_[i].value.size())
      fail(Errc::ShapeMismatch, "TinyNet: parameter " + params_[i].name + " does not match the config");
}

template <typename T>
std::size_t TinyNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
Grads<T> TinyNet<T>::zero_grads() const {
  Grads<T> g;
  for (const auto& p : params_) g.emplace_back(p.value.size(), T{0});
  return g;
}

template <typename T>
std::array<int, 4> TinyNet<T>::color_head(int slot) const {
  return cfg_.share_color_heads ? L_.color[0] : L_.color[static_cast<std::size_t>(slot)];
}

template <typename T>
TowerCache<T> TinyNet<T>::tower(const std::vector<T>& plane, int h, int w) const {
  if (plane.size() != static_cast<std::size_t>(h) * w) fail(Errc::ShapeMismatch, "tower: plane size mismatch");
  const auto& cw = cfg_.conv_widths;
  const auto& pw = cfg_.pointwise_widths;
  const int S = cfg_.target_grid;
  TowerCache<T> tc;
  tc.h = h;
  tc.w = w;
  tc.x = plane;
  const std::array<std::vector<T>*, 3> acts{&tc.a1, &tc.a2, &tc.a3};
  const std::array<int, 3> wi{L_.c1w, L_.c2w, L_.c3w};
  const std::array<int, 3> bi{L_.c1b, L_.c2b, L_.c3b};
  const std::vector<T>* src = &tc.x;
  int ch = 1, ih = h, iw = w;
  for (int l = 0; l < 3; ++l) {
    const auto g = conv3x3(ch, ih, iw, cw[l]);
    acts[l]->resize(static_cast<std::size_t>(g.out_c) * g.out_h() * g.out_w());
    nn::conv2d_forward(g, src->data(), params_[wi[l]].value.data(), params_[bi[l]].value.data(), acts[l]->data());
    nn::relu_inplace(std::span<T>(*acts[l]));
    tc.conv_h[l] = g.out_h();
    tc.conv_w[l] = g.out_w();
    src = acts[l];
    ch = cw[l];
    ih = g.out_h();
    iw = g.out_w();
  }
  tc.pooled.resize(static_cast<std::size_t>(cw[2]) * S * S);
  nn::adaptive_avg_pool(cw[2], ih, iw, S, tc.a3.data(), tc.pooled.data());
  const auto g1 = pointwise(cw[2], S, pw[0]);
  tc.p1.resize(static_cast<std::size_t>(pw[0]) * S * S);
  nn::conv2d_forward(g1, tc.pooled.data(), params_[L_.p1w].value.data(), params_[L_.p1b].value.data(), tc.p1.data());
  nn::relu_inplace(std::span<T>(tc.p1));
  const auto g2 = pointwise(pw[0], S, pw[1]);
  tc.p2.resize(static_cast<std::size_t>(pw[1]) * S * S);
  nn::conv2d_forward(g2, tc.p1.data(), params_[L_.p2w].value.data(), params_[L_.p2b].value.data(), tc.p2.data());
  nn::relu_inplace(std::span<T>(tc.p2));
  return tc;
}

template <typename T>
ForwardCache<T> TinyNet<T>::forward(const NetInput<T>& input) const {
  const int P = cfg_.pieces;
  const int S = cfg_.target_grid;
  const int cells = S * S;
  const int C = cfg_.feature_channels();
  const int Q = cfg_.codebook_size;
  const int J1 = cfg_.jigsaw_patch_units, I1 = cfg_.inpaint_patch_channels;
  if (static_cast<int>(input.patches.size()) != P || input.perm.size() != P)
    fail(Errc::ShapeMismatch, "forward: expected one patch per piece");

  ForwardCache<T> fc;
  fc.perm_ = input.perm;
  fc.towers_.resize(P);
  fc.jig_pooled_.assign(P, std::vector<T>(C));
  fc.jig_units_.assign(P, std::vector<T>(J1));
  fc.inp_units_.assign(P, std::vector<T>(static_cast<std::size_t>(I1) * cells));
  fc.col_hidden_.assign(P, std::vector<T>(static_cast<std::size_t>(cfg_.color_hidden) * cells));
  fc.out_.colorize.assign(P, std::vector<T>(static_cast<std::size_t>(Q) * cells));

  std::exception_ptr error;
  CDJP_PARALLEL_FOR
  for (int i = 0; i < P; ++i) {
    try {
      fc.towers_[i] = tower(input.patches[i], cfg_.patch_size, cfg_.patch_size);
      const auto& feat = fc.towers_[i].p2;
      nn::global_avg_pool(C, cells, feat.data(), fc.jig_pooled_[i].data());
      nn::dense_forward(C, J1, fc.jig_pooled_[i].data(), params_[L_.j1w].value.data(),
                        params_[L_.j1b].value.data(), fc.jig_units_[i].data());
      nn::relu_inplace(std::span<T>(fc.jig_units_[i]));
      nn::conv2d_forward_serial(pointwise(C, S, I1), feat.data(), params_[L_.i0w].value.data(),
                                params_[L_.i0b].value.data(), fc.inp_units_[i].data());
      nn::relu_inplace(std::span<T>(fc.inp_units_[i]));
      const auto head = color_head(i);
      nn::conv2d_forward_serial(pointwise(C, S, cfg_.color_hidden), feat.data(), params_[head[0]].value.data(),
                                params_[head[1]].value.data(), fc.col_hidden_[i].data());
      nn::relu_inplace(std::span<T>(fc.col_hidden_[i]));
      std::vector<T> logits(static_cast<std::size_t>(Q) * cells);
      nn::conv2d_forward_serial(pointwise(cfg_.color_hidden, S, Q), fc.col_hidden_[i].data(),
                                params_[head[2]].value.data(), params_[head[3]].value.data(), logits.data());
      nn::to_cell_major(Q, cells, logits.data(), fc.out_.colorize[i].data());
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  // Jigsaw: per-piece units concatenated in slot order.
  fc.jig_concat_.resize(static_cast<std::size_t>(P) * J1);
  for (int i = 0; i < P; ++i) std::copy(fc.jig_units_[i].begin(), fc.jig_units_[i].end(), fc.jig_concat_.begin() + i * J1);
  fc.jig_hidden_.resize(cfg_.jigsaw_hidden);
  nn::dense_forward(P * J1, cfg_.jigsaw_hidden, fc.jig_concat_.data(), params_[L_.j2w].value.data(),
                    params_[L_.j2b].value.data(), fc.jig_hidden_.data());
  nn::relu_inplace(std::span<T>(fc.jig_hidden_));
  fc.out_.jigsaw.resize(cfg_.perm_count);
  nn::dense_forward(cfg_.jigsaw_hidden, cfg_.perm_count, fc.jig_hidden_.data(), params_[L_.j3w].value.data(),
                    params_[L_.j3b].value.data(), fc.out_.jigsaw.data());

  // Inpainting: features of slot i go to canonical position perm[i].
  const std::size_t block = static_cast<std::size_t>(I1) * cells;
  fc.inp_arranged_.resize(P * block);
  for (int i = 0; i < P; ++i)
    std::copy(fc.inp_units_[i].begin(), fc.inp_units_[i].end(), fc.inp_arranged_.begin() + input.perm[i] * block);
  fc.inp_hidden_.resize(static_cast<std::size_t>(cfg_.inpaint_hidden) * cells);
  nn::conv2d_forward(pointwise(P * I1, S, cfg_.inpaint_hidden), fc.inp_arranged_.data(), params_[L_.i1w].value.data(),
                     params_[L_.i1b].value.data(), fc.inp_hidden_.data());
  nn::relu_inplace(std::span<T>(fc.inp_hidden_));
  std::vector<T> inp_logits(static_cast<std::size_t>(Q) * cells);
  nn::conv2d_forward(pointwise(cfg_.inpaint_hidden, S, Q), fc.inp_hidden_.data(), params_[L_.i2w].value.data(),
                     params_[L_.i2b].value.data(), inp_logits.data());
  fc.out_.inpaint.resize(inp_logits.size());
  nn::to_cell_major(Q, cells, inp_logits.data(), fc.out_.inpaint.data());

  check_finite(fc.out_.jigsaw, "jigsaw head");
  check_finite(fc.out_.inpaint, "inpainting head");
  for (const auto& c : fc.out_.colorize) check_finite(c, "colorization head");
  fc.valid_ = true;
  return fc;
}

template <typename T>
void TinyNet<T>::tower_backward(TowerCache<T>& tc, std::vector<T> d_feat, Grads<T>& g) const {
  const auto& cw = cfg_.conv_widths;
  const auto& pw = cfg_.pointwise_widths;
  const int S = cfg_.target_grid;
  nn::relu_backward(std::span<const T>(tc.p2), std::span<T>(d_feat));
  std::vector<T> d_p1(tc.p1.size());
  nn::conv2d_backward(pointwise(pw[0], S, pw[1]), tc.p1.data(), params_[L_.p2w].value.data(), d_feat.data(),
                      d_p1.data(), g[L_.p2w].data(), g[L_.p2b].data());
  nn::relu_backward(std::span<const T>(tc.p1), std::span<T>(d_p1));
  std::vector<T> d_pooled(tc.pooled.size());
  nn::conv2d_backward(pointwise(cw[2], S, pw[0]), tc.pooled.data(), params_[L_.p1w].value.data(), d_p1.data(),
                      d_pooled.data(), g[L_.p1w].data(), g[L_.p1b].data());
  std::vector<T> d_act(tc.a3.size());
  nn::adaptive_avg_pool_backward(cw[2], tc.conv_h[2], tc.conv_w[2], S, d_pooled.data(), d_act.data());

  const std::array<const std::vector<T>*, 3> acts{&tc.a1, &tc.a2, &tc.a3};
  const std::array<int, 3> wi{L_.c1w, L_.c2w, L_.c3w};
  const std::array<int, 3> bi{L_.c1b, L_.c2b, L_.c3b};
  for (int l = 2; l >= 0; --l) {
    nn::relu_backward(std::span<const T>(*acts[l]), std::span<T>(d_act));
    const int in_c = l == 0 ? 1 : cw[l - 1];
    const int in_h = l == 0 ? tc.h : tc.conv_h[l - 1];
    const int in_w = l == 0 ? tc.w : tc.conv_w[l - 1];
    const std::vector<T>& in = l == 0 ? tc.x : *acts[l - 1];
    std::vector<T> d_in(l == 0 ? 0 : in.size());
    nn::conv2d_backward(conv3x3(in_c, in_h, in_w, cw[l]), in.data(), params_[wi[l]].value.data(), d_act.data(),
                        l == 0 ? nullptr : d_in.data(), g[wi[l]].data(), g[bi[l]].data());
    d_act = std::move(d_in);
  }
}

template <typename T>
Grads<T> TinyNet<T>::backward(ForwardCache<T>& fc, const HeadOutputs<T>& hg) const {
  if (!fc.valid_) fail(Errc::NoForwardCache, "backward: no forward cache (call forward first)");
  fc.valid_ = false;
  const int P = cfg_.pieces;
  const int S = cfg_.target_grid;
  const int cells = S * S;
  const int C = cfg_.feature_channels();
  const int Q = cfg_.codebook_size;
  const int J1 = cfg_.jigsaw_patch_units, I1 = cfg_.inpaint_patch_channels;
  if (hg.jigsaw.size() != fc.out_.jigsaw.size() || hg.inpaint.size() != fc.out_.inpaint.size() ||
      hg.colorize.size() != fc.out_.colorize.size())
    fail(Errc::ShapeMismatch, "backward: head gradient shapes do not match the outputs");

  Grads<T> g = zero_grads();

  // Jigsaw trunk.
  std::vector<T> d_hidden(cfg_.jigsaw_hidden);
  nn::dense_backward(cfg_.jigsaw_hidden, cfg_.perm_count, fc.jig_hidden_.data(), params_[L_.j3w].value.data(),
                     hg.jigsaw.data(), d_hidden.data(), g[L_.j3w].data(), g[L_.j3b].data());
  nn::relu_backward(std::span<const T>(fc.jig_hidden_), std::span<T>(d_hidden));
  std::vector<T> d_concat(fc.jig_concat_.size());
  nn::dense_backward(P * J1, cfg_.jigsaw_hidden, fc.jig_concat_.data(), params_[L_.j2w].value.data(),
                     d_hidden.data(), d_concat.data(), g[L_.j2w].data(), g[L_.j2b].data());

  // Inpainting trunk.
  std::vector<T> d_inp_logits(static_cast<std::size_t>(Q) * cells);
  nn::to_channel_major(Q, cells, hg.inpaint.data(), d_inp_logits.data());
  std::vector<T> d_inp_hidden(fc.inp_hidden_.size());
  nn::conv2d_backward(pointwise(cfg_.inpaint_hidden, S, Q), fc.inp_hidden_.data(), params_[L_.i2w].value.data(),
                      d_inp_logits.data(), d_inp_hidden.data(), g[L_.i2w].data(), g[L_.i2b].data());
  nn::relu_backward(std::span<const T>(fc.inp_hidden_), std::span<T>(d_inp_hidden));
  std::vector<T> d_arranged(fc.inp_arranged_.size());
  nn::conv2d_backward(pointwise(P * I1, S, cfg_.inpaint_hidden), fc.inp_arranged_.data(),
                      params_[L_.i1w].value.data(), d_inp_hidden.data(), d_arranged.data(), g[L_.i1w].data(),
                      g[L_.i1b].data());

  // Per-slot branches write into slot-local buffers, reduced below in slot order.
  std::vector<int> slot_params{L_.c1w, L_.c1b, L_.c2w, L_.c2b, L_.c3w, L_.c3b, L_.p1w, L_.p1b,
                               L_.p2w, L_.p2b, L_.j1w, L_.j1b, L_.i0w, L_.i0b};
  for (const auto& head : L_.color) slot_params.insert(slot_params.end(), head.begin(), head.end());
  std::vector<Grads<T>> slot_grads(P);
  const std::size_t block = static_cast<std::size_t>(I1) * cells;

  CDJP_PARALLEL_FOR
  for (int i = 0; i < P; ++i) {
    Grads<T>& sg = slot_grads[i];
    sg.resize(params_.size());
    for (int idx : slot_params) sg[idx].assign(params_[idx].value.size(), T{0});
    std::vector<T> d_feat(static_cast<std::size_t>(C) * cells, T{0});

    // Jigsaw per-piece unit.
    std::vector<T> d_unit(d_concat.begin() + i * J1, d_concat.begin() + (i + 1) * J1);
    nn::relu_backward(std::span<const T>(fc.jig_units_[i]), std::span<T>(d_unit));
    std::vector<T> d_pooled(C);
    nn::dense_backward(C, J1, fc.jig_pooled_[i].data(), params_[L_.j1w].value.data(), d_unit.data(), d_pooled.data(),
                       sg[L_.j1w].data(), sg[L_.j1b].data());
    std::vector<T> d_from_pool(d_feat.size());
    nn::global_avg_pool_backward(C, cells, d_pooled.data(), d_from_pool.data());
    add_into(d_feat, d_from_pool);

    // Inpainting per-piece unit; arrangement backward is apply(perm, .).
    std::vector<T> d_inp_unit(d_arranged.begin() + fc.perm_[i] * block, d_arranged.begin() + (fc.perm_[i] + 1) * block);
    nn::relu_backward(std::span<const T>(fc.inp_units_[i]), std::span<T>(d_inp_unit));
    std::vector<T> d_tmp(d_feat.size());
    nn::conv2d_backward(pointwise(C, S, I1), fc.towers_[i].p2.data(), params_[L_.i0w].value.data(), d_inp_unit.data(),
                        d_tmp.data(), sg[L_.i0w].data(), sg[L_.i0b].data());
    add_into(d_feat, d_tmp);

    // Colorization branch.
    const auto head = color_head(i);
    std::vector<T> d_col_logits(static_cast<std::size_t>(Q) * cells);
    nn::to_channel_major(Q, cells, hg.colorize[i].data(), d_col_logits.data());
    std::vector<T> d_col_hidden(fc.col_hidden_[i].size());
    nn::conv2d_backward(pointwise(cfg_.color_hidden, S, Q), fc.col_hidden_[i].data(), params_[head[2]].value.data(),
                        d_col_logits.data(), d_col_hidden.data(), sg[head[2]].data(), sg[head[3]].data());
    nn::relu_backward(std::span<const T>(fc.col_hidden_[i]), std::span<T>(d_col_hidden));
    nn::conv2d_backward(pointwise(C, S, cfg_.color_hidden), fc.towers_[i].p2.data(), params_[head[0]].value.data(),
                        d_col_hidden.data(), d_tmp.data(), sg[head[0]].data(), sg[head[1]].data());
    add_into(d_feat, d_tmp);

    tower_backward(fc.towers_[i], std::move(d_feat), sg);
  }

  for (int i = 0; i < P; ++i)
    for (int idx : slot_params) add_into(g[idx], slot_grads[i][idx]);
  return g;
}

template class TinyNet<float>;
template class TinyNet<double>;

}  // namespace cdjp
