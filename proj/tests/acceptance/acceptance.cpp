// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
// Criteria 7b and 8 share one trained desk network.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdjp/codebook.hpp"
#include "cdjp/colorspace.hpp"
#include "cdjp/evalkit.hpp"
#include "cdjp/hash.hpp"
#include "cdjp/losses.hpp"
#include "cdjp/permutation.hpp"
#include "cdjp/puzzlegen.hpp"
#include "cdjp/rng.hpp"
#include "cdjp/shard.hpp"
#include "cdjp/synthetic.hpp"
#include "cdjp/tinynet.hpp"
#include "cdjp/trainer.hpp"
#include "oracles.hpp"

using namespace cdjp;

namespace {

// ---- pinned tolerances ----
constexpr int kRoundTripMaxErr = 1;
constexpr double kRoundTripSeconds = 5.0;
constexpr std::size_t kQMin = 300, kQMax = 330;
constexpr double kPriorWeightTol = 1e-6;
constexpr double kRemovalRate = 0.40, kRemovalTol = 0.02;
constexpr double kUniformTol = 1e-6;
constexpr double kGrad32 = 1e-4, kGrad64 = 1e-6;
constexpr double kModelGrad = 1e-3;
constexpr double kModelGradSeconds = 120.0;
constexpr double kOverfitRatio = 0.05;
constexpr int kOverfitSteps = 500;
constexpr double kJigsawAcc = 0.125;
constexpr double kTrainCpuSeconds = 15 * 60.0;
constexpr double kSmoothedDrop = 0.30;
constexpr double kProbeGap = 0.05;
constexpr double kSamplesPerSecond = 2000.0;

// ---- run sizes ----
constexpr std::size_t kCorpusImages = 2000;
constexpr std::size_t kTrainImages = 1600;
constexpr std::size_t kTrainSamples = 6000;
constexpr std::size_t kHeldOutSamples = 800;
constexpr std::uint64_t kTrainSteps = 900;
constexpr std::size_t kSmoothWindow = 50;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

int passed = 0, failed = 0;

void report(int id, const char* what, bool ok, const std::string& detail) {
  std::printf("%s %-3s %s: %s\n", ok ? "PASS" : "FAIL", (std::to_string(id)).c_str(), what, detail.c_str());
  std::fflush(stdout);
  (ok ? passed : failed)++;
}

void info(const std::string& line) {
  std::printf("     %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

// Shared world for the data-dependent criteria.
struct World {
  SyntheticCorpus corpus;
  std::vector<LabImage> labs;
  ColorCodebook cb;
  PermutationSet p24;
  GenConfig gen = GenConfig::desk();

  World() {
    corpus = make_synthetic_corpus(kCorpusImages, 11);
    for (const auto& im : corpus.images) labs.push_back(rgb_to_lab(im));
    cb = fit_rebalance(build_codebook(10.0, 4), std::span(labs).subspan(0, 200));
    p24 = greedy_max_hamming_set(9, 24, 3);
  }
  std::span<const LabImage> train_images() const { return std::span(labs).subspan(0, kTrainImages); }
  std::span<const LabImage> held_out_images() const { return std::span(labs).subspan(kTrainImages); }
  NetConfig desk_net() const {
    auto c = NetConfig::desk(static_cast<int>(cb.size()), static_cast<int>(p24.size()));
    c.patch_size = gen.patch_3x3;
    c.target_grid = gen.target_grid;
    return c;
  }
};

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  int worst = 0;
  std::size_t n = 0;
  for (int r = 0; r < 256; r += 17)
    for (int g = 0; g < 256; g += 17)
      for (int b = 0; b < 256; b += 17) {
        double L, A, B;
        srgb_to_lab(r, g, b, L, A, B);
        std::uint8_t r2, g2, b2;
        lab_to_srgb(L, A, B, r2, g2, b2);
        worst = std::max({worst, std::abs(r - r2), std::abs(g - g2), std::abs(b - b2)});
        ++n;
      }
  const double secs = seconds_since(t0);
  report(1, "color round-trip", worst <= kRoundTripMaxErr && secs < kRoundTripSeconds,
         fmt("%zu colors, max channel error %d (<= %d), %.3f s (< %.0f s)", n, worst, kRoundTripMaxErr, secs,
             kRoundTripSeconds));
}

void criterion2(const World& w) {
  const auto cb = build_codebook(10.0, 4);
  const auto cells = oracle::gamut_cells(10.0, 4);
  std::size_t outside = 0;
  for (const auto& c : cb.bins) {
    const int i = static_cast<int>(std::floor((c[0] + 110.0) / 10.0));
    const int j = static_cast<int>(std::floor((c[1] + 110.0) / 10.0));
    if (!cells.count({i, j})) ++outside;
  }
  double sum = 0;
  for (std::size_t q = 0; q < w.cb.size(); ++q) sum += w.cb.prior[q] * w.cb.weights[q];
  const bool q_ok = cb.size() >= kQMin && cb.size() <= kQMax;
  const bool ok = q_ok && outside == 0 && std::abs(sum - 1.0) <= kPriorWeightTol;
  report(2, "codebook", ok,
         fmt("Q=%zu (want [%zu, %zu]), %zu bins outside the oracle gamut, sum prior*weights=%.12f after fitting on "
             "200 images",
             cb.size(), kQMin, kQMax, outside, sum));
  if (!q_ok) {
    const auto dense = oracle::gamut_cells(10.0, 1);
    info(fmt("every 8-bit sRGB color (stride 1) reaches %zu cells; the step-10 grid cannot reach 300", dense.size()));
  }
}

void criterion3() {
  const auto greedy = greedy_max_hamming_set(9, 1000, 1);
  const int g = min_pairwise_hamming(greedy);
  int best_random = 0;
  for (std::uint64_t s = 0; s < 10; ++s)
    best_random = std::max(best_random, min_pairwise_hamming(random_subset(9, 1000, 100 + s)));
  const auto full = full_set(4);
  std::set<Permutation> distinct(full.perms().begin(), full.perms().end());
  report(3, "permutations", g >= best_random && full.size() == 24 && distinct.size() == 24,
         fmt("greedy min Hamming %d vs best of 10 random %d; full 2x2 set has %zu (%zu distinct)", g, best_random,
             full.size(), distinct.size()));
}

void criterion4(const World& w) {
  const auto imgs = std::span(w.labs).subspan(0, 64);
  const auto p4 = full_set(4);
  const auto removed = generate_batch(imgs, TaskMode::jigsaw2_piece_removed, p4, w.cb, w.gen, 5, 0, 10000);
  const auto n_removed = std::count_if(removed.begin(), removed.end(), [](const auto& s) { return s.missing_index; });
  const double rate = static_cast<double>(n_removed) / removed.size();

  // A slot counts as missing when its L differs from the undamaged crop.
  const std::size_t n3 = 2000;
  const auto c3 = generate_batch(imgs, TaskMode::cdjp3, w.p24, w.cb, w.gen, 6, 0, n3);
  std::size_t exactly_one = 0;
  for (std::size_t i = 0; i < n3; ++i) {
    const auto& s = c3[i];
    const auto original = extract_patches(imgs[i % imgs.size()], w.gen, 3, derive_seed(s.rng_seed, 0));
    const auto& perm = w.p24[s.perm_id];
    int differing = 0, at = -1;
    for (int slot = 0; slot < 9; ++slot)
      if (s.patches[slot].l != original[perm[slot]].l) ++differing, at = slot;
    if (differing == 1 && s.missing_index && *s.missing_index == at) ++exactly_one;
  }

  ShardHeader h;
  h.mode = TaskMode::cdjp3;
  h.grid = 3;
  h.target_grid = static_cast<std::uint8_t>(w.gen.target_grid);
  h.codebook_size = static_cast<std::uint32_t>(w.cb.size());
  h.count = 500;
  const auto dir = std::filesystem::temp_directory_path() / "cdjp_acceptance";
  std::filesystem::create_directories(dir);
  const auto a = generate_batch(imgs, TaskMode::cdjp3, w.p24, w.cb, w.gen, 9, 0, 500);
  const auto b = generate_batch_serial(imgs, TaskMode::cdjp3, w.p24, w.cb, w.gen, 9, 0, 500);
  write_shard((dir / "a.bin").string(), h, a);
  write_shard((dir / "b.bin").string(), h, b);
  const bool identical = read_file((dir / "a.bin").string()) == read_file((dir / "b.bin").string());
  std::filesystem::remove_all(dir);

  const bool ok = std::abs(rate - kRemovalRate) <= kRemovalTol && exactly_one == n3 && identical;
  report(4, "generator statistics", ok,
         fmt("removal rate %.4f over %zu (want %.2f +/- %.2f); %zu/%zu cdjp3 samples with exactly one missing patch; "
             "replayed shards %s",
             rate, removed.size(), kRemovalRate, kRemovalTol, exactly_one, n3, identical ? "byte-identical" : "differ"));
}

void criterion5(const World& w) {
  const auto& cb = w.cb;
  const std::size_t Q = cb.size();
  const int S = w.gen.target_grid, K = 24;
  Rng rng(41);
  auto rand_vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-2, 2);
    return v;
  };
  auto rand_targets = [&](std::size_t cells) {
    std::vector<SoftLabel> t;
    for (std::size_t i = 0; i < cells; ++i) t.push_back(cb.encode(rng.uniform(-50, 50), rng.uniform(-50, 50)));
    return t;
  };

  // Uniform logits.
  auto unit = cb;
  std::fill(unit.weights.begin(), unit.weights.end(), 1.0);
  EncodeOptions hard;
  hard.mode = EncodeMode::hard;
  std::vector<SoftLabel> hard_t;
  for (int i = 0; i < S * S; ++i) hard_t.push_back(cb.encode(rng.uniform(-50, 50), rng.uniform(-50, 50), hard));
  const double u_jig = std::abs(jigsaw_loss<double>(std::vector<double>(K, 0.3), 7).value - std::log(K));
  const double u_col =
      std::abs(rebalanced_color_loss<double>(std::vector<double>(S * S * Q, -0.4), hard_t, unit).value -
               S * S * std::log(static_cast<double>(Q)));

  // Gradients against central differences (64-bit oracle for both widths).
  double e64 = 0, e32 = 0;
  auto check = [&](const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x,
                   const std::vector<double>& g64, const std::vector<double>& g32, double h) {
    e64 = std::max(e64, oracle::relative_error(g64, oracle::numeric_gradient(f, x, h)));
    std::vector<double> xf(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xf[i] = static_cast<float>(x[i]);
    e32 = std::max(e32, oracle::relative_error(g32, oracle::numeric_gradient(f, xf, h)));
  };
  auto to_f = [](const std::vector<double>& v) { return std::vector<float>(v.begin(), v.end()); };
  auto rounded = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = static_cast<float>(v[i]);
    return r;
  };
  {
    const auto z = rand_vec(K);
    check([](const auto& x) { return jigsaw_loss<double>(x, 3).value; }, z, jigsaw_loss<double>(z, 3).grad,
          widen(jigsaw_loss<float>(to_f(z), 3).grad), 1e-5);
  }
  {
    const auto p = rand_vec(200), t = rounded(rand_vec(200));
    check([&](const auto& x) { return inpaint_l2_loss<double>(x, t).value; }, p, inpaint_l2_loss<double>(p, t).grad,
          widen(inpaint_l2_loss<float>(to_f(p), to_f(t)).grad), 1e-4);
  }
  {
    const auto t = rand_targets(4);
    const auto z = rand_vec(4 * Q);
    check([&](const auto& x) { return rebalanced_color_loss<double>(x, t, cb).value; }, z,
          rebalanced_color_loss<double>(z, t, cb).grad, widen(rebalanced_color_loss<float>(to_f(z), t, cb).grad),
          1e-5);
  }

  // Full combination on one puzzle: every head's gradient and the weighted sum.
  const int cells = 2;
  std::vector<std::vector<SoftLabel>> col_t;
  for (int i = 0; i < 9; ++i) col_t.push_back(rand_targets(cells));
  const auto inp_t = rand_targets(cells);
  HeadTargets ht;
  ht.perm_id = 5;
  ht.inpaint = inp_t;
  for (const auto& c : col_t) ht.colorize.emplace_back(c);
  ht.colorize_mask.assign(9, 1);
  ht.colorize_mask[4] = 0;
  const std::size_t flat_n = K + cells * Q * 10;
  const auto flat = rand_vec(flat_n);
  auto unflatten = [&]<typename T>(const std::vector<double>& v, T) {
    HeadOutputs<T> h;
    std::size_t o = 0;
    for (int i = 0; i < K; ++i) h.jigsaw.push_back(static_cast<T>(v[o++]));
    for (std::size_t i = 0; i < cells * Q; ++i) h.inpaint.push_back(static_cast<T>(v[o++]));
    h.colorize.resize(9);
    for (auto& c : h.colorize)
      for (std::size_t i = 0; i < cells * Q; ++i) c.push_back(static_cast<T>(v[o++]));
    return h;
  };
  auto flatten = []<typename T>(const HeadOutputs<T>& h) {
    std::vector<double> v(h.jigsaw.begin(), h.jigsaw.end());
    v.insert(v.end(), h.inpaint.begin(), h.inpaint.end());
    for (const auto& c : h.colorize) v.insert(v.end(), c.begin(), c.end());
    return v;
  };
  const LossWeights lw;
  const auto b64 = combined_loss<double>(unflatten(flat, 0.0), ht, cb, lw);
  const auto b32 = combined_loss<float>(unflatten(flat, 0.0f), ht, cb, lw);
  check([&](const auto& x) { return combined_loss<double>(unflatten(x, 0.0), ht, cb, lw).l_final; }, flat,
        flatten(b64.grads), flatten(b32.grads), 1e-5);

  const bool composed = lw.alpha == 0.01 && lw.beta == 0.01 && b64.alpha == 0.01 && b64.beta == 0.01 &&
                        b64.l_final == b64.l_jig + 0.01 * b64.l_inp_cls + 0.01 * b64.l_col;

  const bool ok = u_jig <= kUniformTol && u_col <= kUniformTol && e64 < kGrad64 && e32 < kGrad32 && composed;
  report(5, "loss correctness", ok,
         fmt("|uniform - ln %d|=%.1e, |uniform - %d*ln %zu|=%.1e; worst grad rel. err 64-bit %.2e (< %.0e), 32-bit "
             "%.2e (< %.0e); composition with alpha=beta=0.01 %s",
             K, u_jig, S * S, Q, u_col, e64, kGrad64, e32, kGrad32, composed ? "exact" : "inexact"));
}

void criterion6(const World& w) {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = NetConfig::micro(static_cast<int>(w.cb.size()), static_cast<int>(w.p24.size()));
  cfg.patch_size = w.gen.patch_3x3;
  cfg.target_grid = w.gen.target_grid;
  TinyNet<float> net32(cfg);
  // Zero-initialized biases leave many units exactly at the ReLU kink; move to
  // a generic point first.
  Rng jitter(31);
  for (auto& p : net32.params())
    if (p.name.size() > 2 && p.name.compare(p.name.size() - 2, 2, ".b") == 0)
      for (auto& v : p.value) v = static_cast<float>(jitter.uniform(-0.05, 0.05));
  auto net64 = net32.cast<double>();

  const auto samples = generate_batch(w.train_images(), TaskMode::cdjp3, w.p24, w.cb, w.gen, 21, 0, 4);
  double worst32 = 0, worst64 = 0;
  std::size_t checked = 0;
  for (const auto& s : samples) {
    const auto targets = make_targets(s, w.p24);
    auto fc32 = net32.forward(make_input<float>(s, w.p24, cfg));
    const auto g32 = net32.backward(fc32, combined_loss<float>(fc32.outputs(), targets, w.cb).grads);
    const auto input = make_input<double>(s, w.p24, cfg);
    auto fc64 = net64.forward(input);
    const auto g64 = net64.backward(fc64, combined_loss<double>(fc64.outputs(), targets, w.cb).grads);

    Rng rng(s.rng_seed);
    std::vector<double> a32, a64, num;
    for (int t = 0; t < 50; ++t, ++checked) {
      const auto p = rng.uniform_int(net64.params().size());
      const auto i = rng.uniform_int(net64.params()[p].value.size());
      auto& v = net64.params()[p].value[i];
      const double keep = v, h = 1e-7;
      v = keep + h;
      const double up = combined_loss<double>(net64.forward(input).outputs(), targets, w.cb).l_final;
      v = keep - h;
      const double down = combined_loss<double>(net64.forward(input).outputs(), targets, w.cb).l_final;
      v = keep;
      num.push_back((up - down) / (2 * h));
      a64.push_back(g64[p][i]);
      a32.push_back(g32[p][i]);
    }
    worst32 = std::max(worst32, oracle::relative_error(a32, num));
    worst64 = std::max(worst64, oracle::relative_error(a64, num));
  }
  const double secs = seconds_since(t0);
  report(6, "full-model gradient check",
         worst32 < kModelGrad && worst64 < kModelGrad && checked == 200 && secs < kModelGradSeconds,
         fmt("micro net (%zu params), %zu sampled parameters, rel. err 32-bit %.2e, 64-bit %.2e (< %.0e), %.1f s "
             "(< %.0f s)",
             net64.parameter_count(), checked, worst32, worst64, kModelGrad, secs, kModelGradSeconds));
}

// Lowest reachable l_final for a sample: every head outputs its target exactly.
double loss_floor(const PuzzleSample& s, const World& w, const NetConfig& cfg) {
  TinyNet<double> net(cfg);
  auto h = net.forward(make_input<double>(s, w.p24, cfg)).outputs();
  const auto t = make_targets(s, w.p24);
  const std::size_t Q = w.cb.size();
  auto fill = [&](std::vector<double>& z, std::span<const SoftLabel> tg) {
    std::fill(z.begin(), z.end(), -80.0);
    for (std::size_t c = 0; c < tg.size(); ++c)
      for (int i = 0; i < tg[c].k; ++i)
        if (tg[c].values[i] > 0) z[c * Q + tg[c].indices[i]] = std::log(tg[c].values[i]);
  };
  std::fill(h.jigsaw.begin(), h.jigsaw.end(), 0.0);
  h.jigsaw[t.perm_id] = 80.0;
  fill(h.inpaint, t.inpaint);
  for (std::size_t j = 0; j < h.colorize.size(); ++j)
    if (!t.colorize[j].empty()) fill(h.colorize[j], t.colorize[j]);
  return combined_loss<double>(h, t, w.cb).l_final;
}

struct OverfitRun {
  double first = 0, best = 0;
};

OverfitRun overfit(const World& w, const PuzzleSample& s) {
  TrainConfig tc;
  tc.batch_size = 1;
  Trainer t(w.desk_net(), tc);
  OverfitRun r;
  const std::vector<PuzzleSample> one{s};
  train_on_samples(t, one, w.p24, w.cb, kOverfitSteps, [&](const StepMetrics& m) {
    if (m.step == 0) r.first = r.best = m.l_final;
    r.best = std::min(r.best, m.l_final);
  });
  return r;
}

void criterion7a(const World& w) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = generate_batch(w.train_images(), TaskMode::cdjp3, w.p24, w.cb, w.gen, 31, 0, 1)[0];
  const auto r = overfit(w, s);
  const double floor = loss_floor(s, w, w.desk_net());
  report(7, "(a) single-sample overfit", r.best < kOverfitRatio * r.first,
         fmt("l_final %.4f -> %.4f in %d steps, ratio %.3f (want < %.2f), %.0f s", r.first, r.best, kOverfitSteps,
             r.best / r.first, kOverfitRatio, seconds_since(t0)));
  info(fmt("soft-target floor for this sample is %.4f = %.3f of initial; excess above floor fell to %.3f of initial "
           "excess",
           floor, floor / r.first, (r.best - floor) / (r.first - floor)));
  auto hard_cfg = w.gen;
  hard_cfg.encode.mode = EncodeMode::hard;
  const auto sh = generate_batch(w.train_images(), TaskMode::cdjp3, w.p24, w.cb, hard_cfg, 31, 0, 1)[0];
  const auto rh = overfit(w, sh);
  info(fmt("same sample with hard targets (floor 0): %.4f -> %.4f, ratio %.3f", rh.first, rh.best, rh.best / rh.first));
}

struct Trained {
  std::optional<Trainer> trainer;
};

void criterion7b(const World& w, Trained& out) {
  const auto train = generate_batch(w.train_images(), TaskMode::cdjp3, w.p24, w.cb, w.gen, 1, 0, kTrainSamples);
  const auto held = generate_batch(w.held_out_images(), TaskMode::cdjp3, w.p24, w.cb, w.gen, 2, 0, kHeldOutSamples);
  TrainConfig tc;
  out.trainer.emplace(w.desk_net(), tc);
  auto& t = *out.trainer;

  const double cpu0 = cpu_seconds();
  const double acc0 = jigsaw_accuracy(t.net(), held, w.p24);
  std::vector<double> lf;
  train_on_samples(t, train, w.p24, w.cb, kTrainSteps, [&](const StepMetrics& m) {
    lf.push_back(m.l_final);
    if (m.step % 100 == 0) info(fmt("step %4llu  l_final %.4f  batch jigsaw acc %.3f  cpu %.0f s", (unsigned long long)m.step, m.l_final, m.jigsaw_acc, cpu_seconds() - cpu0));
  });
  const double acc = jigsaw_accuracy(t.net(), held, w.p24);
  const double cpu = cpu_seconds() - cpu0;

  auto mean = [&](std::size_t a, std::size_t b) { return std::accumulate(lf.begin() + a, lf.begin() + b, 0.0) / (b - a); };
  const double at100 = mean(100 - kSmoothWindow / 2, 100 + kSmoothWindow / 2);
  const double at_end = mean(lf.size() - kSmoothWindow, lf.size());
  const double drop = 1.0 - at_end / at100;
  report(7, "(b) trainability on the synthetic corpus", acc >= kJigsawAcc && cpu <= kTrainCpuSeconds && drop >= kSmoothedDrop,
         fmt("held-out jigsaw top-1 %.3f -> %.3f over %zu permutations (want >= %.3f); %llu steps in %.0f CPU-s (<= "
             "%.0f); smoothed l_final %.3f at step 100 -> %.3f at end, drop %.1f%% (want >= %.0f%%)",
             acc0, acc, w.p24.size(), kJigsawAcc, (unsigned long long)kTrainSteps, cpu, kTrainCpuSeconds, at100,
             at_end, 100 * drop, 100 * kSmoothedDrop));
}

void criterion8(const World& w, const Trained& tr) {
  const auto& net = tr.trainer->net();

  // Exact retrieval on 200 trained feature rows.
  const auto sub = std::span(w.labs).subspan(0, 200);
  bool exact = true, self_zero = true;
  for (auto metric : {Metric::cosine, Metric::l2}) {
    const auto idx = extract_features(net, sub, TowerLayer::point2, metric);
    std::vector<std::vector<float>> rows;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto r = idx.row(i);
      rows.emplace_back(r.begin(), r.end());
    }
    for (std::size_t q = 0; q < idx.size(); ++q) {
      const auto ref = oracle::brute_knn(rows, idx.ids(), metric == Metric::cosine, q, 10);
      const auto got = knn(idx, idx.ids()[q], 10);
      if (got.size() != ref.size()) exact = false;
      for (std::size_t i = 0; exact && i < ref.size(); ++i)
        exact = got[i].id == ref[i].id && got[i].distance == ref[i].distance;
      self_zero = self_zero && idx.distance(q, q) == 0.0;
    }
  }

  // Trained tower against its own initialization, same split and probe seed.
  const TinyNet<float> init(w.desk_net());
  std::vector<std::size_t> train, test;
  split_indices(w.labs.size(), 0.3, 5, train, test);
  double best_trained = 0, best_random = 0;
  for (int l = 0; l < kTowerLayers; ++l) {
    const auto layer = static_cast<TowerLayer>(l);
    const auto pt = linear_probe(extract_features(net, w.labs, layer), w.corpus.labels, train, test);
    const auto pr = linear_probe(extract_features(init, w.labs, layer), w.corpus.labels, train, test);
    info(fmt("probe %-6s trained %.3f  random-init %.3f", to_string(layer), pt.accuracy, pr.accuracy));
    best_trained = std::max(best_trained, pt.accuracy);
    best_random = std::max(best_random, pr.accuracy);
  }
  const double gap = best_trained - best_random;
  report(8, "evaluation kit", exact && self_zero && gap >= kProbeGap,
         fmt("knn %s the brute-force oracle on 200 items; self distance %s; best-layer probe trained %.3f vs "
             "random-init %.3f, gap %.1f points (want >= %.0f)",
             exact ? "matches" : "differs from", self_zero ? "0" : "nonzero", best_trained, best_random, 100 * gap,
             100 * kProbeGap));
}

void criterion9(const World& w) {
  const std::size_t n = 8000;
  generate_batch(w.train_images(), TaskMode::cdjp3, w.p24, w.cb, w.gen, 3, 0, 256);  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = generate_batch(w.train_images(), TaskMode::cdjp3, w.p24, w.cb, w.gen, 4, 0, n);
  const double rate = out.size() / seconds_since(t0);
  report(9, "generation throughput", rate >= kSamplesPerSecond,
         fmt("%.0f desk cdjp3 samples/s with %d thread(s) on %d available core(s) (want >= %.0f on 8 cores)", rate,
             omp_get_max_threads(), omp_get_num_procs(), kSamplesPerSecond));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (7 and 8 train the shared network)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  auto want = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  const auto t0 = std::chrono::steady_clock::now();
  if (want(1)) criterion1();
  if (want(2) || want(4) || want(5) || want(6) || want(7) || want(8) || want(9)) {
    const World w;
    if (want(2)) criterion2(w);
    if (want(3)) criterion3();
    if (want(4)) criterion4(w);
    if (want(5)) criterion5(w);
    if (want(6)) criterion6(w);
    Trained tr;
    if (want(7)) criterion7a(w);
    if (want(7) || want(8)) criterion7b(w, tr);
    if (want(8)) criterion8(w, tr);
    if (want(9)) criterion9(w);
  } else if (want(3)) {
    criterion3();
  }
  std::printf("%d passed, %d failed, %.0f s\n", passed, failed, seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
