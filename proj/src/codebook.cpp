#include "cdjp/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "cdjp/error.hpp"
#include "cdjp/hash.hpp"
#include "cdjp/parallel.hpp"

namespace cdjp {
namespace {

int cell_of(double v, double step) { return static_cast<int>(std::floor((v - ColorCodebook::kRangeMin) / step)); }

}  // namespace

std::uint32_t SoftLabel::argmax() const {
  int best = 0;
  for (int i = 1; i < k; ++i)
    if (values[i] > values[best]) best = i;
  return indices[best];
}

void ColorCodebook::rebuild_lookup() {
  cells_per_axis_ = static_cast<int>(std::ceil((kRangeMax - kRangeMin) / grid_step));
  lookup_.assign(static_cast<std::size_t>(cells_per_axis_) * cells_per_axis_, -1);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const int ca = cell_of(bins[i][0], grid_step);
    const int cb = cell_of(bins[i][1], grid_step);
    if (ca >= 0 && cb >= 0 && ca < cells_per_axis_ && cb < cells_per_axis_)
      lookup_[static_cast<std::size_t>(ca) * cells_per_axis_ + cb] = static_cast<std::int32_t>(i);
  }
}

std::uint32_t ColorCodebook::nearest_brute(double a, double b) const {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double da = a - bins[i][0], db = b - bins[i][1];
    const double d = da * da + db * db;
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(i);
    }
  }
  return best;
}

std::uint32_t ColorCodebook::nearest(double a, double b) const {
  const int ca = cell_of(a, grid_step), cb = cell_of(b, grid_step);
  if (ca >= 0 && cb >= 0 && ca < cells_per_axis_ && cb < cells_per_axis_) {
    const auto hit = lookup_[static_cast<std::size_t>(ca) * cells_per_axis_ + cb];
    if (hit >= 0) return static_cast<std::uint32_t>(hit);
  }
  return nearest_brute(a, b);
}

SoftLabel ColorCodebook::encode(double a, double b, const EncodeOptions& opts) const {
  SoftLabel out;
  if (opts.mode == EncodeMode::hard || opts.k <= 1) {
    out.k = 1;
    out.indices[0] = nearest(a, b);
    out.values[0] = 1.0f;
    return out;
  }
  const int k = std::min<int>({opts.k, SoftLabel::kMaxK, static_cast<int>(bins.size())});
  // Keep the k best (distance, index) pairs with an insertion list.
  std::array<std::pair<double, std::uint32_t>, SoftLabel::kMaxK> best;
  int filled = 0;
  for (std::uint32_t i = 0; i < bins.size(); ++i) {
    const double da = a - bins[i][0], db = b - bins[i][1];
    const std::pair<double, std::uint32_t> cand{da * da + db * db, i};
    if (filled == k && !(cand < best[k - 1])) continue;
    int pos = filled < k ? filled++ : k - 1;
    while (pos > 0 && cand < best[pos - 1]) {
      best[pos] = best[pos - 1];
      --pos;
    }
    best[pos] = cand;
  }
  const double inv = 1.0 / (2.0 * opts.sigma * opts.sigma);
  // Shift by the smallest distance so the largest kernel value is exactly 1.
  double w[SoftLabel::kMaxK];
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    w[i] = std::exp(-(best[i].first - best[0].first) * inv);
    total += w[i];
  }
  out.k = static_cast<std::uint8_t>(k);
  for (int i = 0; i < k; ++i) {
    out.indices[i] = best[i].second;
    out.values[i] = static_cast<float>(w[i] / total);
  }
  return out;
}

SoftLabel encode_ab(const ColorCodebook& cb, double a, double b, const EncodeOptions& opts) {
  return cb.encode(a, b, opts);
}

ColorCodebook build_codebook(double grid_step, int gamut_stride) {
  if (!(grid_step > 0.0) || gamut_stride < 1)
    fail(Errc::InvalidArgument, "build_codebook: grid_step must be > 0 and gamut_stride >= 1");
  const int cells = static_cast<int>(std::ceil((ColorCodebook::kRangeMax - ColorCodebook::kRangeMin) / grid_step));
  std::vector<std::uint8_t> occupied(static_cast<std::size_t>(cells) * cells, 0);

  std::vector<int> levels;
  for (int v = 0; v < 256; v += gamut_stride) levels.push_back(v);
  const auto n = static_cast<std::ptrdiff_t>(levels.size());

  // Each red level marks into its own slab; slabs are OR-reduced afterwards.
  std::vector<std::vector<std::uint8_t>> slabs(levels.size());
  CDJP_PARALLEL_FOR
  for (std::ptrdiff_t ri = 0; ri < n; ++ri) {
    auto& slab = slabs[ri];
    slab.assign(occupied.size(), 0);
    for (int g : levels) {
      for (int b : levels) {
        double L, A, B;
        srgb_to_lab(static_cast<std::uint8_t>(levels[ri]), static_cast<std::uint8_t>(g),
                    static_cast<std::uint8_t>(b), L, A, B);
        const int ca = cell_of(A, grid_step), cb = cell_of(B, grid_step);
        if (ca < 0 || cb < 0 || ca >= cells || cb >= cells) continue;
        slab[static_cast<std::size_t>(ca) * cells + cb] = 1;
      }
    }
  }
  for (const auto& slab : slabs)
    for (std::size_t i = 0; i < occupied.size(); ++i) occupied[i] |= slab[i];

  ColorCodebook cb;
  cb.grid_step = grid_step;
  cb.gamut_stride = gamut_stride;
  for (int ca = 0; ca < cells; ++ca)
    for (int cbi = 0; cbi < cells; ++cbi)
      if (occupied[static_cast<std::size_t>(ca) * cells + cbi])
        cb.bins.push_back({ColorCodebook::kRangeMin + (ca + 0.5) * grid_step,
                           ColorCodebook::kRangeMin + (cbi + 0.5) * grid_step});
  const double q = static_cast<double>(cb.bins.size());
  cb.prior.assign(cb.bins.size(), 1.0 / q);
  cb.weights.assign(cb.bins.size(), 1.0);
  cb.rebuild_lookup();
  return cb;
}

std::vector<double> rebalance_weights(std::span<const double> prior, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) fail(Errc::InvalidArgument, "rebalance: lambda outside [0,1]");
  const double q = static_cast<double>(prior.size());
  std::vector<double> w(prior.size());
  double max_finite = 0.0;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const double mix = (1.0 - lambda) * prior[i] + lambda / q;
    w[i] = mix > 0.0 ? 1.0 / mix : 0.0;
    max_finite = std::max(max_finite, w[i]);
  }
  double norm = 0.0;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    if (w[i] == 0.0) w[i] = max_finite;
    norm += prior[i] * w[i];
  }
  for (auto& x : w) x /= norm;
  return w;
}

ColorCodebook fit_rebalance(const ColorCodebook& cb, std::span<const LabImage> corpus, double lambda,
                            double smooth_sigma) {
  if (corpus.empty()) fail(Errc::EmptyCorpus, "fit_rebalance: corpus is empty");
  if (lambda < 0.0 || lambda > 1.0) fail(Errc::InvalidArgument, "fit_rebalance: lambda outside [0,1]");
  const std::size_t q = cb.size();
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());

  struct Partial {
    std::vector<std::uint64_t> hist;
    double l_sum = 0.0, l_sq = 0.0;
    std::uint64_t pixels = 0;
  };
  std::vector<Partial> parts(corpus.size());
  CDJP_PARALLEL_FOR
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const LabImage& img = corpus[i];
    Partial& p = parts[i];
    p.hist.assign(q, 0);
    if (!img.has_ab) continue;
    for (std::size_t px = 0; px < img.pixel_count(); ++px) {
      ++p.hist[cb.nearest(img.a[px], img.b[px])];
      const double ln = img.l[px] / 50.0 - 1.0;
      p.l_sum += ln;
      p.l_sq += ln * ln;
    }
    p.pixels = img.pixel_count();
  }

  std::vector<double> hist(q, 0.0);
  double l_sum = 0.0, l_sq = 0.0;
  std::uint64_t pixels = 0;
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < q; ++j) hist[j] += static_cast<double>(p.hist[j]);
    l_sum += p.l_sum;
    l_sq += p.l_sq;
    pixels += p.pixels;
  }
  if (pixels == 0) fail(Errc::EmptyCorpus, "fit_rebalance: corpus has no colored pixels");

  std::vector<double> prior(q, 0.0);
  if (smooth_sigma > 0.0) {
    const double inv = 1.0 / (2.0 * smooth_sigma * smooth_sigma);
    const auto qn = static_cast<std::ptrdiff_t>(q);
    CDJP_PARALLEL_FOR
    for (std::ptrdiff_t i = 0; i < qn; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < q; ++j) {
        if (hist[j] == 0.0) continue;
        const double da = cb.bins[i][0] - cb.bins[j][0], db = cb.bins[i][1] - cb.bins[j][1];
        acc += hist[j] * std::exp(-(da * da + db * db) * inv);
      }
      prior[i] = acc;
    }
  } else {
    prior = hist;
  }
  const double total = std::accumulate(prior.begin(), prior.end(), 0.0);
  for (auto& p : prior) p /= total;

  ColorCodebook out = cb;
  out.prior = prior;
  out.weights = rebalance_weights(prior, lambda);
  out.lambda = lambda;
  out.smooth_sigma = smooth_sigma;
  const double mean = l_sum / static_cast<double>(pixels);
  out.l_mean = mean;
  out.l_std = std::sqrt(std::max(0.0, l_sq / static_cast<double>(pixels) - mean * mean));
  out.fitted = true;
  return out;
}

std::string ColorCodebook::to_json() const {
  nlohmann::json j;
  j["grid_step"] = grid_step;
  auto bins_json = nlohmann::json::array();
  for (const auto& b : bins) bins_json.push_back({b[0], b[1]});
  j["bins"] = std::move(bins_json);
  j["prior"] = prior;
  j["weights"] = weights;
  j["meta"] = {{"stride", gamut_stride}, {"lambda", lambda}, {"sigma", smooth_sigma},
               {"l_mean", l_mean},       {"l_std", l_std},   {"fitted", fitted}};
  return j.dump();
}

ColorCodebook ColorCodebook::from_json(const std::string& text) {
  ColorCodebook cb;
  try {
    const auto j = nlohmann::json::parse(text);
    cb.grid_step = j.at("grid_step").get<double>();
    for (const auto& b : j.at("bins")) cb.bins.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
    cb.prior = j.at("prior").get<std::vector<double>>();
    cb.weights = j.at("weights").get<std::vector<double>>();
    const auto& meta = j.at("meta");
    cb.gamut_stride = meta.at("stride").get<int>();
    cb.lambda = meta.at("lambda").get<double>();
    cb.smooth_sigma = meta.at("sigma").get<double>();
    cb.l_mean = meta.value("l_mean", 0.0);
    cb.l_std = meta.value("l_std", 1.0);
    cb.fitted = meta.value("fitted", false);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Format, std::string("codebook JSON: ") + e.what());
  }
  if (cb.bins.empty() || cb.prior.size() != cb.bins.size() || cb.weights.size() != cb.bins.size())
    fail(Errc::Format, "codebook JSON: bins/prior/weights length mismatch");
  cb.rebuild_lookup();
  return cb;
}

void ColorCodebook::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out << to_json() << '\n';
  if (!out) fail(Errc::Io, "write failed: " + path);
}

ColorCodebook ColorCodebook::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::uint64_t ColorCodebook::hash() const { return fnv1a(to_json()); }

}  // namespace cdjp
