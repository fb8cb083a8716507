#include "cdjp/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cdjp/adam.hpp"
#include "cdjp/error.hpp"
#include "cdjp/parallel.hpp"
#include "cdjp/rng.hpp"
#include "json.hpp"

namespace cdjp {

const char* to_string(Metric m) { return m == Metric::cosine ? "cosine" : "l2"; }

Metric metric_from_string(const std::string& name) {
  if (name == "cosine") return Metric::cosine;
  if (name == "l2") return Metric::l2;
  fail(Errc::InvalidArgument, "unknown metric: " + name);
}

FeatureIndex::FeatureIndex(std::vector<std::string> ids, std::vector<float> rows, int dims, Metric metric,
                           std::string source_hash)
    : ids_(std::move(ids)), rows_(std::move(rows)), dims_(dims), metric_(metric), source_hash_(std::move(source_hash)) {
  if (dims_ <= 0) fail(Errc::ShapeMismatch, "FeatureIndex: dims must be positive");
  if (rows_.size() != ids_.size() * static_cast<std::size_t>(dims_))
    fail(Errc::ShapeMismatch, "FeatureIndex: row data does not match ids x dims");
  for (float v : rows_)
    if (!std::isfinite(v)) fail(Errc::NonFiniteActivation, "FeatureIndex: non-finite feature");
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!lookup_.emplace(ids_[i], i).second) fail(Errc::InvalidArgument, "FeatureIndex: duplicate id " + ids_[i]);
  if (metric_ == Metric::cosine) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      float* r = rows_.data() + i * dims_;
      double n2 = 0;
      for (int d = 0; d < dims_; ++d) n2 += static_cast<double>(r[d]) * r[d];
      // A dead (all-zero) row has no direction; give it the uniform one.
      if (n2 == 0.0) {
        std::fill(r, r + dims_, static_cast<float>(1.0 / std::sqrt(static_cast<double>(dims_))));
        continue;
      }
      const double inv = 1.0 / std::sqrt(n2);
      for (int d = 0; d < dims_; ++d) r[d] = static_cast<float>(r[d] * inv);
    }
  }
}

std::size_t FeatureIndex::position(const std::string& id) const {
  const auto it = lookup_.find(id);
  if (it == lookup_.end()) fail(Errc::UnknownId, "FeatureIndex: unknown id " + id);
  return it->second;
}

double FeatureIndex::distance(std::size_t i, std::size_t j) const {
  const float* x = rows_.data() + i * dims_;
  const float* y = rows_.data() + j * dims_;
  double s = 0;
  for (int d = 0; d < dims_; ++d) {
    const double diff = static_cast<double>(x[d]) - y[d];
    s += diff * diff;
  }
  return metric_ == Metric::cosine ? 0.5 * s : std::sqrt(s);
}

namespace {

constexpr char kIndexMagic[8] = {'C', 'D', 'J', 'P', 'F', 'I', 'D', 'X'};

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& in) {
  V v;
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) fail(Errc::Format, "feature index: truncated");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) fail(Errc::Format, "feature index: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) fail(Errc::Format, "feature index: truncated");
  return s;
}

}  // namespace

void FeatureIndex::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out.write(kIndexMagic, 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims_));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(metric_));
  put_string(out, source_hash_);
  put<std::uint64_t>(out, ids_.size());
  for (const auto& id : ids_) put_string(out, id);
  out.write(reinterpret_cast<const char*>(rows_.data()), static_cast<std::streamsize>(rows_.size() * sizeof(float)));
  if (!out) fail(Errc::Io, "write failed: " + path);
}

FeatureIndex FeatureIndex::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kIndexMagic, 8) != 0) fail(Errc::Format, "feature index: bad magic");
  const auto dims = static_cast<int>(get<std::uint32_t>(in));
  const auto metric = get<std::uint8_t>(in);
  if (metric > 1) fail(Errc::Format, "feature index: bad metric");
  auto hash = get_string(in);
  const auto n = get<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 28) || dims <= 0 || dims > (1 << 20)) fail(Errc::Format, "feature index: bad header");
  std::vector<std::string> ids(n);
  for (auto& id : ids) id = get_string(in);
  std::vector<float> rows(n * static_cast<std::size_t>(dims));
  in.read(reinterpret_cast<char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(float)));
  if (!in) fail(Errc::Format, "feature index: truncated");
  // Stored rows are already normalized; renormalizing is idempotent up to rounding,
  // so bypass it by constructing as l2 and restoring the metric.
  FeatureIndex idx(std::move(ids), std::move(rows), dims, Metric::l2, std::move(hash));
  idx.metric_ = static_cast<Metric>(metric);
  return idx;
}

std::vector<float> normalized_l(const LabImage& img) {
  if (!img.has_l) fail(Errc::MissingChannels, "image has no L channel");
  std::vector<float> out(img.l.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.l[i] / 50.0f - 1.0f;
  return out;
}

namespace {

// Mean over the spatial map of one tower activation, one value per channel.
std::vector<float> pooled_layer(const TowerCache<float>& tc, const NetConfig& cfg, TowerLayer layer) {
  const std::vector<float>* act = nullptr;
  int channels = 0;
  switch (layer) {
    case TowerLayer::conv1: act = &tc.a1; channels = cfg.conv_widths[0]; break;
    case TowerLayer::conv2: act = &tc.a2; channels = cfg.conv_widths[1]; break;
    case TowerLayer::conv3: act = &tc.a3; channels = cfg.conv_widths[2]; break;
    case TowerLayer::point1: act = &tc.p1; channels = cfg.pointwise_widths[0]; break;
    case TowerLayer::point2: act = &tc.p2; channels = cfg.pointwise_widths[1]; break;
  }
  const std::size_t hw = act->size() / static_cast<std::size_t>(channels);
  std::vector<float> out(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    double s = 0;
    for (std::size_t i = 0; i < hw; ++i) s += (*act)[c * hw + i];
    out[c] = static_cast<float>(s / static_cast<double>(hw));
  }
  return out;
}

int layer_channels(const NetConfig& cfg, TowerLayer layer) {
  const int i = static_cast<int>(layer);
  return i < 3 ? cfg.conv_widths[i] : cfg.pointwise_widths[i - 3];
}

}  // namespace

FeatureIndex extract_features(const TinyNet<float>& net, std::span<const LabImage> images, TowerLayer layer,
                              Metric metric, std::vector<std::string> ids, const std::string& source_hash) {
  if (static_cast<int>(layer) < 0 || static_cast<int>(layer) >= kTowerLayers)
    fail(Errc::UnknownLayer, "extract_features: unknown layer");
  if (ids.empty())
    for (std::size_t i = 0; i < images.size(); ++i) ids.push_back(std::to_string(i));
  if (ids.size() != images.size()) fail(Errc::ShapeMismatch, "extract_features: ids do not match images");
  const int dims = layer_channels(net.config(), layer);
  std::vector<float> rows(images.size() * static_cast<std::size_t>(dims));
  std::exception_ptr error;
  const auto n = static_cast<std::ptrdiff_t>(images.size());
  CDJP_PARALLEL_FOR_DYNAMIC
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& img = images[i];
      const auto tc = net.tower(normalized_l(img), img.height, img.width);
      const auto v = pooled_layer(tc, net.config(), layer);
      std::copy(v.begin(), v.end(), rows.begin() + i * dims);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return FeatureIndex(std::move(ids), std::move(rows), dims, metric, source_hash);
}

namespace {

bool neighbor_less(const Neighbor& x, const Neighbor& y) {
  return x.distance != y.distance ? x.distance < y.distance : x.id < y.id;
}

std::vector<Neighbor> top_k(std::vector<Neighbor> all, std::size_t k) {
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), neighbor_less);
  all.resize(k);
  return all;
}

void check_query(const FeatureIndex& index, std::size_t k) {
  if (k == 0 || k >= index.size()) fail(Errc::InvalidArgument, "knn: k must be in [1, |index|)");
}

}  // namespace

std::vector<Neighbor> knn(const FeatureIndex& index, const std::string& query, std::size_t k) {
  const auto q = index.position(query);
  check_query(index, k);
  std::vector<Neighbor> all(index.size());
  const auto n = static_cast<std::ptrdiff_t>(index.size());
  CDJP_PARALLEL_FOR
  for (std::ptrdiff_t i = 0; i < n; ++i) all[i] = {index.ids()[i], index.distance(q, static_cast<std::size_t>(i))};
  return top_k(std::move(all), k);
}

std::vector<Neighbor> knn_serial(const FeatureIndex& index, const std::string& query, std::size_t k) {
  const auto q = index.position(query);
  check_query(index, k);
  std::vector<Neighbor> all(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) all[i] = {index.ids()[i], index.distance(q, i)};
  return top_k(std::move(all), k);
}

std::string ProbeResult::to_json() const {
  nlohmann::json j{{"layer", layer},         {"accuracy", accuracy},     {"train_accuracy", train_accuracy},
                   {"classes", classes},     {"train_count", train_count}, {"test_count", test_count}};
  return j.dump(2);
}

void split_indices(std::size_t n, double test_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& test) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_test, n)));
  train.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n_test, n)), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

ProbeResult linear_probe(const FeatureIndex& features, std::span<const int> labels, std::span<const std::size_t> train,
                         std::span<const std::size_t> test, const ProbeOptions& opts, const std::string& layer) {
  if (labels.size() != features.size()) fail(Errc::ShapeMismatch, "linear_probe: labels do not match features");
  if (train.empty() || test.empty()) fail(Errc::DegenerateSplit, "linear_probe: empty train or test split");
  std::set<std::size_t> train_set(train.begin(), train.end());
  for (auto t : test)
    if (train_set.count(t)) fail(Errc::DegenerateSplit, "linear_probe: train and test overlap");
  for (auto i : train_set)
    if (i >= features.size()) fail(Errc::InvalidArgument, "linear_probe: index out of range");
  for (auto i : test)
    if (i >= features.size()) fail(Errc::InvalidArgument, "linear_probe: index out of range");
  int classes = 0;
  std::set<int> train_classes;
  for (auto i : train) {
    if (labels[i] < 0) fail(Errc::BadLabel, "linear_probe: negative label");
    train_classes.insert(labels[i]);
  }
  for (int l : labels) classes = std::max(classes, l + 1);
  if (train_classes.size() < 2) fail(Errc::DegenerateSplit, "linear_probe: fewer than two training classes");

  const int D = features.dims();
  const int C = classes;
  // Standardize with training statistics.
  std::vector<double> mean(D, 0.0), inv_std(D, 0.0);
  for (auto i : train) {
    const auto r = features.row(i);
    for (int d = 0; d < D; ++d) mean[d] += r[d];
  }
  for (auto& m : mean) m /= static_cast<double>(train.size());
  for (auto i : train) {
    const auto r = features.row(i);
    for (int d = 0; d < D; ++d) inv_std[d] += (r[d] - mean[d]) * (r[d] - mean[d]);
  }
  for (auto& s : inv_std) {
    const double sd = std::sqrt(s / static_cast<double>(train.size()));
    s = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  auto standardized = [&](std::size_t i) {
    const auto r = features.row(i);
    std::vector<double> x(D);
    for (int d = 0; d < D; ++d) x[d] = (r[d] - mean[d]) * inv_std[d];
    return x;
  };
  std::vector<std::vector<double>> xs(features.size());
  for (auto i : train) xs[i] = standardized(i);
  for (auto i : test) xs[i] = standardized(i);

  std::vector<double> W(static_cast<std::size_t>(C) * D, 0.0), b(C, 0.0);
  std::vector<double> gW(W.size()), gb(C), mW(W.size(), 0.0), vW(W.size(), 0.0), mb(C, 0.0), vb(C, 0.0);
  AdamHyper hyper;
  hyper.base_lr = opts.lr;
  std::uint64_t t = 0;

  auto logits = [&](const std::vector<double>& x) {
    std::vector<double> z(b);
    for (int c = 0; c < C; ++c)
      for (int d = 0; d < D; ++d) z[c] += W[static_cast<std::size_t>(c) * D + d] * x[d];
    return z;
  };
  auto predict = [&](std::size_t i) {
    const auto z = logits(xs[i]);
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  };

  std::vector<std::size_t> order(train.begin(), train.end());
  Rng rng(opts.seed);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, opts.batch_size));
  for (int e = 0; e < opts.epochs; ++e) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::fill(gW.begin(), gW.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t s = start; s < end; ++s) {
        const auto& x = xs[order[s]];
        auto z = logits(x);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0;
        for (auto& v : z) sum += (v = std::exp(v - zmax));
        for (int c = 0; c < C; ++c) {
          const double g = z[c] / sum - (c == labels[order[s]] ? 1.0 : 0.0);
          gb[c] += g;
          for (int d = 0; d < D; ++d) gW[static_cast<std::size_t>(c) * D + d] += g * x[d];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < W.size(); ++i) gW[i] = gW[i] * inv + opts.l2 * W[i];
      for (auto& g : gb) g *= inv;
      ++t;
      adam_update<double>(W, gW, mW, vW, opts.lr, hyper, t);
      adam_update<double>(b, gb, mb, vb, opts.lr, hyper, t);
    }
  }

  ProbeResult r;
  r.layer = layer;
  r.classes = C;
  r.train_count = train.size();
  r.test_count = test.size();
  std::size_t hit = 0;
  for (auto i : test) hit += predict(i) == labels[i];
  r.accuracy = static_cast<double>(hit) / static_cast<double>(test.size());
  hit = 0;
  for (auto i : train) hit += predict(i) == labels[i];
  r.train_accuracy = static_cast<double>(hit) / static_cast<double>(train.size());
  return r;
}

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string contact_sheet_html(const FeatureIndex& index, std::span<const std::string> queries, std::size_t k,
                               const std::map<std::string, std::string>& images) {
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>nearest neighbors</title>\n"
      << "<style>td{text-align:center;font:11px monospace;padding:4px}img{width:96px;height:96px}"
      << "td.q{border-right:2px solid #444}</style></head><body>\n<table>\n";
  for (const auto& q : queries) {
    const auto nn = knn(index, q, k);
    out << "<tr>";
    bool first = true;
    for (const auto& n : nn) {
      out << (first ? "<td class=\"q\">" : "<td>");
      const auto it = images.find(n.id);
      if (it != images.end()) out << "<img src=\"" << html_escape(it->second) << "\"><br>";
      char dist[32];
      std::snprintf(dist, sizeof dist, "%.4f", n.distance);
      out << html_escape(n.id) << "<br>" << dist << "</td>";
      first = false;
    }
    out << "</tr>\n";
  }
  out << "</table>\n</body></html>\n";
  return out.str();
}

std::string contact_sheet_text(const FeatureIndex& index, std::span<const std::string> queries, std::size_t k) {
  std::ostringstream out;
  for (const auto& q : queries) {
    out << q << ":";
    for (const auto& n : knn(index, q, k)) {
      char dist[32];
      std::snprintf(dist, sizeof dist, "%.4f", n.distance);
      out << ' ' << n.id << '(' << dist << ')';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cdjp
