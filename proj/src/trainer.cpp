#include "cdjp/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "cdjp/error.hpp"
#include "cdjp/hash.hpp"
#include "cdjp/parallel.hpp"
#include "cdjp/rng.hpp"
#include "json.hpp"

namespace cdjp {

std::string TrainConfig::to_json() const {
  nlohmann::json j{{"batch_size", batch_size},
                   {"steps", steps},
                   {"lr", adam.base_lr},
                   {"beta1", adam.beta1},
                   {"beta2", adam.beta2},
                   {"eps", adam.eps},
                   {"decay_interval", adam.decay_interval},
                   {"decay_factor", adam.decay_factor},
                   {"alpha", weights.alpha},
                   {"beta", weights.beta},
                   {"seed", seed}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.batch_size = j.at("batch_size");
    c.steps = j.at("steps");
    c.adam.base_lr = j.at("lr");
    c.adam.beta1 = j.at("beta1");
    c.adam.beta2 = j.at("beta2");
    c.adam.eps = j.at("eps");
    c.adam.decay_interval = j.at("decay_interval");
    c.adam.decay_factor = j.at("decay_factor");
    c.weights.alpha = j.at("alpha");
    c.weights.beta = j.at("beta");
    c.seed = j.at("seed");
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Format, std::string("train config JSON: ") + e.what());
  }
  return c;
}

Trainer::Trainer(const NetConfig& net, const TrainConfig& cfg) : net_cfg_(net), cfg_(cfg), net_(net) {
  adam_.hyper = cfg.adam;
}

Trainer::Trainer(const Checkpoint& ckpt)
    : net_cfg_(ckpt.net), cfg_(ckpt.train), net_(ckpt.net, ckpt.params), adam_(ckpt.adam) {}

BatchResult Trainer::evaluate(std::span<const PuzzleSample* const> batch, const PermutationSet& pset,
                              const ColorCodebook& cb) const {
  if (batch.empty()) fail(Errc::InvalidArgument, "Trainer: empty batch");
  if (static_cast<int>(cb.size()) != net_cfg_.codebook_size || static_cast<int>(pset.size()) != net_cfg_.perm_count)
    fail(Errc::ManifestMismatch, "Trainer: codebook or permutation set does not match the network");
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  std::vector<Grads<float>> per_sample(batch.size());
  std::vector<LossBundle<float>> losses(batch.size());
  std::vector<int> correct(batch.size(), 0);
  std::exception_ptr error;

  CDJP_PARALLEL_FOR_DYNAMIC
  for (std::ptrdiff_t b = 0; b < n; ++b) {
    try {
      const PuzzleSample& s = *batch[b];
      const auto input = make_input<float>(s, pset, net_cfg_);
      const auto targets = make_targets(s, pset);
      auto fc = net_.forward(input);
      auto bundle = combined_loss<float>(fc.outputs(), targets, cb, cfg_.weights);
      const auto& logits = fc.outputs().jigsaw;
      const auto arg = std::max_element(logits.begin(), logits.end()) - logits.begin();
      correct[b] = static_cast<std::uint32_t>(arg) == s.perm_id;
      per_sample[b] = net_.backward(fc, bundle.grads);
      bundle.grads = {};
      losses[b] = std::move(bundle);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  BatchResult r;
  r.grads = net_.zero_grads();
  const float inv = 1.0f / static_cast<float>(batch.size());
  double jig = 0, inp = 0, col = 0, fin = 0, acc = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t p = 0; p < r.grads.size(); ++p)
      for (std::size_t i = 0; i < r.grads[p].size(); ++i) r.grads[p][i] += per_sample[b][p][i];
    jig += losses[b].l_jig;
    inp += losses[b].l_inp_cls;
    col += losses[b].l_col;
    fin += losses[b].l_final;
    acc += correct[b];
  }
  for (auto& g : r.grads)
    for (auto& v : g) v *= inv;
  const double bn = static_cast<double>(batch.size());
  r.metrics = {adam_.step, adam_.lr(), jig / bn, inp / bn, col / bn, fin / bn, acc / bn};
  if (!std::isfinite(r.metrics.l_final)) fail(Errc::NonFiniteLoss, "Trainer: non-finite loss");
  return r;
}

StepMetrics Trainer::step(std::span<const PuzzleSample* const> batch, const PermutationSet& pset,
                          const ColorCodebook& cb) {
  auto r = evaluate(batch, pset, cb);
  adam_step(net_.params(), r.grads, adam_);
  return r.metrics;
}

Checkpoint Trainer::checkpoint(const std::string& data_hash) const {
  Checkpoint c;
  c.net = net_cfg_;
  c.train = cfg_;
  c.params = net_.params();
  c.adam = adam_;
  c.data_hash = data_hash;
  c.config_hash = hash_hex(fnv1a(net_cfg_.to_json() + cfg_.to_json() + data_hash));
  return c;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::uint64_t step, std::size_t n, int batch_size) {
  Rng rng(derive_seed(seed, step));
  std::vector<std::size_t> out(static_cast<std::size_t>(batch_size));
  for (auto& i : out) i = static_cast<std::size_t>(rng.uniform_int(n));
  return out;
}

double jigsaw_accuracy(const TinyNet<float>& net, std::span<const PuzzleSample> samples, const PermutationSet& pset) {
  if (samples.empty()) return 0.0;
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  std::vector<int> hit(samples.size(), 0);
  CDJP_PARALLEL_FOR_DYNAMIC
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto fc = net.forward(make_input<float>(samples[i], pset, net.config()));
    const auto& logits = fc.outputs().jigsaw;
    hit[i] = static_cast<std::uint32_t>(std::max_element(logits.begin(), logits.end()) - logits.begin()) ==
             samples[i].perm_id;
  }
  double total = 0;
  for (int h : hit) total += h;
  return total / static_cast<double>(samples.size());
}

std::string metrics_csv_header() { return "step,lr,l_jig,l_inp,l_col,l_final,jigsaw_acc"; }

std::string metrics_csv_row(const StepMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.6g", static_cast<unsigned long long>(m.step), m.lr,
                m.l_jig, m.l_inp, m.l_col, m.l_final, m.jigsaw_acc);
  return buf;
}

void train_on_samples(Trainer& trainer, std::span<const PuzzleSample> samples, const PermutationSet& pset,
                      const ColorCodebook& cb, std::uint64_t steps,
                      const std::function<void(const StepMetrics&)>& on_step) {
  if (samples.empty()) fail(Errc::EmptyCorpus, "train: no samples");
  const auto& cfg = trainer.config();
  std::vector<const PuzzleSample*> batch(static_cast<std::size_t>(cfg.batch_size));
  for (std::uint64_t s = 0; s < steps; ++s) {
    const auto idx = batch_indices(cfg.seed, trainer.step_count(), samples.size(), cfg.batch_size);
    for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = &samples[idx[i]];
    const auto m = trainer.step(batch, pset, cb);
    if (on_step) on_step(m);
  }
}

// ---- checkpoint I/O ----

namespace {

constexpr char kCkptMagic[8] = {'C', 'D', 'J', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename V>
void put(std::ofstream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::ifstream& in) {
  V v;
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) fail(Errc::Format, "checkpoint: truncated");
  return v;
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) fail(Errc::Format, "checkpoint: truncated");
  return s;
}

void put_floats(std::ofstream& out, const std::vector<float>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> get_floats(std::ifstream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 32)) fail(Errc::Format, "checkpoint: implausible blob size");
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) fail(Errc::Format, "checkpoint: truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out.write(kCkptMagic, 8);
  put<std::uint32_t>(out, kCkptVersion);
  put_string(out, c.config_hash);
  put_string(out, c.data_hash);
  put_string(out, c.net.to_json());
  put_string(out, c.train.to_json());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.params.size()));
  for (const auto& p : c.params) {
    put_string(out, p.name);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.shape.size()));
    for (int d : p.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    put_floats(out, p.value);
  }
  put<std::uint64_t>(out, c.adam.step);
  put<double>(out, c.adam.hyper.base_lr);
  put<double>(out, c.adam.hyper.beta1);
  put<double>(out, c.adam.hyper.beta2);
  put<double>(out, c.adam.hyper.eps);
  put<std::uint64_t>(out, c.adam.hyper.decay_interval);
  put<double>(out, c.adam.hyper.decay_factor);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.adam.m.size()));
  for (std::size_t i = 0; i < c.adam.m.size(); ++i) {
    put_floats(out, c.adam.m[i]);
    put_floats(out, c.adam.v[i]);
  }
  if (!out) fail(Errc::Io, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0) fail(Errc::Format, "checkpoint: bad magic");
  if (get<std::uint32_t>(in) != kCkptVersion) fail(Errc::Format, "checkpoint: unsupported version");
  Checkpoint c;
  c.config_hash = get_string(in);
  c.data_hash = get_string(in);
  c.net = NetConfig::from_json(get_string(in));
  c.train = TrainConfig::from_json(get_string(in));
  const auto n = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n; ++i) {
    Param<float> p;
    p.name = get_string(in);
    const auto dims = get<std::uint8_t>(in);
    for (int d = 0; d < dims; ++d) p.shape.push_back(static_cast<int>(get<std::uint32_t>(in)));
    p.value = get_floats(in);
    c.params.push_back(std::move(p));
  }
  c.adam.step = get<std::uint64_t>(in);
  c.adam.hyper.base_lr = get<double>(in);
  c.adam.hyper.beta1 = get<double>(in);
  c.adam.hyper.beta2 = get<double>(in);
  c.adam.hyper.eps = get<double>(in);
  c.adam.hyper.decay_interval = get<std::uint64_t>(in);
  c.adam.hyper.decay_factor = get<double>(in);
  const auto moments = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < moments; ++i) {
    c.adam.m.push_back(get_floats(in));
    c.adam.v.push_back(get_floats(in));
  }
  return c;
}

}  // namespace cdjp
