#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdjp/adam.hpp"
#include "cdjp/losses.hpp"
#include "cdjp/tinynet.hpp"

namespace cdjp {

struct TrainConfig {
  int batch_size = 16;
  std::uint64_t steps = 1000;
  AdamHyper adam;
  LossWeights weights;  ///< alpha = beta = 0.01
  std::uint64_t seed = 7;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct StepMetrics {
  std::uint64_t step = 0;
  double lr = 0.0;
  double l_jig = 0.0;
  double l_inp = 0.0;
  double l_col = 0.0;
  double l_final = 0.0;
  double jigsaw_acc = 0.0;
};

struct Checkpoint {
  NetConfig net;
  TrainConfig train;
  std::vector<Param<float>> params;
  AdamState<float> adam;
  std::string config_hash;  ///< fingerprint of net + train config + data artifacts
  std::string data_hash;    ///< codebook/permset/shard fingerprints the run was bound to
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Mean per-sample loss bundle and parameter gradients for a batch.
struct BatchResult {
  StepMetrics metrics;
  Grads<float> grads;
};

class Trainer {
 public:
  Trainer(const NetConfig& net, const TrainConfig& cfg);
  explicit Trainer(const Checkpoint& ckpt);

  const TinyNet<float>& net() const { return net_; }
  TinyNet<float>& net() { return net_; }
  const TrainConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return adam_.step; }
  const AdamState<float>& adam() const { return adam_; }

  /// Forward, loss and backward over a batch without updating parameters.
  /// Throws Errc::NonFiniteLoss.
  BatchResult evaluate(std::span<const PuzzleSample* const> batch, const PermutationSet& pset,
                       const ColorCodebook& cb) const;
  /// One ADAM update on the batch-averaged gradient.
  StepMetrics step(std::span<const PuzzleSample* const> batch, const PermutationSet& pset, const ColorCodebook& cb);

  Checkpoint checkpoint(const std::string& data_hash = {}) const;

 private:
  NetConfig net_cfg_;
  TrainConfig cfg_;
  TinyNet<float> net_;
  AdamState<float> adam_;
};

/// Deterministic batch for a given step: batch_size indices drawn uniformly from [0, n).
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::uint64_t step, std::size_t n, int batch_size);

/// Top-1 accuracy of the jigsaw head.
double jigsaw_accuracy(const TinyNet<float>& net, std::span<const PuzzleSample> samples, const PermutationSet& pset);

std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);

/// Trains on pre-generated samples for cfg.steps steps starting from the
/// trainer's current step. `on_step` sees every step's metrics.
void train_on_samples(Trainer& trainer, std::span<const PuzzleSample> samples, const PermutationSet& pset,
                      const ColorCodebook& cb, std::uint64_t steps,
                      const std::function<void(const StepMetrics&)>& on_step = {});

}  // namespace cdjp
