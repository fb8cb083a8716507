#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cdjp/colorspace.hpp"
#include "cdjp/tinynet.hpp"

namespace cdjp {

enum class Metric : std::uint8_t { cosine = 0, l2 = 1 };
const char* to_string(Metric m);
Metric metric_from_string(const std::string& name);

/// Immutable after construction. Cosine rows are stored unit-normalized.
class FeatureIndex {
 public:
  FeatureIndex() = default;
  /// `rows` is ids.size() x dims, row-major. Throws on non-finite values,
  /// duplicate ids or a size mismatch.
  FeatureIndex(std::vector<std::string> ids, std::vector<float> rows, int dims, Metric metric,
               std::string source_hash = {});

  std::size_t size() const { return ids_.size(); }
  int dims() const { return dims_; }
  Metric metric() const { return metric_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> row(std::size_t i) const { return {rows_.data() + i * dims_, static_cast<std::size_t>(dims_)}; }
  const std::vector<float>& data() const { return rows_; }
  const std::string& source_hash() const { return source_hash_; }
  /// Throws Errc::UnknownId.
  std::size_t position(const std::string& id) const;

  /// Cosine: half the squared distance between unit rows (1 - cos), so a row
  /// is exactly 0 from itself. L2: Euclidean distance.
  double distance(std::size_t i, std::size_t j) const;

  void save(const std::string& path) const;
  static FeatureIndex load(const std::string& path);

 private:
  std::vector<std::string> ids_;
  std::vector<float> rows_;
  int dims_ = 0;
  Metric metric_ = Metric::cosine;
  std::string source_hash_;
  std::map<std::string, std::size_t> lookup_;
};

/// Normalized L plane (L/50 - 1) of a full image, the tower's input.
std::vector<float> normalized_l(const LabImage& img);

/// Global-average-pooled activation of `layer` for every image.
/// Rows are in image order; ids default to "0", "1", ...
FeatureIndex extract_features(const TinyNet<float>& net, std::span<const LabImage> images, TowerLayer layer,
                              Metric metric = Metric::cosine, std::vector<std::string> ids = {},
                              const std::string& source_hash = {});

struct Neighbor {
  std::string id;
  double distance = 0.0;
  bool operator==(const Neighbor&) const = default;
};

/// Exact top-k including the query itself, ordered by (distance, id).
/// Throws Errc::UnknownId or Errc::InvalidArgument when k >= size.
std::vector<Neighbor> knn(const FeatureIndex& index, const std::string& query, std::size_t k);
std::vector<Neighbor> knn_serial(const FeatureIndex& index, const std::string& query, std::size_t k);

struct ProbeOptions {
  int epochs = 100;
  int batch_size = 32;
  double lr = 1e-2;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  std::string layer;
  double accuracy = 0.0;  ///< held-out top-1
  double train_accuracy = 0.0;
  int classes = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;

  std::string to_json() const;
};

/// Softmax regression on standardized frozen features, trained with ADAM.
/// `train` and `test` hold row positions. Throws Errc::DegenerateSplit when
/// either side is empty, they overlap, or the training labels have < 2 classes.
ProbeResult linear_probe(const FeatureIndex& features, std::span<const int> labels, std::span<const std::size_t> train,
                         std::span<const std::size_t> test, const ProbeOptions& opts = {},
                         const std::string& layer = {});

/// Deterministic shuffled split; `test_fraction` of the items go to test.
void split_indices(std::size_t n, double test_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& test);

/// HTML table: one row per query, thumbnails of its neighbors. `images` maps
/// ids to image paths relative to the report.
std::string contact_sheet_html(const FeatureIndex& index, std::span<const std::string> queries, std::size_t k,
                               const std::map<std::string, std::string>& images);
std::string contact_sheet_text(const FeatureIndex& index, std::span<const std::string> queries, std::size_t k);

}  // namespace cdjp
