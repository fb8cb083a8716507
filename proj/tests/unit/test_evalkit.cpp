#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cdjp/error.hpp"
#include "cdjp/evalkit.hpp"
#include "cdjp/rng.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cdjp;

namespace {

struct Rows {
  std::vector<std::string> ids;
  std::vector<std::vector<float>> rows;
  std::vector<float> flat;
};

// Gaussian rows with a few exact duplicates so ties occur.
Rows random_rows(std::size_t n, int dims, std::uint64_t seed, bool duplicates = true) {
  Rng rng(seed);
  Rows r;
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "item%04zu", (i * 7919) % n);
    r.ids.push_back(id);
    std::vector<float> row(dims);
    if (duplicates && i % 10 == 9) row = r.rows[i - 3];
    else
      for (auto& v : row) v = static_cast<float>(rng.normal());
    r.rows.push_back(row);
    r.flat.insert(r.flat.end(), row.begin(), row.end());
  }
  return r;
}

std::vector<std::vector<float>> stored_rows(const FeatureIndex& idx) {
  std::vector<std::vector<float>> out;
  for (std::size_t i = 0; i < idx.size(); ++i) out.emplace_back(idx.row(i).begin(), idx.row(i).end());
  return out;
}

}  // namespace

TEST_CASE("knn equals the brute-force oracle exactly on 200 items") {
  const auto r = random_rows(200, 16, 4);
  for (auto metric : {Metric::cosine, Metric::l2}) {
    const FeatureIndex idx(r.ids, r.flat, 16, metric);
    const auto rows = stored_rows(idx);
    for (std::size_t q = 0; q < idx.size(); ++q) {
      const auto ref = oracle::brute_knn(rows, r.ids, metric == Metric::cosine, q, 10);
      const auto got = knn(idx, r.ids[q], 10);
      const auto ser = knn_serial(idx, r.ids[q], 10);
      REQUIRE(got.size() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(got[i].id == ref[i].id);
        CHECK(got[i].distance == ref[i].distance);
      }
      CHECK(got == ser);
    }
  }
}

TEST_CASE("self retrieval and ordering") {
  const auto r = random_rows(50, 8, 5);
  const FeatureIndex idx(r.ids, r.flat, 8, Metric::cosine);
  for (const auto& id : r.ids) {
    const auto nn = knn(idx, id, 5);
    CHECK(nn[0].distance == 0.0);
    for (std::size_t i = 1; i < nn.size(); ++i) CHECK(nn[i - 1].distance <= nn[i].distance);
  }
  // Exact duplicates tie at 0; the smaller id wins.
  const auto nn = knn(idx, r.ids[9], 2);
  CHECK(nn[1].distance == 0.0);
  CHECK(nn[0].id < nn[1].id);
}

TEST_CASE("cosine rows are unit length and scale invariant") {
  auto r = random_rows(30, 6, 6, false);
  const FeatureIndex a(r.ids, r.flat, 6, Metric::cosine);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double n2 = 0;
    for (float v : a.row(i)) n2 += static_cast<double>(v) * v;
    CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-6);
  }
  auto scaled = r.flat;
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= static_cast<float>(1 + (i / 6) % 5);
  const FeatureIndex b(r.ids, scaled, 6, Metric::cosine);
  for (const auto& id : r.ids) {
    const auto x = knn(a, id, 5), y = knn(b, id, 5);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x[i].id == y[i].id);
      CHECK(std::abs(x[i].distance - y[i].distance) < 1e-6);
    }
  }
}

TEST_CASE("index validation and errors") {
  const auto r = random_rows(10, 4, 7);
  CHECK_THROWS_AS(FeatureIndex(r.ids, std::vector<float>(39), 4, Metric::l2), Error);
  auto bad = r.flat;
  bad[3] = std::nanf("");
  CHECK_THROWS_AS(FeatureIndex(r.ids, bad, 4, Metric::l2), Error);
  const FeatureIndex idx(r.ids, r.flat, 4, Metric::l2);
  try {
    knn(idx, "nope", 3);
    FAIL("expected UnknownId");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownId);
  }
  CHECK_THROWS_AS(knn(idx, r.ids[0], 10), Error);
}

TEST_CASE("index persistence") {
  const auto r = random_rows(40, 5, 8);
  const FeatureIndex idx(r.ids, r.flat, 5, Metric::cosine, "abc");
  const auto path = (std::filesystem::temp_directory_path() / "cdjp_test_index.bin").string();
  idx.save(path);
  const auto back = FeatureIndex::load(path);
  std::filesystem::remove(path);
  CHECK(back.ids() == idx.ids());
  CHECK(back.data() == idx.data());
  CHECK(back.metric() == Metric::cosine);
  CHECK(back.source_hash() == "abc");
  CHECK(knn(back, r.ids[3], 6) == knn(idx, r.ids[3], 6));
}

TEST_CASE("probe on a separable two-class set") {
  Rng rng(3);
  std::vector<std::string> ids;
  std::vector<float> rows;
  std::vector<int> labels;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    ids.push_back(std::to_string(i));
    labels.push_back(y);
    // Class means 3 apart along the first axis, unit noise elsewhere.
    rows.push_back(static_cast<float>((y ? 1.5 : -1.5) + 0.3 * rng.normal()));
    for (int d = 1; d < 6; ++d) rows.push_back(static_cast<float>(rng.normal()));
  }
  const FeatureIndex idx(ids, rows, 6, Metric::l2);
  std::vector<std::size_t> train, test;
  split_indices(n, 0.3, 1, train, test);
  const auto r = linear_probe(idx, labels, train, test);
  CHECK(r.accuracy >= 0.95);
  CHECK(r.classes == 2);
  CHECK(r.test_count == test.size());
  CHECK(linear_probe(idx, labels, train, test).accuracy == r.accuracy);

  // Label-shuffled control sits at chance (300 test items: sd ~0.03).
  auto shuffled = labels;
  Rng(9).shuffle(shuffled.begin(), shuffled.end());
  const auto c = linear_probe(idx, shuffled, train, test);
  CHECK(std::abs(c.accuracy - 0.5) <= 0.1);
}

TEST_CASE("degenerate splits are refused") {
  const auto r = random_rows(20, 3, 2);
  const FeatureIndex idx(r.ids, r.flat, 3, Metric::l2);
  std::vector<int> labels(20, 0);
  std::vector<std::size_t> train{0, 1, 2, 3}, test{4, 5};
  auto expect_degenerate = [&](const std::vector<int>& l, const std::vector<std::size_t>& tr,
                               const std::vector<std::size_t>& te) {
    try {
      linear_probe(idx, l, tr, te);
      FAIL("expected DegenerateSplit");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DegenerateSplit);
    }
  };
  expect_degenerate(labels, train, test);  // one class
  labels[1] = 1;
  expect_degenerate(labels, train, {});
  expect_degenerate(labels, train, {3, 4});
  CHECK_NOTHROW(linear_probe(idx, labels, train, test));
}

TEST_CASE("feature extraction") {
  const fixtures::World w(4, 23);
  const TinyNet<float> net(w.micro());
  std::vector<LabImage> images{w.images[0], w.images[1], w.images[0]};
  const auto idx = extract_features(net, images, TowerLayer::conv3, Metric::l2);
  CHECK(idx.dims() == net.config().conv_widths[2]);
  CHECK(std::vector<float>(idx.row(0).begin(), idx.row(0).end()) ==
        std::vector<float>(idx.row(2).begin(), idx.row(2).end()));
  // Same L, different colors.
  auto recolored = images;
  for (auto& v : recolored[1].a) v = -v;
  for (auto& v : recolored[1].b) v += 20.0f;
  const auto re = extract_features(net, recolored, TowerLayer::point2, Metric::l2);
  const auto orig = extract_features(net, images, TowerLayer::point2, Metric::l2);
  CHECK(re.data() == orig.data());
  CHECK(orig.dims() == net.config().pointwise_widths[1]);
}

TEST_CASE("contact sheets list the neighbors") {
  const auto r = random_rows(12, 4, 11);
  const FeatureIndex idx(r.ids, r.flat, 4, Metric::cosine);
  std::vector<std::string> q{r.ids[0], r.ids[1]};
  const auto html = contact_sheet_html(idx, q, 3, {{r.ids[0], "imgs/a<b>.png"}});
  CHECK(html.find("imgs/a&lt;b&gt;.png") != std::string::npos);
  CHECK(html.find(r.ids[1]) != std::string::npos);
  const auto text = contact_sheet_text(idx, q, 3);
  CHECK(text.find(r.ids[0] + ":") == 0);
}
