#include "cdjp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cdjp/error.hpp"
#include "cdjp/parallel.hpp"
#include "cdjp/rng.hpp"

namespace cdjp {

RgbImage synthetic_image(int cls, const SyntheticOptions& opts, std::uint64_t seed) {
  if (opts.size <= 0 || opts.classes <= 0 || cls < 0 || cls >= opts.classes)
    fail(Errc::InvalidArgument, "synthetic_image: bad class or size");
  Rng rng(seed);
  const double pi = std::numbers::pi;
  const int n = opts.size;
  const double frac = static_cast<double>(cls) / opts.classes;

  // Lighting ramp: the class owns a sector of directions and the image draws
  // one anywhere inside it, so neighboring classes meet without a margin.
  const double ramp_angle = 2 * pi * (cls + rng.uniform()) / opts.classes;
  const double ramp = rng.uniform(20.0, 35.0);
  const double base = rng.uniform(45.0, 60.0);
  const double rx = std::cos(ramp_angle), ry = std::sin(ramp_angle);

  const double stripe_angle = rng.uniform(0.0, pi);
  const double freq = 2 * pi / rng.uniform(6.0, 9.0);
  const double phase = rng.uniform(0.0, 2 * pi);
  const double amp = rng.uniform(0.5, 1.0) * opts.stripe_amplitude;
  const double sx = std::cos(stripe_angle), sy = std::sin(stripe_angle);

  const double hue = 2 * pi * frac + rng.uniform(-0.3, 0.3);
  const double chroma = rng.uniform(20.0, 45.0);

  struct Blob {
    double cx, cy, r, dl, a, b;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < opts.blobs; ++i) {
    const double h = rng.uniform(0.0, 2 * pi), c = rng.uniform(10.0, 50.0);
    blobs.push_back({rng.uniform(0.0, n), rng.uniform(0.0, n), rng.uniform(0.06, 0.15) * n, rng.uniform(-opts.blob_contrast, opts.blob_contrast),
                     c * std::cos(h), c * std::sin(h)});
  }

  RgbImage img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double u = (x + 0.5) / n - 0.5, v = (y + 0.5) / n - 0.5;
      double L = base + ramp * (u * rx + v * ry) + amp * std::sin(freq * (x * sx + y * sy) + phase);
      double A = chroma * std::cos(hue) + 8.0 * v;
      double B = chroma * std::sin(hue) + 8.0 * u;
      for (const auto& bl : blobs) {
        const double d2 = ((x - bl.cx) * (x - bl.cx) + (y - bl.cy) * (y - bl.cy)) / (bl.r * bl.r);
        if (d2 < 1.0) {
          const double w = 1.0 - d2;
          L += w * bl.dl;
          A += w * (bl.a - A);
          B += w * (bl.b - B);
        }
      }
      L += opts.noise * rng.normal();
      L = std::clamp(L, 0.0, 100.0);
      auto* p = img.at(x, y);
      lab_to_srgb(L, A, B, p[0], p[1], p[2]);
    }
  }
  return img;
}

SyntheticCorpus make_synthetic_corpus(std::size_t count, std::uint64_t seed, const SyntheticOptions& opts) {
  SyntheticCorpus c;
  c.classes = opts.classes;
  c.images.resize(count);
  c.labels.resize(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
  CDJP_PARALLEL_FOR_DYNAMIC
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    c.labels[i] = static_cast<int>(i % opts.classes);
    c.images[i] = synthetic_image(c.labels[i], opts, derive_seed(seed, static_cast<std::uint64_t>(i)));
  }
  return c;
}

}  // namespace cdjp
