#include "cdjp/colorspace.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cdjp/error.hpp"
#include "cdjp/parallel.hpp"

namespace cdjp {
namespace {

// sRGB primaries -> XYZ (D65).
constexpr double kM[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

// Reference white is taken as M * (1,1,1) so that every neutral sRGB color
// lands exactly on a = b = 0.
struct Constants {
  std::array<double, 3> white{};
  double inv[3][3]{};
  std::array<double, 256> decode{};

  Constants() {
    for (int r = 0; r < 3; ++r) white[r] = kM[r][0] + kM[r][1] + kM[r][2];
    const double det = kM[0][0] * (kM[1][1] * kM[2][2] - kM[1][2] * kM[2][1]) -
                       kM[0][1] * (kM[1][0] * kM[2][2] - kM[1][2] * kM[2][0]) +
                       kM[0][2] * (kM[1][0] * kM[2][1] - kM[1][1] * kM[2][0]);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const int r1 = (c + 1) % 3, r2 = (c + 2) % 3;
        const int c1 = (r + 1) % 3, c2 = (r + 2) % 3;
        inv[r][c] = (kM[r1][c1] * kM[r2][c2] - kM[r1][c2] * kM[r2][c1]) / det;
      }
    }
    for (int i = 0; i < 256; ++i) {
      const double v = i / 255.0;
      decode[i] = v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
    }
  }
};

const Constants& constants() {
  static const Constants c;
  return c;
}

constexpr double kDelta = 6.0 / 29.0;

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double f) {
  return f > kDelta ? f * f * f : 3.0 * kDelta * kDelta * (f - 4.0 / 29.0);
}

double encode_srgb(double lin) {
  return lin <= 0.0031308 ? 12.92 * lin : 1.055 * std::pow(lin, 1.0 / 2.4) - 0.055;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

void convert_pixel(const RgbImage& img, LabImage& out, std::size_t i) {
  double L, A, B;
  srgb_to_lab(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2], L, A, B);
  out.l[i] = static_cast<float>(L);
  out.a[i] = static_cast<float>(A);
  out.b[i] = static_cast<float>(B);
}

void check_rgb(const RgbImage& img) {
  if (img.width < 1 || img.height < 1 || img.data.size() != img.pixel_count() * 3)
    fail(Errc::BadDimensions, "RgbImage: data length does not match dimensions");
}

}  // namespace

RgbImage::RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

RgbImage::RgbImage(int w, int h, std::vector<std::uint8_t> pixels)
    : width(w), height(h), data(std::move(pixels)) {
  check_rgb(*this);
}

LabImage LabImage::blank(int w, int h, bool with_ab) {
  LabImage img;
  img.width = w;
  img.height = h;
  const auto n = static_cast<std::size_t>(w) * h;
  img.l.assign(n, 0.0f);
  img.has_ab = with_ab;
  if (with_ab) {
    img.a.assign(n, 0.0f);
    img.b.assign(n, 0.0f);
  }
  return img;
}

void srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b, double& L, double& A, double& B) {
  const auto& k = constants();
  const double lr = k.decode[r], lg = k.decode[g], lb = k.decode[b];
  const double x = kM[0][0] * lr + kM[0][1] * lg + kM[0][2] * lb;
  const double y = kM[1][0] * lr + kM[1][1] * lg + kM[1][2] * lb;
  const double z = kM[2][0] * lr + kM[2][1] * lg + kM[2][2] * lb;
  const double fx = lab_f(x / k.white[0]);
  const double fy = lab_f(y / k.white[1]);
  const double fz = lab_f(z / k.white[2]);
  L = 116.0 * fy - 16.0;
  A = 500.0 * (fx - fy);
  B = 200.0 * (fy - fz);
}

void lab_to_srgb(double L, double A, double B, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
  const auto& k = constants();
  const double fy = (L + 16.0) / 116.0;
  const double fx = fy + A / 500.0;
  const double fz = fy - B / 200.0;
  const double x = k.white[0] * lab_f_inv(fx);
  const double y = k.white[1] * lab_f_inv(fy);
  const double z = k.white[2] * lab_f_inv(fz);
  double lin[3];
  for (int c = 0; c < 3; ++c) lin[c] = k.inv[c][0] * x + k.inv[c][1] * y + k.inv[c][2] * z;
  r = to_byte(encode_srgb(std::clamp(lin[0], 0.0, 1.0)));
  g = to_byte(encode_srgb(std::clamp(lin[1], 0.0, 1.0)));
  b = to_byte(encode_srgb(std::clamp(lin[2], 0.0, 1.0)));
}

LabImage rgb_to_lab_serial(const RgbImage& img) {
  check_rgb(img);
  LabImage out = LabImage::blank(img.width, img.height, true);
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) convert_pixel(img, out, i);
  return out;
}

LabImage rgb_to_lab(const RgbImage& img) {
  check_rgb(img);
  LabImage out = LabImage::blank(img.width, img.height, true);
  const auto n = static_cast<std::ptrdiff_t>(img.pixel_count());
  CDJP_PARALLEL_FOR
  for (std::ptrdiff_t i = 0; i < n; ++i) convert_pixel(img, out, static_cast<std::size_t>(i));
  return out;
}

RgbImage lab_to_rgb(const LabImage& img) {
  if (!img.has_ab) fail(Errc::MissingChannels, "lab_to_rgb: ab planes absent");
  RgbImage out(img.width, img.height);
  const auto n = static_cast<std::ptrdiff_t>(img.pixel_count());
  CDJP_PARALLEL_FOR
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double L = img.has_l ? img.l[i] : 0.0;
    lab_to_srgb(L, img.a[i], img.b[i], out.data[3 * i], out.data[3 * i + 1], out.data[3 * i + 2]);
  }
  return out;
}

LabImage drop_channels(const LabImage& img, ChannelKeep mode) {
  LabImage out = img;
  if (mode == ChannelKeep::keep_l) {
    out.has_ab = false;
    out.a.clear();
    out.b.clear();
    out.a.shrink_to_fit();
    out.b.shrink_to_fit();
  } else {
    std::fill(out.l.begin(), out.l.end(), 0.0f);
    out.has_l = false;
  }
  return out;
}

LabImage crop(const LabImage& img, int x0, int y0, int w, int h) {
  LabImage out;
  out.width = w;
  out.height = h;
  out.has_l = img.has_l;
  out.has_ab = img.has_ab;
  const auto n = static_cast<std::size_t>(w) * h;
  out.l.resize(n);
  if (img.has_ab) {
    out.a.resize(n);
    out.b.resize(n);
  }
  for (int y = 0; y < h; ++y) {
    const std::size_t src = img.index(x0, y0 + y);
    const std::size_t dst = static_cast<std::size_t>(y) * w;
    std::copy_n(img.l.begin() + src, w, out.l.begin() + dst);
    if (img.has_ab) {
      std::copy_n(img.a.begin() + src, w, out.a.begin() + dst);
      std::copy_n(img.b.begin() + src, w, out.b.begin() + dst);
    }
  }
  return out;
}

}  // namespace cdjp
