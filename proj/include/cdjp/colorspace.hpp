#pragma once

#include <cstdint>
#include <vector>

namespace cdjp {

/// Row-major 8-bit RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h);
  RgbImage(int w, int h, std::vector<std::uint8_t> pixels);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t* at(int x, int y) { return data.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const {
    return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
};

/// Planar CIELAB image. `has_ab == false` marks a decolorized image and the a/b
/// planes are then empty. `has_l == false` marks an L-dropped image whose l
/// plane is all zeros.
struct LabImage {
  int width = 0;
  int height = 0;
  std::vector<float> l;
  std::vector<float> a;
  std::vector<float> b;
  bool has_l = true;
  bool has_ab = true;

  static LabImage blank(int w, int h, bool with_ab);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool operator==(const LabImage&) const = default;
};

enum class ChannelKeep { keep_l, keep_ab };

LabImage rgb_to_lab(const RgbImage& img);
/// Serial reference for rgb_to_lab.
LabImage rgb_to_lab_serial(const RgbImage& img);

/// Throws Errc::MissingChannels when the ab planes are absent.
RgbImage lab_to_rgb(const LabImage& img);

LabImage drop_channels(const LabImage& img, ChannelKeep mode);

/// Per-pixel conversions (64-bit internally).
void srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b, double& L, double& A, double& B);
void lab_to_srgb(double L, double A, double B, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

/// Crop `w`x`h` at (x0, y0). No bounds clamping; caller guarantees fit.
LabImage crop(const LabImage& img, int x0, int y0, int w, int h);

}  // namespace cdjp
