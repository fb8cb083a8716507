#pragma once

#include <string>

#include "cdjp/colorspace.hpp"

namespace cdjp {

/// Decodes PNG or JPEG (by signature). Throws Errc::Io / Errc::Format.
RgbImage read_image(const std::string& path);
void write_png(const std::string& path, const RgbImage& img);

/// Center-crops to a square, then resizes to size x size with area averaging
/// when shrinking and bilinear interpolation when enlarging.
RgbImage center_square(const RgbImage& img, int size);

}  // namespace cdjp
