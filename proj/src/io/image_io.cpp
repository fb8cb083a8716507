#include "cdjp/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "cdjp/error.hpp"

namespace cdjp {
namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) fail(Errc::Io, "cannot open " + path);
  return f;
}

RgbImage read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) fail(Errc::Format, path + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(Errc::Format, path + ": " + image.message);
  }
  return RgbImage(static_cast<int>(image.width), static_cast<int>(image.height), std::move(pixels));
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RgbImage read_jpeg(const std::string& path) {
  auto file = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> pixels;
  int w = 0, h = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail(Errc::Format, path + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return RgbImage(w, h, std::move(pixels));
}

}  // namespace

RgbImage read_image(const std::string& path) {
  unsigned char sig[8] = {};
  {
    auto f = open_file(path, "rb");
    if (std::fread(sig, 1, sizeof sig, f.get()) < 3) fail(Errc::Format, path + ": too short to be an image");
  }
  if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return read_jpeg(path);
  fail(Errc::Format, path + ": not a PNG or JPEG file");
}

void write_png(const std::string& path, const RgbImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.data.data(), 0, nullptr))
    fail(Errc::Io, path + ": " + image.message);
}

RgbImage center_square(const RgbImage& img, int size) {
  if (img.width <= 0 || img.height <= 0 || size <= 0) fail(Errc::BadDimensions, "center_square: empty image");
  const int side = std::min(img.width, img.height);
  const int x0 = (img.width - side) / 2, y0 = (img.height - side) / 2;
  RgbImage out(size, size);
  const double scale = static_cast<double>(side) / size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double acc[3] = {0, 0, 0};
      if (scale >= 1.0) {
        // Box filter over the source footprint.
        const int sx0 = static_cast<int>(std::floor(x * scale)), sx1 = std::max(sx0 + 1, static_cast<int>(std::floor((x + 1) * scale)));
        const int sy0 = static_cast<int>(std::floor(y * scale)), sy1 = std::max(sy0 + 1, static_cast<int>(std::floor((y + 1) * scale)));
        for (int sy = sy0; sy < sy1; ++sy)
          for (int sx = sx0; sx < sx1; ++sx) {
            const auto* p = img.at(x0 + std::min(sx, side - 1), y0 + std::min(sy, side - 1));
            for (int c = 0; c < 3; ++c) acc[c] += p[c];
          }
        const double inv = 1.0 / ((sx1 - sx0) * (sy1 - sy0));
        for (auto& v : acc) v *= inv;
      } else {
        const double fx = std::clamp((x + 0.5) * scale - 0.5, 0.0, side - 1.0);
        const double fy = std::clamp((y + 0.5) * scale - 0.5, 0.0, side - 1.0);
        const int ix = std::min(static_cast<int>(fx), side - 2 < 0 ? 0 : side - 2);
        const int iy = std::min(static_cast<int>(fy), side - 2 < 0 ? 0 : side - 2);
        const int jx = std::min(ix + 1, side - 1), jy = std::min(iy + 1, side - 1);
        const double tx = fx - ix, ty = fy - iy;
        for (int c = 0; c < 3; ++c) {
          const double top = img.at(x0 + ix, y0 + iy)[c] * (1 - tx) + img.at(x0 + jx, y0 + iy)[c] * tx;
          const double bot = img.at(x0 + ix, y0 + jy)[c] * (1 - tx) + img.at(x0 + jx, y0 + jy)[c] * tx;
          acc[c] = top * (1 - ty) + bot * ty;
        }
      }
      auto* q = out.at(x, y);
      for (int c = 0; c < 3; ++c) q[c] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[c]), 0L, 255L));
    }
  }
  return out;
}

}  // namespace cdjp
