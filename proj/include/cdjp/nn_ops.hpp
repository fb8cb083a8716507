#pragma once

// Dense CHW kernels used by the reference network. Each parallel kernel keeps
// a naive serial twin (suffix _ref) for testing and benchmarking.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "cdjp/parallel.hpp"

namespace cdjp::nn {

struct ConvGeom {
  int in_c = 1, in_h = 1, in_w = 1;
  int out_c = 1;
  int kernel = 3, stride = 1, pad = 0;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t weight_count() const { return static_cast<std::size_t>(out_c) * in_c * kernel * kernel; }
};

/// out[co] = b[co] + Σ W[co][ci][ky][kx] * in[ci][oy*s-p+ky][ox*s-p+kx]
template <typename T>
void conv2d_forward_ref(const ConvGeom& g, const T* in, const T* w, const T* b, T* out) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int co = 0; co < g.out_c; ++co)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        T acc = b[co];
        for (int ci = 0; ci < g.in_c; ++ci)
          for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
              const int iy = oy * g.stride - g.pad + ky, ix = ox * g.stride - g.pad + kx;
              if (iy < 0 || ix < 0 || iy >= g.in_h || ix >= g.in_w) continue;
              acc += w[((static_cast<std::size_t>(co) * g.in_c + ci) * g.kernel + ky) * g.kernel + kx] *
                     in[(static_cast<std::size_t>(ci) * g.in_h + iy) * g.in_w + ix];
            }
        out[(static_cast<std::size_t>(co) * oh + oy) * ow + ox] = acc;
      }
}

namespace detail {

// Valid output range [lo, hi) for kernel tap `k` along one axis.
inline void tap_range(int k, int stride, int pad, int in, int out, int& lo, int& hi) {
  lo = 0;
  while (lo < out && lo * stride - pad + k < 0) ++lo;
  hi = out;
  while (hi > lo && (hi - 1) * stride - pad + k >= in) --hi;
}

template <typename T>
void conv2d_forward_channel(const ConvGeom& g, const T* in, const T* w, const T* b, T* out, int co) {
  const int oh = g.out_h(), ow = g.out_w();
  T* dst = out + static_cast<std::size_t>(co) * oh * ow;
  std::fill(dst, dst + static_cast<std::size_t>(oh) * ow, b[co]);
  for (int ci = 0; ci < g.in_c; ++ci) {
    const T* src = in + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.kernel; ++ky) {
      int y0, y1;
      tap_range(ky, g.stride, g.pad, g.in_h, oh, y0, y1);
      for (int kx = 0; kx < g.kernel; ++kx) {
        int x0, x1;
        tap_range(kx, g.stride, g.pad, g.in_w, ow, x0, x1);
        const T wv = w[((static_cast<std::size_t>(co) * g.in_c + ci) * g.kernel + ky) * g.kernel + kx];
        for (int oy = y0; oy < y1; ++oy) {
          const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(oy * g.stride - g.pad + ky) * g.in_w - g.pad + kx;
          T* o = dst + static_cast<std::size_t>(oy) * ow;
          for (int ox = x0; ox < x1; ++ox) o[ox] += wv * src[base + ox * g.stride];
        }
      }
    }
  }
}

}  // namespace detail

/// Same contract as conv2d_forward_ref, parallel over output channels.
template <typename T>
void conv2d_forward(const ConvGeom& g, const T* in, const T* w, const T* b, T* out) {
  CDJP_PARALLEL_FOR
  for (int co = 0; co < g.out_c; ++co) detail::conv2d_forward_channel(g, in, w, b, out, co);
}

template <typename T>
void conv2d_forward_serial(const ConvGeom& g, const T* in, const T* w, const T* b, T* out) {
  for (int co = 0; co < g.out_c; ++co) detail::conv2d_forward_channel(g, in, w, b, out, co);
}

/// Accumulates into dw/db and writes d_in (may be null to skip).
template <typename T>
void conv2d_backward(const ConvGeom& g, const T* in, const T* w, const T* d_out, T* d_in, T* dw, T* db) {
  const int oh = g.out_h(), ow = g.out_w();
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;
  CDJP_PARALLEL_FOR
  for (int co = 0; co < g.out_c; ++co) {
    const T* go = d_out + co * plane;
    T bsum{0};
    for (std::size_t i = 0; i < plane; ++i) bsum += go[i];
    db[co] += bsum;
    for (int ci = 0; ci < g.in_c; ++ci) {
      const T* src = in + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
      for (int ky = 0; ky < g.kernel; ++ky) {
        int y0, y1;
        detail::tap_range(ky, g.stride, g.pad, g.in_h, oh, y0, y1);
        for (int kx = 0; kx < g.kernel; ++kx) {
          int x0, x1;
          detail::tap_range(kx, g.stride, g.pad, g.in_w, ow, x0, x1);
          T acc{0};
          for (int oy = y0; oy < y1; ++oy) {
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(oy * g.stride - g.pad + ky) * g.in_w - g.pad + kx;
            const T* o = go + static_cast<std::size_t>(oy) * ow;
            for (int ox = x0; ox < x1; ++ox) acc += o[ox] * src[base + ox * g.stride];
          }
          dw[((static_cast<std::size_t>(co) * g.in_c + ci) * g.kernel + ky) * g.kernel + kx] += acc;
        }
      }
    }
  }
  if (!d_in) return;
  CDJP_PARALLEL_FOR
  for (int ci = 0; ci < g.in_c; ++ci) {
    T* dst = d_in + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    std::fill(dst, dst + static_cast<std::size_t>(g.in_h) * g.in_w, T{0});
    for (int co = 0; co < g.out_c; ++co) {
      const T* go = d_out + co * plane;
      for (int ky = 0; ky < g.kernel; ++ky) {
        int y0, y1;
        detail::tap_range(ky, g.stride, g.pad, g.in_h, oh, y0, y1);
        for (int kx = 0; kx < g.kernel; ++kx) {
          int x0, x1;
          detail::tap_range(kx, g.stride, g.pad, g.in_w, ow, x0, x1);
          const T wv = w[((static_cast<std::size_t>(co) * g.in_c + ci) * g.kernel + ky) * g.kernel + kx];
          for (int oy = y0; oy < y1; ++oy) {
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(oy * g.stride - g.pad + ky) * g.in_w - g.pad + kx;
            const T* o = go + static_cast<std::size_t>(oy) * ow;
            for (int ox = x0; ox < x1; ++ox) dst[base + ox * g.stride] += wv * o[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void relu_inplace(std::span<T> x) {
  for (auto& v : x)
    if (v < T{0}) v = T{0};  // NaN passes through so the finiteness check can see it
}

/// Zeroes gradient entries whose forward output was not positive.
template <typename T>
void relu_backward(std::span<const T> activated, std::span<T> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(activated[i] > T{0})) grad[i] = T{0};
}

/// y = W x + b with W stored [out][in].
template <typename T>
void dense_forward(int in, int out, const T* x, const T* w, const T* b, T* y) {
  for (int o = 0; o < out; ++o) {
    T acc = b[o];
    const T* row = w + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

template <typename T>
void dense_backward(int in, int out, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  if (dx) std::fill(dx, dx + in, T{0});
  for (int o = 0; o < out; ++o) {
    const T* row = w + static_cast<std::size_t>(o) * in;
    T* drow = dw + static_cast<std::size_t>(o) * in;
    db[o] += dy[o];
    for (int i = 0; i < in; ++i) {
      drow[i] += dy[o] * x[i];
      if (dx) dx[i] += dy[o] * row[i];
    }
  }
}

/// Adaptive average pooling of a C x H x W map to C x S x S.
template <typename T>
void adaptive_avg_pool(int c, int h, int w, int s, const T* in, T* out) {
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < s; ++oy) {
      const int y0 = (oy * h) / s, y1 = ((oy + 1) * h + s - 1) / s;
      for (int ox = 0; ox < s; ++ox) {
        const int x0 = (ox * w) / s, x1 = ((ox + 1) * w + s - 1) / s;
        T acc{0};
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) acc += in[(static_cast<std::size_t>(ch) * h + y) * w + x];
        out[(static_cast<std::size_t>(ch) * s + oy) * s + ox] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
}

template <typename T>
void adaptive_avg_pool_backward(int c, int h, int w, int s, const T* d_out, T* d_in) {
  std::fill(d_in, d_in + static_cast<std::size_t>(c) * h * w, T{0});
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < s; ++oy) {
      const int y0 = (oy * h) / s, y1 = ((oy + 1) * h + s - 1) / s;
      for (int ox = 0; ox < s; ++ox) {
        const int x0 = (ox * w) / s, x1 = ((ox + 1) * w + s - 1) / s;
        const T g = d_out[(static_cast<std::size_t>(ch) * s + oy) * s + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) d_in[(static_cast<std::size_t>(ch) * h + y) * w + x] += g;
      }
    }
}

template <typename T>
void global_avg_pool(int c, int plane, const T* in, T* out) {
  for (int ch = 0; ch < c; ++ch) {
    T acc{0};
    for (int i = 0; i < plane; ++i) acc += in[static_cast<std::size_t>(ch) * plane + i];
    out[ch] = acc / static_cast<T>(plane);
  }
}

template <typename T>
void global_avg_pool_backward(int c, int plane, const T* d_out, T* d_in) {
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < plane; ++i) d_in[static_cast<std::size_t>(ch) * plane + i] = d_out[ch] / static_cast<T>(plane);
}

/// C x N (channel-major) to N x C (cell-major), and back.
template <typename T>
void to_cell_major(int c, int n, const T* in, T* out) {
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i) * c + ch] = in[static_cast<std::size_t>(ch) * n + i];
}

template <typename T>
void to_channel_major(int c, int n, const T* in, T* out) {
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(ch) * n + i] = in[static_cast<std::size_t>(i) * c + ch];
}

}  // namespace cdjp::nn
