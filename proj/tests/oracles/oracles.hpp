#pragma once
// Independent reference implementations used by the tests. They share no code
// with the library beyond plain data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Straight-line sRGB -> CIELAB in long double: textbook IEC 61966-2-1
// decoding, the sRGB primaries matrix and the CIE f() with its linear toe.
// The white point is the image of RGB (1,1,1) under the same matrix.
inline std::array<long double, 3> srgb_to_lab(int r8, int g8, int b8) {
  auto decode = [](int v) {
    const long double c = v / 255.0L;
    return c <= 0.04045L ? c / 12.92L : std::pow((c + 0.055L) / 1.055L, 2.4L);
  };
  const long double r = decode(r8), g = decode(g8), b = decode(b8);
  const long double M[3][3] = {{0.4124564L, 0.3575761L, 0.1804375L},
                               {0.2126729L, 0.7151522L, 0.0721750L},
                               {0.0193339L, 0.1191920L, 0.9503041L}};
  long double xyz[3], white[3];
  for (int i = 0; i < 3; ++i) {
    xyz[i] = M[i][0] * r + M[i][1] * g + M[i][2] * b;
    white[i] = M[i][0] + M[i][1] + M[i][2];
  }
  auto f = [](long double t) {
    const long double d = 6.0L / 29.0L;
    return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0L / 29.0L;
  };
  const long double fx = f(xyz[0] / white[0]), fy = f(xyz[1] / white[1]), fz = f(xyz[2] / white[2]);
  return {116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)};
}

// In-gamut grid cells: a cell (i, j) over [-110, 110) with the given step is
// in gamut when any probed sRGB color lands in it.
inline std::set<std::pair<int, int>> gamut_cells(double step, int stride) {
  std::set<std::pair<int, int>> cells;
  for (int r = 0; r < 256; r += stride)
    for (int g = 0; g < 256; g += stride)
      for (int b = 0; b < 256; b += stride) {
        const auto lab = srgb_to_lab(r, g, b);
        const int i = static_cast<int>(std::floor((static_cast<double>(lab[1]) + 110.0) / step));
        const int j = static_cast<int>(std::floor((static_cast<double>(lab[2]) + 110.0) / step));
        cells.insert({i, j});
      }
  return cells;
}

inline int hamming(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& q) {
  int d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) d += p[i] != q[i];
  return d;
}

inline int min_pairwise_hamming(const std::vector<std::vector<std::uint8_t>>& perms) {
  int best = 1 << 30;
  for (std::size_t i = 0; i < perms.size(); ++i)
    for (std::size_t j = i + 1; j < perms.size(); ++j) best = std::min(best, hamming(perms[i], perms[j]));
  return best;
}

// Central-difference gradient of a scalar function of a parameter vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// Norm-wise relative error ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

struct Hit {
  std::string id;
  double distance;
};

// O(N) scan with a full sort; rows are used exactly as given.
inline std::vector<Hit> brute_knn(const std::vector<std::vector<float>>& rows, const std::vector<std::string>& ids,
                                  bool cosine, std::size_t query, std::size_t k) {
  std::vector<Hit> all;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double s = 0;
    for (std::size_t d = 0; d < rows[i].size(); ++d) {
      const double diff = static_cast<double>(rows[query][d]) - rows[i][d];
      s += diff * diff;
    }
    all.push_back({ids[i], cosine ? 0.5 * s : std::sqrt(s)});
  }
  std::sort(all.begin(), all.end(), [](const Hit& x, const Hit& y) {
    return x.distance != y.distance ? x.distance < y.distance : x.id < y.id;
  });
  all.resize(k);
  return all;
}

}  // namespace oracle
