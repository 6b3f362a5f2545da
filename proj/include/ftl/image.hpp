#ifndef FTL_IMAGE_HPP
#define FTL_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ftl/errors.hpp"

namespace ftl {

/// Single-channel raster, intensities in [0,1], row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w, 0.0) {}

  double at(int i, int j) const { return pixels[static_cast<size_t>(i) * width + j]; }
  double& at(int i, int j) { return pixels[static_cast<size_t>(i) * width + j]; }
  long size() const { return static_cast<long>(pixels.size()); }

  double mean() const {
    double acc = 0.0;
    for (double v : pixels) acc += v;
    return pixels.empty() ? 0.0 : acc / static_cast<double>(pixels.size());
  }
};

inline double mean_abs_diff(const Image& a, const Image& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i)
    acc += std::fabs(a.pixels[i] - b.pixels[i]);
  return a.pixels.empty() ? 0.0 : acc / static_cast<double>(a.pixels.size());
}

/// Image-space transform parameters: scaling in the canonical frame followed
/// by a rotation about the image center.
struct WarpParams {
  double rotation = 0.0;
  double scale_x = 1.0;
  double scale_y = 1.0;
};

/// Inverse-map bilinear resampling about the image center. Samples falling
/// outside the source are zero. Identity parameters reproduce the input
/// bit-exactly because the sample grid then lands on integer coordinates.
inline Image warp(const Image& img, const WarpParams& p) {
  if (!(p.scale_x > 0.0) || !(p.scale_y > 0.0))
    throw ValueError("warp: scales must be positive, got (" +
                     std::to_string(p.scale_x) + "," + std::to_string(p.scale_y) + ")");
  if (img.height != img.width)
    throw ValueError("warp: expected a square image, got " +
                     std::to_string(img.height) + "x" + std::to_string(img.width));
  const int n = img.height;
  const double c = (n - 1) / 2.0;
  const double cos_t = std::cos(p.rotation), sin_t = std::sin(p.rotation);
  Image out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      // Forward map is rotate(scale(src)); invert: unrotate then unscale.
      const double dx = j - c, dy = i - c;
      const double rx = cos_t * dx + sin_t * dy;
      const double ry = -sin_t * dx + cos_t * dy;
      const double sx = rx / p.scale_x + c;
      const double sy = ry / p.scale_y + c;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const double ax = sx - fx, ay = sy - fy;
      auto sample = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= n || xx < 0 || xx >= n) return 0.0;
        return img.at(yy, xx);
      };
      const double top = sample(y0, x0) * (1.0 - ax) + sample(y0, x0 + 1) * ax;
      const double bot = sample(y0 + 1, x0) * (1.0 - ax) + sample(y0 + 1, x0 + 1) * ax;
      out.at(i, j) = top * (1.0 - ay) + bot * ay;
    }
  }
  return out;
}

/// Binary PGM (P5), 8-bit, values rounded from [0,1].
inline void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_pgm: cannot open " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  for (double v : img.pixels) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
  }
  if (!out) throw DataError("write_pgm: failed writing " + path.string());
}

inline Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_pgm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w <= 0 || h <= 0)
    throw DataError("read_pgm: unsupported header in " + path.string());
  in.get();  // single whitespace after maxval
  Image img(h, w);
  for (double& v : img.pixels) {
    const int byte = in.get();
    if (byte == EOF) throw DataError("read_pgm: truncated " + path.string());
    v = byte / 255.0;
  }
  return img;
}

}  // namespace ftl

#endif  // FTL_IMAGE_HPP
