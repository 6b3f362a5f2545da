#ifndef FTL_GLYPHS_HPP
#define FTL_GLYPHS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "ftl/errors.hpp"
#include "ftl/image.hpp"

namespace ftl {

/// Procedural glyph catalog. Shapes are chosen to be mutually distinguishable
/// under rotation and mild anisotropic scaling; everything fits inside radius
/// 0.62 of the canonical [-1,1]^2 frame so warped copies stay in view.
enum class GlyphShape {
  Bar,
  Ell,
  Tee,
  Cross,
  Ring,
  DiscNotch,
  Wedge,
  Zigzag,
  Dumbbell,
  Arrow,
};

inline constexpr int kGlyphClassCount = 10;

inline const char* glyph_name(GlyphShape s) {
  switch (s) {
    case GlyphShape::Bar: return "bar";
    case GlyphShape::Ell: return "ell";
    case GlyphShape::Tee: return "tee";
    case GlyphShape::Cross: return "cross";
    case GlyphShape::Ring: return "ring";
    case GlyphShape::DiscNotch: return "disc-notch";
    case GlyphShape::Wedge: return "wedge";
    case GlyphShape::Zigzag: return "zigzag";
    case GlyphShape::Dumbbell: return "dumbbell";
    case GlyphShape::Arrow: return "arrow";
  }
  return "?";
}

struct Glyph {
  GlyphShape shape = GlyphShape::Bar;
  double stroke = 0.10;  // half-thickness of strokes, canonical units
  double aspect = 1.0;   // stretch of the dominant axis
};

namespace detail {

inline double seg_dist(double x, double y, double x0, double y0, double x1,
                       double y1) {
  const double vx = x1 - x0, vy = y1 - y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((x - x0) * vx + (y - y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double px = x0 + t * vx, py = y0 + t * vy;
  return std::hypot(x - px, y - py);
}

inline bool in_rect(double x, double y, double cx, double cy, double hx, double hy) {
  return std::fabs(x - cx) <= hx && std::fabs(y - cy) <= hy;
}

inline bool glyph_inside(const Glyph& g, double x, double y) {
  const double s = g.stroke;
  const double a = g.aspect;
  const double r = std::hypot(x, y);
  switch (g.shape) {
    case GlyphShape::Bar:
      return in_rect(x, y, 0, 0, 0.55 * a, s);
    case GlyphShape::Ell:
      return in_rect(x, y, -0.35, 0.0, s, 0.45 * a) ||
             in_rect(x, y, 0.0, -0.45, 0.35, s);
    case GlyphShape::Tee:
      return in_rect(x, y, 0.0, 0.45, 0.45 * a, s) ||
             in_rect(x, y, 0.0, 0.0, s, 0.45);
    case GlyphShape::Cross:
      return in_rect(x, y, 0, 0, 0.55 * a, s) || in_rect(x, y, 0, 0, s, 0.55);
    case GlyphShape::Ring:
      return r >= 0.38 - s && r <= 0.38 + s;
    case GlyphShape::DiscNotch: {
      if (r > 0.48) return false;
      const double ang = std::atan2(y, x);
      return !(std::fabs(ang) < 0.5 && r > 0.15);
    }
    case GlyphShape::Wedge: {
      // Filled triangle (-0.5,-0.4) (0.55,0) (-0.5,0.4), stretched by aspect.
      const double xx = x / a;
      if (xx < -0.5 || xx > 0.55) return false;
      const double half = 0.4 * (0.55 - xx) / 1.05;
      return std::fabs(y) <= half;
    }
    case GlyphShape::Zigzag:
      return seg_dist(x, y, -0.5 * a, -0.4, -0.15 * a, 0.4) <= s ||
             seg_dist(x, y, -0.15 * a, 0.4, 0.15 * a, -0.4) <= s ||
             seg_dist(x, y, 0.15 * a, -0.4, 0.5 * a, 0.4) <= s;
    case GlyphShape::Dumbbell:
      return std::hypot(x - 0.38 * a, y) <= 0.2 || std::hypot(x + 0.38 * a, y) <= 0.2 ||
             in_rect(x, y, 0, 0, 0.38 * a, 0.5 * s);
    case GlyphShape::Arrow: {
      if (in_rect(x, y, -0.2, 0.0, 0.35 * a, s)) return true;
      const double xx = x;
      if (xx < 0.15 || xx > 0.55) return false;
      const double half = 0.3 * (0.55 - xx) / 0.4;
      return std::fabs(y) <= half;
    }
  }
  return false;
}

}  // namespace detail

/// Anti-aliased rasterization by 4x4 supersampled coverage. The canonical
/// frame maps onto the full raster; background is exactly zero.
inline Image rasterize(const Glyph& glyph, int resolution) {
  if (resolution < 4)
    throw ValueError("rasterize: resolution must be >= 4, got " +
                     std::to_string(resolution));
  constexpr int kSub = 4;
  Image img(resolution, resolution);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      int hits = 0;
      for (int si = 0; si < kSub; ++si)
        for (int sj = 0; sj < kSub; ++sj) {
          const double v = (i + (si + 0.5) / kSub) / resolution;
          const double u = (j + (sj + 0.5) / kSub) / resolution;
          const double x = 2.0 * u - 1.0;
          const double y = 1.0 - 2.0 * v;  // canonical y points up
          if (detail::glyph_inside(glyph, x, y)) ++hits;
        }
      img.at(i, j) = static_cast<double>(hits) / (kSub * kSub);
    }
  return img;
}

/// One canonical glyph per class, in class order.
inline std::vector<Glyph> default_glyph_pool() {
  std::vector<Glyph> pool;
  pool.reserve(kGlyphClassCount);
  for (int s = 0; s < kGlyphClassCount; ++s)
    pool.push_back(Glyph{static_cast<GlyphShape>(s), 0.10, 1.0});
  return pool;
}

}  // namespace ftl

#endif  // FTL_GLYPHS_HPP
