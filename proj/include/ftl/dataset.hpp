#ifndef FTL_DATASET_HPP
#define FTL_DATASET_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftl/errors.hpp"
#include "ftl/family_json.hpp"
#include "ftl/glyphs.hpp"
#include "ftl/image.hpp"
#include "ftl/transform.hpp"

namespace ftl {

/// One supervised example: a posed view, the same view after a relative
/// transform, and the parameters of that transform. `label` carries the glyph
/// class for synthetic data.
struct TrainingTriple {
  Image x;
  Image x_t;
  TransformParams params;
  int label = -1;
};

/// Image-space realization of family parameters. Supported dofs are the
/// planar ones: a circle dof named "rotation" and interval dofs "scale-x" /
/// "scale-y". Sphere dofs have no planar warp and are rejected.
inline WarpParams warp_params_from(const TransformFamily& family,
                                   const TransformParams& params) {
  WarpParams w;
  for (const DofSpec& d : family.dofs) {
    const std::vector<double>& v = detail::dof_values(params, d);
    if (d.domain == DofDomain::Sphere)
      throw ValueError("warp: sphere dof '" + d.name + "' has no planar warp");
    if (d.name == "rotation" && d.domain == DofDomain::Circle) {
      w.rotation = v[0];
    } else if (d.name == "scale-x" && d.domain == DofDomain::Interval) {
      w.scale_x = v[0];
    } else if (d.name == "scale-y" && d.domain == DofDomain::Interval) {
      w.scale_y = v[0];
    } else {
      throw ValueError("warp: dof '" + d.name + "' has no image-space meaning");
    }
  }
  return w;
}

/// Draws a glyph and an absolute pose, renders the view, then draws relative
/// parameters uniform over the family's domains and renders the transformed
/// view. Fully deterministic given the rng state.
inline TrainingTriple sample_triple(std::mt19937_64& rng,
                                    const TransformFamily& family,
                                    const std::vector<Glyph>& pool,
                                    int resolution) {
  if (pool.empty()) throw ValueError("sample_triple: empty glyph pool");
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  const size_t which = pick(rng);

  TrainingTriple t;
  t.label = static_cast<int>(which);
  const Image canonical = rasterize(pool[which], resolution);
  const TransformParams absolute = sample_params(family, rng);
  t.x = warp(canonical, warp_params_from(family, absolute));
  t.params = sample_params(family, rng);
  check_params_in_domain(family, t.params);
  t.x_t = warp(t.x, warp_params_from(family, t.params));
  return t;
}

inline std::vector<TrainingTriple> sample_triples(std::mt19937_64& rng,
                                                  const TransformFamily& family,
                                                  const std::vector<Glyph>& pool,
                                                  int resolution, int count) {
  std::vector<TrainingTriple> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(sample_triple(rng, family, pool, resolution));
  return out;
}

// ---------------------------------------------------------------------------
// Labeled image sets
// ---------------------------------------------------------------------------

struct LabeledImages {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<double> angles;  // rotation applied per item, diagnostics only
};

/// Rotates every image by an independent uniform angle on the circle and
/// records the angle. The angle is never an input to any classifier.
inline LabeledImages make_rotated_set(const LabeledImages& in, std::mt19937_64& rng) {
  LabeledImages out;
  out.labels = in.labels;
  out.images.reserve(in.images.size());
  out.angles.reserve(in.images.size());
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  for (const Image& img : in.images) {
    const double a = angle(rng);
    out.images.push_back(warp(img, WarpParams{a, 1.0, 1.0}));
    out.angles.push_back(a);
  }
  return out;
}

/// Renders `per_class` copies of every glyph in the pool at canonical pose.
inline LabeledImages render_glyph_set(const std::vector<Glyph>& pool,
                                      int resolution, int per_class) {
  LabeledImages out;
  for (size_t c = 0; c < pool.size(); ++c) {
    const Image img = rasterize(pool[c], resolution);
    for (int i = 0; i < per_class; ++i) {
      out.images.push_back(img);
      out.labels.push_back(static_cast<int>(c));
      out.angles.push_back(0.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// On-disk dataset directories
// ---------------------------------------------------------------------------
//
// A directory of raw little-endian arrays plus manifest.json:
//   x.f64       count * res * res doubles, source views
//   xt.f64      count * res * res doubles, transformed views
//   params.f64  count * param_width doubles, flattened per family dof order
//   labels.u32  count 32-bit labels
// The manifest records count, resolution, family, seed, ranges, and the file
// table. Writes are byte-deterministic for a fixed dataset.

namespace detail {

inline void write_f64(const std::filesystem::path& path,
                      const std::vector<double>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("dataset: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw DataError("dataset: write failure on " + path.string());
}

inline std::vector<double> read_f64(const std::filesystem::path& path,
                                    size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("dataset: cannot open " + path.string());
  std::vector<double> data(expected);
  if (!in.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(expected * sizeof(double))))
    throw DataError("dataset: truncated " + path.string() + " (expected " +
                    std::to_string(expected) + " doubles)");
  return data;
}

inline int family_param_width(const TransformFamily& family) {
  int w = 0;
  for (const DofSpec& d : family.dofs) w += d.domain == DofDomain::Sphere ? 2 : 1;
  return w;
}

}  // namespace detail

inline void export_dataset(const std::filesystem::path& dir,
                           const std::vector<TrainingTriple>& triples,
                           const TransformFamily& family, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  if (triples.empty()) throw ValueError("export_dataset: no triples");
  const int res = triples.front().x.height;
  const int pw = detail::family_param_width(family);

  std::vector<double> x, xt, params;
  std::vector<std::uint32_t> labels;
  x.reserve(triples.size() * static_cast<size_t>(res) * res);
  for (const TrainingTriple& t : triples) {
    x.insert(x.end(), t.x.pixels.begin(), t.x.pixels.end());
    xt.insert(xt.end(), t.x_t.pixels.begin(), t.x_t.pixels.end());
    for (const DofSpec& d : family.dofs) {
      const std::vector<double>& v = detail::dof_values(t.params, d);
      params.insert(params.end(), v.begin(),
                    v.begin() + (d.domain == DofDomain::Sphere ? 2 : 1));
    }
    labels.push_back(static_cast<std::uint32_t>(t.label));
  }
  detail::write_f64(dir / "x.f64", x);
  detail::write_f64(dir / "xt.f64", xt);
  detail::write_f64(dir / "params.f64", params);
  {
    std::ofstream out(dir / "labels.u32", std::ios::binary);
    if (!out) throw DataError("dataset: cannot write labels.u32");
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size() * sizeof(std::uint32_t)));
  }

  nlohmann::json ranges = nlohmann::json::object();
  for (const DofSpec& d : family.dofs) {
    if (d.domain == DofDomain::Interval)
      ranges[d.name] = {{"lo", d.lo}, {"hi", d.hi}};
    else if (d.domain == DofDomain::Circle)
      ranges[d.name] = {{"lo", 0.0}, {"hi", kTwoPi}};
  }
  nlohmann::json manifest = {
      {"format_version", 1},
      {"count", triples.size()},
      {"resolution", res},
      {"param_width", pw},
      {"seed", seed},
      {"family", family_to_json(family)},
      {"ranges", ranges},
      {"arrays",
       {{"x", "x.f64"}, {"xt", "xt.f64"}, {"params", "params.f64"},
        {"labels", "labels.u32"}}},
  };
  std::ofstream mout(dir / "manifest.json");
  if (!mout) throw DataError("dataset: cannot write manifest.json");
  mout << manifest.dump(2) << "\n";
}

inline std::vector<TrainingTriple> import_dataset(const std::filesystem::path& dir,
                                                  TransformFamily& family_out) {
  namespace fs = std::filesystem;
  std::ifstream min(dir / "manifest.json");
  if (!min) throw DataError("dataset: missing manifest.json in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(min, nullptr, false);
  if (manifest.is_discarded())
    throw DataError("dataset: malformed manifest.json in " + dir.string());
  size_t count = 0;
  int res = 0, pw = 0;
  try {
    count = manifest.at("count").get<size_t>();
    res = manifest.at("resolution").get<int>();
    pw = manifest.at("param_width").get<int>();
    family_out = family_from_json(manifest.at("family"));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("dataset: manifest field error: ") + ex.what());
  }
  if (pw != detail::family_param_width(family_out))
    throw DataError("dataset: param_width " + std::to_string(pw) +
                    " does not match the manifest family");

  const size_t px = count * static_cast<size_t>(res) * res;
  auto x = detail::read_f64(dir / "x.f64", px);
  auto xt = detail::read_f64(dir / "xt.f64", px);
  auto params = detail::read_f64(dir / "params.f64", count * static_cast<size_t>(pw));
  std::vector<std::uint32_t> labels(count);
  {
    std::ifstream in(dir / "labels.u32", std::ios::binary);
    if (!in || !in.read(reinterpret_cast<char*>(labels.data()),
                        static_cast<std::streamsize>(count * sizeof(std::uint32_t))))
      throw DataError("dataset: truncated labels.u32");
  }

  std::vector<TrainingTriple> out(count);
  for (size_t i = 0; i < count; ++i) {
    TrainingTriple& t = out[i];
    t.x = Image(res, res);
    t.x_t = Image(res, res);
    const size_t off = i * static_cast<size_t>(res) * res;
    std::copy(x.begin() + static_cast<long>(off),
              x.begin() + static_cast<long>(off + static_cast<size_t>(res) * res),
              t.x.pixels.begin());
    std::copy(xt.begin() + static_cast<long>(off),
              xt.begin() + static_cast<long>(off + static_cast<size_t>(res) * res),
              t.x_t.pixels.begin());
    size_t p = i * static_cast<size_t>(pw);
    for (const DofSpec& d : family_out.dofs) {
      const int n = d.domain == DofDomain::Sphere ? 2 : 1;
      std::vector<double> v(params.begin() + static_cast<long>(p),
                            params.begin() + static_cast<long>(p) + n);
      t.params.values[d.name] = std::move(v);
      p += static_cast<size_t>(n);
    }
    t.label = static_cast<int>(labels[i]);
  }
  return out;
}

}  // namespace ftl

#endif  // FTL_DATASET_HPP
