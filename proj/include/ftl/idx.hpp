#ifndef FTL_IDX_HPP
#define FTL_IDX_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ftl/errors.hpp"
#include "ftl/image.hpp"

namespace ftl {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxDataset {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> images;  // count*rows*cols, normalized to [0,1]
  std::vector<int> labels;

  Image image(int i) const {
    Image img(rows, cols);
    const size_t off = static_cast<size_t>(i) * rows * cols;
    std::copy(images.begin() + static_cast<long>(off),
              images.begin() + static_cast<long>(off) + rows * cols,
              img.pixels.begin());
    return img;
  }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError("idx: truncated file while reading " + what);
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace detail

/// Big-endian IDX pair (images + labels), pixels normalized to [0,1].
inline IdxDataset load_idx(const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path) {
  std::ifstream img_in(images_path, std::ios::binary);
  if (!img_in) throw DataError("idx: cannot open " + images_path.string());
  const std::uint32_t img_magic = detail::read_be32(img_in, "image magic");
  if (img_magic != kIdxImageMagic)
    throw DataError("idx: bad image magic " + detail::hex32(img_magic) +
                    " (expected " + detail::hex32(kIdxImageMagic) + ") in " +
                    images_path.string());
  const std::uint32_t count = detail::read_be32(img_in, "image count");
  const std::uint32_t rows = detail::read_be32(img_in, "row count");
  const std::uint32_t cols = detail::read_be32(img_in, "column count");

  std::ifstream lbl_in(labels_path, std::ios::binary);
  if (!lbl_in) throw DataError("idx: cannot open " + labels_path.string());
  const std::uint32_t lbl_magic = detail::read_be32(lbl_in, "label magic");
  if (lbl_magic != kIdxLabelMagic)
    throw DataError("idx: bad label magic " + detail::hex32(lbl_magic) +
                    " (expected " + detail::hex32(kIdxLabelMagic) + ") in " +
                    labels_path.string());
  const std::uint32_t lbl_count = detail::read_be32(lbl_in, "label count");
  if (lbl_count != count)
    throw DataError("idx: " + std::to_string(count) + " images but " +
                    std::to_string(lbl_count) + " labels");

  IdxDataset ds;
  ds.count = static_cast<int>(count);
  ds.rows = static_cast<int>(rows);
  ds.cols = static_cast<int>(cols);
  const size_t pixel_count = static_cast<size_t>(count) * rows * cols;
  std::vector<unsigned char> raw(pixel_count);
  if (!img_in.read(reinterpret_cast<char*>(raw.data()),
                   static_cast<std::streamsize>(pixel_count)))
    throw DataError("idx: truncated image payload in " + images_path.string() +
                    " (expected " + std::to_string(pixel_count) + " pixels)");
  ds.images.resize(pixel_count);
  for (size_t i = 0; i < pixel_count; ++i) ds.images[i] = raw[i] / 255.0;

  std::vector<unsigned char> lraw(count);
  if (!lbl_in.read(reinterpret_cast<char*>(lraw.data()),
                   static_cast<std::streamsize>(count)))
    throw DataError("idx: truncated label payload in " + labels_path.string());
  ds.labels.assign(lraw.begin(), lraw.end());
  return ds;
}

/// Writer for fixtures and generated datasets; exact inverse of load_idx for
/// byte-valued intensities.
inline void save_idx(const std::filesystem::path& images_path,
                     const std::filesystem::path& labels_path,
                     const IdxDataset& ds) {
  std::ofstream img_out(images_path, std::ios::binary);
  if (!img_out) throw DataError("idx: cannot write " + images_path.string());
  detail::write_be32(img_out, kIdxImageMagic);
  detail::write_be32(img_out, static_cast<std::uint32_t>(ds.count));
  detail::write_be32(img_out, static_cast<std::uint32_t>(ds.rows));
  detail::write_be32(img_out, static_cast<std::uint32_t>(ds.cols));
  for (double v : ds.images) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    img_out.put(static_cast<char>(
        static_cast<unsigned char>(std::lround(clamped * 255.0))));
  }
  std::ofstream lbl_out(labels_path, std::ios::binary);
  if (!lbl_out) throw DataError("idx: cannot write " + labels_path.string());
  detail::write_be32(lbl_out, kIdxLabelMagic);
  detail::write_be32(lbl_out, static_cast<std::uint32_t>(ds.count));
  for (int l : ds.labels)
    lbl_out.put(static_cast<char>(static_cast<unsigned char>(l)));
  if (!img_out || !lbl_out) throw DataError("idx: write failure");
}

}  // namespace ftl

#endif  // FTL_IDX_HPP
