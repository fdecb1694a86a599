#pragma once

#include "lightfit/common.hpp"

#include <filesystem>
#include <string_view>

namespace lightfit {

/// Single-channel intensity image with a validity mask.
struct Image {
  Grid<double> intensity;
  Mask valid;

  Image() = default;
  Image(int width, int height, double fill = 0.0, std::uint8_t valid_fill = 1)
      : intensity(width, height, fill), valid(width, height, valid_fill) {}

  int width() const { return intensity.width(); }
  int height() const { return intensity.height(); }
  void validate() const;
  bool operator==(const Image&) const = default;
};

/// Grayscale little-endian PFM ("Pf", scale -1). Rows are stored bottom to
/// top as the format requires. Invalid pixels are written as NaN and read
/// back as invalid; values are narrowed to 32-bit floats.
void write_pfm(const std::filesystem::path& path, const Grid<double>& values,
               const Mask* valid = nullptr);
void write_pfm(const std::filesystem::path& path, const Image& image);
Image read_pfm(const std::filesystem::path& path);

/// 8-bit grayscale PNG, v -> round(255 * clamp(v / white, 0, 1)).
void write_png(const std::filesystem::path& path, const Image& image, double white = 1.0);

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace lightfit
