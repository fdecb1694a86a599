#include "lightfit/image.hpp"

#include <fmt/format.h>
#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace lightfit {

namespace fs = std::filesystem;

void Image::validate() const {
  if (!intensity.same_shape(valid)) {
    throw PreconditionError("image invariant violated: intensity and mask dimensions differ");
  }
  for (std::size_t i = 0; i < intensity.size(); ++i) {
    if (valid[i] && !(std::isfinite(intensity[i]) && intensity[i] >= 0.0)) {
      throw PreconditionError(fmt::format(
          "image invariant violated: valid intensity at pixel {} must be finite and >= 0", i));
    }
  }
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error(fmt::format("cannot open {} for writing", tmp.string()));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw std::runtime_error(fmt::format("write to {} failed", tmp.string()));
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error(fmt::format("cannot rename {} to {}: {}", tmp.string(),
                                         path.string(), ec.message()));
  }
}

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void write_pfm(const fs::path& path, const Grid<double>& values, const Mask* valid) {
  const int w = values.width();
  const int h = values.height();
  std::string bytes = fmt::format("Pf\n{} {}\n-1.0\n", w, h);
  const std::size_t header = bytes.size();
  bytes.resize(header + static_cast<std::size_t>(w) * h * 4);
  char* out = bytes.data() + header;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      float f = static_cast<float>(values(x, y));
      if (valid && !(*valid)(x, y)) {
        f = std::numeric_limits<float>::quiet_NaN();
      }
      const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
      std::memcpy(out, &bits, 4);
      out += 4;
    }
  }
  write_file_atomic(path, bytes);
}

void write_pfm(const fs::path& path, const Image& image) {
  write_pfm(path, image.intensity, &image.valid);
}

Image read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError(fmt::format("{}: cannot open", path.string()));
  }
  std::string magic;
  int w = 0;
  int h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (!in || magic != "Pf") {
    throw ParseError(fmt::format("{}: expected a grayscale 'Pf' header", path.string()));
  }
  if (w <= 0 || h <= 0) {
    throw ParseError(fmt::format("{}: invalid dimensions {}x{}", path.string(), w, h));
  }
  if (scale >= 0.0) {
    throw ParseError(fmt::format("{}: big-endian PFM is not supported", path.string()));
  }
  in.get();  // single whitespace before the raster

  Image img(w, h, 0.0, 0);
  std::vector<char> raster(static_cast<std::size_t>(w) * h * 4);
  in.read(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) {
    throw ParseError(fmt::format("{}: truncated raster", path.string()));
  }
  const char* p = raster.data();
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, p, 4);
      p += 4;
      const float f = std::bit_cast<float>(to_little_endian(bits));
      if (std::isfinite(f)) {
        img.intensity(x, y) = f;
        img.valid(x, y) = 1;
      }
    }
  }
  return img;
}

void write_png(const fs::path& path, const Image& image, double white) {
  fs::path tmp = path;
  tmp += ".tmp";
  FILE* fp = std::fopen(tmp.c_str(), "wb");
  if (!fp) {
    throw std::runtime_error(fmt::format("cannot open {} for writing", tmp.string()));
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fs::remove(tmp);
    throw std::runtime_error(fmt::format("libpng failed while writing {}", path.string()));
  }
  const int w = image.width();
  const int h = image.height();
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = image.valid(x, y) ? image.intensity(x, y) / white : 0.0;
      row[x] = static_cast<png_byte>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
  fs::rename(tmp, path);
}

}  // namespace lightfit
