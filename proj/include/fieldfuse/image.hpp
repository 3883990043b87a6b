#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fieldfuse {

/// Row-major interleaved float image.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * static_cast<size_t>(h) * static_cast<size_t>(c), fill) {}

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)) *
                    static_cast<size_t>(channels) +
                static_cast<size_t>(c)];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)) *
                    static_cast<size_t>(channels) +
                static_cast<size_t>(c)];
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

/// Binary PPM (P6, maxval 255); each channel quantized as round(255 c) after
/// clamping to [0, 1].
void write_ppm(const std::filesystem::path& path, const Image& rgb);
Image read_ppm(const std::filesystem::path& path);

/// Binary 16-bit PGM (P5, maxval 65535, big-endian samples); values in
/// [lo, hi] map linearly onto [0, 65535]; NaN is written as hi.
void write_pgm16(const std::filesystem::path& path, const Image& gray, double lo, double hi);

/// FNV-1a over the raw bytes of the pixel buffer.
std::uint64_t image_hash(const Image& img);

}  // namespace fieldfuse
