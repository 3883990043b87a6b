#include "fieldfuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "fieldfuse/error.hpp"

namespace fieldfuse {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& rgb) {
  if (rgb.channels != 3) fail(ErrorCode::kInvalidArgument, "write_ppm: expects 3 channels");
  auto out = open_out(path);
  out << "P6\n" << rgb.width << " " << rgb.height << "\n255\n";
  std::string bytes(rgb.data.size(), '\0');
  for (size_t i = 0; i < rgb.data.size(); ++i) {
    const double v = std::clamp(rgb.data[i], 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P6" || w < 1 || h < 1 || maxval != 255) {
    fail(ErrorCode::kParse, "read_ppm: unsupported header in " + path.string());
  }
  Image img(w, h, 3);
  std::string bytes(img.data.size(), '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!in) fail(ErrorCode::kIo, "read_ppm: truncated " + path.string());
  for (size_t i = 0; i < bytes.size(); ++i) {
    img.data[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
  }
  return img;
}

void write_pgm16(const std::filesystem::path& path, const Image& gray, double lo, double hi) {
  if (gray.channels != 1) fail(ErrorCode::kInvalidArgument, "write_pgm16: expects 1 channel");
  if (!(hi > lo)) fail(ErrorCode::kInvalidArgument, "write_pgm16: empty value range");
  auto out = open_out(path);
  out << "P5\n" << gray.width << " " << gray.height << "\n65535\n";
  std::string bytes(2 * gray.data.size(), '\0');
  for (size_t i = 0; i < gray.data.size(); ++i) {
    const double x = std::isnan(gray.data[i]) ? hi : gray.data[i];
    const double v = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(65535.0 * v));
    bytes[2 * i] = static_cast<char>((q >> 8) & 0xff);
    bytes[2 * i + 1] = static_cast<char>(q & 0xff);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

std::uint64_t image_hash(const Image& img) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : img.data) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace fieldfuse
