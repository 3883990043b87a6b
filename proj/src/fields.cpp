#include "fieldfuse/fields.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fieldfuse/error.hpp"
#include "fieldfuse/random.hpp"

namespace fieldfuse {

namespace {

void check_color(const Color& c, const char* who) {
  if (!c.allFinite() || (c.array() < 0.0).any() || (c.array() > 1.0).any()) {
    fail(ErrorCode::kInvalidArgument, std::string(who) + ": color channels must lie in [0, 1]");
  }
}

void check_density(double d, const char* who) {
  if (!(d >= 0.0) || !std::isfinite(d)) {
    fail(ErrorCode::kInvalidArgument, std::string(who) + ": density must be finite and >= 0");
  }
}

std::uint32_t read_u32_le(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

float read_f32_le(std::istream& in) { return std::bit_cast<float>(read_u32_le(in)); }

void write_f32_le(std::ostream& out, float v) { write_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

}  // namespace

// Sphere ---------------------------------------------------------------------

UniformSphereField::UniformSphereField(const Vec3& center, double radius, double density,
                                       const Color& color)
    : center_(center), radius_(radius), density_(density), color_(color) {
  if (!(radius > 0.0)) fail(ErrorCode::kInvalidArgument, "sphere: radius must be positive");
  check_density(density, "sphere");
  check_color(color, "sphere");
}

FieldSample UniformSphereField::query(const Vec3& point, const Vec3&) const {
  if ((point - center_).squaredNorm() <= radius_ * radius_) return {density_, color_};
  return {0.0, color_};
}

Aabb UniformSphereField::bounds() const {
  const Vec3 r = Vec3::Constant(radius_);
  return {center_ - r, center_ + r};
}

// Box ------------------------------------------------------------------------

UniformBoxField::UniformBoxField(const Aabb& box, double density, const Color& color)
    : box_(box), density_(density), color_(color) {
  if (!((box.hi - box.lo).array() > 0.0).all()) {
    fail(ErrorCode::kInvalidArgument, "box: hi must exceed lo on every axis");
  }
  check_density(density, "box");
  check_color(color, "box");
}

FieldSample UniformBoxField::query(const Vec3& point, const Vec3&) const {
  if (box_.contains(point)) return {density_, color_};
  return {0.0, color_};
}

// Gaussian blob --------------------------------------------------------------

GaussianBlobField::GaussianBlobField(const Vec3& center, double peak_density, double spread,
                                     const Color& color, double extent)
    : center_(center), peak_(peak_density), spread_(spread), color_(color) {
  if (!(spread > 0.0) || !(extent > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "gaussian: spread and extent must be positive");
  }
  check_density(peak_density, "gaussian");
  check_color(color, "gaussian");
  const Vec3 half = Vec3::Constant(extent * spread);
  bounds_ = {center - half, center + half};
}

FieldSample GaussianBlobField::query(const Vec3& point, const Vec3&) const {
  if (!bounds_.contains(point)) return {0.0, color_};
  const double r2 = (point - center_).squaredNorm();
  return {peak_ * std::exp(-0.5 * r2 / (spread_ * spread_)), color_};
}

// Voxel grid -----------------------------------------------------------------

VoxelGridField::VoxelGridField(const Aabb& bounds, Resolution resolution,
                               std::vector<FieldSample> cells)
    : bounds_(bounds), resolution_(resolution), cells_(std::move(cells)) {
  if (!((bounds.hi - bounds.lo).array() > 0.0).all()) {
    fail(ErrorCode::kInvalidArgument, "voxel grid: empty bounds");
  }
  if (resolution[0] == 0 || resolution[1] == 0 || resolution[2] == 0) {
    fail(ErrorCode::kInvalidArgument, "voxel grid: resolution must be >= 1");
  }
  const size_t expected = static_cast<size_t>(resolution[0]) * resolution[1] * resolution[2];
  if (cells_.size() != expected) {
    fail(ErrorCode::kInvalidArgument, "voxel grid: cell count does not match resolution");
  }
  for (const auto& c : cells_) {
    check_density(c.density, "voxel grid");
    check_color(c.color, "voxel grid");
  }
  cell_size_ = (bounds.hi - bounds.lo).cwiseQuotient(
      Vec3(resolution[0], resolution[1], resolution[2]));
}

VoxelGridField VoxelGridField::sample(const RadianceField& source, const Aabb& bounds,
                                      std::uint32_t resolution, double color_noise,
                                      std::uint64_t noise_seed) {
  if (resolution == 0) fail(ErrorCode::kInvalidArgument, "voxel grid: resolution must be >= 1");
  const Vec3 h = (bounds.hi - bounds.lo) / static_cast<double>(resolution);
  std::vector<FieldSample> cells;
  cells.reserve(static_cast<size_t>(resolution) * resolution * resolution);
  Rng rng(noise_seed);
  const Vec3 any_direction = -Vec3::UnitZ();
  for (std::uint32_t z = 0; z < resolution; ++z) {
    for (std::uint32_t y = 0; y < resolution; ++y) {
      for (std::uint32_t x = 0; x < resolution; ++x) {
        const Vec3 p = bounds.lo + h.cwiseProduct(Vec3(x + 0.5, y + 0.5, z + 0.5));
        FieldSample s = source.query(p, any_direction);
        if (color_noise > 0.0) {
          for (int c = 0; c < 3; ++c) {
            s.color[c] = std::clamp(s.color[c] + rng.normal(0.0, color_noise), 0.0, 1.0);
          }
        }
        cells.push_back(s);
      }
    }
  }
  return {bounds, {resolution, resolution, resolution}, std::move(cells)};
}

VoxelGridField VoxelGridField::load(const std::filesystem::path& path, const Aabb& bounds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "voxel grid: cannot open " + path.string());
  Resolution res{};
  for (auto& r : res) r = read_u32_le(in);
  if (!in) fail(ErrorCode::kIo, "voxel grid: truncated header in " + path.string());
  const size_t n = static_cast<size_t>(res[0]) * res[1] * res[2];
  std::vector<FieldSample> cells(n);
  for (auto& c : cells) {
    c.density = read_f32_le(in);
    for (int k = 0; k < 3; ++k) c.color[k] = read_f32_le(in);
  }
  if (!in) fail(ErrorCode::kIo, "voxel grid: truncated cell data in " + path.string());
  return {bounds, res, std::move(cells)};
}

void VoxelGridField::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "voxel grid: cannot write " + path.string());
  for (auto r : resolution_) write_u32_le(out, r);
  for (const auto& c : cells_) {
    write_f32_le(out, static_cast<float>(c.density));
    for (int k = 0; k < 3; ++k) write_f32_le(out, static_cast<float>(c.color[k]));
  }
  if (!out) fail(ErrorCode::kIo, "voxel grid: write failed for " + path.string());
}

FieldSample VoxelGridField::query(const Vec3& point, const Vec3&) const {
  if (!bounds_.contains(point)) return {};
  const Vec3 u = (point - bounds_.lo).cwiseQuotient(cell_size_);
  std::array<std::uint32_t, 3> i0{}, i1{}, nearest{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    const auto last = static_cast<double>(resolution_[a] - 1);
    const double c = std::clamp(u[a] - 0.5, 0.0, last);
    const double fl = std::floor(c);
    i0[a] = static_cast<std::uint32_t>(fl);
    i1[a] = std::min(i0[a] + 1, resolution_[a] - 1);
    f[a] = c - fl;
    nearest[a] = static_cast<std::uint32_t>(std::clamp(std::floor(u[a]), 0.0, last));
  }
  double density = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const bool bx = corner & 1, by = corner & 2, bz = corner & 4;
    const double w = (bx ? f[0] : 1.0 - f[0]) * (by ? f[1] : 1.0 - f[1]) *
                     (bz ? f[2] : 1.0 - f[2]);
    if (w == 0.0) continue;
    density += w * cell(bx ? i1[0] : i0[0], by ? i1[1] : i0[1], bz ? i1[2] : i0[2]).density;
  }
  return {density, cell(nearest[0], nearest[1], nearest[2]).color};
}

// Composite ------------------------------------------------------------------

CompositeField::CompositeField(std::vector<FieldPtr> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) fail(ErrorCode::kInvalidArgument, "composite: needs at least one part");
  bounds_ = parts_.front()->bounds();
  for (const auto& p : parts_) {
    if (!p) fail(ErrorCode::kInvalidArgument, "composite: null part");
    bounds_ = bounds_.merged(p->bounds());
  }
}

FieldSample CompositeField::query(const Vec3& point, const Vec3& direction) const {
  double density = 0.0;
  Color weighted = Color::Zero();
  for (const auto& p : parts_) {
    const FieldSample s = p->query(point, direction);
    density += s.density;
    weighted += s.density * s.color;
  }
  if (density <= 0.0) return {};
  return {density, (weighted / density).cwiseMin(1.0).cwiseMax(0.0)};
}

// Transformed ----------------------------------------------------------------

TransformedField::TransformedField(FieldPtr inner, const Sim3Transform& inner_to_outer)
    : inner_(std::move(inner)), transform_(inner_to_outer), inverse_(inner_to_outer.inverse()) {
  if (!inner_) fail(ErrorCode::kInvalidArgument, "transformed field: null inner field");
  const Aabb b = inner_->bounds();
  bounds_ = {Vec3::Constant(INFINITY), Vec3::Constant(-INFINITY)};
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p((corner & 1) ? b.hi.x() : b.lo.x(), (corner & 2) ? b.hi.y() : b.lo.y(),
                 (corner & 4) ? b.hi.z() : b.lo.z());
    const Vec3 q = transform_.apply(p);
    bounds_.lo = bounds_.lo.cwiseMin(q);
    bounds_.hi = bounds_.hi.cwiseMax(q);
  }
}

FieldSample TransformedField::query(const Vec3& point, const Vec3& direction) const {
  FieldSample s = inner_->query(inverse_.apply(point), inverse_.apply_direction(direction));
  s.density /= transform_.scale();
  return s;
}

FieldPtr field_in_frame(FieldPtr field, const Sim3Transform& t) {
  return std::make_shared<TransformedField>(std::move(field), t);
}

}  // namespace fieldfuse
