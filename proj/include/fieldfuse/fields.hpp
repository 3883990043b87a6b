#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "fieldfuse/geometry.hpp"

namespace fieldfuse {

using Color = Eigen::Vector3d;

struct FieldSample {
  double density = 0.0;  // per unit length of the field's frame
  Color color = Color::Zero();
};

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double radius() const { return 0.5 * (hi - lo).norm(); }
  Aabb merged(const Aabb& other) const {
    return {lo.cwiseMin(other.lo), hi.cwiseMax(other.hi)};
  }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length

  Vec3 at(double t) const { return origin + t * direction; }
};

/// Stand-in for a trained radiance field: density and color at a point seen
/// from a direction. Implementations are immutable and safe to query from any
/// number of threads. Density is zero outside bounds().
class RadianceField {
 public:
  virtual ~RadianceField() = default;

  virtual FieldSample query(const Vec3& point, const Vec3& direction) const = 0;
  virtual Aabb bounds() const = 0;
  /// The field's center, used as x_i by distance-based blending.
  virtual Vec3 origin() const { return bounds().center(); }
};

using FieldPtr = std::shared_ptr<const RadianceField>;

class UniformSphereField final : public RadianceField {
 public:
  UniformSphereField(const Vec3& center, double radius, double density, const Color& color);
  FieldSample query(const Vec3& point, const Vec3& direction) const override;
  Aabb bounds() const override;

  const Vec3& center() const { return center_; }
  double radius() const { return radius_; }

 private:
  Vec3 center_;
  double radius_;
  double density_;
  Color color_;
};

class UniformBoxField final : public RadianceField {
 public:
  UniformBoxField(const Aabb& box, double density, const Color& color);
  FieldSample query(const Vec3& point, const Vec3& direction) const override;
  Aabb bounds() const override { return box_; }

 private:
  Aabb box_;
  double density_;
  Color color_;
};

/// Isotropic Gaussian density truncated to center +/- extent * spread.
class GaussianBlobField final : public RadianceField {
 public:
  GaussianBlobField(const Vec3& center, double peak_density, double spread,
                    const Color& color, double extent = 3.0);
  FieldSample query(const Vec3& point, const Vec3& direction) const override;
  Aabb bounds() const override { return bounds_; }

 private:
  Vec3 center_;
  double peak_;
  double spread_;
  Color color_;
  Aabb bounds_;
};

/// Regular grid of samples at cell centers; trilinear density, nearest-cell
/// color. Cells are stored x-fastest.
class VoxelGridField final : public RadianceField {
 public:
  using Resolution = std::array<std::uint32_t, 3>;

  VoxelGridField(const Aabb& bounds, Resolution resolution, std::vector<FieldSample> cells);

  /// Point-samples `source` at every cell center. A positive `color_noise`
  /// adds seeded Gaussian noise to each cell color (clamped to [0, 1]).
  static VoxelGridField sample(const RadianceField& source, const Aabb& bounds,
                               std::uint32_t resolution, double color_noise = 0.0,
                               std::uint64_t noise_seed = 0);

  /// Raw format: 3 x u32 resolution (little-endian), then per cell
  /// 4 x f32 (density, r, g, b), x-fastest.
  static VoxelGridField load(const std::filesystem::path& path, const Aabb& bounds);
  void save(const std::filesystem::path& path) const;

  FieldSample query(const Vec3& point, const Vec3& direction) const override;
  Aabb bounds() const override { return bounds_; }
  const Resolution& resolution() const { return resolution_; }
  const std::vector<FieldSample>& cells() const { return cells_; }

 private:
  const FieldSample& cell(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    return cells_[x + resolution_[0] * (y + static_cast<size_t>(resolution_[1]) * z)];
  }

  Aabb bounds_;
  Resolution resolution_;
  Vec3 cell_size_;
  std::vector<FieldSample> cells_;
};

/// Densities add; colors are density-weighted.
class CompositeField final : public RadianceField {
 public:
  explicit CompositeField(std::vector<FieldPtr> parts);
  FieldSample query(const Vec3& point, const Vec3& direction) const override;
  Aabb bounds() const override { return bounds_; }

 private:
  std::vector<FieldPtr> parts_;
  Aabb bounds_;
};

/// A field viewed through a similarity transform that maps the inner field's
/// frame into the outer one. Densities are divided by the scale so that the
/// optical depth sigma * delta of any segment is unchanged.
class TransformedField final : public RadianceField {
 public:
  TransformedField(FieldPtr inner, const Sim3Transform& inner_to_outer);
  FieldSample query(const Vec3& point, const Vec3& direction) const override;
  Aabb bounds() const override { return bounds_; }
  Vec3 origin() const override { return transform_.apply(inner_->origin()); }

 private:
  FieldPtr inner_;
  Sim3Transform transform_;
  Sim3Transform inverse_;
  Aabb bounds_;
};

FieldPtr field_in_frame(FieldPtr field, const Sim3Transform& t);

}  // namespace fieldfuse
