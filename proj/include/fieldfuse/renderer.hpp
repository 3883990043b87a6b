#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fieldfuse/fields.hpp"
#include "fieldfuse/image.hpp"
#include "fieldfuse/sampling.hpp"

namespace fieldfuse {

/// Accumulation below which expected depth is replaced by the far plane.
inline constexpr double kAccumulationEpsilon = 1e-4;

/// Pinhole camera. Right-handed; the camera looks down its local -z with +y
/// up, and image rows grow downward.
struct Camera {
  Se3Pose pose;  // camera-to-world
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;
  double near = 0.1;
  double far = 10.0;

  /// Principal point at the image center.
  static Camera centered(const Se3Pose& pose, int width, int height, double focal, double near,
                         double far);

  void validate() const;
  Vec3 center() const { return pose.translation(); }
};

Ray ray_for_pixel(const Camera& camera, int px, int py);

struct CompositeResult {
  Color color = Color::Zero();
  double accumulation = 0.0;
  double depth = 0.0;
  std::vector<double> termination;  // p_k per input sample
};

/// Standard emission-absorption quadrature: alpha_k = 1 - exp(-sigma_k delta_k),
/// p_k = T_k alpha_k. Expected depth uses interval midpoints and falls back to
/// `far` when the accumulation is below kAccumulationEpsilon.
CompositeResult composite(std::span<const RaySample> samples, double far);

struct RenderOutput {
  Image color;         // H x W x 3
  Image accumulation;  // H x W
  Image depth;         // H x W
};

struct RenderSettings {
  int budget = 64;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
};

/// Per-pixel sampling stream; the same (seed, px, py) always yields the same
/// jitter regardless of which worker renders the pixel.
Rng pixel_rng(std::uint64_t seed, int px, int py);

RenderOutput render(const RadianceField& field, const Camera& camera,
                    const RenderSettings& settings);

}  // namespace fieldfuse
