#include "fieldfuse/renderer.hpp"

#include <cmath>
#include <sstream>

#include "fieldfuse/error.hpp"
#include "fieldfuse/parallel.hpp"

namespace fieldfuse {

Camera Camera::centered(const Se3Pose& pose, int width, int height, double focal, double near,
                        double far) {
  Camera c;
  c.pose = pose;
  c.fx = c.fy = focal;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.width = width;
  c.height = height;
  c.near = near;
  c.far = far;
  c.validate();
  return c;
}

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::kInvalidArgument, "camera: focal lengths must be positive");
  if (!(near > 0.0) || !(near < far) || !std::isfinite(far)) {
    fail(ErrorCode::kInvalidArgument, "camera: requires 0 < near < far");
  }
  if (width < 1 || height < 1) fail(ErrorCode::kInvalidArgument, "camera: empty image");
  if (!std::isfinite(cx) || !std::isfinite(cy)) fail(ErrorCode::kInvalidArgument, "camera: bad principal point");
}

Ray ray_for_pixel(const Camera& camera, int px, int py) {
  if (px < 0 || py < 0 || px >= camera.width || py >= camera.height) {
    std::ostringstream os;
    os << "ray_for_pixel: pixel (" << px << ", " << py << ") outside " << camera.width << "x"
       << camera.height;
    fail(ErrorCode::kInvalidArgument, os.str());
  }
  const Vec3 local((px + 0.5 - camera.cx) / camera.fx, -(py + 0.5 - camera.cy) / camera.fy, -1.0);
  return {camera.pose.translation(), (camera.pose.rotation() * local).normalized()};
}

CompositeResult composite(std::span<const RaySample> samples, double far) {
  CompositeResult out;
  out.termination.resize(samples.size());
  double transmittance = 1.0;
  double depth_sum = 0.0;
  for (size_t k = 0; k < samples.size(); ++k) {
    const RaySample& s = samples[k];
    if (std::isnan(s.density) || s.density < 0.0) {
      fail(ErrorCode::kContractViolation, "composite: density must be a non-negative number");
    }
    const double alpha = -std::expm1(-s.density * s.delta);
    const double p = transmittance * alpha;
    out.termination[k] = p;
    out.color += p * s.color;
    out.accumulation += p;
    depth_sum += p * s.mid();
    transmittance *= 1.0 - alpha;
  }
  out.depth = out.accumulation >= kAccumulationEpsilon ? depth_sum / out.accumulation : far;
  return out;
}

Rng pixel_rng(std::uint64_t seed, int px, int py) {
  return Rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(py)), static_cast<std::uint64_t>(px)));
}

RenderOutput render(const RadianceField& field, const Camera& camera,
                    const RenderSettings& settings) {
  camera.validate();
  RenderOutput out{Image(camera.width, camera.height, 3), Image(camera.width, camera.height, 1),
                   Image(camera.width, camera.height, 1)};
  parallel_for(camera.height, settings.threads, [&](int py) {
    for (int px = 0; px < camera.width; ++px) {
      Rng rng = pixel_rng(settings.seed, px, py);
      const Ray ray = ray_for_pixel(camera, px, py);
      const auto samples = propose_samples(field, ray, camera.near, camera.far, settings.budget, rng);
      const CompositeResult c = composite(samples, camera.far);
      for (int ch = 0; ch < 3; ++ch) out.color.at(px, py, ch) = c.color[ch];
      out.accumulation.at(px, py) = c.accumulation;
      out.depth.at(px, py) = c.depth;
    }
  });
  return out;
}

}  // namespace fieldfuse
