#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldfuse/fields.hpp"
#include "fieldfuse/renderer.hpp"

namespace fieldfuse {

enum class BlendStrategy { kNearest, kIdw2d, kIdw3d, kIdwSample };

const char* to_string(BlendStrategy s);
std::optional<BlendStrategy> parse_strategy(std::string_view name);

struct BlendConfig {
  BlendStrategy strategy = BlendStrategy::kIdwSample;
  double gamma = 5.0;       // blending rate; 0 gives plain averaging
  double tau = 1.8;         // distance-test threshold, >= 1
  int budget = 64;          // samples per field and ray
  double eps_mass = 1e-4;   // below this blended mass a pixel is left empty
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
};

/// A field placed in the reference frame. `origin` is x_i in reference
/// coordinates.
struct RegisteredField {
  std::string name;
  FieldPtr field;              // in its own local frame
  Sim3Transform to_reference;  // local -> reference
  Vec3 origin = Vec3::Zero();
  FieldPtr in_reference;       // field viewed in the reference frame
};

/// Builds the entry; `origin` defaults to the field's own origin mapped into
/// the reference frame. An exact identity transform reuses the field itself.
RegisteredField make_registered(std::string name, FieldPtr field, const Sim3Transform& to_reference,
                                const std::optional<Vec3>& origin = std::nullopt);

/// The first entry is the reference field and carries the identity transform.
struct RegisteredFieldSet {
  std::vector<RegisteredField> fields;

  void validate() const;
  std::vector<Vec3> origins() const;
};

struct DistanceDecision {
  bool blend = false;
  int nearest = 0;
  double ratio = 1.0;        // second-nearest over nearest distance
  std::vector<int> members;  // fields taking part when blending
};

/// Ratio test between the two nearest field origins. Blending keeps every
/// field whose distance is within tau of the nearest; ties go to the lowest
/// index. A camera sitting on an origin uses that field alone.
DistanceDecision distance_test(const Vec3& camera_center, std::span<const Vec3> origins, double tau);

/// w_i = d_i^-gamma / sum_j d_j^-gamma, evaluated through ratios to the
/// smallest distance so that large gamma cannot overflow. Zero distances take
/// all the weight (split evenly when several are zero).
std::vector<double> idw_weights(std::span<const double> distances, double gamma);

/// A composited ray sample: interval plus termination probability and color.
struct WeightedSample {
  double t = 0.0;
  double delta = 0.0;
  double mass = 0.0;
  Color color = Color::Zero();

  double end() const { return t + delta; }
};

std::vector<WeightedSample> weighted_samples(std::span<const RaySample> samples, double far);

/// Per-field samples refined onto the common partition of all interval
/// endpoints. Each field's mass is spread uniformly over its own intervals.
struct MergedSampleSet {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<std::vector<double>> mass;   // [field][interval]
  std::vector<std::vector<Color>> color;   // [field][interval]

  size_t size() const { return t.size(); }
  size_t field_count() const { return mass.size(); }
  double mid(size_t k) const { return t[k] + 0.5 * delta[k]; }
};

MergedSampleSet merge_ray_samples(std::span<const std::vector<WeightedSample>> per_field);

/// Weights after normalization step (i) (per interval, summing to 1 across
/// fields) and the step (ii) factor that rescales the blended mass to 1.
struct SampleWeights {
  std::vector<std::vector<double>> weight;  // [field][interval]
  double mass = 0.0;                        // sum_k sum_i w p, before step (ii)
  double rescale = 0.0;                     // 1 / mass, or 0 below eps_mass
};

SampleWeights idw_sample_weights(const MergedSampleSet& merged, std::span<const Vec3> origins,
                                 const Ray& ray, double gamma, double eps_mass);

struct PixelBlend {
  Color color = Color::Zero();
  double mass = 0.0;   // blended termination mass before rescaling
  double depth = 0.0;  // NaN when the pixel is empty
};

PixelBlend blend_pixel_idw_sample(const MergedSampleSet& merged, std::span<const Vec3> origins,
                                  const Ray& ray, double gamma, double eps_mass);

/// Novel view from a set of registered fields. Runs the distance test, then
/// dispatches on the strategy. The accumulation map holds the blended mass.
RenderOutput blend_render(const RegisteredFieldSet& fields, const Camera& camera,
                          const BlendConfig& cfg);

}  // namespace fieldfuse
