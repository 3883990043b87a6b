#pragma once

#include <vector>

#include "fieldfuse/fields.hpp"
#include "fieldfuse/random.hpp"

namespace fieldfuse {

/// One interval [t, t + delta) along a ray with the field evaluated at its
/// midpoint.
struct RaySample {
  double t = 0.0;
  double delta = 0.0;
  double density = 0.0;
  Color color = Color::Zero();

  double end() const { return t + delta; }
  double mid() const { return t + 0.5 * delta; }
};

/// Two-pass proposal over [near, far]: budget/2 stratified coarse bins give a
/// termination-probability histogram, and the remaining budget is spent on
/// breakpoints drawn by stratified inverse-CDF sampling of that histogram.
/// The result partitions [near, far] into at most `budget` intervals; each
/// interval starts exactly where the previous one ends.
std::vector<RaySample> propose_samples(const RadianceField& field, const Ray& ray, double near,
                                       double far, int budget, Rng& rng);

}  // namespace fieldfuse
