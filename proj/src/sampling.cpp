#include "fieldfuse/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "fieldfuse/error.hpp"

namespace fieldfuse {

std::vector<RaySample> propose_samples(const RadianceField& field, const Ray& ray, double near,
                                       double far, int budget, Rng& rng) {
  if (!(near < far) || !std::isfinite(near) || !std::isfinite(far)) {
    fail(ErrorCode::kInvalidArgument, "propose_samples: requires near < far");
  }
  if (budget < 2) fail(ErrorCode::kInvalidArgument, "propose_samples: budget must be >= 2");
  if (std::abs(ray.direction.norm() - 1.0) > 1e-6) {
    fail(ErrorCode::kInvalidArgument, "propose_samples: ray direction is not unit length");
  }

  const int n_coarse = budget / 2;
  const int n_fine = budget - n_coarse;
  const double h = (far - near) / n_coarse;

  std::vector<double> edges(static_cast<size_t>(n_coarse) + 1);
  for (int j = 0; j < n_coarse; ++j) edges[static_cast<size_t>(j)] = near + j * h;
  edges.back() = far;

  // Coarse histogram of termination probability.
  std::vector<double> weight(static_cast<size_t>(n_coarse));
  double transmittance = 1.0;
  double total = 0.0;
  for (int j = 0; j < n_coarse; ++j) {
    const auto jj = static_cast<size_t>(j);
    const double lo = edges[jj], hi = edges[jj + 1];
    const double t = lo + rng.uniform() * (hi - lo);
    const double sigma = field.query(ray.at(t), ray.direction).density;
    const double alpha = -std::expm1(-sigma * (hi - lo));
    weight[jj] = transmittance * alpha;
    transmittance *= 1.0 - alpha;
    total += weight[jj];
  }
  if (!(total > 0.0)) {
    std::fill(weight.begin(), weight.end(), 1.0);
    total = n_coarse;
  }

  std::vector<double> breaks(edges);
  breaks.reserve(edges.size() + static_cast<size_t>(n_fine));
  size_t bin = 0;
  double cdf_before = 0.0;
  for (int m = 0; m < n_fine; ++m) {
    const double target = (m + rng.uniform()) / n_fine * total;
    while (bin + 1 < weight.size() && cdf_before + weight[bin] < target) {
      cdf_before += weight[bin];
      ++bin;
    }
    const double frac =
        weight[bin] > 0.0 ? std::clamp((target - cdf_before) / weight[bin], 0.0, 1.0) : 0.5;
    breaks.push_back(edges[bin] + frac * (edges[bin + 1] - edges[bin]));
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  std::vector<RaySample> out;
  out.reserve(breaks.size());
  double t = breaks.front();
  for (size_t k = 1; k < breaks.size(); ++k) {
    const double delta = breaks[k] - t;
    if (!(delta > 0.0)) continue;
    RaySample s;
    s.t = t;
    s.delta = delta;
    const FieldSample f = field.query(ray.at(s.mid()), ray.direction);
    s.density = f.density;
    s.color = f.color;
    out.push_back(s);
    t += delta;
  }
  return out;
}

}  // namespace fieldfuse
