#include "fieldfuse/blending.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fieldfuse/error.hpp"
#include "fieldfuse/parallel.hpp"

namespace fieldfuse {

const char* to_string(BlendStrategy s) {
  switch (s) {
    case BlendStrategy::kNearest: return "nearest";
    case BlendStrategy::kIdw2d: return "idw-2d";
    case BlendStrategy::kIdw3d: return "idw-3d";
    case BlendStrategy::kIdwSample: return "idw-sample";
  }
  return "unknown";
}

std::optional<BlendStrategy> parse_strategy(std::string_view name) {
  for (auto s : {BlendStrategy::kNearest, BlendStrategy::kIdw2d, BlendStrategy::kIdw3d,
                 BlendStrategy::kIdwSample}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

void BlendConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail(ErrorCode::kInvalidArgument, "blend: gamma must be >= 0");
  if (!(tau >= 1.0)) fail(ErrorCode::kInvalidArgument, "blend: tau must be >= 1");
  if (budget < 2) fail(ErrorCode::kInvalidArgument, "blend: budget must be >= 2");
  if (!(eps_mass > 0.0)) fail(ErrorCode::kInvalidArgument, "blend: eps_mass must be positive");
}

RegisteredField make_registered(std::string name, FieldPtr field, const Sim3Transform& to_reference,
                                const std::optional<Vec3>& origin) {
  if (!field) fail(ErrorCode::kInvalidArgument, "registered field '" + name + "' is null");
  RegisteredField r;
  r.name = std::move(name);
  r.to_reference = to_reference;
  const bool identity = to_reference.scale() == 1.0 &&
                        to_reference.pose().rotation() == Mat3::Identity() &&
                        to_reference.pose().translation() == Vec3::Zero();
  r.in_reference = identity ? field : field_in_frame(field, to_reference);
  r.origin = origin ? *origin : r.in_reference->origin();
  if (!r.origin.allFinite()) fail(ErrorCode::kInvalidArgument, "registered field '" + r.name + "': origin not finite");
  r.field = std::move(field);
  return r;
}

void RegisteredFieldSet::validate() const {
  if (fields.empty()) fail(ErrorCode::kInvalidArgument, "registered field set is empty");
  const Sim3Transform& ref = fields.front().to_reference;
  if (std::abs(ref.scale() - 1.0) > 1e-12 ||
      (ref.pose().rotation() - Mat3::Identity()).norm() > 1e-12 ||
      ref.pose().translation().norm() > 1e-12) {
    fail(ErrorCode::kInvalidArgument, "the reference field must carry the identity transform");
  }
}

std::vector<Vec3> RegisteredFieldSet::origins() const {
  std::vector<Vec3> out;
  out.reserve(fields.size());
  for (const auto& f : fields) out.push_back(f.origin);
  return out;
}

DistanceDecision distance_test(const Vec3& camera_center, std::span<const Vec3> origins, double tau) {
  if (origins.empty()) fail(ErrorCode::kInvalidArgument, "distance_test: no origins");
  DistanceDecision d;
  std::vector<double> dist(origins.size());
  for (size_t i = 0; i < origins.size(); ++i) dist[i] = (origins[i] - camera_center).norm();
  std::vector<int> order(origins.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[static_cast<size_t>(a)] < dist[static_cast<size_t>(b)]; });
  d.nearest = order.front();
  const double d0 = dist[static_cast<size_t>(d.nearest)];
  if (origins.size() == 1 || d0 < 1e-12) {
    d.ratio = std::numeric_limits<double>::infinity();
    d.members = {d.nearest};
    return d;
  }
  d.ratio = dist[static_cast<size_t>(order[1])] / d0;
  if (d.ratio > tau) {
    d.members = {d.nearest};
    return d;
  }
  d.blend = true;
  for (int i : order) {
    if (dist[static_cast<size_t>(i)] / d0 <= tau) d.members.push_back(i);
  }
  std::sort(d.members.begin(), d.members.end());
  return d;
}

std::vector<double> idw_weights(std::span<const double> distances, double gamma) {
  if (distances.empty()) return {};
  std::vector<double> w(distances.size(), 0.0);
  const auto zeros = std::count(distances.begin(), distances.end(), 0.0);
  if (zeros > 0) {
    for (size_t i = 0; i < distances.size(); ++i) {
      if (distances[i] == 0.0) w[i] = 1.0 / static_cast<double>(zeros);
    }
    return w;
  }
  const double d_min = *std::min_element(distances.begin(), distances.end());
  double total = 0.0;
  for (size_t i = 0; i < distances.size(); ++i) {
    w[i] = std::pow(d_min / distances[i], gamma);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<WeightedSample> weighted_samples(std::span<const RaySample> samples, double far) {
  const CompositeResult c = composite(samples, far);
  std::vector<WeightedSample> out(samples.size());
  for (size_t k = 0; k < samples.size(); ++k) {
    out[k] = {samples[k].t, samples[k].delta, c.termination[k], samples[k].color};
  }
  return out;
}

MergedSampleSet merge_ray_samples(std::span<const std::vector<WeightedSample>> per_field) {
  MergedSampleSet merged;
  const size_t n_fields = per_field.size();
  merged.mass.resize(n_fields);
  merged.color.resize(n_fields);

  std::vector<double> breaks;
  for (const auto& samples : per_field) {
    for (const auto& s : samples) {
      breaks.push_back(s.t);
      breaks.push_back(s.end());
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  std::vector<size_t> cursor(n_fields, 0);
  for (size_t j = 0; j + 1 < breaks.size(); ++j) {
    const double lo = breaks[j], hi = breaks[j + 1];
    bool covered = false;
    // Per field, the sample covering [lo, hi], if any.
    std::vector<const WeightedSample*> cover(n_fields, nullptr);
    for (size_t i = 0; i < n_fields; ++i) {
      const auto& samples = per_field[i];
      size_t& c = cursor[i];
      while (c < samples.size() && samples[c].end() <= lo) ++c;
      if (c < samples.size() && samples[c].t <= lo && hi <= samples[c].end()) {
        cover[i] = &samples[c];
        covered = true;
      }
    }
    if (!covered) continue;
    merged.t.push_back(lo);
    merged.delta.push_back(hi - lo);
    for (size_t i = 0; i < n_fields; ++i) {
      if (cover[i]) {
        merged.mass[i].push_back(cover[i]->mass * ((hi - lo) / cover[i]->delta));
        merged.color[i].push_back(cover[i]->color);
      } else {
        merged.mass[i].push_back(0.0);
        merged.color[i].push_back(Color::Zero());
      }
    }
  }
  return merged;
}

SampleWeights idw_sample_weights(const MergedSampleSet& merged, std::span<const Vec3> origins,
                                 const Ray& ray, double gamma, double eps_mass) {
  const size_t n_fields = merged.field_count();
  if (origins.size() != n_fields) {
    fail(ErrorCode::kInvalidArgument, "idw_sample_weights: one origin per field required");
  }
  SampleWeights sw;
  sw.weight.assign(n_fields, std::vector<double>(merged.size(), 0.0));
  std::vector<double> dist(n_fields);
  for (size_t k = 0; k < merged.size(); ++k) {
    const Vec3 p = ray.at(merged.mid(k));
    for (size_t i = 0; i < n_fields; ++i) dist[i] = (origins[i] - p).norm();
    const auto w = idw_weights(dist, gamma);
    for (size_t i = 0; i < n_fields; ++i) {
      sw.weight[i][k] = w[i];
      sw.mass += w[i] * merged.mass[i][k];
    }
  }
  sw.rescale = sw.mass >= eps_mass ? 1.0 / sw.mass : 0.0;
  return sw;
}

PixelBlend blend_pixel_idw_sample(const MergedSampleSet& merged, std::span<const Vec3> origins,
                                  const Ray& ray, double gamma, double eps_mass) {
  const SampleWeights sw = idw_sample_weights(merged, origins, ray, gamma, eps_mass);
  PixelBlend out;
  out.mass = sw.mass;
  if (sw.rescale == 0.0) {
    out.depth = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  Color color = Color::Zero();
  double depth = 0.0;
  for (size_t k = 0; k < merged.size(); ++k) {
    for (size_t i = 0; i < merged.field_count(); ++i) {
      const double wp = sw.weight[i][k] * merged.mass[i][k];
      color += wp * merged.color[i][k];
      depth += wp * merged.mid(k);
    }
  }
  out.color = (color / sw.mass).cwiseMax(0.0).cwiseMin(1.0);
  out.depth = depth / sw.mass;
  return out;
}

namespace {

RenderSettings render_settings(const BlendConfig& cfg) { return {cfg.budget, cfg.seed, cfg.threads}; }

RenderOutput blend_images(const Camera& camera, const std::vector<RenderOutput>& renders,
                          const std::vector<Vec3>& origins, const BlendConfig& cfg, bool per_pixel) {
  RenderOutput out{Image(camera.width, camera.height, 3), Image(camera.width, camera.height, 1),
                   Image(camera.width, camera.height, 1)};
  std::vector<double> global;
  if (!per_pixel) {
    std::vector<double> d(origins.size());
    for (size_t i = 0; i < origins.size(); ++i) d[i] = (origins[i] - camera.center()).norm();
    global = idw_weights(d, cfg.gamma);
  }
  parallel_for(camera.height, cfg.threads, [&](int py) {
    std::vector<double> d(origins.size());
    for (int px = 0; px < camera.width; ++px) {
      std::vector<double> w = global;
      if (per_pixel) {
        const Ray ray = ray_for_pixel(camera, px, py);
        for (size_t i = 0; i < origins.size(); ++i) {
          // Depth already falls back to the far plane for empty pixels.
          d[i] = (origins[i] - ray.at(renders[i].depth.at(px, py))).norm();
        }
        w = idw_weights(d, cfg.gamma);
      }
      for (size_t i = 0; i < renders.size(); ++i) {
        for (int c = 0; c < 3; ++c) out.color.at(px, py, c) += w[i] * renders[i].color.at(px, py, c);
        out.accumulation.at(px, py) += w[i] * renders[i].accumulation.at(px, py);
        out.depth.at(px, py) += w[i] * renders[i].depth.at(px, py);
      }
    }
  });
  return out;
}

RenderOutput blend_samples(const Camera& camera, const std::vector<const RegisteredField*>& members,
                           const std::vector<Vec3>& origins, const BlendConfig& cfg) {
  RenderOutput out{Image(camera.width, camera.height, 3), Image(camera.width, camera.height, 1),
                   Image(camera.width, camera.height, 1)};
  parallel_for(camera.height, cfg.threads, [&](int py) {
    std::vector<std::vector<WeightedSample>> per_field(members.size());
    for (int px = 0; px < camera.width; ++px) {
      const Ray ray = ray_for_pixel(camera, px, py);
      for (size_t i = 0; i < members.size(); ++i) {
        // Every field draws from the same per-pixel stream so coincident
        // fields propose coincident samples.
        Rng rng = pixel_rng(cfg.seed, px, py);
        const auto samples =
            propose_samples(*members[i]->in_reference, ray, camera.near, camera.far, cfg.budget, rng);
        per_field[i] = weighted_samples(samples, camera.far);
      }
      const MergedSampleSet merged = merge_ray_samples(per_field);
      const PixelBlend p = blend_pixel_idw_sample(merged, origins, ray, cfg.gamma, cfg.eps_mass);
      for (int c = 0; c < 3; ++c) out.color.at(px, py, c) = p.color[c];
      out.accumulation.at(px, py) = std::isnan(p.depth) ? 0.0 : std::clamp(p.mass, 0.0, 1.0);
      out.depth.at(px, py) = std::isnan(p.depth) ? camera.far : p.depth;
    }
  });
  return out;
}

}  // namespace

RenderOutput blend_render(const RegisteredFieldSet& fields, const Camera& camera,
                          const BlendConfig& cfg) {
  fields.validate();
  cfg.validate();
  camera.validate();
  if (fields.fields.size() == 1) {
    return render(*fields.fields.front().in_reference, camera, render_settings(cfg));
  }
  const std::vector<Vec3> all_origins = fields.origins();
  const DistanceDecision decision = distance_test(camera.center(), all_origins, cfg.tau);
  if (!decision.blend || cfg.strategy == BlendStrategy::kNearest) {
    return render(*fields.fields[static_cast<size_t>(decision.nearest)].in_reference, camera,
                  render_settings(cfg));
  }

  std::vector<const RegisteredField*> members;
  std::vector<Vec3> origins;
  for (int i : decision.members) {
    members.push_back(&fields.fields[static_cast<size_t>(i)]);
    origins.push_back(all_origins[static_cast<size_t>(i)]);
  }
  if (cfg.strategy == BlendStrategy::kIdwSample) return blend_samples(camera, members, origins, cfg);

  std::vector<RenderOutput> renders;
  renders.reserve(members.size());
  for (const auto* m : members) renders.push_back(render(*m->in_reference, camera, render_settings(cfg)));
  return blend_images(camera, renders, origins, cfg, cfg.strategy == BlendStrategy::kIdw3d);
}

}  // namespace fieldfuse
