#include "fieldfuse/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "fieldfuse/error.hpp"
#include "fieldfuse/parallel.hpp"
#include "fieldfuse/random.hpp"
#include "fieldfuse/renderer.hpp"

namespace fieldfuse {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double median_of(std::vector<double> v) {
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

Mat3 small_rotation(Rng& rng, double stddev_rad) {
  const Vec3 w(rng.normal(0.0, stddev_rad), rng.normal(0.0, stddev_rad),
               rng.normal(0.0, stddev_rad));
  const double angle = w.norm();
  if (angle == 0.0) return Mat3::Identity();
  return axis_angle(w / angle, angle);
}

}  // namespace

const char* to_string(PoseProvenance p) {
  switch (p) {
    case PoseProvenance::kHemispheric: return "hemispheric";
    case PoseProvenance::kTraining: return "training";
    case PoseProvenance::kMixed: return "mixed";
  }
  return "unknown";
}

PoseSampleSet sample_hemisphere_poses(int n, double radius, double elev_lo_deg,
                                      double elev_hi_deg, const Vec3& look_at,
                                      std::uint64_t seed) {
  if (n < 2) fail(ErrorCode::kInvalidArgument, "sample_hemisphere_poses: n must be >= 2");
  if (!(radius > 0.0)) fail(ErrorCode::kInvalidArgument, "sample_hemisphere_poses: radius must be positive");
  if (!(0.0 <= elev_lo_deg && elev_lo_deg <= elev_hi_deg && elev_hi_deg <= 90.0)) {
    fail(ErrorCode::kInvalidArgument, "sample_hemisphere_poses: need 0 <= lo <= hi <= 90 degrees");
  }
  Rng rng(seed);
  PoseSampleSet set;
  set.provenance = PoseProvenance::kHemispheric;
  set.poses.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double azimuth = (i + rng.uniform()) / n * 2.0 * std::numbers::pi;
    const double elevation = rng.uniform(elev_lo_deg, elev_hi_deg) * kDegToRad;
    const Vec3 dir(std::cos(elevation) * std::cos(azimuth),
                   std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
    set.poses.push_back(Se3Pose::look_at(look_at + radius * dir, look_at, Vec3::UnitZ()));
  }
  return set;
}

void SfmSimulatorConfig::validate() const {
  if (!(rotation_noise_deg >= 0.0) || !(translation_noise_frac >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "simulator: noise levels must be >= 0");
  }
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0) ||
      !(dropout_fraction >= 0.0 && dropout_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "simulator: fractions must lie in [0, 1)");
  }
}

PoseRecoveryResult simulate_sfm(std::span<const PoseSampleSet> local_poses,
                                std::span<const Sim3Transform> field_to_gauge,
                                const SfmSimulatorConfig& cfg) {
  cfg.validate();
  if (local_poses.size() != field_to_gauge.size()) {
    fail(ErrorCode::kInvalidArgument, "simulate_sfm: one gauge transform per field required");
  }

  // Exact gauge poses first; the scene sphere is derived from all of them.
  std::vector<std::vector<Se3Pose>> exact(local_poses.size());
  Vec3 centroid = Vec3::Zero();
  size_t count = 0;
  for (size_t f = 0; f < local_poses.size(); ++f) {
    for (const Se3Pose& g : local_poses[f].poses) {
      exact[f].push_back(convert_query_pose(g, field_to_gauge[f]));
      centroid += exact[f].back().translation();
      ++count;
    }
  }
  if (count > 0) centroid /= static_cast<double>(count);
  double scene_radius = 0.0;
  for (const auto& poses : exact) {
    for (const auto& g : poses) {
      scene_radius = std::max(scene_radius, (g.translation() - centroid).norm());
    }
  }

  PoseRecoveryResult result;
  result.fields.resize(local_poses.size());
  for (size_t f = 0; f < exact.size(); ++f) {
    Rng rng(mix_seed(cfg.seed, f));
    const size_t n = exact[f].size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    const auto n_out = static_cast<size_t>(std::floor(cfg.outlier_fraction * static_cast<double>(n)));
    const auto n_drop = std::min(
        n - n_out, static_cast<size_t>(std::floor(cfg.dropout_fraction * static_cast<double>(n))));
    std::vector<char> outlier(n, 0), dropped(n, 0);
    for (size_t k = 0; k < n_out; ++k) outlier[order[k]] = 1;
    for (size_t k = n_out; k < n_out + n_drop; ++k) dropped[order[k]] = 1;

    RecoveredPoses& out = result.fields[f];
    out.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const Se3Pose& g = exact[f][i];
      Se3Pose noisy = g;
      if (outlier[i]) {
        Vec3 offset;
        do {
          offset = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        } while (offset.squaredNorm() > 1.0);
        noisy = Se3Pose(random_rotation(rng), centroid + scene_radius * offset);
      } else if (cfg.rotation_noise_deg > 0.0 || cfg.translation_noise_frac > 0.0) {
        const Mat3 dr = small_rotation(rng, cfg.rotation_noise_deg * kDegToRad);
        const double sigma_t = cfg.translation_noise_frac * scene_radius;
        const Vec3 dt(rng.normal(0.0, sigma_t), rng.normal(0.0, sigma_t), rng.normal(0.0, sigma_t));
        noisy = Se3Pose(project_to_rotation(dr * g.rotation()), g.translation() + dt);
      }
      if (!dropped[i]) out[i] = noisy;
    }
  }
  return result;
}

PoseRecoveryResult simulate_sfm(const PoseSampleSet& local_poses_a,
                                const PoseSampleSet& local_poses_b,
                                const Sim3Transform& true_t_ac, const Sim3Transform& true_t_bc,
                                const SfmSimulatorConfig& cfg) {
  const std::vector<PoseSampleSet> sets{local_poses_a, local_poses_b};
  const std::vector<Sim3Transform> gauges{true_t_ac, true_t_bc};
  return simulate_sfm(sets, gauges, cfg);
}

std::vector<IndexedPose> successful_poses(const RecoveredPoses& recovered) {
  std::vector<IndexedPose> out;
  for (size_t i = 0; i < recovered.size(); ++i) {
    if (recovered[i]) out.emplace_back(static_cast<int>(i), *recovered[i]);
  }
  return out;
}

double recover_scale(std::span<const Se3Pose> local_poses,
                     std::span<const IndexedPose> gauge_poses, std::uint64_t seed) {
  const int n = static_cast<int>(gauge_poses.size());
  if (n < 2) {
    fail(ErrorCode::kNotEnoughPoses, "recover_scale: at least two recovered poses are required, got " +
                                         std::to_string(n));
  }
  for (const auto& [index, pose] : gauge_poses) {
    if (index < 0 || static_cast<size_t>(index) >= local_poses.size()) {
      fail(ErrorCode::kInvalidArgument, "recover_scale: pose index out of range");
    }
  }

  std::vector<std::pair<int, int>> pairs;
  if (n <= kExhaustivePairLimit) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    }
  } else {
    Rng rng(seed);
    std::set<std::pair<int, int>> chosen;
    std::uniform_int_distribution<int> pick(0, n - 1);
    while (static_cast<int>(chosen.size()) < kMaxScalePairs) {
      int i = pick(rng.engine()), j = pick(rng.engine());
      if (i == j) continue;
      chosen.emplace(std::min(i, j), std::max(i, j));
    }
    pairs.assign(chosen.begin(), chosen.end());
  }

  std::vector<double> ratios;
  ratios.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    const auto& [li, gi] = gauge_poses[static_cast<size_t>(i)];
    const auto& [lj, gj] = gauge_poses[static_cast<size_t>(j)];
    const double local = (local_poses[static_cast<size_t>(li)].translation() -
                          local_poses[static_cast<size_t>(lj)].translation()).norm();
    if (local < 1e-9) continue;
    ratios.push_back((gi.translation() - gj.translation()).norm() / local);
  }
  if (ratios.empty()) {
    fail(ErrorCode::kDegenerateGeometry, "recover_scale: all camera pairs share a center");
  }
  const double scale = median_of(std::move(ratios));
  if (!(scale > 0.0)) {
    fail(ErrorCode::kDegenerateGeometry, "recover_scale: recovered scale is not positive");
  }
  return scale;
}

TransformEstimate recover_transform(std::span<const Se3Pose> local_poses,
                                    std::span<const IndexedPose> gauge_poses, double scale) {
  if (gauge_poses.empty()) {
    fail(ErrorCode::kNotEnoughPoses, "recover_transform: no recovered poses");
  }
  if (!(scale > 0.0)) fail(ErrorCode::kInvalidArgument, "recover_transform: scale must be positive");

  TransformEstimate est;
  est.candidates.reserve(gauge_poses.size());
  std::array<std::vector<double>, 12> entries;
  for (const auto& [index, g_c] : gauge_poses) {
    if (index < 0 || static_cast<size_t>(index) >= local_poses.size()) {
      fail(ErrorCode::kInvalidArgument, "recover_transform: pose index out of range");
    }
    const Se3Pose& g_local = local_poses[static_cast<size_t>(index)];
    // T = G^C S G^local^-1
    const Sim3Transform t = Sim3Transform(g_c, 1.0) * Sim3Transform::from_scale(scale) *
                            Sim3Transform(g_local.inverse(), 1.0);
    est.candidates.push_back(t);
    const Mat3& r = t.pose().rotation();
    for (int k = 0; k < 9; ++k) entries[static_cast<size_t>(k)].push_back(r(k / 3, k % 3));
    for (int k = 0; k < 3; ++k) entries[static_cast<size_t>(9 + k)].push_back(t.pose().translation()[k]);
  }
  Mat3 r_med;
  Vec3 t_med;
  for (int k = 0; k < 9; ++k) r_med(k / 3, k % 3) = median_of(entries[static_cast<size_t>(k)]);
  for (int k = 0; k < 3; ++k) t_med[k] = median_of(entries[static_cast<size_t>(9 + k)]);
  est.transform = Sim3Transform(Se3Pose(project_to_rotation(r_med), t_med), scale);
  return est;
}

SimulatedSfmBackend::SimulatedSfmBackend(std::vector<Sim3Transform> field_to_gauge,
                                         SfmSimulatorConfig cfg)
    : field_to_gauge_(std::move(field_to_gauge)), cfg_(cfg) {
  cfg_.validate();
}

PoseRecoveryResult SimulatedSfmBackend::recover(std::span<const RenderedView> views,
                                                int field_count) {
  if (field_count > static_cast<int>(field_to_gauge_.size())) {
    fail(ErrorCode::kBackendFailure, "simulated backend: no gauge configured for field " +
                                         std::to_string(field_to_gauge_.size()));
  }
  std::vector<PoseSampleSet> sets(static_cast<size_t>(field_count));
  for (const auto& v : views) {
    if (v.field < 0 || v.field >= field_count) {
      fail(ErrorCode::kBackendFailure, "simulated backend: view with unknown field id");
    }
    auto& poses = sets[static_cast<size_t>(v.field)].poses;
    if (v.index != static_cast<int>(poses.size())) {
      fail(ErrorCode::kBackendFailure, "simulated backend: views must arrive in index order");
    }
    poses.push_back(v.local_pose);
  }
  return simulate_sfm(sets, std::span(field_to_gauge_.data(), static_cast<size_t>(field_count)), cfg_);
}

PoseSampleSet query_poses_for(const RadianceField& field, const RegistrationSettings& settings,
                              const std::vector<Se3Pose>& training, std::uint64_t seed) {
  const Aabb b = field.bounds();
  const double radius = settings.radius > 0.0 ? settings.radius : settings.radius_factor * b.radius();
  PoseSampleSet set;
  if (settings.provenance != PoseProvenance::kTraining) {
    set = sample_hemisphere_poses(settings.pose_count, radius, settings.elevation_lo_deg,
                                  settings.elevation_hi_deg, field.origin(), seed);
  }
  if (settings.provenance != PoseProvenance::kHemispheric) {
    if (training.empty()) {
      fail(ErrorCode::kInvalidArgument, "registration: training poses requested but none given");
    }
    set.poses.insert(set.poses.end(), training.begin(), training.end());
  }
  set.provenance = settings.provenance;
  return set;
}

namespace {

FieldRegistration estimate_field(const char* name, const PoseSampleSet& local,
                                 const RecoveredPoses& recovered, std::uint64_t seed) {
  FieldRegistration fr;
  fr.requested = static_cast<int>(local.poses.size());
  const auto ok = successful_poses(recovered);
  fr.recovered = static_cast<int>(ok.size());
  try {
    fr.scale = recover_scale(local.poses, ok, seed);
    fr.estimate = recover_transform(local.poses, ok, fr.scale);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("field ") + name + ": " + e.what());
  }
  return fr;
}

}  // namespace

RegistrationReport register_fields(const RadianceField& field_a, const RadianceField& field_b,
                                   const RegistrationSettings& settings,
                                   PoseRecoveryBackend& backend,
                                   const std::optional<Sim3Transform>& ground_truth) {
  const std::array<const RadianceField*, 2> fields{&field_a, &field_b};
  const std::array<PoseSampleSet, 2> local{
      query_poses_for(field_a, settings, settings.training_poses_a, mix_seed(settings.seed, 0)),
      query_poses_for(field_b, settings, settings.training_poses_b, mix_seed(settings.seed, 1))};

  std::vector<RenderedView> views;
  for (int f = 0; f < 2; ++f) {
    for (size_t i = 0; i < local[static_cast<size_t>(f)].poses.size(); ++i) {
      views.push_back({f, static_cast<int>(i), local[static_cast<size_t>(f)].poses[i], {}});
    }
  }
  const double focal = 0.5 * settings.image_width / std::tan(0.5 * settings.fov_deg * kDegToRad);
  // Views are independent; each render is itself single-threaded here so the
  // outer loop carries the parallelism.
  parallel_for(static_cast<int>(views.size()), settings.threads, [&](int v) {
    RenderedView& view = views[static_cast<size_t>(v)];
    const RadianceField& field = *fields[static_cast<size_t>(view.field)];
    const double dist = (view.local_pose.translation() - field.origin()).norm();
    const double extent = 1.5 * field.bounds().radius();
    const double near = std::max(1e-3 * std::max(dist, 1.0), dist - extent);
    const double far = dist + extent;
    const Camera cam = Camera::centered(view.local_pose, settings.image_width, settings.image_height,
                                        focal, near, far);
    RenderSettings rs{settings.budget, mix_seed(settings.seed, 1000u + static_cast<unsigned>(v)), 1};
    view.image = render(field, cam, rs).color;
  });

  const PoseRecoveryResult recovered = backend.recover(views, 2);
  if (recovered.fields.size() != 2 || recovered.fields[0].size() != local[0].poses.size() ||
      recovered.fields[1].size() != local[1].poses.size()) {
    fail(ErrorCode::kBackendFailure, "pose recovery returned a result of the wrong shape");
  }

  RegistrationReport report;
  report.a = estimate_field("A", local[0], recovered.fields[0], mix_seed(settings.seed, 2));
  report.b = estimate_field("B", local[1], recovered.fields[1], mix_seed(settings.seed, 3));
  for (const auto& v : views) {
    (v.field == 0 ? report.a : report.b).image_hashes.push_back(image_hash(v.image));
  }
  report.t_ba = report.a.estimate.transform.inverse() * report.b.estimate.transform;
  report.ground_truth = ground_truth;
  if (ground_truth) report.error = registration_error(*ground_truth, report.t_ba);
  return report;
}

namespace {

void write_matrix(std::ostream& os, const char* key, const Mat4& m) {
  os << key;
  char buf[32];
  for (double v : row_major(m)) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    os << buf;
  }
  os << "\n";
}

void write_field(std::ostream& os, const char* name, const FieldRegistration& f) {
  char buf[64];
  os << "field " << name << " {\n";
  os << "  poses_requested " << f.requested << "\n";
  os << "  poses_recovered " << f.recovered << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", f.scale);
  os << "  scale " << buf << "\n";
  os << "  ";
  write_matrix(os, "median_transform", f.estimate.transform.matrix());
  for (size_t i = 0; i < f.estimate.candidates.size(); ++i) {
    os << "  ";
    write_matrix(os, "candidate", f.estimate.candidates[i].matrix());
  }
  for (auto h : f.image_hashes) {
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    os << "  image_hash " << buf << "\n";
  }
  os << "}\n";
}

}  // namespace

void write_registration_report(const std::filesystem::path& path, const RegistrationReport& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path.string());
  os << "# fieldfuse registration report v1\n";
  write_field(os, "A", r.a);
  write_field(os, "B", r.b);
  write_matrix(os, "t_ba", r.t_ba.matrix());
  if (r.ground_truth) write_matrix(os, "ground_truth_t_ba", r.ground_truth->matrix());
  if (r.error) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "r_err_deg %.6g\nt_err %.6g\ns_err %.6g\n", r.error->rotation_deg,
                  r.error->translation, r.error->log_scale);
    os << buf;
  }
  if (!os) fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace fieldfuse
