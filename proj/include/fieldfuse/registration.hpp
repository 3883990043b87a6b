#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fieldfuse/fields.hpp"
#include "fieldfuse/geometry.hpp"
#include "fieldfuse/image.hpp"

namespace fieldfuse {

enum class PoseProvenance { kHemispheric, kTraining, kMixed };

const char* to_string(PoseProvenance p);

/// Query poses (camera-to-field) in one field's local frame.
struct PoseSampleSet {
  std::vector<Se3Pose> poses;
  PoseProvenance provenance = PoseProvenance::kHemispheric;
};

/// `n` cameras at distance `radius` from `look_at`, azimuths stratified over
/// [0, 360) and elevations uniform in [elev_lo_deg, elev_hi_deg] above the
/// plane orthogonal to world +z. Every camera looks at `look_at` with +z up.
PoseSampleSet sample_hemisphere_poses(int n, double radius, double elev_lo_deg,
                                      double elev_hi_deg, const Vec3& look_at,
                                      std::uint64_t seed);

/// Per input image the pose recovered in the shared gauge frame C, or nullopt
/// when the pose-recovery step failed to register it.
using RecoveredPoses = std::vector<std::optional<Se3Pose>>;

struct PoseRecoveryResult {
  std::vector<RecoveredPoses> fields;  // indexed by field, then by image
};

struct SfmSimulatorConfig {
  double rotation_noise_deg = 0.0;     // per-axis std-dev of a small rotation
  double translation_noise_frac = 0.0; // per-axis std-dev, fraction of scene radius
  double outlier_fraction = 0.0;       // in [0, 1)
  double dropout_fraction = 0.0;       // in [0, 1)
  std::uint64_t seed = 0;

  void validate() const;
};

/// Emulates the output of structure-from-motion on the union of re-rendered
/// images: each local pose G is re-expressed in the hidden gauge C as the
/// SE(3) part of T_XC G S_XC^-1, then perturbed. Per field, floor(f n) poses
/// become uniformly random outliers inside the scene's bounding sphere and
/// floor(f n) further poses are dropped.
PoseRecoveryResult simulate_sfm(std::span<const PoseSampleSet> local_poses,
                                std::span<const Sim3Transform> field_to_gauge,
                                const SfmSimulatorConfig& cfg);

PoseRecoveryResult simulate_sfm(const PoseSampleSet& local_poses_a,
                                const PoseSampleSet& local_poses_b,
                                const Sim3Transform& true_t_ac, const Sim3Transform& true_t_bc,
                                const SfmSimulatorConfig& cfg);

/// (index into the local pose list, recovered gauge pose)
using IndexedPose = std::pair<int, Se3Pose>;

std::vector<IndexedPose> successful_poses(const RecoveredPoses& recovered);

/// Pairs are enumerated exhaustively up to this many recovered poses, beyond
/// it a seeded random subset of kMaxScalePairs pairs is used.
inline constexpr int kExhaustivePairLimit = 64;
inline constexpr int kMaxScalePairs = 2016;

/// Median over pose pairs of |t_i^C - t_j^C| / |t_i^A - t_j^A|.
double recover_scale(std::span<const Se3Pose> local_poses,
                     std::span<const IndexedPose> gauge_poses, std::uint64_t seed = 0);

struct TransformEstimate {
  Sim3Transform transform;                 // field -> gauge
  std::vector<Sim3Transform> candidates;   // one per recovered camera
};

/// Per camera T = G^C S G^A^-1; the element-wise median of the candidates'
/// rotations and translations, with the rotation projected back onto SO(3).
TransformEstimate recover_transform(std::span<const Se3Pose> local_poses,
                                    std::span<const IndexedPose> gauge_poses, double scale);

/// One image rendered for pose recovery.
struct RenderedView {
  int field = 0;
  int index = 0;
  Se3Pose local_pose;
  Image image;
};

/// Recovers the poses of all views in one common frame.
class PoseRecoveryBackend {
 public:
  virtual ~PoseRecoveryBackend() = default;
  virtual PoseRecoveryResult recover(std::span<const RenderedView> views, int field_count) = 0;
};

/// Backend that ignores pixels and maps each view's local pose through a known
/// field-to-gauge transform via simulate_sfm.
class SimulatedSfmBackend final : public PoseRecoveryBackend {
 public:
  SimulatedSfmBackend(std::vector<Sim3Transform> field_to_gauge, SfmSimulatorConfig cfg);
  PoseRecoveryResult recover(std::span<const RenderedView> views, int field_count) override;

 private:
  std::vector<Sim3Transform> field_to_gauge_;
  SfmSimulatorConfig cfg_;
};

struct RegistrationSettings {
  int pose_count = 32;
  double radius = 0.0;         // field-local units; <= 0 derives it from the bounds
  double radius_factor = 2.5;  // multiple of the bounds radius when radius <= 0
  double elevation_lo_deg = 0.0;
  double elevation_hi_deg = 30.0;
  int image_width = 64;
  int image_height = 64;
  double fov_deg = 60.0;
  int budget = 16;
  std::uint64_t seed = 0;
  int threads = 0;
  PoseProvenance provenance = PoseProvenance::kHemispheric;
  std::vector<Se3Pose> training_poses_a;  // used for training / mixed provenance
  std::vector<Se3Pose> training_poses_b;
};

struct FieldRegistration {
  int requested = 0;
  int recovered = 0;
  double scale = 1.0;
  TransformEstimate estimate;
  std::vector<std::uint64_t> image_hashes;
};

struct RegistrationReport {
  Sim3Transform t_ba;  // field B -> field A
  FieldRegistration a;
  FieldRegistration b;
  std::optional<Sim3Transform> ground_truth;
  std::optional<RegistrationError> error;
};

PoseSampleSet query_poses_for(const RadianceField& field, const RegistrationSettings& settings,
                              const std::vector<Se3Pose>& training, std::uint64_t seed);

/// Registration from re-rendering: sample query poses per field, render them,
/// recover all poses in one gauge, estimate S_XC and T_XC per field and return
/// T_BA = T_AC^-1 T_BC.
RegistrationReport register_fields(const RadianceField& field_a, const RadianceField& field_b,
                                   const RegistrationSettings& settings,
                                   PoseRecoveryBackend& backend,
                                   const std::optional<Sim3Transform>& ground_truth = std::nullopt);

void write_registration_report(const std::filesystem::path& path, const RegistrationReport& r);

}  // namespace fieldfuse
