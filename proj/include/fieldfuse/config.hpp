#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fieldfuse/blending.hpp"
#include "fieldfuse/geometry.hpp"
#include "fieldfuse/registration.hpp"
#include "fieldfuse/renderer.hpp"

namespace fieldfuse {

// Scene files are line oriented:
//
//   # comment
//   key value value ...
//   key value ... {
//     nested statements
//   }
//
// Values are whitespace separated tokens. A block opens with a trailing "{"
// and closes with a line holding only "}". See docs/scene-format.md.

enum class FieldKind { kSphere, kBox, kGaussian, kVoxel, kComposite, kTransformed };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kSphere;
  int line = 0;

  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  double density = 1.0;
  Color color = Color::Constant(0.5);
  Aabb box;                 // box extent, or voxel bounds
  double peak = 1.0;
  double spread = 1.0;
  double extent = 3.0;
  std::string source;       // voxel / transformed
  std::string file;         // voxel loaded from disk
  std::uint32_t resolution = 0;
  double color_noise = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<std::string> parts;
  Sim3Transform transform;  // transformed: source frame -> this frame
};

struct RegisteredSpec {
  std::string name;
  std::string field;
  Sim3Transform to_reference;
  std::optional<Vec3> origin;
  std::vector<Se3Pose> training_poses;
  int line = 0;
};

struct CameraSpec {
  std::string name;
  Camera camera;
  int line = 0;
};

struct RegistrationSpec {
  bool present = false;
  std::string reference;  // empty: first registered field
  std::string target;     // empty: second registered field
  RegistrationSettings settings;
  SfmSimulatorConfig simulator;
  std::optional<Sim3Transform> gauge;  // hidden T_AC; random from the seed when absent
  bool has_ground_truth = true;
  int training_views = 100;
  double rho_min = 0.167;
  double rho_max = 1.3;
  int rho_steps = 8;
  int trials = 5;
};

struct BlendSpec {
  BlendConfig config;
  bool all_strategies = false;
  double gamma_min = 0.01;
  double gamma_max = 1000.0;
  int gamma_steps = 20;
};

struct SceneConfig {
  std::string scene = "scene";
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";
  std::filesystem::path base_dir;  // relative file paths resolve against this
  std::optional<std::string> ground_truth;
  std::vector<FieldSpec> fields;
  std::vector<RegisteredSpec> registered;
  std::vector<CameraSpec> cameras;
  RegistrationSpec registration;
  BlendSpec blend;
};

/// Throws Error(kParse) with "line N: ..." diagnostics.
SceneConfig parse_scene(const std::string& text, const std::filesystem::path& base_dir = {});
SceneConfig load_scene(const std::filesystem::path& path);
std::string serialize_scene(const SceneConfig& config);

bool operator==(const SceneConfig& a, const SceneConfig& b);

/// Blend presets: "indoor" (tau 1.8, gamma 5) and "mission-bay" (tau 1.2, gamma 10).
bool apply_blend_preset(BlendConfig& cfg, std::string_view preset);

/// Instantiated scene: every named field built and every registration placed.
struct BuiltScene {
  std::map<std::string, FieldPtr> fields;
  RegisteredFieldSet registered;
  FieldPtr ground_truth;
};

BuiltScene build_scene(const SceneConfig& config);

}  // namespace fieldfuse
