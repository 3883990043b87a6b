#include "fieldfuse/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "fieldfuse/error.hpp"
#include "fieldfuse/random.hpp"

namespace fieldfuse {

namespace {

struct Node {
  std::string key;
  std::vector<std::string> values;
  std::vector<Node> children;
  bool block = false;
  int line = 0;
};

[[noreturn]] void parse_error(int line, const std::string& msg) {
  fail(ErrorCode::kParse, "line " + std::to_string(line) + ": " + msg);
}

std::vector<Node> parse_tree(const std::string& text) {
  std::vector<Node> root;
  std::vector<std::vector<Node>*> stack{&root};
  std::vector<int> open_lines;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() == 1 && tokens[0] == "}") {
      if (stack.size() == 1) parse_error(line_no, "unmatched '}'");
      stack.pop_back();
      open_lines.pop_back();
      continue;
    }
    Node node;
    node.line = line_no;
    node.key = tokens[0];
    if (node.key == "{" || node.key == "}") parse_error(line_no, "expected a key before '" + node.key + "'");
    bool opens = false;
    for (size_t i = 1; i < tokens.size(); ++i) {
      if (tokens[i] == "{" && i + 1 == tokens.size()) {
        opens = true;
      } else if (tokens[i] == "{" || tokens[i] == "}") {
        parse_error(line_no, "braces must end a line or stand alone");
      } else {
        node.values.push_back(tokens[i]);
      }
    }
    node.block = opens;
    stack.back()->push_back(std::move(node));
    if (opens) {
      stack.push_back(&stack.back()->back().children);
      open_lines.push_back(line_no);
    }
  }
  if (stack.size() != 1) parse_error(open_lines.back(), "block is never closed");
  return root;
}

double to_number(const Node& n, size_t idx) {
  if (idx >= n.values.size()) parse_error(n.line, "'" + n.key + "' is missing value " + std::to_string(idx + 1));
  const std::string& s = n.values[idx];
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    // from_chars rejects "inf"/"+1"; fall back to strtod for those spellings.
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) parse_error(n.line, "'" + n.key + "': '" + s + "' is not a number");
  }
  return v;
}

std::int64_t to_integer(const Node& n, size_t idx) {
  const double v = to_number(n, idx);
  if (v != std::floor(v) || std::abs(v) > 9e15) parse_error(n.line, "'" + n.key + "' expects an integer");
  return static_cast<std::int64_t>(v);
}

std::uint64_t to_seed(const Node& n, size_t idx) {
  if (idx >= n.values.size()) parse_error(n.line, "'" + n.key + "' is missing a value");
  const std::string& s = n.values[idx];
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    parse_error(n.line, "'" + n.key + "' expects a non-negative integer");
  }
  return v;
}

void expect_values(const Node& n, size_t count) {
  if (n.values.size() != count) {
    parse_error(n.line, "'" + n.key + "' expects " + std::to_string(count) + " value(s), got " +
                            std::to_string(n.values.size()));
  }
}

void expect_leaf(const Node& n) {
  if (n.block) parse_error(n.line, "'" + n.key + "' does not take a block");
}

const std::string& word(const Node& n) {
  expect_values(n, 1);
  return n.values[0];
}

double number(const Node& n) {
  expect_values(n, 1);
  return to_number(n, 0);
}

Vec3 vec3(const Node& n) {
  expect_values(n, 3);
  return {to_number(n, 0), to_number(n, 1), to_number(n, 2)};
}

Mat4 mat4(const Node& n) {
  expect_values(n, 16);
  std::array<double, 16> v{};
  for (size_t i = 0; i < 16; ++i) v[i] = to_number(n, i);
  return matrix_from_row_major(v);
}

Sim3Transform sim3(const Node& n) {
  try {
    return Sim3Transform::from_matrix(mat4(n));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) throw;
    parse_error(n.line, e.what());
  }
}

Se3Pose se3(const Node& n) {
  const Mat4 m = mat4(n);
  try {
    if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-12) {
      fail(ErrorCode::kInvalidArgument, "pose bottom row must be 0 0 0 1");
    }
    return Se3Pose(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
  } catch (const Error& e) {
    parse_error(n.line, e.what());
  }
}

Color color(const Node& n) {
  const Vec3 c = vec3(n);
  if ((c.array() < 0.0).any() || (c.array() > 1.0).any()) parse_error(n.line, "color channels must lie in [0, 1]");
  return c;
}

[[noreturn]] void unknown_key(const Node& n, const char* where) {
  parse_error(n.line, "unknown key '" + n.key + "' in " + where);
}

std::optional<FieldKind> parse_kind(std::string_view s) {
  if (s == "sphere") return FieldKind::kSphere;
  if (s == "box") return FieldKind::kBox;
  if (s == "gaussian") return FieldKind::kGaussian;
  if (s == "voxel") return FieldKind::kVoxel;
  if (s == "composite") return FieldKind::kComposite;
  if (s == "transformed") return FieldKind::kTransformed;
  return std::nullopt;
}

const char* kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::kSphere: return "sphere";
    case FieldKind::kBox: return "box";
    case FieldKind::kGaussian: return "gaussian";
    case FieldKind::kVoxel: return "voxel";
    case FieldKind::kComposite: return "composite";
    case FieldKind::kTransformed: return "transformed";
  }
  return "?";
}

FieldSpec parse_field(const Node& n) {
  if (!n.block) parse_error(n.line, "'field' needs a block");
  FieldSpec f;
  f.name = word(n);
  f.line = n.line;
  bool have_kind = false;
  std::set<std::string> seen;
  for (const Node& c : n.children) {
    expect_leaf(c);
    seen.insert(c.key);
    if (c.key == "kind") {
      const auto k = parse_kind(word(c));
      if (!k) parse_error(c.line, "unknown field kind '" + c.values[0] + "'");
      f.kind = *k;
      have_kind = true;
    } else if (c.key == "center") {
      f.center = vec3(c);
    } else if (c.key == "radius") {
      f.radius = number(c);
    } else if (c.key == "density") {
      f.density = number(c);
    } else if (c.key == "color") {
      f.color = color(c);
    } else if (c.key == "min") {
      f.box.lo = vec3(c);
    } else if (c.key == "max") {
      f.box.hi = vec3(c);
    } else if (c.key == "peak") {
      f.peak = number(c);
    } else if (c.key == "spread") {
      f.spread = number(c);
    } else if (c.key == "extent") {
      f.extent = number(c);
    } else if (c.key == "source") {
      f.source = word(c);
    } else if (c.key == "file") {
      f.file = word(c);
    } else if (c.key == "resolution") {
      expect_values(c, 1);
      const auto r = to_integer(c, 0);
      if (r < 1 || r > 1024) parse_error(c.line, "resolution must lie in [1, 1024]");
      f.resolution = static_cast<std::uint32_t>(r);
    } else if (c.key == "color_noise") {
      f.color_noise = number(c);
    } else if (c.key == "noise_seed") {
      expect_values(c, 1);
      f.noise_seed = to_seed(c, 0);
    } else if (c.key == "parts") {
      if (c.values.empty()) parse_error(c.line, "'parts' needs at least one field name");
      f.parts = c.values;
    } else if (c.key == "transform") {
      f.transform = sim3(c);
    } else {
      unknown_key(c, "field");
    }
  }
  if (!have_kind) parse_error(n.line, "field '" + f.name + "' has no kind");
  auto require = [&](const char* key) {
    if (!seen.count(key)) {
      parse_error(n.line, std::string("field '") + f.name + "' (" + kind_name(f.kind) + ") requires '" + key + "'");
    }
  };
  switch (f.kind) {
    case FieldKind::kSphere: require("center"); require("radius"); break;
    case FieldKind::kBox: require("min"); require("max"); break;
    case FieldKind::kGaussian: require("center"); require("spread"); break;
    case FieldKind::kVoxel:
      require("min");
      require("max");
      if (f.file.empty() == f.source.empty()) {
        parse_error(n.line, "voxel field '" + f.name + "' needs exactly one of 'file' or 'source'");
      }
      if (!f.source.empty()) require("resolution");
      break;
    case FieldKind::kComposite: require("parts"); break;
    case FieldKind::kTransformed: require("source"); require("transform"); break;
  }
  return f;
}

RegisteredSpec parse_registered(const Node& n) {
  if (!n.block) parse_error(n.line, "'registered' needs a block");
  RegisteredSpec r;
  r.name = word(n);
  r.line = n.line;
  for (const Node& c : n.children) {
    expect_leaf(c);
    if (c.key == "field") r.field = word(c);
    else if (c.key == "transform") r.to_reference = sim3(c);
    else if (c.key == "origin") r.origin = vec3(c);
    else if (c.key == "training_pose") r.training_poses.push_back(se3(c));
    else unknown_key(c, "registered");
  }
  if (r.field.empty()) parse_error(n.line, "registered '" + r.name + "' names no field");
  return r;
}

CameraSpec parse_camera(const Node& n) {
  if (!n.block) parse_error(n.line, "'camera' needs a block");
  CameraSpec cs;
  cs.name = word(n);
  cs.line = n.line;
  Camera& cam = cs.camera;
  std::optional<Vec3> eye, target;
  Vec3 up = Vec3::UnitZ();
  std::optional<Se3Pose> pose;
  std::optional<double> cx, cy;
  bool have_size = false, have_focal = false;
  for (const Node& c : n.children) {
    expect_leaf(c);
    if (c.key == "size") {
      expect_values(c, 2);
      cam.width = static_cast<int>(to_integer(c, 0));
      cam.height = static_cast<int>(to_integer(c, 1));
      have_size = true;
    } else if (c.key == "focal") {
      if (c.values.size() == 1) {
        cam.fx = cam.fy = to_number(c, 0);
      } else {
        expect_values(c, 2);
        cam.fx = to_number(c, 0);
        cam.fy = to_number(c, 1);
      }
      have_focal = true;
    } else if (c.key == "principal") {
      expect_values(c, 2);
      cx = to_number(c, 0);
      cy = to_number(c, 1);
    } else if (c.key == "near") {
      cam.near = number(c);
    } else if (c.key == "far") {
      cam.far = number(c);
    } else if (c.key == "eye") {
      eye = vec3(c);
    } else if (c.key == "target") {
      target = vec3(c);
    } else if (c.key == "up") {
      up = vec3(c);
    } else if (c.key == "pose") {
      pose = se3(c);
    } else {
      unknown_key(c, "camera");
    }
  }
  if (!have_size || !have_focal) parse_error(n.line, "camera '" + cs.name + "' needs 'size' and 'focal'");
  cam.cx = cx.value_or(0.5 * cam.width);
  cam.cy = cy.value_or(0.5 * cam.height);
  if (pose) {
    if (eye || target) parse_error(n.line, "camera '" + cs.name + "': use either 'pose' or 'eye'/'target'");
    cam.pose = *pose;
  } else if (eye && target) {
    try {
      cam.pose = Se3Pose::look_at(*eye, *target, up);
    } catch (const Error& e) {
      parse_error(n.line, e.what());
    }
  } else {
    parse_error(n.line, "camera '" + cs.name + "' needs 'pose' or both 'eye' and 'target'");
  }
  try {
    cam.validate();
  } catch (const Error& e) {
    parse_error(n.line, e.what());
  }
  return cs;
}

RegistrationSpec parse_registration(const Node& n) {
  if (!n.block) parse_error(n.line, "'registration' needs a block");
  RegistrationSpec r;
  r.present = true;
  RegistrationSettings& s = r.settings;
  for (const Node& c : n.children) {
    expect_leaf(c);
    if (c.key == "reference") r.reference = word(c);
    else if (c.key == "target") r.target = word(c);
    else if (c.key == "poses") { expect_values(c, 1); s.pose_count = static_cast<int>(to_integer(c, 0)); }
    else if (c.key == "radius") s.radius = number(c);
    else if (c.key == "radius_factor") s.radius_factor = number(c);
    else if (c.key == "elevation") {
      expect_values(c, 2);
      s.elevation_lo_deg = to_number(c, 0);
      s.elevation_hi_deg = to_number(c, 1);
    } else if (c.key == "image") {
      expect_values(c, 2);
      s.image_width = static_cast<int>(to_integer(c, 0));
      s.image_height = static_cast<int>(to_integer(c, 1));
    } else if (c.key == "fov") s.fov_deg = number(c);
    else if (c.key == "budget") { expect_values(c, 1); s.budget = static_cast<int>(to_integer(c, 0)); }
    else if (c.key == "provenance") {
      const std::string& p = word(c);
      if (p == "hemispheric") s.provenance = PoseProvenance::kHemispheric;
      else if (p == "training") s.provenance = PoseProvenance::kTraining;
      else if (p == "mixed") s.provenance = PoseProvenance::kMixed;
      else parse_error(c.line, "unknown provenance '" + p + "'");
    } else if (c.key == "rotation_noise") r.simulator.rotation_noise_deg = number(c);
    else if (c.key == "translation_noise") r.simulator.translation_noise_frac = number(c);
    else if (c.key == "outliers") r.simulator.outlier_fraction = number(c);
    else if (c.key == "dropout") r.simulator.dropout_fraction = number(c);
    else if (c.key == "gauge") {
      if (c.values.size() == 1 && c.values[0] == "random") r.gauge.reset();
      else r.gauge = sim3(c);
    } else if (c.key == "ground_truth") {
      const std::string& v = word(c);
      if (v != "yes" && v != "no") parse_error(c.line, "ground_truth expects yes or no");
      r.has_ground_truth = v == "yes";
    } else if (c.key == "training_views") { expect_values(c, 1); r.training_views = static_cast<int>(to_integer(c, 0)); }
    else if (c.key == "rho") {
      expect_values(c, 3);
      r.rho_min = to_number(c, 0);
      r.rho_max = to_number(c, 1);
      r.rho_steps = static_cast<int>(to_integer(c, 2));
    } else if (c.key == "trials") { expect_values(c, 1); r.trials = static_cast<int>(to_integer(c, 0)); }
    else unknown_key(c, "registration");
  }
  try {
    r.simulator.validate();
  } catch (const Error& e) {
    parse_error(n.line, e.what());
  }
  if (s.pose_count < 2) parse_error(n.line, "registration needs at least 2 poses");
  if (s.image_width < 1 || s.image_height < 1 || s.budget < 2) parse_error(n.line, "bad registration image settings");
  if (!(r.rho_min > 0.0 && r.rho_min <= r.rho_max) || r.rho_steps < 1) parse_error(n.line, "bad rho range");
  if (r.trials < 1 || r.training_views < 1) parse_error(n.line, "trials and training_views must be >= 1");
  return r;
}

BlendSpec parse_blend(const Node& n) {
  if (!n.block) parse_error(n.line, "'blend' needs a block");
  BlendSpec b;
  for (const Node& c : n.children) {
    expect_leaf(c);
    if (c.key == "strategy") {
      const std::string& s = word(c);
      if (s == "all") {
        b.all_strategies = true;
      } else if (auto st = parse_strategy(s)) {
        b.config.strategy = *st;
        b.all_strategies = false;
      } else {
        parse_error(c.line, "unknown strategy '" + s + "'");
      }
    } else if (c.key == "preset") {
      if (!apply_blend_preset(b.config, word(c))) parse_error(c.line, "unknown preset '" + c.values[0] + "'");
    } else if (c.key == "gamma") b.config.gamma = number(c);
    else if (c.key == "tau") b.config.tau = number(c);
    else if (c.key == "budget") { expect_values(c, 1); b.config.budget = static_cast<int>(to_integer(c, 0)); }
    else if (c.key == "eps_mass") b.config.eps_mass = number(c);
    else if (c.key == "gamma_sweep") {
      expect_values(c, 3);
      b.gamma_min = to_number(c, 0);
      b.gamma_max = to_number(c, 1);
      b.gamma_steps = static_cast<int>(to_integer(c, 2));
    } else unknown_key(c, "blend");
  }
  try {
    b.config.validate();
  } catch (const Error& e) {
    parse_error(n.line, e.what());
  }
  if (!(b.gamma_min > 0.0 && b.gamma_min <= b.gamma_max) || b.gamma_steps < 1) parse_error(n.line, "bad gamma_sweep");
  return b;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

std::string fmt(const Mat4& m) {
  std::string s;
  for (double v : row_major(m)) {
    if (!s.empty()) s += ' ';
    s += fmt(v);
  }
  return s;
}

bool same(const Aabb& a, const Aabb& b) { return a.lo == b.lo && a.hi == b.hi; }
bool same(const Sim3Transform& a, const Sim3Transform& b) { return a.matrix() == b.matrix(); }
bool same(const Se3Pose& a, const Se3Pose& b) { return a.matrix() == b.matrix(); }

}  // namespace

bool apply_blend_preset(BlendConfig& cfg, std::string_view preset) {
  if (preset == "indoor") {
    cfg.tau = 1.8;
    cfg.gamma = 5.0;
    return true;
  }
  if (preset == "mission-bay") {
    cfg.tau = 1.2;
    cfg.gamma = 10.0;
    return true;
  }
  return false;
}

SceneConfig parse_scene(const std::string& text, const std::filesystem::path& base_dir) {
  SceneConfig cfg;
  cfg.base_dir = base_dir;
  std::set<std::string> field_names, registered_names, camera_names;
  for (const Node& n : parse_tree(text)) {
    if (n.key == "scene") { expect_leaf(n); cfg.scene = word(n); }
    else if (n.key == "seed") { expect_leaf(n); expect_values(n, 1); cfg.seed = to_seed(n, 0); }
    else if (n.key == "output") { expect_leaf(n); cfg.output = word(n); }
    else if (n.key == "ground_truth") { expect_leaf(n); cfg.ground_truth = word(n); }
    else if (n.key == "field") {
      FieldSpec f = parse_field(n);
      if (!field_names.insert(f.name).second) parse_error(n.line, "duplicate field '" + f.name + "'");
      cfg.fields.push_back(std::move(f));
    } else if (n.key == "registered") {
      RegisteredSpec r = parse_registered(n);
      if (!registered_names.insert(r.name).second) parse_error(n.line, "duplicate registered '" + r.name + "'");
      cfg.registered.push_back(std::move(r));
    } else if (n.key == "camera") {
      CameraSpec c = parse_camera(n);
      if (!camera_names.insert(c.name).second) parse_error(n.line, "duplicate camera '" + c.name + "'");
      cfg.cameras.push_back(std::move(c));
    } else if (n.key == "registration") {
      cfg.registration = parse_registration(n);
    } else if (n.key == "blend") {
      cfg.blend = parse_blend(n);
    } else {
      unknown_key(n, "scene");
    }
  }

  // Cross references.
  auto check_field = [&](const std::string& name, int line, const std::string& who) {
    if (!field_names.count(name)) parse_error(line, who + " refers to unknown field '" + name + "'");
  };
  for (const auto& f : cfg.fields) {
    if (!f.source.empty()) check_field(f.source, f.line, "field '" + f.name + "'");
    for (const auto& p : f.parts) check_field(p, f.line, "field '" + f.name + "'");
  }
  for (const auto& r : cfg.registered) check_field(r.field, r.line, "registered '" + r.name + "'");
  if (cfg.ground_truth) check_field(*cfg.ground_truth, 0, "ground_truth");
  if (!cfg.registered.empty() && !same(cfg.registered.front().to_reference, Sim3Transform::identity())) {
    parse_error(cfg.registered.front().line, "the first registered field is the reference and must use the identity transform");
  }
  if (cfg.registration.present) {
    for (const std::string* name : {&cfg.registration.reference, &cfg.registration.target}) {
      if (!name->empty() && !registered_names.count(*name)) {
        parse_error(0, "registration refers to unknown registered field '" + *name + "'");
      }
    }
  }
  // Reject reference cycles early so build_scene can recurse freely.
  std::map<std::string, const FieldSpec*> by_name;
  for (const auto& f : cfg.fields) by_name[f.name] = &f;
  std::map<std::string, int> state;
  std::function<void(const FieldSpec&)> visit = [&](const FieldSpec& f) {
    int& s = state[f.name];
    if (s == 2) return;
    if (s == 1) parse_error(f.line, "field '" + f.name + "' is part of a reference cycle");
    s = 1;
    if (!f.source.empty()) visit(*by_name.at(f.source));
    for (const auto& p : f.parts) visit(*by_name.at(p));
    s = 2;
  };
  for (const auto& f : cfg.fields) visit(f);
  return cfg;
}

SceneConfig load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open scene file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scene(ss.str(), path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string serialize_scene(const SceneConfig& c) {
  std::ostringstream os;
  os << "scene " << c.scene << "\n";
  os << "seed " << c.seed << "\n";
  os << "output " << c.output.string() << "\n";
  if (c.ground_truth) os << "ground_truth " << *c.ground_truth << "\n";
  for (const auto& f : c.fields) {
    os << "\nfield " << f.name << " {\n  kind " << kind_name(f.kind) << "\n";
    switch (f.kind) {
      case FieldKind::kSphere:
        os << "  center " << fmt(f.center) << "\n  radius " << fmt(f.radius) << "\n  density "
           << fmt(f.density) << "\n  color " << fmt(f.color) << "\n";
        break;
      case FieldKind::kBox:
        os << "  min " << fmt(f.box.lo) << "\n  max " << fmt(f.box.hi) << "\n  density " << fmt(f.density)
           << "\n  color " << fmt(f.color) << "\n";
        break;
      case FieldKind::kGaussian:
        os << "  center " << fmt(f.center) << "\n  peak " << fmt(f.peak) << "\n  spread " << fmt(f.spread)
           << "\n  extent " << fmt(f.extent) << "\n  color " << fmt(f.color) << "\n";
        break;
      case FieldKind::kVoxel:
        os << "  min " << fmt(f.box.lo) << "\n  max " << fmt(f.box.hi) << "\n";
        if (!f.file.empty()) {
          os << "  file " << f.file << "\n";
        } else {
          os << "  source " << f.source << "\n  resolution " << f.resolution << "\n  color_noise "
             << fmt(f.color_noise) << "\n  noise_seed " << f.noise_seed << "\n";
        }
        break;
      case FieldKind::kComposite:
        os << "  parts";
        for (const auto& p : f.parts) os << " " << p;
        os << "\n";
        break;
      case FieldKind::kTransformed:
        os << "  source " << f.source << "\n  transform " << fmt(f.transform.matrix()) << "\n";
        break;
    }
    os << "}\n";
  }
  for (const auto& r : c.registered) {
    os << "\nregistered " << r.name << " {\n  field " << r.field << "\n  transform "
       << fmt(r.to_reference.matrix()) << "\n";
    if (r.origin) os << "  origin " << fmt(*r.origin) << "\n";
    for (const auto& p : r.training_poses) os << "  training_pose " << fmt(p.matrix()) << "\n";
    os << "}\n";
  }
  for (const auto& cs : c.cameras) {
    const Camera& cam = cs.camera;
    os << "\ncamera " << cs.name << " {\n  size " << cam.width << " " << cam.height << "\n  focal "
       << fmt(cam.fx) << " " << fmt(cam.fy) << "\n  principal " << fmt(cam.cx) << " " << fmt(cam.cy)
       << "\n  near " << fmt(cam.near) << "\n  far " << fmt(cam.far) << "\n  pose "
       << fmt(cam.pose.matrix()) << "\n}\n";
  }
  if (c.registration.present) {
    const auto& r = c.registration;
    const auto& s = r.settings;
    os << "\nregistration {\n";
    if (!r.reference.empty()) os << "  reference " << r.reference << "\n";
    if (!r.target.empty()) os << "  target " << r.target << "\n";
    os << "  poses " << s.pose_count << "\n  radius " << fmt(s.radius) << "\n  radius_factor "
       << fmt(s.radius_factor) << "\n  elevation " << fmt(s.elevation_lo_deg) << " "
       << fmt(s.elevation_hi_deg) << "\n  image " << s.image_width << " " << s.image_height
       << "\n  fov " << fmt(s.fov_deg) << "\n  budget " << s.budget << "\n  provenance "
       << to_string(s.provenance) << "\n  rotation_noise " << fmt(r.simulator.rotation_noise_deg)
       << "\n  translation_noise " << fmt(r.simulator.translation_noise_frac) << "\n  outliers "
       << fmt(r.simulator.outlier_fraction) << "\n  dropout " << fmt(r.simulator.dropout_fraction)
       << "\n  gauge " << (r.gauge ? fmt(r.gauge->matrix()) : std::string("random"))
       << "\n  ground_truth " << (r.has_ground_truth ? "yes" : "no") << "\n  training_views "
       << r.training_views << "\n  rho " << fmt(r.rho_min) << " " << fmt(r.rho_max) << " "
       << r.rho_steps << "\n  trials " << r.trials << "\n}\n";
  }
  const auto& b = c.blend;
  os << "\nblend {\n  strategy " << (b.all_strategies ? "all" : to_string(b.config.strategy))
     << "\n  gamma " << fmt(b.config.gamma) << "\n  tau " << fmt(b.config.tau) << "\n  budget "
     << b.config.budget << "\n  eps_mass " << fmt(b.config.eps_mass) << "\n  gamma_sweep "
     << fmt(b.gamma_min) << " " << fmt(b.gamma_max) << " " << b.gamma_steps << "\n}\n";
  return os.str();
}

bool operator==(const SceneConfig& a, const SceneConfig& b) {
  if (a.scene != b.scene || a.seed != b.seed || a.output != b.output || a.ground_truth != b.ground_truth) return false;
  if (a.fields.size() != b.fields.size() || a.registered.size() != b.registered.size() ||
      a.cameras.size() != b.cameras.size()) {
    return false;
  }
  for (size_t i = 0; i < a.fields.size(); ++i) {
    const FieldSpec &x = a.fields[i], &y = b.fields[i];
    if (x.name != y.name || x.kind != y.kind) return false;
    bool eq = true;
    switch (x.kind) {
      case FieldKind::kSphere:
        eq = x.center == y.center && x.radius == y.radius && x.density == y.density && x.color == y.color;
        break;
      case FieldKind::kBox:
        eq = same(x.box, y.box) && x.density == y.density && x.color == y.color;
        break;
      case FieldKind::kGaussian:
        eq = x.center == y.center && x.peak == y.peak && x.spread == y.spread && x.extent == y.extent &&
             x.color == y.color;
        break;
      case FieldKind::kVoxel:
        eq = same(x.box, y.box) && x.file == y.file && x.source == y.source &&
             (!x.file.empty() || (x.resolution == y.resolution && x.color_noise == y.color_noise &&
                                  x.noise_seed == y.noise_seed));
        break;
      case FieldKind::kComposite: eq = x.parts == y.parts; break;
      case FieldKind::kTransformed: eq = x.source == y.source && same(x.transform, y.transform); break;
    }
    if (!eq) return false;
  }
  for (size_t i = 0; i < a.registered.size(); ++i) {
    const auto &x = a.registered[i], &y = b.registered[i];
    if (x.name != y.name || x.field != y.field || !same(x.to_reference, y.to_reference) ||
        x.origin != y.origin || x.training_poses.size() != y.training_poses.size()) {
      return false;
    }
    for (size_t k = 0; k < x.training_poses.size(); ++k) {
      if (!same(x.training_poses[k], y.training_poses[k])) return false;
    }
  }
  for (size_t i = 0; i < a.cameras.size(); ++i) {
    const auto &x = a.cameras[i], &y = b.cameras[i];
    const Camera &p = x.camera, &q = y.camera;
    if (x.name != y.name || !same(p.pose, q.pose) || p.fx != q.fx || p.fy != q.fy || p.cx != q.cx ||
        p.cy != q.cy || p.width != q.width || p.height != q.height || p.near != q.near || p.far != q.far) {
      return false;
    }
  }
  const auto &ra = a.registration, &rb = b.registration;
  if (ra.present != rb.present) return false;
  if (ra.present) {
    const auto &s = ra.settings, &t = rb.settings;
    const bool gauge_eq = ra.gauge.has_value() == rb.gauge.has_value() &&
                          (!ra.gauge || same(*ra.gauge, *rb.gauge));
    if (ra.reference != rb.reference || ra.target != rb.target || s.pose_count != t.pose_count ||
        s.radius != t.radius || s.radius_factor != t.radius_factor ||
        s.elevation_lo_deg != t.elevation_lo_deg || s.elevation_hi_deg != t.elevation_hi_deg ||
        s.image_width != t.image_width || s.image_height != t.image_height || s.fov_deg != t.fov_deg ||
        s.budget != t.budget || s.provenance != t.provenance ||
        ra.simulator.rotation_noise_deg != rb.simulator.rotation_noise_deg ||
        ra.simulator.translation_noise_frac != rb.simulator.translation_noise_frac ||
        ra.simulator.outlier_fraction != rb.simulator.outlier_fraction ||
        ra.simulator.dropout_fraction != rb.simulator.dropout_fraction || !gauge_eq ||
        ra.has_ground_truth != rb.has_ground_truth || ra.training_views != rb.training_views ||
        ra.rho_min != rb.rho_min || ra.rho_max != rb.rho_max || ra.rho_steps != rb.rho_steps ||
        ra.trials != rb.trials) {
      return false;
    }
  }
  const auto &ba = a.blend, &bb = b.blend;
  return ba.all_strategies == bb.all_strategies &&
         (ba.all_strategies || ba.config.strategy == bb.config.strategy) &&
         ba.config.gamma == bb.config.gamma && ba.config.tau == bb.config.tau &&
         ba.config.budget == bb.config.budget && ba.config.eps_mass == bb.config.eps_mass &&
         ba.gamma_min == bb.gamma_min && ba.gamma_max == bb.gamma_max && ba.gamma_steps == bb.gamma_steps;
}

BuiltScene build_scene(const SceneConfig& config) {
  BuiltScene scene;
  std::map<std::string, const FieldSpec*> by_name;
  for (const auto& f : config.fields) by_name[f.name] = &f;

  std::function<FieldPtr(const std::string&)> build = [&](const std::string& name) -> FieldPtr {
    if (auto it = scene.fields.find(name); it != scene.fields.end()) return it->second;
    const auto spec_it = by_name.find(name);
    if (spec_it == by_name.end()) fail(ErrorCode::kParse, "unknown field '" + name + "'");
    const FieldSpec& f = *spec_it->second;
    FieldPtr out;
    try {
      switch (f.kind) {
        case FieldKind::kSphere:
          out = std::make_shared<UniformSphereField>(f.center, f.radius, f.density, f.color);
          break;
        case FieldKind::kBox:
          out = std::make_shared<UniformBoxField>(f.box, f.density, f.color);
          break;
        case FieldKind::kGaussian:
          out = std::make_shared<GaussianBlobField>(f.center, f.peak, f.spread, f.color, f.extent);
          break;
        case FieldKind::kVoxel:
          if (!f.file.empty()) {
            std::filesystem::path p = f.file;
            if (p.is_relative()) p = config.base_dir / p;
            out = std::make_shared<VoxelGridField>(VoxelGridField::load(p, f.box));
          } else {
            out = std::make_shared<VoxelGridField>(
                VoxelGridField::sample(*build(f.source), f.box, f.resolution, f.color_noise, f.noise_seed));
          }
          break;
        case FieldKind::kComposite: {
          std::vector<FieldPtr> parts;
          for (const auto& p : f.parts) parts.push_back(build(p));
          out = std::make_shared<CompositeField>(std::move(parts));
          break;
        }
        case FieldKind::kTransformed:
          out = field_in_frame(build(f.source), f.transform);
          break;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInvalidArgument) throw;
      fail(ErrorCode::kParse, "line " + std::to_string(f.line) + ": field '" + f.name + "': " + e.what());
    }
    scene.fields[name] = out;
    return out;
  };

  for (const auto& f : config.fields) build(f.name);
  for (const auto& r : config.registered) {
    scene.registered.fields.push_back(make_registered(r.name, build(r.field), r.to_reference, r.origin));
  }
  if (config.ground_truth) scene.ground_truth = build(*config.ground_truth);
  return scene;
}

}  // namespace fieldfuse
