#include "fieldfuse/fieldfuse.h"

#include <algorithm>
#include <array>
#include <cstring>
#include <exception>
#include <string>

#include "fieldfuse/config.hpp"
#include "fieldfuse/error.hpp"
#include "fieldfuse/experiment.hpp"
#include "fieldfuse/metrics.hpp"
#include "fieldfuse/random.hpp"

struct ff_scene {
  fieldfuse::SceneConfig config;
};

struct ff_image {
  fieldfuse::Image image;
};

namespace {

thread_local std::string g_last_error;

ff_status set_error(ff_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

ff_status from_code(fieldfuse::ErrorCode code) {
  using fieldfuse::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return FF_ERR_INVALID_ARGUMENT;
    case ErrorCode::kParse: return FF_ERR_PARSE;
    case ErrorCode::kIo: return FF_ERR_IO;
    case ErrorCode::kNotEnoughPoses: return FF_ERR_NOT_ENOUGH_POSES;
    case ErrorCode::kDegenerateGeometry: return FF_ERR_DEGENERATE_GEOMETRY;
    case ErrorCode::kContractViolation: return FF_ERR_CONTRACT_VIOLATION;
    case ErrorCode::kBackendFailure: return FF_ERR_BACKEND_FAILURE;
  }
  return FF_ERR_INTERNAL;
}

template <typename Fn>
ff_status guarded(Fn&& fn) {
  try {
    fn();
    return FF_OK;
  } catch (const fieldfuse::Error& e) {
    return set_error(from_code(e.code()), e.what());
  } catch (const std::exception& e) {
    return set_error(FF_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(FF_ERR_INTERNAL, "unknown exception");
  }
}

#define FF_REQUIRE(cond, what) \
  if (!(cond)) return set_error(FF_ERR_INVALID_ARGUMENT, what)

const fieldfuse::Camera& find_camera(const fieldfuse::SceneConfig& config, const char* name) {
  for (const auto& c : config.cameras) {
    if (c.name == name) return c.camera;
  }
  fieldfuse::fail(fieldfuse::ErrorCode::kInvalidArgument, std::string("unknown camera '") + name + "'");
}

}  // namespace

extern "C" {

const char* ff_version(void) { return "0.1.0"; }

const char* ff_status_string(ff_status status) {
  switch (status) {
    case FF_OK: return "ok";
    case FF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FF_ERR_PARSE: return "parse error";
    case FF_ERR_IO: return "i/o error";
    case FF_ERR_NOT_ENOUGH_POSES: return "not enough poses";
    case FF_ERR_DEGENERATE_GEOMETRY: return "degenerate geometry";
    case FF_ERR_CONTRACT_VIOLATION: return "contract violation";
    case FF_ERR_BACKEND_FAILURE: return "backend failure";
    case FF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ff_last_error(void) { return g_last_error.c_str(); }

ff_status ff_scene_load(const char* path, ff_scene** out) {
  FF_REQUIRE(path && out, "ff_scene_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new ff_scene{fieldfuse::load_scene(path)}; });
}

ff_status ff_scene_parse(const char* text, const char* base_dir, ff_scene** out) {
  FF_REQUIRE(text && out, "ff_scene_parse: null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new ff_scene{fieldfuse::parse_scene(text, base_dir ? base_dir : "")};
  });
}

void ff_scene_free(ff_scene* scene) { delete scene; }

ff_status ff_scene_serialize(const ff_scene* scene, char** out) {
  FF_REQUIRE(scene && out, "ff_scene_serialize: null argument");
  *out = nullptr;
  return guarded([&] {
    const std::string text = fieldfuse::serialize_scene(scene->config);
    char* buf = new char[text.size() + 1];
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out = buf;
  });
}

void ff_string_free(char* s) { delete[] s; }

ff_status ff_scene_set_seed(ff_scene* scene, uint64_t seed) {
  FF_REQUIRE(scene, "ff_scene_set_seed: null scene");
  scene->config.seed = seed;
  return FF_OK;
}

ff_status ff_scene_set_strategy(ff_scene* scene, const char* strategy) {
  FF_REQUIRE(scene && strategy, "ff_scene_set_strategy: null argument");
  fieldfuse::Overrides o;
  o.strategy = strategy;
  return guarded([&] { fieldfuse::apply_overrides(scene->config, o); });
}

ff_status ff_scene_set_gamma(ff_scene* scene, double gamma) {
  FF_REQUIRE(scene, "ff_scene_set_gamma: null scene");
  fieldfuse::SceneConfig next = scene->config;
  fieldfuse::Overrides o;
  o.gamma = gamma;
  return guarded([&] {
    fieldfuse::apply_overrides(next, o);
    scene->config = std::move(next);
  });
}

ff_status ff_scene_set_tau(ff_scene* scene, double tau) {
  FF_REQUIRE(scene, "ff_scene_set_tau: null scene");
  fieldfuse::SceneConfig next = scene->config;
  fieldfuse::Overrides o;
  o.tau = tau;
  return guarded([&] {
    fieldfuse::apply_overrides(next, o);
    scene->config = std::move(next);
  });
}

ff_status ff_scene_set_budget(ff_scene* scene, int budget) {
  FF_REQUIRE(scene, "ff_scene_set_budget: null scene");
  fieldfuse::SceneConfig next = scene->config;
  fieldfuse::Overrides o;
  o.budget = budget;
  return guarded([&] {
    fieldfuse::apply_overrides(next, o);
    scene->config = std::move(next);
  });
}

ff_status ff_scene_set_output(ff_scene* scene, const char* dir) {
  FF_REQUIRE(scene && dir && *dir, "ff_scene_set_output: empty directory");
  scene->config.output = dir;
  return FF_OK;
}

ff_status ff_run(const ff_scene* scene, const char* command, int threads, int* artifact_count) {
  FF_REQUIRE(scene && command, "ff_run: null argument");
  const auto cmd = fieldfuse::parse_command(command);
  if (!cmd) return set_error(FF_ERR_INVALID_ARGUMENT, std::string("unknown command '") + command + "'");
  return guarded([&] {
    const auto result = fieldfuse::run_experiment(scene->config, *cmd, threads);
    if (artifact_count) *artifact_count = static_cast<int>(result.artifacts.size());
  });
}

ff_status ff_image_create(int width, int height, int channels, const double* data, ff_image** out) {
  FF_REQUIRE(out && width > 0 && height > 0 && channels > 0, "ff_image_create: bad shape");
  *out = nullptr;
  return guarded([&] {
    auto img = new ff_image{fieldfuse::Image(width, height, channels)};
    if (data) std::memcpy(img->image.data.data(), data, img->image.data.size() * sizeof(double));
    *out = img;
  });
}

void ff_image_free(ff_image* image) { delete image; }
int ff_image_width(const ff_image* image) { return image ? image->image.width : 0; }
int ff_image_height(const ff_image* image) { return image ? image->image.height : 0; }
int ff_image_channels(const ff_image* image) { return image ? image->image.channels : 0; }
const double* ff_image_data(const ff_image* image) { return image ? image->image.data.data() : nullptr; }

ff_status ff_render_field(const ff_scene* scene, const char* field, const char* camera, ff_image** out) {
  FF_REQUIRE(scene && field && camera && out, "ff_render_field: null argument");
  *out = nullptr;
  return guarded([&] {
    const auto built = fieldfuse::build_scene(scene->config);
    fieldfuse::FieldPtr target;
    for (const auto& f : built.registered.fields) {
      if (f.name == field) target = f.in_reference;
    }
    if (!target) {
      const auto it = built.fields.find(field);
      if (it == built.fields.end()) {
        fieldfuse::fail(fieldfuse::ErrorCode::kInvalidArgument, std::string("unknown field '") + field + "'");
      }
      target = it->second;
    }
    fieldfuse::RenderSettings rs;
    rs.budget = scene->config.blend.config.budget;
    rs.seed = fieldfuse::mix_seed(scene->config.seed, 1);
    *out = new ff_image{fieldfuse::render(*target, find_camera(scene->config, camera), rs).color};
  });
}

ff_status ff_blend(const ff_scene* scene, const char* camera, ff_image** out) {
  FF_REQUIRE(scene && camera && out, "ff_blend: null argument");
  *out = nullptr;
  return guarded([&] {
    const auto built = fieldfuse::build_scene(scene->config);
    fieldfuse::BlendConfig cfg = scene->config.blend.config;
    cfg.seed = fieldfuse::mix_seed(scene->config.seed, 3);
    *out = new ff_image{fieldfuse::blend_render(built.registered, find_camera(scene->config, camera), cfg).color};
  });
}

ff_status ff_psnr(const ff_image* a, const ff_image* b, double* out) {
  FF_REQUIRE(a && b && out, "ff_psnr: null argument");
  return guarded([&] { *out = fieldfuse::psnr(a->image, b->image); });
}

ff_status ff_ssim(const ff_image* a, const ff_image* b, double* out) {
  FF_REQUIRE(a && b && out, "ff_ssim: null argument");
  return guarded([&] { *out = fieldfuse::ssim(a->image, b->image); });
}

ff_status ff_registration_error(const double estimate[16], const double truth[16], double out[3]) {
  FF_REQUIRE(estimate && truth && out, "ff_registration_error: null argument");
  return guarded([&] {
    std::array<double, 16> e{}, t{};
    std::copy(estimate, estimate + 16, e.begin());
    std::copy(truth, truth + 16, t.begin());
    const auto err = fieldfuse::registration_error(
        fieldfuse::Sim3Transform::from_matrix(fieldfuse::matrix_from_row_major(t)),
        fieldfuse::Sim3Transform::from_matrix(fieldfuse::matrix_from_row_major(e)));
    out[0] = err.rotation_deg;
    out[1] = err.translation;
    out[2] = err.log_scale;
  });
}

}  // extern "C"
