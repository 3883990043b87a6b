#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "fieldfuse/fieldfuse.h"

namespace fs = std::filesystem;

namespace {

const std::string kTieFree = std::string(FIELDFUSE_SCENE_DIR) + "/tie_free.conf";

struct SceneHandle {
  ff_scene* p = nullptr;
  ~SceneHandle() { ff_scene_free(p); }
};

struct ImageHandle {
  ff_image* p = nullptr;
  ~ImageHandle() { ff_image_free(p); }
};

}  // namespace

TEST_CASE("status strings and version") {
  CHECK(std::strlen(ff_version()) > 0);
  CHECK(std::string(ff_status_string(FF_OK)) == "ok");
  CHECK(std::strlen(ff_status_string(FF_ERR_PARSE)) > 0);
  CHECK(std::strlen(ff_status_string(static_cast<ff_status>(42))) > 0);
}

TEST_CASE("null arguments are rejected") {
  ff_scene* scene = nullptr;
  CHECK(ff_scene_load(nullptr, &scene) == FF_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(ff_last_error()) > 0);
  CHECK(ff_scene_load(kTieFree.c_str(), nullptr) == FF_ERR_INVALID_ARGUMENT);
  CHECK(ff_run(nullptr, "blend", 1, nullptr) == FF_ERR_INVALID_ARGUMENT);
  double out = 0.0;
  CHECK(ff_psnr(nullptr, nullptr, &out) == FF_ERR_INVALID_ARGUMENT);
  CHECK(ff_image_create(0, 4, 3, nullptr, nullptr) == FF_ERR_INVALID_ARGUMENT);
  ff_scene_free(nullptr);
  ff_image_free(nullptr);
  ff_string_free(nullptr);
}

TEST_CASE("load errors map to status codes") {
  ff_scene* scene = nullptr;
  CHECK(ff_scene_load("/nonexistent/scene.conf", &scene) == FF_ERR_IO);
  CHECK(scene == nullptr);
  CHECK(ff_scene_parse("scene x\nnonsense 1 2\n", nullptr, &scene) == FF_ERR_PARSE);
  CHECK(std::string(ff_last_error()).find("line 2") != std::string::npos);
}

TEST_CASE("scene load, edit and serialize") {
  SceneHandle s;
  REQUIRE(ff_scene_load(kTieFree.c_str(), &s.p) == FF_OK);
  CHECK(ff_scene_set_seed(s.p, 11) == FF_OK);
  CHECK(ff_scene_set_strategy(s.p, "idw-2d") == FF_OK);
  CHECK(ff_scene_set_strategy(s.p, "blur") == FF_ERR_INVALID_ARGUMENT);
  CHECK(ff_scene_set_gamma(s.p, -1.0) == FF_ERR_INVALID_ARGUMENT);
  CHECK(ff_scene_set_tau(s.p, 1.5) == FF_OK);
  CHECK(ff_scene_set_budget(s.p, 0) == FF_ERR_INVALID_ARGUMENT);
  char* text = nullptr;
  REQUIRE(ff_scene_serialize(s.p, &text) == FF_OK);
  const std::string serialized = text;
  ff_string_free(text);
  CHECK(serialized.find("seed 11") != std::string::npos);
  CHECK(serialized.find("idw-2d") != std::string::npos);

  SceneHandle again;
  REQUIRE(ff_scene_parse(serialized.c_str(), FIELDFUSE_SCENE_DIR, &again.p) == FF_OK);
  char* text2 = nullptr;
  REQUIRE(ff_scene_serialize(again.p, &text2) == FF_OK);
  CHECK(serialized == text2);
  ff_string_free(text2);
}

TEST_CASE("render, blend and metrics") {
  SceneHandle s;
  REQUIRE(ff_scene_load(kTieFree.c_str(), &s.p) == FF_OK);
  ImageHandle truth, blended;
  REQUIRE(ff_render_field(s.p, "truth", "middle", &truth.p) == FF_OK);
  REQUIRE(ff_blend(s.p, "middle", &blended.p) == FF_OK);
  CHECK(ff_image_width(truth.p) == 64);
  CHECK(ff_image_height(truth.p) == 48);
  CHECK(ff_image_channels(truth.p) == 3);
  double p = 0.0, q = 0.0;
  REQUIRE(ff_psnr(truth.p, blended.p, &p) == FF_OK);
  CHECK(p > 20.0);
  REQUIRE(ff_ssim(truth.p, blended.p, &q) == FF_OK);
  CHECK(q > 0.5);
  CHECK(q <= 1.0);
  CHECK(ff_render_field(s.p, "missing", "middle", &truth.p) == FF_ERR_INVALID_ARGUMENT);
  CHECK(ff_blend(s.p, "nowhere", &blended.p) == FF_ERR_INVALID_ARGUMENT);
}

TEST_CASE("image creation copies data") {
  std::vector<double> data(4 * 3 * 3, 0.25);
  ImageHandle a, b;
  REQUIRE(ff_image_create(4, 3, 3, data.data(), &a.p) == FF_OK);
  data.assign(data.size(), 0.35);
  REQUIRE(ff_image_create(4, 3, 3, data.data(), &b.p) == FF_OK);
  CHECK(ff_image_data(a.p)[0] == 0.25);
  double p = 0.0;
  REQUIRE(ff_psnr(a.p, b.p, &p) == FF_OK);
  CHECK(p == doctest::Approx(20.0));
  double q = 0.0;
  CHECK(ff_ssim(a.p, b.p, &q) == FF_ERR_INVALID_ARGUMENT);
}

TEST_CASE("registration error") {
  const double identity[16] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  // Rotation of 90 degrees about z with scale 2 and translation (1, 0, 0).
  const double est[16] = {0, -2, 0, 1, 2, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 1};
  double out[3] = {-1, -1, -1};
  REQUIRE(ff_registration_error(est, identity, out) == FF_OK);
  CHECK(out[0] == doctest::Approx(90.0));
  CHECK(out[1] == doctest::Approx(1.0));
  CHECK(out[2] == doctest::Approx(std::log(2.0)));
  REQUIRE(ff_registration_error(identity, identity, out) == FF_OK);
  CHECK(out[0] == 0.0);
  const double singular[16] = {0};
  CHECK(ff_registration_error(singular, identity, out) != FF_OK);
}

TEST_CASE("run writes artifacts") {
  SceneHandle s;
  REQUIRE(ff_scene_load(kTieFree.c_str(), &s.p) == FF_OK);
  const fs::path out = fs::temp_directory_path() / "fieldfuse_c_api_run";
  fs::remove_all(out);
  REQUIRE(ff_scene_set_output(s.p, out.string().c_str()) == FF_OK);
  int count = 0;
  REQUIRE(ff_run(s.p, "blend", 1, &count) == FF_OK);
  CHECK(count > 0);
  CHECK(fs::exists(out / "blend"));
  CHECK(ff_run(s.p, "register", 1, nullptr) != FF_OK);
  CHECK(ff_run(s.p, "train", 1, nullptr) == FF_ERR_INVALID_ARGUMENT);
  fs::remove_all(out);
}
