#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "fieldfuse/error.hpp"
#include "fieldfuse/registration.hpp"
#include "test_support.hpp"

using namespace fieldfuse;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::vector<IndexedPose> map_all(const std::vector<Se3Pose>& local, const Sim3Transform& gauge) {
  std::vector<IndexedPose> out;
  for (size_t i = 0; i < local.size(); ++i) out.emplace_back(static_cast<int>(i), convert_query_pose(local[i], gauge));
  return out;
}

FieldPtr asymmetric_field() {
  return std::make_shared<CompositeField>(std::vector<FieldPtr>{
      std::make_shared<UniformSphereField>(Vec3(0.5, 0.6, -0.3), 0.3, 30.0, Color(0.3, 0.3, 0.9)),
      std::make_shared<GaussianBlobField>(Vec3(0.3, -0.2, 0.1), 8.0, 0.35, Color(0.8, 0.7, 0.2)),
      std::make_shared<UniformBoxField>(Aabb{Vec3(-0.9, -0.4, -0.6), Vec3(-0.3, 0.5, 0.2)}, 20.0,
                                        Color(0.2, 0.6, 0.4))});
}

RegistrationSettings small_settings(std::uint64_t seed) {
  RegistrationSettings s;
  s.image_width = s.image_height = 16;
  s.budget = 8;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("hemisphere poses sit on the sphere within the elevation band") {
  const Vec3 center(0.5, -1.0, 2.0);
  const auto set = sample_hemisphere_poses(32, 1.0, 0.0, 30.0, center, 4);
  REQUIRE(set.poses.size() == 32);
  for (const auto& p : set.poses) {
    const Vec3 rel = p.translation() - center;
    CHECK(rel.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const double elev = std::asin(std::clamp(rel.z() / rel.norm(), -1.0, 1.0)) * kRadToDeg;
    CHECK(elev >= -1e-9);
    CHECK(elev <= 30.0 + 1e-9);
    // Every camera looks at the center.
    const Vec3 forward = p.rotation() * Vec3(0, 0, -1);
    CHECK((forward + rel.normalized()).norm() <= 1e-12);
  }
  CHECK(sample_hemisphere_poses(2, 1.0, 0.0, 30.0, center, 4).poses.size() == 2);
  CHECK_THROWS_AS(sample_hemisphere_poses(1, 1.0, 0.0, 30.0, center, 4), Error);
  CHECK_THROWS_AS(sample_hemisphere_poses(8, 0.0, 0.0, 30.0, center, 4), Error);
}

TEST_CASE("hemisphere poses are deterministic per seed") {
  const auto a = sample_hemisphere_poses(16, 2.0, 0.0, 30.0, Vec3::Zero(), 9);
  const auto b = sample_hemisphere_poses(16, 2.0, 0.0, 30.0, Vec3::Zero(), 9);
  const auto c = sample_hemisphere_poses(16, 2.0, 0.0, 30.0, Vec3::Zero(), 10);
  bool differs = false;
  for (size_t i = 0; i < a.poses.size(); ++i) {
    CHECK(a.poses[i].matrix() == b.poses[i].matrix());
    differs = differs || a.poses[i].matrix() != c.poses[i].matrix();
  }
  CHECK(differs);
}

TEST_CASE("noiseless simulator with identity gauge returns the local poses") {
  const auto local = sample_hemisphere_poses(12, 3.0, 0.0, 30.0, Vec3::Zero(), 1);
  const Sim3Transform gauge[] = {Sim3Transform::identity()};
  const auto rec = simulate_sfm(std::span(&local, 1), gauge, {});
  REQUIRE(rec.fields.size() == 1);
  for (size_t i = 0; i < local.poses.size(); ++i) {
    REQUIRE(rec.fields[0][i].has_value());
    CHECK(rec.fields[0][i]->matrix() == local.poses[i].matrix());
  }
}

TEST_CASE("a gauge with scale 3 triples pairwise camera distances") {
  const auto local = sample_hemisphere_poses(10, 2.0, 0.0, 30.0, Vec3::Zero(), 2);
  Rng rng(3);
  const Sim3Transform gauge[] = {Sim3Transform(test::random_pose(rng), 3.0)};
  const auto rec = simulate_sfm(std::span(&local, 1), gauge, {});
  for (size_t i = 0; i < local.poses.size(); ++i) {
    for (size_t j = i + 1; j < local.poses.size(); ++j) {
      const double dl = (local.poses[i].translation() - local.poses[j].translation()).norm();
      const double dg = (rec.fields[0][i]->translation() - rec.fields[0][j]->translation()).norm();
      CHECK(dg == doctest::Approx(3.0 * dl).epsilon(1e-12));
    }
  }
}

TEST_CASE("outlier and dropout counts are exact") {
  const auto local = sample_hemisphere_poses(20, 2.0, 0.0, 30.0, Vec3::Zero(), 5);
  const Sim3Transform gauge[] = {Sim3Transform::identity()};
  SfmSimulatorConfig cfg;
  cfg.outlier_fraction = 0.2;
  cfg.dropout_fraction = 0.1;
  cfg.seed = 8;
  const auto rec = simulate_sfm(std::span(&local, 1), gauge, cfg);
  int replaced = 0, dropped = 0;
  for (size_t i = 0; i < local.poses.size(); ++i) {
    if (!rec.fields[0][i]) {
      ++dropped;
    } else if (rec.fields[0][i]->matrix() != local.poses[i].matrix()) {
      ++replaced;
    }
  }
  CHECK(replaced == 4);
  CHECK(dropped == 2);

  SfmSimulatorConfig bad;
  bad.outlier_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("recover_scale is exact without noise") {
  const auto set = sample_hemisphere_poses(32, 2.5, 0.0, 30.0, Vec3::Zero(), 6);
  const auto scaled = map_all(set.poses, Sim3Transform::from_scale(2.0));
  CHECK(std::abs(recover_scale(set.poses, scaled) - 2.0) <= 1e-12);

  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Sim3Transform gauge = test::random_sim3(rng);
    const auto mapped = map_all(set.poses, gauge);
    CHECK(std::abs(recover_scale(set.poses, mapped) - gauge.scale()) <= 1e-12 * gauge.scale());
    // Only two poses in general position.
    const std::vector<IndexedPose> two{mapped[3], mapped[17]};
    CHECK(std::abs(recover_scale(set.poses, two) - gauge.scale()) <= 1e-12 * gauge.scale());
  }
}

TEST_CASE("recover_scale uses a seeded pair subset for large pose sets") {
  const auto set = sample_hemisphere_poses(100, 2.5, 0.0, 30.0, Vec3::Zero(), 6);
  const auto mapped = map_all(set.poses, Sim3Transform::from_scale(1.7));
  CHECK(std::abs(recover_scale(set.poses, mapped, 1) - 1.7) <= 1e-12);
  CHECK(recover_scale(set.poses, mapped, 1) == recover_scale(set.poses, mapped, 1));
}

TEST_CASE("recover_scale tolerates corrupted pairs") {
  // 8 of 50 poses corrupted taints 1 - C(42,2)/C(50,2) ~ 30% of the pairs.
  const auto set = sample_hemisphere_poses(50, 2.0, 0.0, 30.0, Vec3::Zero(), 10);
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto mapped = map_all(set.poses, Sim3Transform(test::random_pose(rng), 1.5));
    // Mild noise on the clean poses, gross errors on the corrupted ones.
    std::vector<double> clean_ratios;
    for (auto& [idx, pose] : mapped) {
      pose = Se3Pose(pose.rotation(), pose.translation() + Vec3(rng.normal(0, 0.005), rng.normal(0, 0.005),
                                                                 rng.normal(0, 0.005)));
    }
    for (int k = 0; k < 8; ++k) {
      auto& pose = mapped[static_cast<size_t>(k * 6)].second;
      pose = Se3Pose(pose.rotation(), Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)));
    }
    for (size_t i = 0; i < mapped.size(); ++i) {
      for (size_t j = i + 1; j < mapped.size(); ++j) {
        if (i % 6 == 0 && i < 48) continue;
        if (j % 6 == 0 && j < 48) continue;
        const double dl = (set.poses[i].translation() - set.poses[j].translation()).norm();
        clean_ratios.push_back((mapped[i].second.translation() - mapped[j].second.translation()).norm() / dl);
      }
    }
    const double s = recover_scale(set.poses, mapped);
    CHECK(std::abs(s - 1.5) <= 0.015);
    CHECK(s >= *std::min_element(clean_ratios.begin(), clean_ratios.end()));
    CHECK(s <= *std::max_element(clean_ratios.begin(), clean_ratios.end()));
  }
}

TEST_CASE("recover_scale errors") {
  const auto set = sample_hemisphere_poses(4, 2.0, 0.0, 30.0, Vec3::Zero(), 1);
  const auto mapped = map_all(set.poses, Sim3Transform::identity());
  const std::vector<IndexedPose> one{mapped[0]};
  CHECK_THROWS_AS(recover_scale(set.poses, one), Error);
  try {
    recover_scale(set.poses, one);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotEnoughPoses);
  }
  const std::vector<Se3Pose> same{set.poses[0], set.poses[0]};
  const std::vector<IndexedPose> both{{0, mapped[0].second}, {1, mapped[1].second}};
  try {
    recover_scale(same, both);
    FAIL("expected DegenerateGeometry");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateGeometry);
  }
}

TEST_CASE("recover_transform from a single camera is exact") {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const Sim3Transform gauge = test::random_sim3(rng);
    const std::vector<Se3Pose> local{test::random_pose(rng)};
    const auto mapped = map_all(local, gauge);
    const auto est = recover_transform(local, mapped, gauge.scale());
    CHECK((est.transform.matrix() - gauge.matrix()).norm() <= 1e-12 * (1.0 + gauge.matrix().norm()));
    CHECK(est.candidates.size() == 1);
  }
}

TEST_CASE("recover_transform with 32 noiseless cameras") {
  Rng rng(13);
  const auto set = sample_hemisphere_poses(32, 2.5, 0.0, 30.0, Vec3::Zero(), 14);
  for (int i = 0; i < 20; ++i) {
    const Sim3Transform gauge = test::random_sim3(rng);
    const auto mapped = map_all(set.poses, gauge);
    const auto est = recover_transform(set.poses, mapped, recover_scale(set.poses, mapped));
    const auto e = registration_error(gauge, est.transform);
    CHECK(e.rotation_deg < 1e-6);
    CHECK(e.translation < 1e-9);
    CHECK(e.log_scale < 1e-9);
  }
}

TEST_CASE("recover_transform with 10% outliers") {
  std::vector<double> r_err;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto set = sample_hemisphere_poses(32, 2.5, 0.0, 30.0, Vec3::Zero(), seed);
    const Sim3Transform gauge[] = {test::random_sim3(rng)};
    SfmSimulatorConfig cfg;
    cfg.outlier_fraction = 0.1;
    cfg.seed = seed;
    const auto rec = simulate_sfm(std::span(&set, 1), gauge, cfg);
    const auto ok = successful_poses(rec.fields[0]);
    const auto est = recover_transform(set.poses, ok, recover_scale(set.poses, ok));
    r_err.push_back(registration_error(gauge[0], est.transform).rotation_deg);
  }
  std::nth_element(r_err.begin(), r_err.begin() + 50, r_err.end());
  CHECK(r_err[50] < 0.5);
}

TEST_CASE("register_fields recovers a known offset between copies") {
  const FieldPtr base = asymmetric_field();
  Rng rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    const Sim3Transform t_ba = test::random_sim3(rng);
    const FieldPtr copy = field_in_frame(base, t_ba.inverse());
    const Sim3Transform t_ac = test::random_sim3(rng);
    SimulatedSfmBackend backend({t_ac, t_ac * t_ba}, {});
    const auto report = register_fields(*base, *copy, small_settings(static_cast<std::uint64_t>(trial)), backend, t_ba);
    REQUIRE(report.error.has_value());
    CHECK(report.error->rotation_deg < 1e-6);
    CHECK(report.error->translation < 1e-9);
    CHECK(report.error->log_scale < 1e-9);
    CHECK(report.a.image_hashes.size() == 32);
  }
}

TEST_CASE("register_fields of a field with itself gives the identity") {
  const FieldPtr base = asymmetric_field();
  SimulatedSfmBackend backend({Sim3Transform::identity(), Sim3Transform::identity()}, {});
  const auto report = register_fields(*base, *base, small_settings(4), backend);
  CHECK((report.t_ba.matrix() - Mat4::Identity()).norm() <= 1e-12);
  CHECK(!report.error.has_value());
}

TEST_CASE("the hidden gauge cancels out of T_BA") {
  const FieldPtr base = asymmetric_field();
  Rng rng(31);
  const Sim3Transform t_ba = test::random_sim3(rng);
  const FieldPtr copy = field_in_frame(base, t_ba.inverse());
  const Sim3Transform t_ac = test::random_sim3(rng), extra = test::random_sim3(rng);
  SimulatedSfmBackend first({t_ac, t_ac * t_ba}, {});
  SimulatedSfmBackend second({extra * t_ac, extra * t_ac * t_ba}, {});
  const auto r1 = register_fields(*base, *copy, small_settings(5), first);
  const auto r2 = register_fields(*base, *copy, small_settings(5), second);
  CHECK((r1.t_ba.matrix() - r2.t_ba.matrix()).norm() <= 1e-9);
}

TEST_CASE("registration survives with two poses left per field") {
  const FieldPtr base = asymmetric_field();
  Rng rng(41);
  const Sim3Transform t_ba = test::random_sim3(rng);
  const FieldPtr copy = field_in_frame(base, t_ba.inverse());
  SfmSimulatorConfig cfg;
  cfg.dropout_fraction = 30.0 / 32.0;
  cfg.rotation_noise_deg = 0.1;
  cfg.translation_noise_frac = 0.002;
  cfg.seed = 3;
  SimulatedSfmBackend backend({Sim3Transform::identity(), t_ba}, cfg);
  const auto report = register_fields(*base, *copy, small_settings(6), backend, t_ba);
  CHECK(report.a.recovered == 2);
  CHECK(report.b.recovered == 2);
  REQUIRE(report.error.has_value());
  CHECK(report.error->rotation_deg < 5.0);
}

TEST_CASE("too few recovered poses name the failing field") {
  const FieldPtr base = asymmetric_field();
  SfmSimulatorConfig cfg;
  cfg.dropout_fraction = 31.0 / 32.0;
  SimulatedSfmBackend backend({Sim3Transform::identity(), Sim3Transform::identity()}, cfg);
  try {
    register_fields(*base, *base, small_settings(7), backend);
    FAIL("expected NotEnoughPoses");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotEnoughPoses);
    CHECK(std::string(e.what()).rfind("field A:", 0) == 0);
  }
}

TEST_CASE("registration report lists scales, transforms and errors") {
  const FieldPtr base = asymmetric_field();
  SimulatedSfmBackend backend({Sim3Transform::from_scale(2.0), Sim3Transform::from_scale(2.0)}, {});
  RegistrationSettings s = small_settings(8);
  s.pose_count = 4;
  const auto report = register_fields(*base, *base, s, backend, Sim3Transform::identity());
  const auto path = std::filesystem::temp_directory_path() / "fieldfuse_report_test.txt";
  write_registration_report(path, report);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::filesystem::remove(path);
  const std::string text = ss.str();
  CHECK(text.rfind("# fieldfuse registration report v1", 0) == 0);
  CHECK(text.find("scale 2\n") != std::string::npos);
  CHECK(text.find("candidate ") != std::string::npos);
  CHECK(text.find("\nt_ba ") != std::string::npos);
  CHECK(text.find("\nground_truth_t_ba 1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n") != std::string::npos);
  CHECK(text.find("\nr_err_deg ") != std::string::npos);
  CHECK(text.find("\ns_err ") != std::string::npos);
}
