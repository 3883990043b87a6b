#include "fieldfuse/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <Eigen/Geometry>

#include "fieldfuse/error.hpp"
#include "fieldfuse/metrics.hpp"
#include "fieldfuse/parallel.hpp"
#include "fieldfuse/random.hpp"

namespace fieldfuse {

namespace {

namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream counters for sub-seeds derived from the scene seed.
enum SeedStream : std::uint64_t {
  kRenderStream = 1,
  kRegisterStream = 2,
  kBlendStream = 3,
  kReferenceStream = 4,
  kRhoStream = 5,
};

constexpr BlendStrategy kAllStrategies[] = {BlendStrategy::kNearest, BlendStrategy::kIdw2d,
                                            BlendStrategy::kIdw3d, BlendStrategy::kIdwSample};
constexpr BlendStrategy kIdwStrategies[] = {BlendStrategy::kIdw2d, BlendStrategy::kIdw3d,
                                            BlendStrategy::kIdwSample};

void write_render(const fs::path& dir, const std::string& stem, const RenderOutput& out,
                  const Camera& cam, std::vector<fs::path>& artifacts) {
  const fs::path color = dir / (stem + ".ppm");
  const fs::path acc = dir / (stem + "_acc.pgm");
  const fs::path depth = dir / (stem + "_depth.pgm");
  write_ppm(color, out.color);
  write_pgm16(acc, out.accumulation, 0.0, 1.0);
  write_pgm16(depth, out.depth, cam.near, cam.far);
  artifacts.insert(artifacts.end(), {color, acc, depth});
}

int registered_index(const SceneConfig& config, const std::string& name, int fallback) {
  if (name.empty()) {
    if (fallback >= static_cast<int>(config.registered.size())) {
      fail(ErrorCode::kInvalidArgument, "registration needs at least two registered fields");
    }
    return fallback;
  }
  for (size_t i = 0; i < config.registered.size(); ++i) {
    if (config.registered[i].name == name) return static_cast<int>(i);
  }
  fail(ErrorCode::kInvalidArgument, "unknown registered field '" + name + "'");
}

Sim3Transform random_gauge(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  const Vec3 t(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
  const double s = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
  return {Se3Pose(project_to_rotation(q.toRotationMatrix()), t), s};
}

void require_cameras(const SceneConfig& config, const char* command) {
  if (config.cameras.empty()) {
    fail(ErrorCode::kInvalidArgument, std::string(command) + ": the scene defines no cameras");
  }
}

BlendConfig blend_config(const SceneConfig& config, BlendStrategy strategy, double gamma, int threads) {
  BlendConfig cfg = config.blend.config;
  cfg.strategy = strategy;
  cfg.gamma = gamma;
  cfg.seed = mix_seed(config.seed, kBlendStream);
  cfg.threads = threads;
  return cfg;
}

std::vector<Image> reference_images(const SceneConfig& config, const BuiltScene& scene, int threads) {
  std::vector<Image> images(config.cameras.size());
  RenderSettings rs;
  rs.budget = 4 * config.blend.config.budget;
  rs.seed = mix_seed(config.seed, kReferenceStream);
  rs.threads = 1;
  parallel_for(static_cast<int>(images.size()), threads, [&](int c) {
    images[static_cast<size_t>(c)] = render(*scene.ground_truth, config.cameras[static_cast<size_t>(c)].camera, rs).color;
  });
  return images;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string gamma_tag(size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "g%02zu", index);
  return buf;
}

ExperimentResult do_render(const SceneConfig& config, const BuiltScene& scene, int threads) {
  require_cameras(config, "render");
  ExperimentResult result;
  std::vector<std::pair<std::string, FieldPtr>> targets;
  for (const auto& f : scene.registered.fields) targets.emplace_back(f.name, f.in_reference);
  if (targets.empty()) {
    for (const auto& f : config.fields) targets.emplace_back(f.name, scene.fields.at(f.name));
  }
  if (scene.ground_truth) targets.emplace_back("ground_truth", scene.ground_truth);

  RenderSettings rs;
  rs.budget = config.blend.config.budget;
  rs.seed = mix_seed(config.seed, kRenderStream);
  rs.threads = threads;
  for (const auto& cs : config.cameras) {
    for (const auto& [name, field] : targets) {
      write_render(config.output / "render" / cs.name, name, render(*field, cs.camera, rs), cs.camera,
                   result.artifacts);
    }
  }
  return result;
}

ExperimentResult do_register(const SceneConfig& config, const BuiltScene& scene, int threads) {
  ExperimentResult result;
  result.registration = run_registration(config, scene, mix_seed(config.seed, kRegisterStream), threads);
  const fs::path path = config.output / "register" / "registration.txt";
  write_registration_report(path, *result.registration);
  result.artifacts.push_back(path);
  return result;
}

ExperimentResult do_blend(const SceneConfig& config, const BuiltScene& scene, int threads) {
  require_cameras(config, "blend");
  ExperimentResult result;
  std::vector<BlendStrategy> strategies;
  if (config.blend.all_strategies) {
    strategies.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
  } else {
    strategies.push_back(config.blend.config.strategy);
  }
  for (const auto& cs : config.cameras) {
    for (BlendStrategy s : strategies) {
      const BlendConfig cfg = blend_config(config, s, config.blend.config.gamma, threads);
      write_render(config.output / "blend" / cs.name, to_string(s),
                   blend_render(scene.registered, cs.camera, cfg), cs.camera, result.artifacts);
    }
  }
  return result;
}

ExperimentResult do_evaluate(const SceneConfig& config, const BuiltScene& scene, int threads) {
  require_cameras(config, "evaluate");
  if (!scene.ground_truth) fail(ErrorCode::kInvalidArgument, "evaluate: the scene has no ground_truth field");
  ExperimentResult result;
  const fs::path root = config.output / "evaluate";
  const size_t n_cam = config.cameras.size();

  const std::vector<Image> reference = reference_images(config, scene, threads);
  for (size_t c = 0; c < n_cam; ++c) {
    const fs::path p = root / "ground_truth" / (config.cameras[c].name + ".ppm");
    write_ppm(p, reference[c]);
    result.artifacts.push_back(p);
  }

  struct Variant {
    std::string name;
    RegisteredFieldSet fields;
    std::optional<RegistrationError> error;
  };
  std::vector<Variant> variants{{"ground-truth", scene.registered, std::nullopt}};
  if (config.registration.present && scene.registered.fields.size() >= 2) {
    result.registration = run_registration(config, scene, mix_seed(config.seed, kRegisterStream), threads);
    variants.push_back({"estimated", with_estimated_transform(config, scene, result.registration->t_ba),
                        result.registration->error});
  }

  // Work items: per variant the four strategies, then (ground truth only) each
  // single field rendered on its own.
  struct Job {
    size_t variant;
    std::string label;
    std::optional<BlendStrategy> strategy;
    FieldPtr field;
  };
  std::vector<Job> jobs;
  for (size_t v = 0; v < variants.size(); ++v) {
    for (BlendStrategy s : kAllStrategies) jobs.push_back({v, to_string(s), s, nullptr});
  }
  for (const auto& f : scene.registered.fields) jobs.push_back({0, "field:" + f.name, std::nullopt, f.in_reference});

  std::vector<Image> images(jobs.size() * n_cam);
  parallel_for(static_cast<int>(images.size()), threads, [&](int item) {
    const Job& job = jobs[static_cast<size_t>(item) / n_cam];
    const Camera& cam = config.cameras[static_cast<size_t>(item) % n_cam].camera;
    if (job.strategy) {
      const BlendConfig cfg = blend_config(config, *job.strategy, config.blend.config.gamma, 1);
      images[static_cast<size_t>(item)] = blend_render(variants[job.variant].fields, cam, cfg).color;
    } else {
      RenderSettings rs;
      rs.budget = config.blend.config.budget;
      rs.seed = mix_seed(config.seed, kBlendStream);
      rs.threads = 1;
      images[static_cast<size_t>(item)] = render(*job.field, cam, rs).color;
    }
  });

  for (size_t j = 0; j < jobs.size(); ++j) {
    const Job& job = jobs[j];
    const Variant& variant = variants[job.variant];
    MetricsRow row;
    row.scene = config.scene;
    row.strategy = job.label;
    row.gamma = config.blend.config.gamma;
    row.tau = config.blend.config.tau;
    row.transform = variant.name;
    row.cameras = static_cast<int>(n_cam);
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (size_t c = 0; c < n_cam; ++c) {
      const Image& img = images[j * n_cam + c];
      psnr_sum += psnr(img, reference[c]);
      ssim_sum += ssim(img, reference[c]);
      const std::string stem = job.strategy ? job.label : job.label.substr(6);
      const fs::path p = root / variant.name / config.cameras[c].name / (stem + ".ppm");
      write_ppm(p, img);
      result.artifacts.push_back(p);
    }
    row.psnr = psnr_sum / static_cast<double>(n_cam);
    row.ssim = ssim_sum / static_cast<double>(n_cam);
    row.r_err = variant.error ? variant.error->rotation_deg : kNaN;
    row.t_err = variant.error ? variant.error->translation : kNaN;
    row.s_err = variant.error ? variant.error->log_scale : kNaN;
    result.rows.push_back(row);
  }
  sort_rows(result.rows);
  const fs::path csv = root / "metrics.csv";
  write_metrics_csv(csv, result.rows);
  result.artifacts.push_back(csv);
  return result;
}

ExperimentResult do_sweep_gamma(const SceneConfig& config, const BuiltScene& scene, int threads) {
  require_cameras(config, "sweep-gamma");
  ExperimentResult result;
  const fs::path root = config.output / "sweep_gamma";
  const auto grid = geometric_grid(config.blend.gamma_min, config.blend.gamma_max, config.blend.gamma_steps);
  const size_t n_cam = config.cameras.size();
  const size_t n_strat = std::size(kIdwStrategies);

  std::vector<Image> reference;
  if (scene.ground_truth) reference = reference_images(config, scene, threads);

  std::vector<Image> images(n_strat * grid.size() * n_cam);
  parallel_for(static_cast<int>(images.size()), threads, [&](int item) {
    const size_t i = static_cast<size_t>(item);
    const size_t s = i / (grid.size() * n_cam);
    const size_t g = (i / n_cam) % grid.size();
    const size_t c = i % n_cam;
    const BlendConfig cfg = blend_config(config, kIdwStrategies[s], grid[g], 1);
    images[i] = blend_render(scene.registered, config.cameras[c].camera, cfg).color;
  });

  for (size_t s = 0; s < n_strat; ++s) {
    for (size_t g = 0; g < grid.size(); ++g) {
      MetricsRow row;
      row.scene = config.scene;
      row.strategy = to_string(kIdwStrategies[s]);
      row.gamma = grid[g];
      row.tau = config.blend.config.tau;
      row.transform = "ground-truth";
      row.cameras = static_cast<int>(n_cam);
      row.psnr = row.ssim = kNaN;
      row.r_err = row.t_err = row.s_err = kNaN;
      double psnr_sum = 0.0, ssim_sum = 0.0;
      for (size_t c = 0; c < n_cam; ++c) {
        const Image& img = images[(s * grid.size() + g) * n_cam + c];
        const fs::path p = root / row.strategy / (config.cameras[c].name + "_" + gamma_tag(g) + ".ppm");
        write_ppm(p, img);
        result.artifacts.push_back(p);
        if (!reference.empty()) {
          psnr_sum += psnr(img, reference[c]);
          ssim_sum += ssim(img, reference[c]);
        }
      }
      if (!reference.empty()) {
        row.psnr = psnr_sum / static_cast<double>(n_cam);
        row.ssim = ssim_sum / static_cast<double>(n_cam);
      }
      result.rows.push_back(row);
    }
  }
  sort_rows(result.rows);
  const fs::path csv = root / "sweep_gamma.csv";
  write_metrics_csv(csv, result.rows);
  result.artifacts.push_back(csv);
  return result;
}

ExperimentResult do_sweep_rho(const SceneConfig& config, const BuiltScene& scene, int threads) {
  const RegistrationSpec& reg = config.registration;
  ExperimentResult result;
  const auto grid = geometric_grid(reg.rho_min, reg.rho_max, reg.rho_steps);
  const size_t trials = static_cast<size_t>(reg.trials);

  std::vector<std::optional<RegistrationError>> errors(grid.size() * trials);
  std::vector<int> poses(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    poses[i] = std::max(2, static_cast<int>(std::lround(grid[i] * reg.training_views)));
  }
  parallel_for(static_cast<int>(errors.size()), threads, [&](int item) {
    const size_t i = static_cast<size_t>(item) / trials;
    const size_t t = static_cast<size_t>(item) % trials;
    const std::uint64_t seed = mix_seed(mix_seed(config.seed, kRhoStream), i * trials + t);
    try {
      errors[static_cast<size_t>(item)] = run_registration(config, scene, seed, 1, poses[i]).error;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotEnoughPoses && e.code() != ErrorCode::kDegenerateGeometry) throw;
    }
  });

  for (size_t i = 0; i < grid.size(); ++i) {
    RhoRow row;
    row.rho = grid[i];
    row.poses = poses[i];
    row.trials = reg.trials;
    std::vector<double> r, t, s;
    int ok = 0;
    for (size_t k = 0; k < trials; ++k) {
      const auto& e = errors[i * trials + k];
      if (!e) continue;
      r.push_back(e->rotation_deg);
      t.push_back(e->translation);
      s.push_back(e->log_scale);
      ok += registration_succeeded(*e) ? 1 : 0;
    }
    row.r_err_mean = mean_of(r);
    row.t_err_mean = mean_of(t);
    row.s_err_mean = mean_of(s);
    row.r_err_median = median_of(r);
    row.t_err_median = median_of(t);
    row.s_err_median = median_of(s);
    row.success_rate = static_cast<double>(ok) / static_cast<double>(trials);
    result.rho_rows.push_back(row);
  }

  const fs::path csv = config.output / "sweep_rho" / "sweep_rho.csv";
  fs::create_directories(csv.parent_path());
  std::ofstream out(csv, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + csv.string());
  out << kRhoHeader << "\n";
  for (const RhoRow& row : result.rho_rows) {
    out << kCsvVersion << "," << config.scene << "," << csv_number(row.rho) << "," << row.poses << ","
        << row.trials << "," << csv_number(row.r_err_mean) << "," << csv_number(row.t_err_mean) << ","
        << csv_number(row.s_err_mean) << "," << csv_number(row.r_err_median) << ","
        << csv_number(row.t_err_median) << "," << csv_number(row.s_err_median) << ","
        << csv_number(row.success_rate) << "\n";
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + csv.string());
  result.artifacts.push_back(csv);
  return result;
}

}  // namespace

const char* to_string(Command c) {
  switch (c) {
    case Command::kRender: return "render";
    case Command::kRegister: return "register";
    case Command::kBlend: return "blend";
    case Command::kEvaluate: return "evaluate";
    case Command::kSweepGamma: return "sweep-gamma";
    case Command::kSweepRho: return "sweep-rho";
  }
  return "?";
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : {Command::kRender, Command::kRegister, Command::kBlend, Command::kEvaluate,
                    Command::kSweepGamma, Command::kSweepRho}) {
    if (name == to_string(c)) return c;
  }
  return std::nullopt;
}

void apply_overrides(SceneConfig& config, const Overrides& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.strategy) {
    if (*o.strategy == "all") {
      config.blend.all_strategies = true;
    } else if (auto s = parse_strategy(*o.strategy)) {
      config.blend.config.strategy = *s;
      config.blend.all_strategies = false;
    } else {
      fail(ErrorCode::kInvalidArgument, "unknown strategy '" + *o.strategy + "'");
    }
  }
  if (o.gamma) config.blend.config.gamma = *o.gamma;
  if (o.tau) config.blend.config.tau = *o.tau;
  if (o.budget) config.blend.config.budget = *o.budget;
  if (o.out) config.output = *o.out;
  config.blend.config.validate();
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void sort_rows(std::vector<MetricsRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    if (a.scene != b.scene) return a.scene < b.scene;
    if (a.strategy != b.strategy) return a.strategy < b.strategy;
    return a.gamma < b.gamma;
  });
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << kMetricsHeader << "\n";
  for (const MetricsRow& r : rows) {
    out << kCsvVersion << "," << r.scene << "," << r.strategy << "," << csv_number(r.gamma) << ","
        << csv_number(r.tau) << "," << r.transform << "," << r.cameras << "," << csv_number(r.psnr) << ","
        << csv_number(r.ssim) << "," << csv_number(r.r_err) << "," << csv_number(r.t_err) << ","
        << csv_number(r.s_err) << "\n";
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

bool registration_succeeded(const RegistrationError& e) {
  return e.rotation_deg < 5.0 && e.translation < 0.2 && e.log_scale < 0.1;
}

std::vector<double> geometric_grid(double lo, double hi, int steps) {
  if (!(lo > 0.0 && lo <= hi) || steps < 1) fail(ErrorCode::kInvalidArgument, "geometric_grid: bad range");
  if (steps == 1) return {lo};
  std::vector<double> grid(static_cast<size_t>(steps));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < steps; ++i) grid[static_cast<size_t>(i)] = std::exp(a + (b - a) * i / (steps - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

RegistrationReport run_registration(const SceneConfig& config, const BuiltScene& scene,
                                    std::uint64_t seed, int threads, std::optional<int> pose_count) {
  const RegistrationSpec& reg = config.registration;
  if (!reg.present) fail(ErrorCode::kInvalidArgument, "the scene has no registration block");
  const int ia = registered_index(config, reg.reference, 0);
  const int ib = registered_index(config, reg.target, 1);
  if (ia == ib) fail(ErrorCode::kInvalidArgument, "registration reference and target are the same field");
  const RegisteredField& a = scene.registered.fields[static_cast<size_t>(ia)];
  const RegisteredField& b = scene.registered.fields[static_cast<size_t>(ib)];

  RegistrationSettings settings = reg.settings;
  settings.seed = mix_seed(seed, 0);
  settings.threads = threads;
  if (pose_count) settings.pose_count = *pose_count;
  settings.training_poses_a = config.registered[static_cast<size_t>(ia)].training_poses;
  settings.training_poses_b = config.registered[static_cast<size_t>(ib)].training_poses;

  // Placement in the scene is the truth the simulator works from.
  const Sim3Transform t_ba = a.to_reference.inverse() * b.to_reference;
  const Sim3Transform t_ac = reg.gauge ? *reg.gauge : random_gauge(mix_seed(seed, 1));
  SfmSimulatorConfig sim = reg.simulator;
  sim.seed = mix_seed(seed, 2);
  SimulatedSfmBackend backend({t_ac, t_ac * t_ba}, sim);
  std::optional<Sim3Transform> gt;
  if (reg.has_ground_truth) gt = t_ba;
  return register_fields(*a.field, *b.field, settings, backend, gt);
}

RegisteredFieldSet with_estimated_transform(const SceneConfig& config, const BuiltScene& scene,
                                            const Sim3Transform& t_ba) {
  const int ia = registered_index(config, config.registration.reference, 0);
  const int ib = registered_index(config, config.registration.target, 1);
  RegisteredFieldSet out = scene.registered;
  const RegisteredField& a = out.fields[static_cast<size_t>(ia)];
  const RegisteredField& b = out.fields[static_cast<size_t>(ib)];
  const auto& spec = config.registered[static_cast<size_t>(ib)];
  std::optional<Vec3> origin;
  if (spec.origin) {
    // The configured origin is in reference coordinates under the true
    // placement; carry it through the estimated one.
    origin = (a.to_reference * t_ba).apply(b.to_reference.inverse().apply(*spec.origin));
  }
  out.fields[static_cast<size_t>(ib)] = make_registered(b.name, b.field, a.to_reference * t_ba, origin);
  return out;
}

ExperimentResult run_experiment(const SceneConfig& config, Command command, int threads) {
  const BuiltScene scene = build_scene(config);
  switch (command) {
    case Command::kRender: return do_render(config, scene, threads);
    case Command::kRegister: return do_register(config, scene, threads);
    case Command::kBlend: return do_blend(config, scene, threads);
    case Command::kEvaluate: return do_evaluate(config, scene, threads);
    case Command::kSweepGamma: return do_sweep_gamma(config, scene, threads);
    case Command::kSweepRho: return do_sweep_rho(config, scene, threads);
  }
  fail(ErrorCode::kInvalidArgument, "unknown command");
}

}  // namespace fieldfuse
