#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fieldfuse/blending.hpp"
#include "fieldfuse/config.hpp"
#include "fieldfuse/registration.hpp"

namespace fieldfuse {

enum class Command { kRender, kRegister, kBlend, kEvaluate, kSweepGamma, kSweepRho };

const char* to_string(Command c);
std::optional<Command> parse_command(std::string_view name);

/// Command-line overrides layered on top of a scene file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;  // strategy name or "all"
  std::optional<double> gamma;
  std::optional<double> tau;
  std::optional<int> budget;
  std::optional<std::filesystem::path> out;
};

/// Throws Error(kInvalidArgument) for an unknown strategy or an invalid value.
void apply_overrides(SceneConfig& config, const Overrides& o);

/// One CSV row. Metrics that do not apply are NaN and print as empty cells.
struct MetricsRow {
  std::string scene;
  std::string strategy;
  double gamma = 0.0;
  double tau = 0.0;
  std::string transform;  // "ground-truth" or "estimated"
  int cameras = 0;
  double psnr = 0.0;      // mean over cameras
  double ssim = 0.0;
  double r_err = 0.0;
  double t_err = 0.0;
  double s_err = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "version,scene,strategy,gamma,tau,transform,cameras,psnr,ssim,r_err,t_err,s_err";
inline constexpr int kCsvVersion = 1;

/// Stable sort by (scene, strategy, gamma).
void sort_rows(std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);

/// %.6g; NaN as an empty cell.
std::string csv_number(double v);

struct RhoRow {
  double rho = 0.0;
  int poses = 0;
  int trials = 0;
  double r_err_mean = 0.0;
  double t_err_mean = 0.0;
  double s_err_mean = 0.0;
  double r_err_median = 0.0;
  double t_err_median = 0.0;
  double s_err_median = 0.0;
  double success_rate = 0.0;
};

inline constexpr const char* kRhoHeader =
    "version,scene,rho,poses,trials,r_err_mean,t_err_mean,s_err_mean,r_err_median,t_err_median,"
    "s_err_median,success_rate";

/// A registration trial succeeds when r < 5 deg, t < 0.2 and s < 0.1.
bool registration_succeeded(const RegistrationError& e);

struct ExperimentResult {
  std::vector<std::filesystem::path> artifacts;
  std::vector<MetricsRow> rows;
  std::vector<RhoRow> rho_rows;
  std::optional<RegistrationReport> registration;
};

/// Geometric grid of `steps` values from lo to hi inclusive.
std::vector<double> geometric_grid(double lo, double hi, int steps);

/// Registration of the configured reference/target pair with a simulated
/// pose-recovery backend. `seed` drives pose sampling, the hidden gauge and
/// the simulator.
RegistrationReport run_registration(const SceneConfig& config, const BuiltScene& scene,
                                    std::uint64_t seed, int threads,
                                    std::optional<int> pose_count = std::nullopt);

/// The registered set with the target re-placed by an estimated T_BA.
RegisteredFieldSet with_estimated_transform(const SceneConfig& config, const BuiltScene& scene,
                                            const Sim3Transform& t_ba);

/// Runs one command and writes its artifacts below config.output.
ExperimentResult run_experiment(const SceneConfig& config, Command command, int threads = 0);

}  // namespace fieldfuse
