#pragma once

#include "idlearn/control.hpp"
#include "idlearn/dataset.hpp"
#include "idlearn/dynamics.hpp"
#include "idlearn/error_model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace idlearn {

enum class NoiseLevel { kNone, kLow, kMedium, kHigh, kVeryHigh };
enum class Level { kNone, kMedium, kHigh };  // friction and stiction
enum class Controller { kPid, kAdaptive };
enum class GainSetting { kLow, kHigh };

double noise_amplitude(NoiseLevel level);

const char* to_string(NoiseLevel v);
const char* to_string(Level v);
const char* to_string(Controller v);
const char* to_string(GainSetting v);

struct ExperimentConfig {
  // Grid axes.
  NoiseLevel noise_level = NoiseLevel::kLow;
  Level friction_level = Level::kMedium;
  Level stiction_level = Level::kMedium;
  Controller controller = Controller::kPid;
  GainSetting gain_setting = GainSetting::kLow;
  DataSource data_source = DataSource::kJoint;
  int epochs = 20;
  int n_iterations = 20;
  std::uint64_t seed = 0;
  int repetition = 0;
  int horizon = 5000;

  // Plant and approximate model.
  int dim = 2;
  double dt = 1e-3;
  double true_mass = 5.0;
  double model_mass = 0.5;
  std::vector<double> q_init{0.0, 0.0};
  std::vector<double> q_goal{1.0, 1.0};
  // Per-level magnitudes, indexed by Level (none, medium, high).
  std::vector<double> viscous_levels{0.0, 2.0, 5.0};
  std::vector<double> coulomb_levels{0.0, 1.0, 3.0};
  std::vector<double> break_torque_levels{0.0, 2.0, 5.0};
  // Coulomb multipliers over the position cells split at region_edge.
  std::vector<double> coulomb_pattern{0.5, 1.0, 1.5, 1.0};
  double region_edge = 0.5;
  double v_stick = 1e-3;

  // Task policy.
  double policy_kp = 25.0;
  double policy_kd = 10.0;

  // Feedback at the high gain setting. PID gains are per unit of model mass;
  // the low setting divides them and the adaptive rate by gain_ratio. The
  // filters smooth the PID derivative and the adaptive acceleration error
  // (1 disables them).
  double pid_kp = 60.0;
  double pid_ki = 0.5;
  double pid_kd = 15.0;
  double integral_limit = 10.0;
  double pid_derivative_filter = 0.05;
  double adaptive_eta = 0.05;
  double adaptive_error_filter = 0.05;
  double gain_ratio = 10.0;
  double learner_filter = 0.1;

  // Error model.
  std::vector<int> layer_widths{200, 100, 50, 20, 1};
  double prelu_alpha = 0.25;
  double learning_rate = 1e-3;
  int batch_size = 64;
  double output_clamp = 20.0;
  bool accumulate_data = false;

  // Episode termination.
  double converge_pos_tol = 1e-3;
  double converge_vel_tol = 1e-2;
  double abort_threshold = 1e3;

  void validate() const;
  GainPair gains() const;
  MlpSpec mlp_spec() const;
  TrainOptions train_options() const;
};

// Everything needed to execute one task episode.
struct EpisodeSetup {
  TrueSystem system;
  ApproxRbdModel rbd;
  AccelPolicy policy;
  Vec q_init;
  Controller controller = Controller::kPid;
  PidGains pid_gains;
  double integral_limit = 10.0;
  double pid_derivative_filter = 1.0;
  double adaptive_eta = 0.05;
  double adaptive_error_filter = 1.0;
  GainPair gains;
  double learner_filter = 0.1;
  int horizon = 5000;
  double converge_pos_tol = 1e-3;
  double converge_vel_tol = 1e-2;
  double abort_threshold = 1e3;

  static EpisodeSetup from_config(const ExperimentConfig& cfg);
};

struct IterationMetrics {
  int iteration = 0;
  double pos_err_mean = 0.0;    // mean |q_ref - q| [m]
  double fb_mag_mean = 0.0;     // mean |tau_fb applied| [N]
  double accel_err_mean = 0.0;  // mean |qdd_d - qdd_a| [m/s^2]
  bool converged = false;
  int steps_used = 0;
  bool aborted = false;
};

struct EpisodeResult {
  std::vector<StepTrace> trace;
  IterationMetrics metrics;
  double max_accel_err = 0.0;  // max over steps of max_i |qdd_d - qdd_a|
};

// Executes the task once with error model `model` (iteration k-1) and
// records one trace entry per control step. Divergence aborts the episode
// and is reported through metrics.aborted.
EpisodeResult run_episode(const EpisodeSetup& setup, const ErrorModel& model,
                          Rng& noise_rng);

struct RunMetrics {
  ExperimentConfig config;
  std::vector<IterationMetrics> iterations;
  bool aborted = false;
  std::string error;
};

// Called after every episode with the episode, the model that drove it and
// the dataset the next model is trained on.
using IterationObserver = std::function<void(
    int k, const EpisodeResult& episode, const ErrorModel& model,
    const Dataset& training_data)>;

// Runs n_iterations task executions, retraining the error model between
// them. Deterministic in cfg.seed.
RunMetrics run_learning(const ExperimentConfig& cfg,
                        const IterationObserver& observer = {});

// Seed for one grid cell: depends on the system condition and the
// repetition only.
std::uint64_t condition_seed(std::uint64_t base_seed, const ExperimentConfig& cfg);

struct SweepGrid {
  ExperimentConfig base;
  std::vector<NoiseLevel> noise_levels;
  std::vector<Level> friction_levels;
  std::vector<Level> stiction_levels;
  std::vector<Controller> controllers;
  std::vector<GainSetting> gain_settings;
  std::vector<DataSource> data_sources;
  std::vector<int> epochs;
  int repetitions = 1;
  std::uint64_t base_seed = 0;

  // Single-valued axes default to the base config's value.
  static SweepGrid single(const ExperimentConfig& base);
  std::vector<ExperimentConfig> expand() const;
};

// Runs every configuration; failures are recorded in RunMetrics::error and
// do not stop the sweep. `threads` <= 0 uses the hardware concurrency.
std::vector<RunMetrics> run_sweep(const std::vector<ExperimentConfig>& grid,
                                  int threads = 0);

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;
};

struct IterationAggregate {
  int iteration = 0;
  int count = 0;
  int excluded = 0;
  MetricStats pos_err;
  MetricStats fb_mag;
  MetricStats accel_err;
};

struct AggregateResult {
  std::vector<std::string> group_by;
  std::map<std::string, std::vector<IterationAggregate>> groups;
};

// Grouping fields: noise, friction, stiction, controller, gain,
// data_source, epochs.
std::string group_key(const ExperimentConfig& cfg,
                      const std::vector<std::string>& group_by);

// Per-iteration mean and population standard deviation per group. Aborted
// iterations are excluded and counted. Throws if there are no runs.
AggregateResult aggregate(const std::vector<RunMetrics>& runs,
                          const std::vector<std::string>& group_by);

}  // namespace idlearn
