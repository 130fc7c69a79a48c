#include "idlearn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace idlearn {

namespace {

constexpr std::size_t level_index(Level l) { return static_cast<std::size_t>(l); }

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return Rng(seq);
}

constexpr std::uint32_t kNoiseStream = 1;
constexpr std::uint32_t kTrainStream = 2;

}  // namespace

double noise_amplitude(NoiseLevel level) {
  switch (level) {
    case NoiseLevel::kNone: return 0.0;
    case NoiseLevel::kLow: return 0.0001;
    case NoiseLevel::kMedium: return 0.0005;
    case NoiseLevel::kHigh: return 0.007;
    case NoiseLevel::kVeryHigh: return 0.008;
  }
  return 0.0;
}

const char* to_string(NoiseLevel v) {
  switch (v) {
    case NoiseLevel::kNone: return "none";
    case NoiseLevel::kLow: return "low";
    case NoiseLevel::kMedium: return "medium";
    case NoiseLevel::kHigh: return "high";
    case NoiseLevel::kVeryHigh: return "very_high";
  }
  return "?";
}

const char* to_string(Level v) {
  switch (v) {
    case Level::kNone: return "none";
    case Level::kMedium: return "medium";
    case Level::kHigh: return "high";
  }
  return "?";
}

const char* to_string(Controller v) {
  return v == Controller::kPid ? "pid" : "adaptive";
}

const char* to_string(GainSetting v) {
  return v == GainSetting::kLow ? "low" : "high";
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (n_iterations < 1) fail("n_iterations must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (horizon < 2) fail("horizon must be >= 2");
  if (dim < 1) fail("dim must be >= 1");
  if (static_cast<int>(q_init.size()) != dim || static_cast<int>(q_goal.size()) != dim) {
    fail("q_init and q_goal must have dim = " + std::to_string(dim) + " entries");
  }
  if (!(dt > 0.0)) fail("dt must be > 0");
  if (!(true_mass > 0.0) || !(model_mass > 0.0)) fail("masses must be > 0");
  for (const auto* levels : {&viscous_levels, &coulomb_levels, &break_torque_levels}) {
    if (levels->size() != 3) fail("level tables need 3 entries (none, medium, high)");
    for (double v : *levels) {
      if (!(v >= 0.0)) fail("friction and stiction levels must be >= 0");
    }
  }
  std::size_t cells = 1;
  for (int i = 0; i < dim; ++i) cells *= 2;
  if (coulomb_pattern.size() != cells) {
    fail("coulomb_pattern needs 2^dim = " + std::to_string(cells) + " entries");
  }
  if (!(v_stick > 0.0)) fail("v_stick must be > 0");
  if (!(policy_kp > 0.0) || !(policy_kd > 0.0)) fail("policy gains must be > 0");
  if (pid_kp < 0.0 || pid_ki < 0.0 || pid_kd < 0.0) fail("pid gains must be >= 0");
  if (!(adaptive_eta > 0.0)) fail("adaptive_eta must be > 0");
  for (double f : {pid_derivative_filter, adaptive_error_filter, learner_filter}) {
    if (!(f > 0.0 && f <= 1.0)) fail("filter factors must be in (0, 1]");
  }
  if (!(gain_ratio >= 1.0)) fail("gain_ratio must be >= 1");
  if (!(learning_rate > 0.0) || batch_size < 1) fail("invalid learning_rate or batch_size");
  if (!(output_clamp > 0.0)) fail("output_clamp must be > 0");
  mlp_spec().validate();
}

GainPair ExperimentConfig::gains() const {
  return gain_setting == GainSetting::kHigh ? GainPair{1.0, 1.0}
                                            : GainPair{1.0 / gain_ratio, 1.0};
}

MlpSpec ExperimentConfig::mlp_spec() const {
  return MlpSpec{layer_widths, prelu_alpha, 3 * dim};
}

TrainOptions ExperimentConfig::train_options() const {
  TrainOptions o;
  o.epochs = epochs;
  o.learning_rate = learning_rate;
  o.batch_size = batch_size;
  return o;
}

EpisodeSetup EpisodeSetup::from_config(const ExperimentConfig& cfg) {
  cfg.validate();
  const int n = cfg.dim;
  EpisodeSetup s;
  s.system.mass = Vec::Constant(n, cfg.true_mass);
  s.system.friction.viscous = Vec::Constant(n, cfg.viscous_levels[level_index(cfg.friction_level)]);
  const double coulomb = cfg.coulomb_levels[level_index(cfg.friction_level)];
  for (double m : cfg.coulomb_pattern) s.system.friction.coulomb_levels.push_back(m * coulomb);
  s.system.friction.region_edges = {cfg.region_edge};
  s.system.stiction.break_torque = cfg.break_torque_levels[level_index(cfg.stiction_level)];
  s.system.stiction.v_stick = cfg.v_stick;
  s.system.noise_max = noise_amplitude(cfg.noise_level);
  s.system.dt = cfg.dt;
  s.system.validate();

  s.rbd = ApproxRbdModel::diagonal(Vec::Constant(n, cfg.model_mass));
  s.policy = AccelPolicy{to_vec(cfg.q_goal), cfg.policy_kp, cfg.policy_kd};
  s.q_init = to_vec(cfg.q_init);
  s.controller = cfg.controller;
  s.pid_gains = PidGains{Vec::Constant(n, cfg.pid_kp * cfg.model_mass),
                         Vec::Constant(n, cfg.pid_ki * cfg.model_mass),
                         Vec::Constant(n, cfg.pid_kd * cfg.model_mass)};
  s.integral_limit = cfg.integral_limit;
  s.pid_derivative_filter = cfg.pid_derivative_filter;
  s.adaptive_eta = cfg.adaptive_eta;
  s.adaptive_error_filter = cfg.adaptive_error_filter;
  s.gains = cfg.gains();
  s.learner_filter = cfg.learner_filter;
  s.horizon = cfg.horizon;
  s.converge_pos_tol = cfg.converge_pos_tol;
  s.converge_vel_tol = cfg.converge_vel_tol;
  s.abort_threshold = cfg.abort_threshold;
  return s;
}

namespace {

// Applied and shadow feedback controllers of identical structure.
class FeedbackPair {
 public:
  explicit FeedbackPair(const EpisodeSetup& s) : setup_(s) {
    const int n = s.system.dim();
    if (s.controller == Controller::kPid) {
      applied_pid_ = PidState::make(s.pid_gains);
      applied_pid_.integral_limit = s.integral_limit;
      applied_pid_.derivative_filter = s.pid_derivative_filter;
      shadow_pid_ = applied_pid_;
    } else {
      applied_fb_ = AdaptiveFbState::make(n, s.adaptive_eta);
      applied_fb_.error_filter = s.adaptive_error_filter;
      shadow_fb_ = applied_fb_;
    }
  }

  // Returns {applied, shadow}. The accelerations are those of the previous
  // step (equal on the first step).
  std::pair<Vec, Vec> update(const Vec& pos_err, const Vec& qdd_des, const Vec& qdd_act) {
    const auto& g = setup_.gains;
    if (setup_.controller == Controller::kPid) {
      const double dt = setup_.system.dt;
      Vec applied = pid_feedback(applied_pid_, pos_err, dt, g.g_low);
      Vec shadow = pid_feedback(shadow_pid_, pos_err, dt, g.g_high);
      return {std::move(applied), std::move(shadow)};
    }
    Vec applied = adaptive_feedback(applied_fb_, qdd_des, qdd_act, g.g_low);
    Vec shadow = adaptive_feedback(shadow_fb_, qdd_des, qdd_act, g.g_high);
    return {std::move(applied), std::move(shadow)};
  }

 private:
  const EpisodeSetup& setup_;
  PidState applied_pid_;
  PidState shadow_pid_;
  AdaptiveFbState applied_fb_;
  AdaptiveFbState shadow_fb_;
};

bool out_of_bounds(const JointState& s, double limit) {
  return !s.finite() || s.q.cwiseAbs().maxCoeff() > limit ||
         s.qd.cwiseAbs().maxCoeff() > limit;
}

}  // namespace

EpisodeResult run_episode(const EpisodeSetup& setup, const ErrorModel& model,
                          Rng& noise_rng) {
  const TrueSystem& sys = setup.system;
  const int n = sys.dim();
  const double dt = sys.dt;
  if (model.dim != n) throw std::invalid_argument("run_episode: model dim mismatch");

  EpisodeResult out;
  out.trace.reserve(static_cast<std::size_t>(setup.horizon));
  auto& met = out.metrics;

  JointState state = JointState::at_rest(setup.q_init);
  JointState ref = state;  // ideal-dynamics rollout of the policy
  Vec q_meas = setup.q_init;
  if (sys.noise_max > 0.0) {
    std::uniform_real_distribution<double> noise(-sys.noise_max, sys.noise_max);
    for (int i = 0; i < n; ++i) q_meas[i] += noise(noise_rng);
  }
  Vec qd_est = Vec::Zero(n);
  Vec prev_qdd_d = Vec::Zero(n);
  Vec prev_qdd_a = Vec::Zero(n);
  Vec learner_fb = Vec::Zero(n);
  FeedbackPair feedback(setup);

  double pos_err_sum = 0.0, fb_sum = 0.0, accel_sum = 0.0;
  int accel_count = 0;

  for (int t = 0; t < setup.horizon; ++t) {
    const JointState est{q_meas, qd_est};
    InputPoint x_d{q_meas, qd_est, policy_accel(setup.policy, est), AccelKind::kDesired};

    auto [fb_applied, fb_shadow] = feedback.update(ref.q - q_meas, prev_qdd_d, prev_qdd_a);
    learner_fb = exp_filter(learner_fb, fb_shadow, setup.learner_filter);

    const Vec f_err = predict(model, x_d);
    const Vec tau_rbd = rbd_torque(setup.rbd, x_d);
    const Vec tau = compose_torque(tau_rbd, f_err, fb_applied, model.output_clamp);

    StepTrace step;
    step.t = t;
    step.x_d = x_d;
    step.tau_total = tau;
    step.tau_fb_applied = fb_applied;
    step.tau_fb_learner = learner_fb;
    step.f_prev_at_xd = f_err;
    step.q_true = state.q;
    step.q_ref = ref.q;

    pos_err_sum += (ref.q - state.q).norm();
    fb_sum += fb_applied.norm();

    const bool converged = (state.q - setup.policy.q_des).norm() < setup.converge_pos_tol &&
                           state.qd.norm() < setup.converge_vel_tol;
    if (converged || t + 1 == setup.horizon) {
      met.converged = converged;
      out.trace.push_back(std::move(step));
      break;
    }

    StepResult next;
    try {
      next = simulate_step(sys, state, tau, noise_rng);
    } catch (const SimulationFault&) {
      met.aborted = true;
      out.trace.push_back(std::move(step));
      break;
    }
    const FiniteDiff fd = finite_diff(next.measured_q, q_meas, qd_est, dt);
    InputPoint x_a{q_meas, qd_est, fd.qdd, AccelKind::kActual};
    step.tau_rbd_at_xa = rbd_torque(setup.rbd, x_a);
    step.x_a = std::move(x_a);
    out.trace.push_back(std::move(step));

    const Vec accel_err = x_d.qdd - fd.qdd;
    prev_qdd_d = x_d.qdd;
    prev_qdd_a = fd.qdd;
    accel_sum += accel_err.norm();
    ++accel_count;
    out.max_accel_err = std::max(out.max_accel_err, accel_err.cwiseAbs().maxCoeff());

    state = next.next;
    q_meas = next.measured_q;
    qd_est = fd.qd;
    ref.qd += policy_accel(setup.policy, ref) * dt;
    ref.q += ref.qd * dt;

    if (out_of_bounds(state, setup.abort_threshold)) {
      met.aborted = true;
      break;
    }
  }

  const auto steps = static_cast<double>(out.trace.size());
  met.steps_used = static_cast<int>(out.trace.size());
  met.pos_err_mean = pos_err_sum / steps;
  met.fb_mag_mean = fb_sum / steps;
  met.accel_err_mean = accel_count > 0 ? accel_sum / accel_count : 0.0;
  return out;
}

RunMetrics run_learning(const ExperimentConfig& cfg, const IterationObserver& observer) {
  RunMetrics run;
  run.config = cfg;
  const EpisodeSetup setup = EpisodeSetup::from_config(cfg);
  Rng noise_rng = stream(cfg.seed, kNoiseStream);
  Rng train_rng = stream(cfg.seed, kTrainStream);

  ErrorModel model = ErrorModel::untrained(cfg.mlp_spec(), cfg.dim, cfg.output_clamp);
  Dataset history;
  for (int k = 1; k <= cfg.n_iterations; ++k) {
    EpisodeResult ep = run_episode(setup, model, noise_rng);
    ep.metrics.iteration = k;
    run.iterations.push_back(ep.metrics);
    if (ep.metrics.aborted) {
      run.aborted = true;
      break;
    }

    const bool last = k == cfg.n_iterations;
    if (last && !observer) break;

    Dataset data;
    const Dataset indirect = build_indirect(ep.trace, k);
    const Dataset direct = build_direct(ep.trace, k);
    switch (cfg.data_source) {
      case DataSource::kIndirect: data = indirect; break;
      case DataSource::kDirect: data = direct; break;
      case DataSource::kJoint: data = build_joint(indirect, direct); break;
    }
    if (cfg.accumulate_data) {
      accumulate(history, data);
      data = history;
    }
    if (observer) observer(k, ep, model, data);
    if (last) break;
    model = train(model, data, cfg.train_options(), train_rng).model;
  }
  return run;
}

std::uint64_t condition_seed(std::uint64_t base_seed, const ExperimentConfig& cfg) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(cfg.noise_level));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(cfg.friction_level) << 8));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(cfg.stiction_level) << 16));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(cfg.repetition) << 24));
  return h;
}

SweepGrid SweepGrid::single(const ExperimentConfig& base) {
  SweepGrid g;
  g.base = base;
  g.base_seed = base.seed;
  return g;
}

std::vector<ExperimentConfig> SweepGrid::expand() const {
  auto axis = [](const auto& values, auto fallback) {
    using T = decltype(fallback);
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values);
  };
  const auto noise = axis(noise_levels, base.noise_level);
  const auto friction = axis(friction_levels, base.friction_level);
  const auto stiction = axis(stiction_levels, base.stiction_level);
  const auto ctrl = axis(controllers, base.controller);
  const auto gain = axis(gain_settings, base.gain_setting);
  const auto source = axis(data_sources, base.data_source);
  const auto ep = axis(epochs, base.epochs);

  std::vector<ExperimentConfig> out;
  for (auto nl : noise)
    for (auto fl : friction)
      for (auto sl : stiction)
        for (int rep = 0; rep < repetitions; ++rep)
          for (auto c : ctrl)
            for (auto g : gain)
              for (int e : ep)
                for (auto ds : source) {
                  ExperimentConfig cfg = base;
                  cfg.noise_level = nl;
                  cfg.friction_level = fl;
                  cfg.stiction_level = sl;
                  cfg.repetition = rep;
                  cfg.controller = c;
                  cfg.gain_setting = g;
                  cfg.epochs = e;
                  cfg.data_source = ds;
                  cfg.seed = condition_seed(base_seed, cfg);
                  out.push_back(std::move(cfg));
                }
  return out;
}

std::vector<RunMetrics> run_sweep(const std::vector<ExperimentConfig>& grid, int threads) {
  if (grid.empty()) throw std::invalid_argument("run_sweep: empty grid");
  std::vector<RunMetrics> results(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        results[i] = run_learning(grid[i]);
      } catch (const std::exception& e) {
        results[i].config = grid[i];
        results[i].aborted = true;
        results[i].error = e.what();
      }
    }
  };
  unsigned n = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  n = std::clamp<unsigned>(n, 1u, static_cast<unsigned>(grid.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  return results;
}

std::string group_key(const ExperimentConfig& cfg, const std::vector<std::string>& group_by) {
  std::string key;
  for (const auto& field : group_by) {
    std::string value;
    if (field == "noise") value = to_string(cfg.noise_level);
    else if (field == "friction") value = to_string(cfg.friction_level);
    else if (field == "stiction") value = to_string(cfg.stiction_level);
    else if (field == "controller") value = to_string(cfg.controller);
    else if (field == "gain") value = to_string(cfg.gain_setting);
    else if (field == "data_source") value = to_string(cfg.data_source);
    else if (field == "epochs") value = std::to_string(cfg.epochs);
    else throw std::invalid_argument("unknown grouping field '" + field + "'");
    if (!key.empty()) key += '-';
    key += value;
  }
  return key.empty() ? "all" : key;
}

AggregateResult aggregate(const std::vector<RunMetrics>& runs,
                          const std::vector<std::string>& group_by) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  AggregateResult result;
  result.group_by = group_by;

  std::map<std::string, std::vector<const RunMetrics*>> members;
  for (const auto& r : runs) members[group_key(r.config, group_by)].push_back(&r);

  for (const auto& [key, group] : members) {
    int n_iter = 0;
    for (const auto* r : group) n_iter = std::max(n_iter, r->config.n_iterations);
    auto& curve = result.groups[key];
    for (int k = 1; k <= n_iter; ++k) {
      IterationAggregate agg;
      agg.iteration = k;
      std::vector<const IterationMetrics*> vals;
      for (const auto* r : group) {
        const auto idx = static_cast<std::size_t>(k - 1);
        if (idx < r->iterations.size() && !r->iterations[idx].aborted && r->error.empty()) {
          vals.push_back(&r->iterations[idx]);
        } else {
          ++agg.excluded;
        }
      }
      agg.count = static_cast<int>(vals.size());
      auto stats = [&vals](double IterationMetrics::*field) {
        MetricStats s;
        if (vals.empty()) return MetricStats{std::nan(""), std::nan("")};
        for (const auto* v : vals) s.mean += v->*field;
        s.mean /= static_cast<double>(vals.size());
        double ss = 0.0;
        for (const auto* v : vals) ss += (v->*field - s.mean) * (v->*field - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(vals.size()));
        return s;
      };
      agg.pos_err = stats(&IterationMetrics::pos_err_mean);
      agg.fb_mag = stats(&IterationMetrics::fb_mag_mean);
      agg.accel_err = stats(&IterationMetrics::accel_err_mean);
      curve.push_back(agg);
    }
  }
  return result;
}

}  // namespace idlearn
