#include "idlearn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace idlearn {

namespace {

bool vec_eq(const Vec& a, const Vec& b) { return a.size() == b.size() && a == b; }

bool point_eq(const InputPoint& a, const InputPoint& b) {
  return a.kind == b.kind && vec_eq(a.q, b.q) && vec_eq(a.qd, b.qd) && vec_eq(a.qdd, b.qdd);
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

ExperimentConfig quiet(ExperimentConfig cfg) {
  cfg.noise_level = NoiseLevel::kNone;
  cfg.friction_level = Level::kNone;
  cfg.stiction_level = Level::kNone;
  cfg.n_iterations = 1;
  return cfg;
}

CheckResult model_match(const ExperimentConfig& base) {
  ExperimentConfig cfg = quiet(base);
  cfg.model_mass = cfg.true_mass;
  const EpisodeSetup setup = EpisodeSetup::from_config(cfg);
  const ErrorModel model = ErrorModel::untrained(cfg.mlp_spec(), cfg.dim, cfg.output_clamp);
  Rng rng(cfg.seed);
  const EpisodeResult ep = run_episode(setup, model, rng);
  const bool ok = !ep.metrics.aborted && ep.max_accel_err <= 1e-9 && ep.metrics.fb_mag_mean <= 1e-6;
  return {"model_match_identity", ok,
          fmt("max |qdd_a - qdd_d| = %.3g, mean |tau_fb| = %.3g", ep.max_accel_err,
              ep.metrics.fb_mag_mean)};
}

CheckResult gradient(const ExperimentConfig& cfg) {
  const double err = gradient_check_error(cfg.mlp_spec(), 100, 10, cfg.seed);
  return {"gradient_check", err < 1e-4, fmt("max relative error %.3g", err)};
}

CheckResult seed_pairing(const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  cfg.n_iterations = 1;
  std::vector<std::vector<StepTrace>> traces;
  for (DataSource s : {DataSource::kIndirect, DataSource::kDirect, DataSource::kJoint}) {
    cfg.data_source = s;
    std::vector<StepTrace> trace;
    run_learning(cfg, [&](int, const EpisodeResult& ep, const ErrorModel&, const Dataset&) {
      trace = ep.trace;
    });
    traces.push_back(std::move(trace));
  }
  const bool ok = !traces[0].empty() && traces_equal(traces[0], traces[1]) &&
                  traces_equal(traces[0], traces[2]);
  return {"seed_pairing", ok,
          ok ? "first-episode traces identical across data sources"
             : "first-episode traces differ across data sources"};
}

CheckResult stiction_pathology(const ExperimentConfig& base) {
  // A break torque far above anything the short episode applies keeps the
  // mass stuck while the adaptive offset ramps the applied torque.
  ExperimentConfig cfg = quiet(base);
  cfg.controller = Controller::kAdaptive;
  cfg.gain_setting = GainSetting::kLow;
  cfg.stiction_level = Level::kHigh;
  cfg.break_torque_levels = {0.0, 1e3, 1e3};
  cfg.horizon = 200;
  const EpisodeSetup setup = EpisodeSetup::from_config(cfg);
  const ErrorModel model = ErrorModel::untrained(cfg.mlp_spec(), cfg.dim, cfg.output_clamp);
  Rng rng(cfg.seed);
  const EpisodeResult ep = run_episode(setup, model, rng);
  const Dataset ind = build_indirect(ep.trace, 1);
  const Dataset dir = build_direct(ep.trace, 1);

  bool accel_zero = !ind.empty();
  double y_min = INFINITY, y_max = -INFINITY;
  for (const auto& s : ind.samples) {
    accel_zero = accel_zero && s.x.qdd.isZero(0.0);
    y_min = std::min(y_min, s.y.minCoeff());
    y_max = std::max(y_max, s.y.maxCoeff());
  }
  const bool direct_moving = std::any_of(dir.samples.begin(), dir.samples.end(),
                                         [](const TrainingSample& s) { return !s.x.qdd.isZero(0.0); });
  const bool ok = accel_zero && y_max > y_min && direct_moving;
  return {"stiction_pathology", ok,
          fmt("indirect target range [%.3g, %.3g]", y_min, y_max) +
              (accel_zero ? ", actual accelerations all zero" : ", nonzero actual acceleration") +
              (direct_moving ? ", direct inputs nonzero" : ", direct inputs zero")};
}

}  // namespace

bool traces_equal(const std::vector<StepTrace>& a, const std::vector<StepTrace>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const StepTrace& x = a[i];
    const StepTrace& y = b[i];
    if (x.t != y.t || !point_eq(x.x_d, y.x_d) || x.x_a.has_value() != y.x_a.has_value()) return false;
    if (x.x_a && !point_eq(*x.x_a, *y.x_a)) return false;
    if (x.tau_rbd_at_xa.has_value() != y.tau_rbd_at_xa.has_value()) return false;
    if (x.tau_rbd_at_xa && !vec_eq(*x.tau_rbd_at_xa, *y.tau_rbd_at_xa)) return false;
    if (!vec_eq(x.tau_total, y.tau_total) || !vec_eq(x.tau_fb_applied, y.tau_fb_applied) ||
        !vec_eq(x.tau_fb_learner, y.tau_fb_learner) || !vec_eq(x.f_prev_at_xd, y.f_prev_at_xd) ||
        !vec_eq(x.q_true, y.q_true) || !vec_eq(x.q_ref, y.q_ref)) {
      return false;
    }
  }
  return true;
}

double gradient_check_error(const MlpSpec& spec, int n_samples, int n_params,
                            std::uint64_t seed) {
  Rng rng(seed);
  Mlp net = Mlp::he_init(spec, rng);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(spec.input_dim, n_samples);
  Eigen::RowVectorXd y(n_samples);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = normal(rng);

  Vec grad;
  net.loss_and_gradient(x, y, &grad);
  std::uniform_int_distribution<Eigen::Index> pick(0, net.num_params() - 1);
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < n_params; ++k) {
    const Eigen::Index p = pick(rng);
    const double orig = net.params()[p];
    net.params()[p] = orig + h;
    const double up = net.loss_and_gradient(x, y, nullptr);
    net.params()[p] = orig - h;
    const double down = net.loss_and_gradient(x, y, nullptr);
    net.params()[p] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[p]), 1e-7});
    worst = std::max(worst, std::abs(fd - grad[p]) / denom);
  }
  return worst;
}

std::vector<CheckResult> run_checks(const ExperimentConfig& cfg) {
  return {model_match(cfg), gradient(cfg), seed_pairing(cfg), stiction_pathology(cfg)};
}

}  // namespace idlearn
