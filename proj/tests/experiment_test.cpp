#include "idlearn/experiment.hpp"
#include "idlearn/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace idlearn {
namespace {

ExperimentConfig quiet_config() {
  ExperimentConfig cfg;
  cfg.noise_level = NoiseLevel::kNone;
  cfg.friction_level = Level::kNone;
  cfg.stiction_level = Level::kNone;
  return cfg;
}

// Small network so multi-iteration runs stay fast.
ExperimentConfig fast(ExperimentConfig cfg) {
  cfg.layer_widths = {64, 32, 16, 1};
  return cfg;
}

ErrorModel untrained(const ExperimentConfig& cfg) {
  return ErrorModel::untrained(cfg.mlp_spec(), cfg.dim, cfg.output_clamp);
}

TEST(NoiseAmplitude, Levels) {
  EXPECT_EQ(noise_amplitude(NoiseLevel::kNone), 0.0);
  EXPECT_EQ(noise_amplitude(NoiseLevel::kLow), 0.0001);
  EXPECT_EQ(noise_amplitude(NoiseLevel::kMedium), 0.0005);
  EXPECT_EQ(noise_amplitude(NoiseLevel::kHigh), 0.007);
  EXPECT_EQ(noise_amplitude(NoiseLevel::kVeryHigh), 0.008);
}

TEST(ExperimentConfig, DefaultsValidate) {
  const ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.n_iterations, 20);
  EXPECT_EQ(cfg.layer_widths, (std::vector<int>{200, 100, 50, 20, 1}));
  EXPECT_EQ(cfg.learner_filter, 0.1);
}

TEST(ExperimentConfig, GainSettings) {
  ExperimentConfig cfg;
  cfg.gain_setting = GainSetting::kLow;
  EXPECT_EQ(cfg.gains().g_low, 0.1);
  EXPECT_EQ(cfg.gains().g_high, 1.0);
  cfg.gain_setting = GainSetting::kHigh;
  EXPECT_EQ(cfg.gains().g_low, 1.0);
  EXPECT_EQ(cfg.gains().g_high, 1.0);
}

TEST(ExperimentConfig, RejectsInvalidValues) {
  auto bad = [](auto mutate) {
    ExperimentConfig cfg;
    mutate(cfg);
    return cfg;
  };
  EXPECT_THROW(bad([](auto& c) { c.q_goal = {1, 1, 1}; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.true_mass = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.learner_filter = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.pid_derivative_filter = 1.5; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.n_iterations = 0; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.layer_widths = {10, 2}; }).validate(), std::invalid_argument);
  EXPECT_THROW(bad([](auto& c) { c.coulomb_pattern = {1, 1}; }).validate(), std::invalid_argument);
}

TEST(EpisodeSetup, FromConfig) {
  ExperimentConfig cfg;
  cfg.friction_level = Level::kHigh;
  cfg.stiction_level = Level::kMedium;
  cfg.noise_level = NoiseLevel::kVeryHigh;
  const EpisodeSetup s = EpisodeSetup::from_config(cfg);
  EXPECT_EQ(s.system.mass, Vec::Constant(2, 5.0));
  EXPECT_EQ(s.rbd.mass_hat, Vec::Constant(2, 0.5));
  EXPECT_EQ(s.rbd.h_hat, Vec::Zero(2));
  EXPECT_EQ(s.system.friction.viscous, Vec::Constant(2, 5.0));
  EXPECT_EQ(s.system.friction.coulomb_levels, (std::vector<double>{1.5, 3.0, 4.5, 3.0}));
  EXPECT_EQ(s.system.stiction.break_torque, 2.0);
  EXPECT_EQ(s.system.noise_max, 0.008);
  EXPECT_EQ(s.pid_gains.kp, Vec::Constant(2, 30.0));
  EXPECT_EQ(s.policy.q_des, Vec::Ones(2));
}

TEST(RunEpisode, TrueModelNeedsNoFeedback) {
  ExperimentConfig cfg = quiet_config();
  cfg.model_mass = cfg.true_mass;
  for (Controller c : {Controller::kPid, Controller::kAdaptive}) {
    cfg.controller = c;
    Rng rng(0);
    const auto ep = run_episode(EpisodeSetup::from_config(cfg), untrained(cfg), rng);
    EXPECT_LT(ep.metrics.fb_mag_mean, 1e-6);
    EXPECT_LE(ep.max_accel_err, 1e-9);
    EXPECT_TRUE(ep.metrics.converged);
  }
}

TEST(RunEpisode, TraceLengthsFollowFiniteDifferenceLag) {
  ExperimentConfig cfg;
  cfg.horizon = 700;
  Rng rng(1);
  const auto ep = run_episode(EpisodeSetup::from_config(cfg), untrained(cfg), rng);
  EXPECT_EQ(ep.metrics.steps_used, 700);
  EXPECT_EQ(ep.trace.size(), 700u);
  EXPECT_EQ(build_indirect(ep.trace, 1).size(), 699u);
  EXPECT_EQ(build_direct(ep.trace, 1).size(), 700u);
  EXPECT_FALSE(ep.trace.back().x_a.has_value());
}

TEST(RunEpisode, AppliedTorqueComposition) {
  ExperimentConfig cfg;
  cfg.horizon = 300;
  Rng rng(2);
  const EpisodeSetup setup = EpisodeSetup::from_config(cfg);
  const auto ep = run_episode(setup, untrained(cfg), rng);
  for (const auto& s : ep.trace) {
    const Vec expect = rbd_torque(setup.rbd, s.x_d) + s.f_prev_at_xd + s.tau_fb_applied;
    ASSERT_TRUE(s.tau_total.isApprox(expect, 1e-12));
  }
}

TEST(RunEpisode, ShadowFeedbackNeverReachesPlant) {
  for (Controller c : {Controller::kPid, Controller::kAdaptive}) {
    ExperimentConfig cfg;
    cfg.controller = c;
    cfg.horizon = 1000;
    EpisodeSetup a = EpisodeSetup::from_config(cfg);
    EpisodeSetup b = a;
    b.gains.g_high = 7.0;
    Rng ra(3), rb(3);
    const auto ea = run_episode(a, untrained(cfg), ra);
    const auto eb = run_episode(b, untrained(cfg), rb);
    ASSERT_EQ(ea.trace.size(), eb.trace.size());
    bool learner_differs = false;
    for (std::size_t i = 0; i < ea.trace.size(); ++i) {
      ASSERT_EQ(ea.trace[i].tau_total, eb.trace[i].tau_total);
      ASSERT_EQ(ea.trace[i].q_true, eb.trace[i].q_true);
      learner_differs |= ea.trace[i].tau_fb_learner != eb.trace[i].tau_fb_learner;
    }
    EXPECT_TRUE(learner_differs);
  }
}

TEST(RunEpisode, HighGainEqualsShadowBeforeFiltering) {
  ExperimentConfig cfg = quiet_config();
  cfg.gain_setting = GainSetting::kHigh;
  cfg.learner_filter = 1.0;
  cfg.horizon = 500;
  Rng rng(4);
  const auto ep = run_episode(EpisodeSetup::from_config(cfg), untrained(cfg), rng);
  for (const auto& s : ep.trace) ASSERT_EQ(s.tau_fb_applied, s.tau_fb_learner);
}

TEST(RunEpisode, DivergenceIsFlaggedNotThrown) {
  ExperimentConfig cfg = quiet_config();
  cfg.abort_threshold = 0.5;
  Rng rng(5);
  const auto ep = run_episode(EpisodeSetup::from_config(cfg), untrained(cfg), rng);
  EXPECT_TRUE(ep.metrics.aborted);
  EXPECT_LT(ep.metrics.steps_used, cfg.horizon);
}

TEST(RunEpisodeProperty, MetricsAreNonNegative) {
  for (NoiseLevel n : {NoiseLevel::kNone, NoiseLevel::kVeryHigh}) {
    ExperimentConfig cfg;
    cfg.noise_level = n;
    cfg.horizon = 800;
    Rng rng(6);
    const auto ep = run_episode(EpisodeSetup::from_config(cfg), untrained(cfg), rng);
    EXPECT_GE(ep.metrics.pos_err_mean, 0.0);
    EXPECT_GE(ep.metrics.fb_mag_mean, 0.0);
    EXPECT_GE(ep.metrics.accel_err_mean, 0.0);
  }
}

TEST(RunLearning, SameSeedSameMetrics) {
  ExperimentConfig cfg = fast(ExperimentConfig{});
  cfg.n_iterations = 3;
  cfg.horizon = 1500;
  cfg.seed = 42;
  const auto a = run_learning(cfg);
  const auto b = run_learning(cfg);
  ASSERT_EQ(a.iterations.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(a.iterations[k].pos_err_mean, b.iterations[k].pos_err_mean);
    EXPECT_EQ(a.iterations[k].fb_mag_mean, b.iterations[k].fb_mag_mean);
    EXPECT_EQ(a.iterations[k].accel_err_mean, b.iterations[k].accel_err_mean);
  }
  cfg.seed = 43;
  EXPECT_NE(run_learning(cfg).iterations[0].pos_err_mean, a.iterations[0].pos_err_mean);
}

TEST(RunLearning, ObserverSeesNonEmptyDataEveryIteration) {
  ExperimentConfig cfg = fast(ExperimentConfig{});
  cfg.n_iterations = 3;
  cfg.horizon = 400;
  int calls = 0;
  run_learning(cfg, [&](int k, const EpisodeResult& ep, const ErrorModel& model, const Dataset& d) {
    ++calls;
    EXPECT_EQ(model.iteration, k - 1);
    EXPECT_EQ(d.size(), 2 * ep.trace.size() - 1);
    EXPECT_FALSE(d.empty());
  });
  EXPECT_EQ(calls, 3);
}

TEST(RunLearning, AccumulateGrowsTrainingSet) {
  ExperimentConfig cfg = fast(ExperimentConfig{});
  cfg.n_iterations = 3;
  cfg.horizon = 300;
  cfg.accumulate_data = true;
  cfg.data_source = DataSource::kDirect;
  std::vector<std::size_t> sizes;
  run_learning(cfg, [&](int, const EpisodeResult&, const ErrorModel&, const Dataset& d) {
    sizes.push_back(d.size());
  });
  EXPECT_EQ(sizes, (std::vector<std::size_t>{300, 600, 900}));
}

TEST(RunLearning, FirstEpisodeIdenticalAcrossDataSources) {
  ExperimentConfig cfg;
  cfg.noise_level = NoiseLevel::kHigh;
  cfg.n_iterations = 1;
  cfg.horizon = 2000;
  std::vector<std::vector<StepTrace>> traces;
  for (DataSource s : {DataSource::kIndirect, DataSource::kDirect, DataSource::kJoint}) {
    cfg.data_source = s;
    run_learning(cfg, [&](int, const EpisodeResult& ep, const ErrorModel&, const Dataset&) {
      traces.push_back(ep.trace);
    });
  }
  ASSERT_EQ(traces.size(), 3u);
  EXPECT_TRUE(traces_equal(traces[0], traces[1]));
  EXPECT_TRUE(traces_equal(traces[0], traces[2]));
}

TEST(RunLearning, JointDataImprovesLowGainPid) {
  ExperimentConfig cfg = fast(ExperimentConfig{});
  cfg.controller = Controller::kPid;
  cfg.gain_setting = GainSetting::kLow;
  cfg.friction_level = Level::kMedium;
  cfg.noise_level = NoiseLevel::kLow;
  cfg.data_source = DataSource::kJoint;
  const auto run = run_learning(cfg);
  ASSERT_EQ(run.iterations.size(), 20u);
  EXPECT_LT(run.iterations.back().pos_err_mean, run.iterations.front().pos_err_mean);
}

TEST(RunLearning, IndirectDataDoesNotHelpLowGainPidUnderHighStiction) {
  ExperimentConfig cfg = fast(ExperimentConfig{});
  cfg.controller = Controller::kPid;
  cfg.gain_setting = GainSetting::kLow;
  cfg.stiction_level = Level::kHigh;
  cfg.data_source = DataSource::kIndirect;
  const auto run = run_learning(cfg);
  ASSERT_EQ(run.iterations.size(), 20u);
  const double first = run.iterations.front().pos_err_mean;
  EXPECT_GT(run.iterations.back().pos_err_mean, 0.9 * first);
}

TEST(ConditionSeed, DependsOnConditionAndRepetitionOnly) {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.data_source = DataSource::kIndirect;
  b.controller = Controller::kAdaptive;
  b.gain_setting = GainSetting::kHigh;
  b.epochs = 50;
  EXPECT_EQ(condition_seed(7, a), condition_seed(7, b));
  b.repetition = 1;
  EXPECT_NE(condition_seed(7, a), condition_seed(7, b));
  b = a;
  b.noise_level = NoiseLevel::kHigh;
  EXPECT_NE(condition_seed(7, a), condition_seed(7, b));
  EXPECT_NE(condition_seed(7, a), condition_seed(8, a));
}

TEST(SweepGrid, PaperGridCount) {
  SweepGrid g = SweepGrid::single(ExperimentConfig{});
  g.noise_levels = {NoiseLevel::kLow, NoiseLevel::kMedium, NoiseLevel::kHigh, NoiseLevel::kVeryHigh};
  g.friction_levels = {Level::kMedium, Level::kHigh};
  g.stiction_levels = {Level::kMedium, Level::kHigh};
  g.repetitions = 10;
  g.epochs = {20, 50};
  g.gain_settings = {GainSetting::kLow, GainSetting::kHigh};
  g.controllers = {Controller::kPid, Controller::kAdaptive};
  EXPECT_EQ(g.expand().size(), 1280u);
  g.data_sources = {DataSource::kIndirect, DataSource::kDirect, DataSource::kJoint};
  const auto all = g.expand();
  EXPECT_EQ(all.size(), 3u * 1280u);
  std::set<std::uint64_t> seeds;
  for (const auto& c : all) seeds.insert(c.seed);
  EXPECT_EQ(seeds.size(), 16u * 10u);
}

TEST(SweepGrid, SingleKeepsBaseConfig) {
  ExperimentConfig base;
  base.seed = 99;
  const auto cfgs = SweepGrid::single(base).expand();
  ASSERT_EQ(cfgs.size(), 1u);
  EXPECT_EQ(cfgs[0].noise_level, base.noise_level);
  EXPECT_EQ(cfgs[0].seed, condition_seed(99, base));
}

TEST(RunSweep, RecordsFailuresAndContinues) {
  ExperimentConfig good = fast(quiet_config());
  good.n_iterations = 1;
  good.horizon = 100;
  ExperimentConfig broken = good;
  broken.q_goal = {1.0};
  const auto runs = run_sweep({good, broken, good}, 2);
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_TRUE(runs[0].error.empty());
  EXPECT_FALSE(runs[1].error.empty());
  EXPECT_TRUE(runs[1].aborted);
  EXPECT_TRUE(runs[2].error.empty());
  EXPECT_EQ(runs[0].iterations[0].pos_err_mean, runs[2].iterations[0].pos_err_mean);
  EXPECT_THROW(run_sweep({}), std::invalid_argument);
}

RunMetrics fake_run(DataSource s, std::vector<double> pos, bool abort_last = false) {
  RunMetrics r;
  r.config.data_source = s;
  r.config.n_iterations = static_cast<int>(pos.size());
  for (std::size_t k = 0; k < pos.size(); ++k) {
    IterationMetrics m;
    m.iteration = static_cast<int>(k) + 1;
    m.pos_err_mean = pos[k];
    m.fb_mag_mean = 2.0 * pos[k];
    m.accel_err_mean = 3.0 * pos[k];
    m.aborted = abort_last && k + 1 == pos.size();
    r.iterations.push_back(m);
  }
  return r;
}

TEST(Aggregate, MeanOfValues) {
  const auto agg = aggregate({fake_run(DataSource::kJoint, {1.0}), fake_run(DataSource::kJoint, {2.0}),
                              fake_run(DataSource::kJoint, {3.0})},
                             {"data_source"});
  const auto& row = agg.groups.at("joint").at(0);
  EXPECT_DOUBLE_EQ(row.pos_err.mean, 2.0);
  EXPECT_EQ(row.count, 3);
}

TEST(Aggregate, SingleRunHasZeroStd) {
  const auto agg = aggregate({fake_run(DataSource::kDirect, {0.4, 0.2})}, {"data_source"});
  for (const auto& row : agg.groups.at("direct")) EXPECT_EQ(row.pos_err.std, 0.0);
}

TEST(Aggregate, MatchesTwoPassOracle) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RunMetrics> runs;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> pos;
    for (int k = 0; k < 5; ++k) pos.push_back(u(rng));
    runs.push_back(fake_run(i % 2 ? DataSource::kDirect : DataSource::kIndirect, pos));
  }
  const auto agg = aggregate(runs, {"data_source"});
  ASSERT_EQ(agg.groups.size(), 2u);
  for (const auto& [key, rows] : agg.groups) {
    for (int k = 0; k < 5; ++k) {
      std::vector<double> vals;
      for (const auto& r : runs) {
        if (to_string(r.config.data_source) == key) vals.push_back(r.iterations[k].fb_mag_mean);
      }
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= vals.size();
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      var /= vals.size();
      EXPECT_NEAR(rows[k].fb_mag.mean, mean, 1e-14);
      EXPECT_NEAR(rows[k].fb_mag.std, std::sqrt(var), 1e-14);
    }
  }
}

TEST(Aggregate, ExcludesAbortedIterations) {
  const auto agg = aggregate({fake_run(DataSource::kJoint, {1.0, 1.0}),
                              fake_run(DataSource::kJoint, {3.0, 50.0}, true)},
                             {"data_source"});
  const auto& rows = agg.groups.at("joint");
  EXPECT_EQ(rows[0].count, 2);
  EXPECT_EQ(rows[1].count, 1);
  EXPECT_EQ(rows[1].excluded, 1);
  EXPECT_EQ(rows[1].pos_err.mean, 1.0);
}

TEST(Aggregate, GroupKeys) {
  ExperimentConfig cfg;
  EXPECT_EQ(group_key(cfg, {}), "all");
  EXPECT_EQ(group_key(cfg, {"controller", "gain", "data_source"}), "pid-low-joint");
  EXPECT_EQ(group_key(cfg, {"noise", "epochs"}), "low-20");
  EXPECT_THROW(group_key(cfg, {"colour"}), std::invalid_argument);
  EXPECT_THROW(aggregate({}, {}), std::invalid_argument);
}

}  // namespace
}  // namespace idlearn
