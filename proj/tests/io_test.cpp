#include "idlearn/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace idlearn {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<IterationMetrics> sample_metrics() {
  std::vector<IterationMetrics> out;
  for (int k = 1; k <= 3; ++k) {
    IterationMetrics m;
    m.iteration = k;
    m.pos_err_mean = 0.1 / k + 1e-17;
    m.fb_mag_mean = 1.0 / 3.0 * k;
    m.accel_err_mean = 180.25;
    m.converged = k == 3;
    m.steps_used = 5000 - k;
    m.aborted = false;
    out.push_back(m);
  }
  return out;
}

AggregateResult sample_aggregate() {
  std::vector<RunMetrics> runs;
  for (DataSource s : {DataSource::kIndirect, DataSource::kDirect, DataSource::kJoint}) {
    for (int rep = 0; rep < 2; ++rep) {
      RunMetrics r;
      r.config.data_source = s;
      for (int k = 1; k <= 20; ++k) {
        IterationMetrics m;
        m.iteration = k;
        m.pos_err_mean = 0.2 / k + 0.01 * rep;
        m.fb_mag_mean = 3.0 / k + 0.1 * rep;
        r.iterations.push_back(m);
      }
      runs.push_back(r);
    }
  }
  return aggregate(runs, {"data_source"});
}

TEST(MetricsCsv, RoundTripIsExact) {
  const auto metrics = sample_metrics();
  std::stringstream ss;
  write_metrics_csv(metrics, ss);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')),
            "iteration,pos_err_mean,fb_mag_mean,accel_err_mean,converged,steps,aborted");
  const auto back = read_metrics_csv(ss);
  ASSERT_EQ(back.size(), metrics.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].iteration, metrics[i].iteration);
    EXPECT_EQ(back[i].pos_err_mean, metrics[i].pos_err_mean);
    EXPECT_EQ(back[i].fb_mag_mean, metrics[i].fb_mag_mean);
    EXPECT_EQ(back[i].accel_err_mean, metrics[i].accel_err_mean);
    EXPECT_EQ(back[i].converged, metrics[i].converged);
    EXPECT_EQ(back[i].steps_used, metrics[i].steps_used);
  }
}

TEST(MetricsCsv, AcceptsSixColumnFiles) {
  std::stringstream ss("iteration,pos_err_mean,fb_mag_mean,accel_err_mean,converged,steps\n"
                       "1,0.5,2,3,0,5000\n");
  const auto m = read_metrics_csv(ss);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].pos_err_mean, 0.5);
  EXPECT_FALSE(m[0].aborted);
}

TEST(MetricsCsv, RejectsMalformedInput) {
  std::stringstream no_header("1,2,3\n");
  EXPECT_THROW(read_metrics_csv(no_header), IoError);
  std::stringstream bad_value("iteration,a,b,c,d,e\n1,x,2,3,0,5\n");
  EXPECT_THROW(read_metrics_csv(bad_value), IoError);
  std::stringstream short_row("iteration,a,b,c,d,e\n1,2,3\n");
  EXPECT_THROW(read_metrics_csv(short_row), IoError);
}

TEST(TraceCsv, LastRowHasEmptyActualColumns) {
  StepTrace s;
  s.t = 0;
  s.x_d = InputPoint{Vec::Zero(2), Vec::Zero(2), Vec::Ones(2)};
  s.x_a = InputPoint{Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), AccelKind::kActual};
  s.tau_rbd_at_xa = Vec::Zero(2);
  s.tau_total = s.tau_fb_applied = s.tau_fb_learner = s.f_prev_at_xd = Vec::Ones(2);
  s.q_true = s.q_ref = Vec::Zero(2);
  StepTrace last = s;
  last.t = 1;
  last.x_a.reset();
  std::stringstream ss;
  write_trace_csv({s, last}, ss);
  std::string header, row0, row1;
  std::getline(ss, header);
  std::getline(ss, row0);
  std::getline(ss, row1);
  const auto cols = std::count(header.begin(), header.end(), ',');
  EXPECT_EQ(cols, 12 * 2);
  EXPECT_EQ(std::count(row0.begin(), row0.end(), ','), cols);
  EXPECT_EQ(std::count(row1.begin(), row1.end(), ','), cols);
  EXPECT_NE(row1.find(",,,,,,,"), std::string::npos);
}

TEST(AggregateCsv, OneRowPerGroupIteration) {
  std::stringstream ss;
  write_aggregate_csv(sample_aggregate(), ss);
  int lines = 0;
  std::string line;
  while (std::getline(ss, line)) ++lines;
  EXPECT_EQ(lines, 1 + 3 * 20);
}

TEST(PlotData, ShapeAndUpperBand) {
  const fs::path dir = fresh_dir("idlearn_plot_shape");
  const auto files = write_plot_data(sample_aggregate(), dir);
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[0].filename(), "direct.csv");
  EXPECT_EQ(files[1].filename(), "indirect.csv");
  EXPECT_EQ(files[2].filename(), "joint.csv");
  for (const auto& f : files) {
    std::ifstream is(f);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "iteration,pos_err_mean,pos_err_upper,fb_mag_mean,fb_mag_upper");
    int rows = 0;
    while (std::getline(is, line)) {
      ++rows;
      double it, pm, pu, fm, fu;
      ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &it, &pm, &pu, &fm, &fu), 5);
      EXPECT_GE(pu, pm);
      EXPECT_GE(fu, fm);
    }
    EXPECT_EQ(rows, 20);
  }
}

TEST(PlotData, ByteIdenticalOnRerun) {
  const fs::path a = fresh_dir("idlearn_plot_a");
  const fs::path b = fresh_dir("idlearn_plot_b");
  const auto fa = write_plot_data(sample_aggregate(), a);
  const auto fb = write_plot_data(sample_aggregate(), b);
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_EQ(slurp(fa[i]), slurp(fb[i]));
}

TEST(PlotData, FileNamesAreSanitised) {
  EXPECT_EQ(plot_file_name("pid-low-joint"), "pid-low-joint.csv");
  EXPECT_EQ(plot_file_name("a/b c"), "a_b_c.csv");
}

TEST(EnsureWritableDir, CreatesAndRejects) {
  const fs::path dir = fresh_dir("idlearn_out") / "nested";
  EXPECT_NO_THROW(ensure_writable_dir(dir));
  EXPECT_TRUE(fs::is_directory(dir));
  EXPECT_TRUE(fs::is_empty(dir));
  const fs::path file = fresh_dir("idlearn_file_blocker");
  std::ofstream(file) << "x";
  EXPECT_THROW(ensure_writable_dir(file / "sub"), IoError);
  EXPECT_THROW(write_plot_data(AggregateResult{}, dir), IoError);
}

}  // namespace
}  // namespace idlearn
