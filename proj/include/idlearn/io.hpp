#pragma once

#include "idlearn/experiment.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace idlearn {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Columns: iteration, pos_err_mean, fb_mag_mean, accel_err_mean, converged,
// steps, aborted.
void write_metrics_csv(const std::vector<IterationMetrics>& metrics, std::ostream& os);
std::vector<IterationMetrics> read_metrics_csv(std::istream& is);

// One row per control step: t, q_true, q_ref, x_d, x_a (empty on the last
// step), tau_total, tau_fb_applied, tau_fb_learner, f_prev_at_xd.
void write_trace_csv(const std::vector<StepTrace>& trace, std::ostream& os);

// Columns: group, iteration, count, excluded, then mean and std of each
// metric.
void write_aggregate_csv(const AggregateResult& agg, std::ostream& os);

// File name for a group's curve file; characters outside [A-Za-z0-9_.-]
// become '_'.
std::string plot_file_name(const std::string& group);

// Writes one curve file per group (iteration, mean and mean+std of the
// position error and feedback magnitude) and returns the paths in group
// order.
std::vector<std::filesystem::path> write_plot_data(const AggregateResult& agg,
                                                   const std::filesystem::path& dir);

// Creates `dir` if needed and checks that a file can be written into it.
void ensure_writable_dir(const std::filesystem::path& dir);

}  // namespace idlearn
