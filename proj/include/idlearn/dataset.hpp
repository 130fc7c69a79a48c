#pragma once

#include "idlearn/dynamics.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace idlearn {

enum class DataSource { kIndirect, kDirect, kJoint };

const char* to_string(DataSource s);

struct TrainingSample {
  InputPoint x;
  Vec y;
  DataSource source = DataSource::kIndirect;
  int t = 0;  // step index in the originating trace
};

struct Dataset {
  std::vector<TrainingSample> samples;
  DataSource source_label = DataSource::kJoint;
  int iteration = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// One control step of a task execution. x_a is only known once the next
// measurement has been finite-differenced, so the final step of an episode
// carries no x_a.
struct StepTrace {
  int t = 0;
  InputPoint x_d;
  std::optional<InputPoint> x_a;
  Vec tau_total;
  std::optional<Vec> tau_rbd_at_xa;
  Vec tau_fb_applied;
  Vec tau_fb_learner;  // shadow feedback after the exponential filter
  Vec f_prev_at_xd;    // previous error model at x_d, as applied (clamped)
  Vec q_true;
  Vec q_ref;
};

// x <- x_a, y <- tau_total - tau_rbd(x_a); steps without x_a are skipped.
Dataset build_indirect(const std::vector<StepTrace>& trace, int iteration);

// x <- x_d, y <- tau_fb_learner + f_prev(x_d).
Dataset build_direct(const std::vector<StepTrace>& trace, int iteration);

// Union of both sources; throws if the iterations differ.
Dataset build_joint(const Dataset& indirect, const Dataset& direct);

// Appends `next` to `acc`, relabelling the iteration.
void accumulate(Dataset& acc, const Dataset& next);

// Columns: t, source, q[i]..., qd[i]..., qdd[i]..., y[i]...
void write_dataset_csv(const Dataset& data, std::ostream& os);

}  // namespace idlearn
