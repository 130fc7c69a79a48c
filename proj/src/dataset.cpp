#include "idlearn/dataset.hpp"

#include <ostream>
#include <stdexcept>

namespace idlearn {

const char* to_string(DataSource s) {
  switch (s) {
    case DataSource::kIndirect: return "indirect";
    case DataSource::kDirect: return "direct";
    case DataSource::kJoint: return "joint";
  }
  return "?";
}

Dataset build_indirect(const std::vector<StepTrace>& trace, int iteration) {
  Dataset d{{}, DataSource::kIndirect, iteration};
  d.samples.reserve(trace.size());
  for (const auto& step : trace) {
    if (!step.x_a || !step.tau_rbd_at_xa) continue;
    d.samples.push_back(TrainingSample{*step.x_a, step.tau_total - *step.tau_rbd_at_xa,
                                       DataSource::kIndirect, step.t});
  }
  return d;
}

Dataset build_direct(const std::vector<StepTrace>& trace, int iteration) {
  Dataset d{{}, DataSource::kDirect, iteration};
  d.samples.reserve(trace.size());
  for (const auto& step : trace) {
    if (step.tau_fb_learner.size() != step.x_d.dim() ||
        step.f_prev_at_xd.size() != step.x_d.dim()) {
      throw std::invalid_argument("build_direct: trace step " + std::to_string(step.t) +
                                  " is missing learner feedback or prior prediction");
    }
    d.samples.push_back(TrainingSample{step.x_d, step.tau_fb_learner + step.f_prev_at_xd,
                                       DataSource::kDirect, step.t});
  }
  return d;
}

Dataset build_joint(const Dataset& indirect, const Dataset& direct) {
  if (indirect.iteration != direct.iteration) {
    throw std::invalid_argument("build_joint: datasets come from different iterations");
  }
  Dataset d{{}, DataSource::kJoint, direct.iteration};
  d.samples.reserve(indirect.size() + direct.size());
  d.samples.insert(d.samples.end(), direct.samples.begin(), direct.samples.end());
  d.samples.insert(d.samples.end(), indirect.samples.begin(), indirect.samples.end());
  return d;
}

void accumulate(Dataset& acc, const Dataset& next) {
  acc.samples.insert(acc.samples.end(), next.samples.begin(), next.samples.end());
  acc.source_label = next.source_label;
  acc.iteration = next.iteration;
}

void write_dataset_csv(const Dataset& data, std::ostream& os) {
  const int dim = data.empty() ? 0 : data.samples.front().x.dim();
  os << "t,source";
  for (const char* name : {"q", "qd", "qdd", "y"}) {
    for (int i = 0; i < dim; ++i) os << ',' << name << i;
  }
  os << '\n';
  const auto old_precision = os.precision(17);
  for (const auto& s : data.samples) {
    os << s.t << ',' << to_string(s.source);
    for (const Vec* v : {&s.x.q, &s.x.qd, &s.x.qdd, &s.y}) {
      for (int i = 0; i < dim; ++i) os << ',' << (*v)[i];
    }
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace idlearn
