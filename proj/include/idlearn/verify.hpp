#pragma once

#include "idlearn/experiment.hpp"

#include <string>
#include <vector>

namespace idlearn {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Field-by-field exact comparison of two episode traces.
bool traces_equal(const std::vector<StepTrace>& a, const std::vector<StepTrace>& b);

// Largest relative error between the analytic loss gradient of a randomly
// initialised `spec` network and central differences, over `n_params`
// randomly chosen parameters on an `n_samples` random dataset.
double gradient_check_error(const MlpSpec& spec, int n_samples, int n_params,
                            std::uint64_t seed);

// Oracle checks derived from `cfg`: the model-match identity episode, the
// loss gradient check, seed pairing across data sources and the stiction
// pathology of actual-acceleration data. Each check appears exactly once.
std::vector<CheckResult> run_checks(const ExperimentConfig& cfg);

}  // namespace idlearn
