#pragma once

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace idlearn {

using Vec = Eigen::VectorXd;
using Rng = std::mt19937_64;

class SimulationFault : public std::runtime_error {
 public:
  explicit SimulationFault(const std::string& what) : std::runtime_error(what) {}
};

struct JointState {
  Vec q;
  Vec qd;

  static JointState at_rest(const Vec& q);
  int dim() const { return static_cast<int>(q.size()); }
  bool finite() const;
};

enum class AccelKind { kActual, kDesired };

// Regression input x = (q, qd, qdd). The tag records whether qdd is the
// realized (finite-differenced) or the commanded acceleration.
struct InputPoint {
  Vec q;
  Vec qd;
  Vec qdd;
  AccelKind kind = AccelKind::kDesired;

  int dim() const { return static_cast<int>(q.size()); }
  // Stacked (q, qd, qdd), length 3 * dim.
  Vec stacked() const;
};

// Viscous friction plus a Coulomb level that is piecewise constant over a
// grid of position cells. The same breakpoints are used along every axis, so
// there are (region_edges.size() + 1)^dim cells, indexed row-major with the
// first axis most significant.
struct FrictionParams {
  Vec viscous;
  std::vector<double> coulomb_levels;
  std::vector<double> region_edges;

  static FrictionParams none(int dim);
  int cell_of(const Vec& q) const;
  double coulomb_at(const Vec& q) const;
  void validate(int dim) const;
};

struct StictionParams {
  double break_torque = 0.0;
  double v_stick = 1e-3;
};

struct TrueSystem {
  Vec mass;  // diagonal of M
  FrictionParams friction;
  StictionParams stiction;
  double noise_max = 0.0;
  double dt = 1e-3;

  int dim() const { return static_cast<int>(mass.size()); }
  void validate() const;
};

// Approximate rigid-body model tau = M_hat * qdd + h_hat. The point-mass
// system has no gravity or Coriolis terms, so h_hat is a constant vector
// (zero by default).
struct ApproxRbdModel {
  Vec mass_hat;
  Vec h_hat;

  static ApproxRbdModel diagonal(const Vec& mass_hat);
  int dim() const { return static_cast<int>(mass_hat.size()); }
};

struct StepResult {
  JointState next;
  Vec measured_q;
  Vec qdd;  // acceleration realized over the step (true, noise-free)
};

// Advances the true system by one semi-implicit Euler step under torque tau.
// Per axis: a mass moving slower than v_stick whose net drive stays below
// break_torque is held at rest; otherwise
//   qdd = (tau - viscous * qd - coulomb(q) * dir) / m
// where dir is sign(qd), or sign(tau) when starting from (near) rest.
// Coulomb friction never reverses the direction of motion within a step.
// Throws SimulationFault on non-finite or mis-sized torque.
StepResult simulate_step(const TrueSystem& system, const JointState& state,
                         const Vec& tau, Rng& rng);

struct FiniteDiff {
  Vec qd;   // velocity at t
  Vec qdd;  // acceleration realized over the step t-1 -> t
};

FiniteDiff finite_diff(const Vec& q_t, const Vec& q_tm1, const Vec& qd_tm1,
                       double dt);

Vec rbd_torque(const ApproxRbdModel& model, const InputPoint& x);

}  // namespace idlearn
