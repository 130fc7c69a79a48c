#pragma once

#include "idlearn/dynamics.hpp"

namespace idlearn {

// PD-to-goal acceleration policy: qdd_d = kp * (q_des - q) - kd * qd.
struct AccelPolicy {
  Vec q_des;
  double kp = 25.0;
  double kd = 10.0;
};

Vec policy_accel(const AccelPolicy& policy, const JointState& state);

struct PidGains {
  Vec kp;
  Vec ki;
  Vec kd;
};

struct PidState {
  PidGains gains;
  Vec integral;
  Vec last_error;
  Vec derivative;  // low-passed (e - last_error) / dt
  double integral_limit = 10.0;
  // Smoothing factor of the derivative low-pass; 1 uses the raw difference.
  double derivative_filter = 1.0;

  static PidState make(const PidGains& gains);
};

// Returns gain_scale * (kp*e + ki*integral + kd*d) with
// d = exp_filter(d, (e - last_error)/dt, derivative_filter), and advances the
// integral (clamped to +-integral_limit) and last_error.
Vec pid_feedback(PidState& pid, const Vec& q_err, double dt, double gain_scale);

// Online gradient step on the acceleration error:
//   offset += gain_scale * eta * g,
// where g is (qdd_des - qdd_act) passed through a first-order low-pass with
// smoothing factor error_filter (1 = unfiltered).
struct AdaptiveFbState {
  Vec offset;
  Vec error;  // filtered acceleration error
  double eta = 0.05;
  double error_filter = 1.0;

  static AdaptiveFbState make(int dim, double eta);
};

Vec adaptive_feedback(AdaptiveFbState& fb, const Vec& qdd_des,
                      const Vec& qdd_act, double gain_scale);

// Applied (g_low) and learner-only shadow (g_high) gain scales.
struct GainPair {
  double g_low = 0.1;
  double g_high = 1.0;

  void validate() const;
};

// tau_rbd + clamp(f_err, +-err_bound) + tau_fb.
Vec compose_torque(const Vec& tau_rbd, const Vec& f_err, const Vec& tau_fb,
                   double err_bound);

Vec exp_filter(const Vec& prev, const Vec& next, double beta);

}  // namespace idlearn
