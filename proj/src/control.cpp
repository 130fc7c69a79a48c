#include "idlearn/control.hpp"

#include <stdexcept>

namespace idlearn {

Vec policy_accel(const AccelPolicy& policy, const JointState& state) {
  return policy.kp * (policy.q_des - state.q) - policy.kd * state.qd;
}

PidState PidState::make(const PidGains& gains) {
  const auto n = gains.kp.size();
  if (gains.ki.size() != n || gains.kd.size() != n) {
    throw std::invalid_argument("pid: gain vectors differ in size");
  }
  if ((gains.kp.array() < 0).any() || (gains.ki.array() < 0).any() ||
      (gains.kd.array() < 0).any()) {
    throw std::invalid_argument("pid: gains must be non-negative");
  }
  PidState s;
  s.gains = gains;
  s.integral = Vec::Zero(n);
  s.last_error = Vec::Zero(n);
  s.derivative = Vec::Zero(n);
  return s;
}

Vec pid_feedback(PidState& pid, const Vec& q_err, double dt,
                 double gain_scale) {
  pid.integral = (pid.integral + q_err * dt)
                     .cwiseMax(-pid.integral_limit)
                     .cwiseMin(pid.integral_limit);
  pid.derivative = exp_filter(pid.derivative, (q_err - pid.last_error) / dt,
                              pid.derivative_filter);
  pid.last_error = q_err;
  return gain_scale * (pid.gains.kp.cwiseProduct(q_err) +
                       pid.gains.ki.cwiseProduct(pid.integral) +
                       pid.gains.kd.cwiseProduct(pid.derivative));
}

AdaptiveFbState AdaptiveFbState::make(int dim, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("adaptive: eta must be > 0");
  AdaptiveFbState s;
  s.offset = Vec::Zero(dim);
  s.error = Vec::Zero(dim);
  s.eta = eta;
  return s;
}

Vec adaptive_feedback(AdaptiveFbState& fb, const Vec& qdd_des,
                      const Vec& qdd_act, double gain_scale) {
  fb.error = exp_filter(fb.error, qdd_des - qdd_act, fb.error_filter);
  fb.offset += gain_scale * fb.eta * fb.error;
  return fb.offset;
}

void GainPair::validate() const {
  if (!(g_low > 0.0) || !(g_high >= g_low)) {
    throw std::invalid_argument("gains: need g_high >= g_low > 0");
  }
}

Vec compose_torque(const Vec& tau_rbd, const Vec& f_err, const Vec& tau_fb,
                   double err_bound) {
  return tau_rbd + f_err.cwiseMax(-err_bound).cwiseMin(err_bound) + tau_fb;
}

Vec exp_filter(const Vec& prev, const Vec& next, double beta) {
  return (1.0 - beta) * prev + beta * next;
}

}  // namespace idlearn
