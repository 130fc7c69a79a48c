#include "idlearn/dynamics.hpp"

#include <cmath>

namespace idlearn {

namespace {

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace

JointState JointState::at_rest(const Vec& q) {
  return JointState{q, Vec::Zero(q.size())};
}

bool JointState::finite() const {
  return q.size() == qd.size() && q.allFinite() && qd.allFinite();
}

Vec InputPoint::stacked() const {
  Vec x(3 * q.size());
  x << q, qd, qdd;
  return x;
}

FrictionParams FrictionParams::none(int dim) {
  return FrictionParams{Vec::Zero(dim), {0.0}, {}};
}

int FrictionParams::cell_of(const Vec& q) const {
  const int per_axis = static_cast<int>(region_edges.size()) + 1;
  int cell = 0;
  for (int i = 0; i < q.size(); ++i) {
    int idx = 0;
    for (double edge : region_edges) {
      if (q[i] >= edge) ++idx;
    }
    cell = cell * per_axis + idx;
  }
  return cell;
}

double FrictionParams::coulomb_at(const Vec& q) const {
  if (coulomb_levels.size() == 1) return coulomb_levels.front();
  return coulomb_levels[static_cast<std::size_t>(cell_of(q))];
}

void FrictionParams::validate(int dim) const {
  if (viscous.size() != dim) {
    throw std::invalid_argument("friction: viscous size does not match dim");
  }
  if ((viscous.array() < 0.0).any()) {
    throw std::invalid_argument("friction: negative viscous coefficient");
  }
  std::size_t cells = 1;
  for (int i = 0; i < dim; ++i) cells *= region_edges.size() + 1;
  // A single level is accepted as a uniform Coulomb term.
  if (coulomb_levels.size() != cells && coulomb_levels.size() != 1) {
    throw std::invalid_argument("friction: expected " + std::to_string(cells) +
                                " coulomb levels, got " +
                                std::to_string(coulomb_levels.size()));
  }
  for (double c : coulomb_levels) {
    if (!(c >= 0.0)) throw std::invalid_argument("friction: negative coulomb level");
  }
}

void TrueSystem::validate() const {
  if (mass.size() == 0 || (mass.array() <= 0.0).any()) {
    throw std::invalid_argument("system: mass entries must be positive");
  }
  friction.validate(dim());
  if (!(stiction.break_torque >= 0.0) || !(stiction.v_stick > 0.0)) {
    throw std::invalid_argument("system: need break_torque >= 0 and v_stick > 0");
  }
  if (!(noise_max >= 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("system: need noise_max >= 0 and dt > 0");
  }
}

ApproxRbdModel ApproxRbdModel::diagonal(const Vec& mass_hat) {
  return ApproxRbdModel{mass_hat, Vec::Zero(mass_hat.size())};
}

StepResult simulate_step(const TrueSystem& system, const JointState& state,
                         const Vec& tau, Rng& rng) {
  const int n = system.dim();
  if (tau.size() != n || state.dim() != n) {
    throw SimulationFault("simulate_step: dimension mismatch");
  }
  if (!tau.allFinite()) {
    throw SimulationFault("simulate_step: non-finite torque");
  }

  const double dt = system.dt;
  const double coulomb = system.friction.coulomb_at(state.q);
  const auto& st = system.stiction;

  StepResult out{JointState{state.q, state.qd}, Vec(n), Vec(n)};
  for (int i = 0; i < n; ++i) {
    const double v = state.qd[i];
    const double drive = tau[i] - system.friction.viscous[i] * v;
    const bool slow = std::abs(v) < st.v_stick;

    double v_next = 0.0;
    if (slow && (std::abs(drive) < st.break_torque ||
                 std::abs(drive) <= coulomb)) {
      v_next = 0.0;  // held
    } else {
      const double dir = slow ? sign(drive) : sign(v);
      const double qdd = (drive - coulomb * dir) / system.mass[i];
      v_next = v + qdd * dt;
      if (!slow && v_next * v < 0.0 && std::abs(tau[i]) <= coulomb) {
        v_next = 0.0;
      }
    }
    out.qdd[i] = (v_next - v) / dt;
    out.next.qd[i] = v_next;
    out.next.q[i] = state.q[i] + v_next * dt;
  }

  out.measured_q = out.next.q;
  if (system.noise_max > 0.0) {
    std::uniform_real_distribution<double> noise(-system.noise_max,
                                                 system.noise_max);
    for (int i = 0; i < n; ++i) out.measured_q[i] += noise(rng);
  }
  return out;
}

FiniteDiff finite_diff(const Vec& q_t, const Vec& q_tm1, const Vec& qd_tm1,
                       double dt) {
  FiniteDiff d;
  d.qd = (q_t - q_tm1) / dt;
  d.qdd = (d.qd - qd_tm1) / dt;
  return d;
}

Vec rbd_torque(const ApproxRbdModel& model, const InputPoint& x) {
  return model.mass_hat.cwiseProduct(x.qdd) + model.h_hat;
}

}  // namespace idlearn
