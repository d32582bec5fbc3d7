#include "cftle/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cftle {

void CostWeights::validate(bool allow_zero_q) const {
  if (!(q > 0.0 || (allow_zero_q && q == 0.0)) || !std::isfinite(q)) throw ConfigError("ocp: q must be > 0");
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("ocp: r must be >= 0");
}

void HorizonSpec::validate() const {
  if (!(t_h > 0.0) || !std::isfinite(t_h)) throw ConfigError("ocp: horizon must be > 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("ocp: dt must be > 0");
  if (steps() < 1) throw ConfigError("ocp: horizon shorter than one step");
}

int HorizonSpec::steps() const { return static_cast<int>(std::lround(t_h / dt)); }

void ActuationBounds::validate() const {
  if (!(u_max > 0.0) || !std::isfinite(u_max)) throw ConfigError("ocp: u_max must be > 0");
}

Vec2 ActuationBounds::clamp(Vec2 u) const {
  return {std::clamp(u.x, -u_max, u_max), std::clamp(u.y, -u_max, u_max)};
}

void SolverOptions::validate() const {
  if (!(tol > 0.0)) throw ConfigError("ocp: tol must be > 0");
  if (max_iter < 0) throw ConfigError("ocp: max_iter must be >= 0");
  if (!(initial_step > 0.0)) throw ConfigError("ocp: initial_step must be > 0");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("ocp: backtrack must lie in (0, 1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
    throw ConfigError("ocp: sufficient_decrease must lie in (0, 1)");
  if (!(min_step > 0.0)) throw ConfigError("ocp: min_step must be > 0");
}

void OcpProblem::validate() const {
  if (field == nullptr) throw ConfigError("ocp: no velocity field");
  if (!x0.finite() || !goal.finite() || !std::isfinite(t0)) throw ConfigError("ocp: non-finite input");
  weights.validate(true);  // a single problem is well posed with q = 0
  horizon.validate();
  bounds.validate();
}

namespace {

Vec2 stepZoh(const VelocityField &f, Vec2 x, Vec2 u, double t, double h) {
  const double half = 0.5 * h;
  const Vec2 k1 = f.velocity(x, t) + u;
  const Vec2 k2 = f.velocity(x + k1 * half, t + half) + u;
  const Vec2 k3 = f.velocity(x + k2 * half, t + half) + u;
  const Vec2 k4 = f.velocity(x + k3 * h, t + h) + u;
  return x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

struct StepTangent {
  Mat2 dx;  // d x_{k+1} / d x_k
  Mat2 du;  // d x_{k+1} / d u_k
};

// RK4 step with forward-mode sensitivities of the stages.
Vec2 stepZohTangent(const VelocityField &f, Vec2 x, Vec2 u, double t, double h, StepTangent &tan) {
  const double half = 0.5 * h;
  const Mat2 I = Mat2::identity();
  Vec2 v;
  Mat2 A;

  f.evaluate(x, t, v, A);
  const Vec2 k1 = v + u;
  const Mat2 K1x = A;
  const Mat2 K1u = I;

  const Vec2 x2 = x + k1 * half;
  f.evaluate(x2, t + half, v, A);
  const Vec2 k2 = v + u;
  const Mat2 K2x = A * (I + K1x * half);
  const Mat2 K2u = A * (K1u * half) + I;

  const Vec2 x3 = x + k2 * half;
  f.evaluate(x3, t + half, v, A);
  const Vec2 k3 = v + u;
  const Mat2 K3x = A * (I + K2x * half);
  const Mat2 K3u = A * (K2u * half) + I;

  const Vec2 x4 = x + k3 * h;
  f.evaluate(x4, t + h, v, A);
  const Vec2 k4 = v + u;
  const Mat2 K4x = A * (I + K3x * h);
  const Mat2 K4u = A * (K3u * h) + I;

  const double w = h / 6.0;
  tan.dx = I + (K1x + K2x * 2.0 + K3x * 2.0 + K4x) * w;
  tan.du = (K1u + K2u * 2.0 + K3u * 2.0 + K4u) * w;
  return x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * w;
}

void checkLength(const OcpProblem &p, std::span<const Vec2> controls) {
  if (static_cast<int>(controls.size()) != p.horizon.steps())
    throw ConfigError("ocp: expected " + std::to_string(p.horizon.steps()) + " controls, got " +
                      std::to_string(controls.size()));
}

void checkState(Vec2 x, int k, double t) {
  if (!x.finite()) throw IntegrationError(x, t, "non-finite state at step " + std::to_string(k));
}

double costOnly(const OcpProblem &p, std::span<const Vec2> controls) {
  const double dt = p.horizon.dt;
  const int n = p.horizon.steps();
  double cs = 0.0, cc = 0.0;
  Vec2 x = p.x0;
  for (int k = 0; k < n; ++k) {
    const double t = p.t0 + k * dt;
    cs += dt * p.weights.q * (x - p.goal).squaredNorm();
    cc += dt * p.weights.r * controls[k].squaredNorm();
    x = stepZoh(*p.field, x, controls[k], t, dt);
    checkState(x, k + 1, t + dt);
  }
  return cs + cc;
}

}  // namespace

Rollout rollout(const OcpProblem &p, std::span<const Vec2> controls) {
  p.validate();
  checkLength(p, controls);
  const double dt = p.horizon.dt;
  const int n = p.horizon.steps();
  Rollout out;
  out.states.reserve(n + 1);
  out.states.push_back(p.x0);
  for (int k = 0; k < n; ++k) {
    const Vec2 x = out.states.back();
    const double t = p.t0 + k * dt;
    out.cost_state += dt * p.weights.q * (x - p.goal).squaredNorm();
    out.cost_control += dt * p.weights.r * controls[k].squaredNorm();
    const Vec2 next = stepZoh(*p.field, x, controls[k], t, dt);
    checkState(next, k + 1, t + dt);
    out.states.push_back(next);
  }
  return out;
}

CostGradient costGradient(const OcpProblem &p, std::span<const Vec2> controls) {
  p.validate();
  checkLength(p, controls);
  const double dt = p.horizon.dt;
  const int n = p.horizon.steps();
  CostGradient g;
  std::vector<StepTangent> tangents(n);
  Rollout &ro = g.rollout;
  ro.states.reserve(n + 1);
  ro.states.push_back(p.x0);
  for (int k = 0; k < n; ++k) {
    const Vec2 x = ro.states.back();
    const double t = p.t0 + k * dt;
    ro.cost_state += dt * p.weights.q * (x - p.goal).squaredNorm();
    ro.cost_control += dt * p.weights.r * controls[k].squaredNorm();
    const Vec2 next = stepZohTangent(*p.field, x, controls[k], t, dt, tangents[k]);
    checkState(next, k + 1, t + dt);
    ro.states.push_back(next);
  }

  g.controls.resize(n);
  Vec2 adj{};  // dJ/dx_{k+1}; the final state carries no cost
  for (int k = n - 1; k >= 0; --k) {
    g.controls[k] = controls[k] * (2.0 * p.weights.r * dt) + tangents[k].du.transpose() * adj;
    adj = (ro.states[k] - p.goal) * (2.0 * p.weights.q * dt) + tangents[k].dx.transpose() * adj;
  }
  g.initial_state = adj;
  return g;
}

OcpSolution solveOcp(const OcpProblem &p, const SolverOptions &opt, std::span<const Vec2> warm_start) {
  p.validate();
  opt.validate();
  const int n = p.horizon.steps();
  std::vector<Vec2> u(n);
  if (!warm_start.empty()) {
    checkLength(p, warm_start);
    for (int k = 0; k < n; ++k) u[k] = p.bounds.clamp(warm_start[k]);
  }

  auto projectedResidual = [&](const std::vector<Vec2> &grad) {
    double r = 0.0;
    for (int k = 0; k < n; ++k) {
      const Vec2 d = u[k] - p.bounds.clamp(u[k] - grad[k]);
      r = std::max({r, std::abs(d.x), std::abs(d.y)});
    }
    return r;
  };

  OcpSolution sol;
  CostGradient g = costGradient(p, u);
  double cost = g.rollout.total();
  if (opt.record_trace) sol.cost_trace.push_back(cost);
  std::vector<Vec2> trial(n);
  int it = 0;
  double residual = projectedResidual(g.controls);
  double next_alpha = opt.initial_step;
  for (; it < opt.max_iter && !(residual < opt.tol); ++it) {
    double alpha = next_alpha;
    bool accepted = false;
    while (alpha >= opt.min_step) {
      double slope = 0.0;
      for (int k = 0; k < n; ++k) {
        trial[k] = p.bounds.clamp(u[k] - g.controls[k] * alpha);
        slope += g.controls[k].dot(trial[k] - u[k]);
      }
      const double trial_cost = costOnly(p, trial);
      if (trial_cost <= cost + opt.sufficient_decrease * slope && slope < 0.0) {
        accepted = true;
        break;
      }
      alpha *= opt.backtrack;
    }
    if (!accepted) break;  // line search stalled
    u.swap(trial);
    std::vector<Vec2> previous_gradient = std::move(g.controls);
    g = costGradient(p, u);
    cost = g.rollout.total();
    if (opt.record_trace) sol.cost_trace.push_back(cost);
    residual = projectedResidual(g.controls);
    next_alpha = opt.initial_step;
    if (opt.spectral_step) {
      // Barzilai-Borwein: s = u_new - u_old (trial holds u_old after the swap).
      double ss = 0.0, sy = 0.0;
      for (int k = 0; k < n; ++k) {
        const Vec2 sk = u[k] - trial[k];
        ss += sk.dot(sk);
        sy += sk.dot(g.controls[k] - previous_gradient[k]);
      }
      if (sy > 0.0 && ss > 0.0) next_alpha = std::clamp(ss / sy, 1e-10, 1e10);
    }
  }

  sol.converged = residual < opt.tol;
  sol.iterations = it;
  sol.kkt_residual = residual;
  sol.controls = std::move(u);
  sol.states = std::move(g.rollout.states);
  sol.cost_state = g.rollout.cost_state;
  sol.cost_control = g.rollout.cost_control;
  sol.cost_total = sol.cost_state + sol.cost_control;
  return sol;
}

Vec2 firstAction(const OcpSolution &solution) {
  if (solution.controls.empty()) throw ConfigError("solution has no controls");
  return solution.controls.front();
}

std::vector<Vec2> shiftedControls(std::span<const Vec2> controls, int shift) {
  std::vector<Vec2> out(controls.begin(), controls.end());
  if (out.empty() || shift <= 0) return out;
  const auto n = static_cast<int>(out.size());
  for (int k = 0; k < n; ++k) out[k] = controls[std::min(k + shift, n - 1)];
  return out;
}

}  // namespace cftle
