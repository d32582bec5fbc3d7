#pragma once

#include <span>
#include <vector>

#include "cftle/flowfield.hpp"
#include "cftle/types.hpp"

namespace cftle {

/// Q = q I, R = r I.
struct CostWeights {
  double q = 1.0;
  double r = 1.0;

  void validate(bool allow_zero_q = false) const;
  double ratio() const { return r / q; }
};

struct HorizonSpec {
  double t_h = 3.0;
  double dt = 0.1;

  void validate() const;
  int steps() const;
};

struct ActuationBounds {
  double u_max = 0.1;

  void validate() const;
  Vec2 clamp(Vec2 u) const;
  bool contains(Vec2 u) const { return std::abs(u.x) <= u_max && std::abs(u.y) <= u_max; }
};

struct SolverOptions {
  double tol = 1e-6;
  int max_iter = 2000;
  double initial_step = 1.0;
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
  double min_step = 1e-12;
  /// Start each line search from the Barzilai-Borwein step instead of
  /// initial_step (which still seeds the first iteration).
  bool spectral_step = true;
  bool record_trace = false;

  void validate() const;
};

/// One finite-horizon problem for the kinematic agent dx/dt = v(x, t) + u.
struct OcpProblem {
  const VelocityField *field = nullptr;
  Vec2 x0;
  double t0 = 0.0;
  CostWeights weights;
  Vec2 goal{0.5, 0.5};
  HorizonSpec horizon;
  ActuationBounds bounds;

  void validate() const;
};

struct Rollout {
  std::vector<Vec2> states;  ///< n_steps + 1 entries
  double cost_state = 0.0;
  double cost_control = 0.0;
  double total() const { return cost_state + cost_control; }
};

/// RK4 with zero-order-hold controls; left-rectangle cost quadrature
/// sum_k dt [q |x_k - goal|^2 + r |u_k|^2], k = 0..n_steps-1.
Rollout rollout(const OcpProblem &problem, std::span<const Vec2> controls);

struct CostGradient {
  std::vector<Vec2> controls;  ///< dJ/du_k
  Vec2 initial_state;          ///< dJ/dx0 with the controls held fixed
  Rollout rollout;
};

/// Exact gradient of the discretized cost by reverse accumulation through
/// the RK4 steps.
CostGradient costGradient(const OcpProblem &problem, std::span<const Vec2> controls);

struct OcpSolution {
  std::vector<Vec2> controls;
  std::vector<Vec2> states;
  double cost_total = 0.0;
  double cost_state = 0.0;
  double cost_control = 0.0;
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  std::vector<double> cost_trace;  ///< accepted costs, when recorded
};

/// Projected gradient descent with Armijo backtracking. Starts from
/// `warm_start` (clamped to the bounds) when given, else from zero controls.
OcpSolution solveOcp(const OcpProblem &problem, const SolverOptions &options,
                     std::span<const Vec2> warm_start = {});

Vec2 firstAction(const OcpSolution &solution);

/// Shifts a solution forward by `shift` steps for warm-starting a later
/// problem, repeating the last control to keep the length.
std::vector<Vec2> shiftedControls(std::span<const Vec2> controls, int shift);

}  // namespace cftle
