#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cftle/flowfield.hpp"
#include "cftle/ocp.hpp"
#include "cftle/types.hpp"

namespace cftle {

enum class TimeInterp { Linear, Nearest };

struct PolicyMetadata {
  CostWeights weights;
  HorizonSpec horizon;
  Vec2 goal{0.5, 0.5};
  double u_max = 0.1;
  nlohmann::json flow = nlohmann::json::object();
  std::string generator = "mpc";  ///< "mpc" or "external"
  bool periodic = false;
  TimeInterp time_interp = TimeInterp::Linear;
};

/// Space-time table of controls. Storage is t-major, then y, then x.
struct PolicyGrid {
  GridSpec grid;
  double t_start = 0.0;
  double dt_policy = 0.1;
  int n_times = 1;
  std::vector<Vec2> controls;
  PolicyMetadata meta;

  std::size_t index(int k, int i, int j) const {
    return static_cast<std::size_t>(k) * grid.size() + grid.index(i, j);
  }
  Vec2 at(int k, int i, int j) const { return controls[index(k, i, j)]; }
  Vec2 &at(int k, int i, int j) { return controls[index(k, i, j)]; }
  double span() const { return (n_times - 1) * dt_policy; }
  double time(int k) const { return t_start + k * dt_policy; }

  /// Throws ConfigError on any shape, bound or finiteness violation.
  void validate() const;
};

/// A policy that is zero everywhere (useful as an additive identity).
PolicyGrid zeroPolicy(const GridSpec &grid, double t_start, double dt_policy, int n_times, double u_max);

/// Bilinear in space, linear (or nearest) in time. Positions clamp to the
/// policy box. Times clamp to the sampled span, or wrap modulo the span when
/// the policy is periodic.
Vec2 interpolate(const PolicyGrid &policy, Vec2 x, double t);

/// Background velocity plus interpolated control.
class ControlledField final : public VelocityField {
 public:
  ControlledField(FieldPtr background, std::shared_ptr<const PolicyGrid> policy);
  Vec2 velocity(Vec2 p, double t) const override;
  nlohmann::json descriptor() const override;
  std::optional<double> period() const override { return background_->period(); }

 private:
  FieldPtr background_;
  std::shared_ptr<const PolicyGrid> policy_;
};

/// Reverses the time sequence of a one-period policy: sample k of the result
/// is sample n_times-1-k of the input. The input must span exactly `period`
/// (within 1e-9) and carry the periodic flag.
PolicyGrid reversePolicyPeriodic(const PolicyGrid &policy, double period);

/// Velocity field in reversed time s = t0 - t for backward advection from t0
/// through `background` plus a policy, using the time-reversed policy table:
/// w(x, s) = -v(x, t0 - s) - u_rev(x, 2 t_start - t0 + s).
class ReversedControlledField final : public VelocityField {
 public:
  ReversedControlledField(FieldPtr background, std::shared_ptr<const PolicyGrid> reversed, double t0);
  Vec2 velocity(Vec2 p, double s) const override;
  nlohmann::json descriptor() const override;

 private:
  FieldPtr background_;
  std::shared_ptr<const PolicyGrid> reversed_;
  double t0_;
};

struct PolicyFailure {
  int i = 0;
  int j = 0;
  int k = 0;
  double kkt_residual = 0.0;
};

struct PolicyReport {
  std::size_t solves = 0;
  std::size_t non_converged = 0;
  std::vector<PolicyFailure> failures;
  std::size_t bound_violations = 0;
  double max_abs_control = 0.0;
  double wall_seconds = 0.0;
  long total_iterations = 0;

  nlohmann::json toJson() const;
};

struct PolicyRequest {
  GridSpec grid;
  double t_start = 0.0;
  double dt_policy = 0.1;
  int n_times = 1;
  CostWeights weights;
  Vec2 goal{0.5, 0.5};
  HorizonSpec horizon;
  ActuationBounds bounds;
  SolverOptions solver;
  bool periodic = false;
  TimeInterp time_interp = TimeInterp::Linear;
  /// Spacing of the dense FTLE grid the policy will serve; the policy grid
  /// must not be finer.
  std::optional<double> min_spacing;
};

/// Solves one OCP per (node, time sample) and stores its first action. Each
/// node's solve at t_{k+1} is warm-started from its solution at t_k.
PolicyGrid generateMpcPolicy(const VelocityField &field, const PolicyRequest &request, unsigned threads = 1,
                             PolicyReport *report = nullptr);

nlohmann::json policyHeader(const PolicyGrid &policy);
void savePolicy(const PolicyGrid &policy, const std::filesystem::path &path);
PolicyGrid loadPolicy(const std::filesystem::path &path);

std::string_view timeInterpName(TimeInterp t);
TimeInterp parseTimeInterp(std::string_view name);

}  // namespace cftle
