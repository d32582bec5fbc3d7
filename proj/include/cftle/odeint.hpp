#pragma once

#include <string_view>
#include <vector>

#include "cftle/flowfield.hpp"
#include "cftle/types.hpp"

namespace cftle {

enum class Scheme { RK4, Euler };

Scheme parseScheme(std::string_view name);
std::string_view schemeName(Scheme s);

struct StepSpec {
  double dt = 0.1;  ///< step magnitude; the sign comes from the advection time
  Scheme scheme = Scheme::RK4;

  void validate() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec2> states;
  std::vector<Vec2> controls;  ///< optional, one per step when recorded

  Vec2 final() const { return states.back(); }
};

/// One step of dx/dt = field(x, t). Throws IntegrationError on a non-finite
/// velocity or result.
Vec2 step(const VelocityField &field, Vec2 x, double t, double dt_signed, Scheme scheme);

/// Integrates from t0 to t0 + t_advect. A trailing partial step covers any
/// remainder of |t_advect| not divisible by dt.
Trajectory advect(const VelocityField &field, Vec2 x0, double t0, double t_advect, const StepSpec &spec);

/// Endpoint of advect() without storing the path. Performs exactly the same
/// arithmetic as advect().
Vec2 advectEndpoint(const VelocityField &field, Vec2 x0, double t0, double t_advect, const StepSpec &spec);

/// Positions at the requested absolute times (must be monotone in the
/// integration direction and lie inside [t0, t0 + t_advect]).
std::vector<Vec2> advectSnapshots(const VelocityField &field, Vec2 x0, double t0, double t_advect,
                                  const StepSpec &spec, const std::vector<double> &snapshot_times);

/// Flow map sampled on a grid: node (i, j) -> x(t0 + t_advect). Nodes whose
/// integration fails are masked invalid.
VectorField flowMapGrid(const VelocityField &field, const GridSpec &grid, double t0, double t_advect,
                        const StepSpec &spec, unsigned threads = 1);

}  // namespace cftle
