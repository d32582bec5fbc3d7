#include "cftle/odeint.hpp"

#include <cmath>

#include "cftle/parallel.hpp"

namespace cftle {

Scheme parseScheme(std::string_view name) {
  if (name == "rk4" || name == "RK4") return Scheme::RK4;
  if (name == "euler" || name == "Euler") return Scheme::Euler;
  throw ConfigError("unknown integration scheme '" + std::string(name) + "'");
}

std::string_view schemeName(Scheme s) { return s == Scheme::RK4 ? "rk4" : "euler"; }

void StepSpec::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be positive");
}

namespace {

Vec2 checked(Vec2 v, Vec2 x, double t) {
  if (!v.finite()) throw IntegrationError(x, t, "non-finite velocity");
  return v;
}

// Number of full steps and the trailing remainder for a span of |t_advect|.
struct StepPlan {
  long full = 0;
  double remainder = 0.0;
};

StepPlan plan(double span, double dt) {
  StepPlan p;
  const double ratio = span / dt;
  const double rounded = std::round(ratio);
  // Spans that are integer multiples of dt up to rounding take no remainder.
  if (std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio)) {
    p.full = static_cast<long>(rounded);
    return p;
  }
  p.full = static_cast<long>(std::floor(ratio));
  p.remainder = span - static_cast<double>(p.full) * dt;
  return p;
}

template <typename Visit>
Vec2 integrate(const VelocityField &field, Vec2 x, double t0, double t_advect, const StepSpec &spec,
               Visit &&visit) {
  if (t_advect == 0.0 || !std::isfinite(t_advect)) throw ConfigError("advection time must be nonzero");
  spec.validate();
  const double sign = t_advect > 0.0 ? 1.0 : -1.0;
  const StepPlan p = plan(std::abs(t_advect), spec.dt);
  const double h = sign * spec.dt;
  for (long k = 0; k < p.full; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    x = step(field, x, t, h, spec.scheme);
    visit(t + h, x);
  }
  if (p.remainder > 0.0) {
    const double t = t0 + static_cast<double>(p.full) * h;
    x = step(field, x, t, sign * p.remainder, spec.scheme);
    visit(t0 + t_advect, x);
  }
  return x;
}

}  // namespace

Vec2 step(const VelocityField &field, Vec2 x, double t, double dt, Scheme scheme) {
  if (dt == 0.0) throw ConfigError("step size must be nonzero");
  Vec2 next;
  if (scheme == Scheme::Euler) {
    next = x + checked(field.velocity(x, t), x, t) * dt;
  } else {
    const double half = 0.5 * dt;
    const Vec2 k1 = checked(field.velocity(x, t), x, t);
    const Vec2 x2 = x + k1 * half;
    const Vec2 k2 = checked(field.velocity(x2, t + half), x2, t + half);
    const Vec2 x3 = x + k2 * half;
    const Vec2 k3 = checked(field.velocity(x3, t + half), x3, t + half);
    const Vec2 x4 = x + k3 * dt;
    const Vec2 k4 = checked(field.velocity(x4, t + dt), x4, t + dt);
    next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
  }
  if (!next.finite()) throw IntegrationError(x, t, "non-finite state");
  return next;
}

Trajectory advect(const VelocityField &field, Vec2 x0, double t0, double t_advect, const StepSpec &spec) {
  Trajectory traj;
  traj.times.push_back(t0);
  traj.states.push_back(x0);
  integrate(field, x0, t0, t_advect, spec, [&](double t, Vec2 x) {
    traj.times.push_back(t);
    traj.states.push_back(x);
  });
  return traj;
}

Vec2 advectEndpoint(const VelocityField &field, Vec2 x0, double t0, double t_advect, const StepSpec &spec) {
  return integrate(field, x0, t0, t_advect, spec, [](double, Vec2) {});
}

std::vector<Vec2> advectSnapshots(const VelocityField &field, Vec2 x0, double t0, double t_advect,
                                  const StepSpec &spec, const std::vector<double> &snapshot_times) {
  const Trajectory traj = advect(field, x0, t0, t_advect, spec);
  const double sign = t_advect > 0.0 ? 1.0 : -1.0;
  std::vector<Vec2> out;
  out.reserve(snapshot_times.size());
  std::size_t k = 0;
  for (double ts : snapshot_times) {
    const double s = sign * (ts - t0);
    if (s < -1e-12 || s > std::abs(t_advect) + 1e-12)
      throw ConfigError("snapshot time outside the advection window");
    while (k + 1 < traj.times.size() && sign * (traj.times[k + 1] - t0) <= s + 1e-12) ++k;
    if (std::abs(sign * (traj.times[k] - t0) - s) <= 1e-9) {
      out.push_back(traj.states[k]);
      continue;
    }
    // Between stored steps: integrate the short gap from the last state.
    out.push_back(advectEndpoint(field, traj.states[k], traj.times[k], ts - traj.times[k],
                                 StepSpec{std::abs(ts - traj.times[k]), spec.scheme}));
  }
  return out;
}

VectorField flowMapGrid(const VelocityField &field, const GridSpec &grid, double t0, double t_advect,
                        const StepSpec &spec, unsigned threads) {
  grid.validate();
  spec.validate();
  if (t_advect == 0.0 || !std::isfinite(t_advect)) throw ConfigError("advection time must be nonzero");
  VectorField out(grid);
  parallelFor(grid.size(), threads, [&](std::size_t n) {
    const int i = static_cast<int>(n % static_cast<std::size_t>(grid.nx));
    const int j = static_cast<int>(n / static_cast<std::size_t>(grid.nx));
    try {
      out.values[n] = advectEndpoint(field, grid.node(i, j), t0, t_advect, spec);
    } catch (const NumericalError &) {
      out.values[n] = {std::nan(""), std::nan("")};
      out.valid[n] = 0;
    }
  });
  return out;
}

}  // namespace cftle
