#include "cftle/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cftle/parallel.hpp"

namespace cftle {

using nlohmann::json;

ScalarField terminalCostFromFlowMap(const VectorField &fm, Vec2 goal) {
  ScalarField out(fm.grid);
  for (std::size_t n = 0; n < fm.values.size(); ++n) {
    if (!fm.valid[n]) {
      out.values[n] = std::nan("");
      out.valid[n] = 0;
      continue;
    }
    out.values[n] = (fm.values[n] - goal).squaredNorm();
  }
  return out;
}

ScalarField terminalCostField(const VelocityField &field, const GridSpec &grid, double t0, double t_advect,
                              Vec2 goal, const StepSpec &spec, unsigned threads) {
  if (!(t_advect > 0.0)) throw ConfigError("terminal cost needs a positive advection time");
  return terminalCostFromFlowMap(flowMapGrid(field, grid, t0, t_advect, spec, threads), goal);
}

ScalarField energyField(const PolicyGrid &policy, const GridSpec &grid, double t) {
  grid.validate();
  ScalarField out(grid);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) out.at(i, j) = interpolate(policy, grid.node(i, j), t).squaredNorm();
  return out;
}

StateErrorResult accumulatedStateErrorField(const VelocityField &field, const GridSpec &grid, double t0,
                                            const CostWeights &weights, Vec2 goal, const HorizonSpec &horizon,
                                            const ActuationBounds &bounds, const SolverOptions &solver,
                                            unsigned threads) {
  grid.validate();
  StateErrorResult res{ScalarField(grid), 0};
  parallelFor(grid.size(), threads, [&](std::size_t n) {
    const int i = static_cast<int>(n % static_cast<std::size_t>(grid.nx));
    const int j = static_cast<int>(n / static_cast<std::size_t>(grid.nx));
    OcpProblem p{&field, grid.node(i, j), t0, weights, goal, horizon, bounds};
    try {
      const OcpSolution sol = solveOcp(p, solver);
      res.field.values[n] = sol.cost_state;
      if (!sol.converged) res.field.valid[n] = 0;
    } catch (const NumericalError &) {
      res.field.values[n] = std::nan("");
      res.field.valid[n] = 0;
    }
  });
  res.non_converged = grid.size() - res.field.validCount();
  return res;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

GradJfReport checkGradJf(const VectorField &fm, Vec2 goal) {
  const GridSpec &g = fm.grid;
  const ScalarField jf = terminalCostFromFlowMap(fm, goal);
  const JacobianField jac = flowMapJacobian(fm);
  GradJfReport r;
  r.residual = ScalarField(g, std::nan(""));
  r.relative_residual = ScalarField(g, std::nan(""));
  std::fill(r.residual.valid.begin(), r.residual.valid.end(), 0);
  std::fill(r.relative_residual.valid.begin(), r.relative_residual.valid.end(), 0);
  std::vector<double> abs_values, rel_values;
  for (int j = 1; j + 1 < g.ny; ++j) {
    for (int i = 1; i + 1 < g.nx; ++i) {
      if (!jac.isValid(i, j)) continue;
      const Vec2 fd{(jf.at(i + 1, j) - jf.at(i - 1, j)) / (g.x(i + 1) - g.x(i - 1)),
                    (jf.at(i, j + 1) - jf.at(i, j - 1)) / (g.y(j + 1) - g.y(j - 1))};
      const Vec2 e = fm.at(i, j) - goal;
      const Vec2 chain = jac.at(i, j).transpose() * (e * 2.0);
      const double res = (fd - chain).norm();
      const std::size_t n = g.index(i, j);
      r.residual.values[n] = res;
      r.residual.valid[n] = 1;
      abs_values.push_back(res);
      const double scale = chain.norm();
      if (scale > 0.0) {
        r.relative_residual.values[n] = res / scale;
        r.relative_residual.valid[n] = 1;
        rel_values.push_back(res / scale);
      } else if (res == 0.0) {
        r.relative_residual.values[n] = 0.0;
        r.relative_residual.valid[n] = 1;
        rel_values.push_back(0.0);
      }
    }
  }
  r.samples = abs_values.size();
  if (!abs_values.empty()) r.max_residual = *std::max_element(abs_values.begin(), abs_values.end());
  r.median_residual = median(abs_values);
  r.median_relative = median(rel_values);
  return r;
}

GradJfReport checkGradJf(const VelocityField &field, const GridSpec &grid, double t0, double t_advect, Vec2 goal,
                         const StepSpec &spec, unsigned threads) {
  if (!(t_advect > 0.0)) throw ConfigError("grad-J_F check needs a positive advection time");
  return checkGradJf(flowMapGrid(field, grid, t0, t_advect, spec, threads), goal);
}

json GradJfReport::summary() const {
  return {{"samples", samples},
          {"max_residual", max_residual},
          {"median_residual", median_residual},
          {"median_relative_residual", median_relative}};
}

double HjbReport::maxAngle() const {
  double m = 0.0;
  for (const auto &s : samples) m = std::max(m, s.angle_deg);
  return m;
}

double HjbReport::maxMagnitudeError() const {
  double m = 0.0;
  for (const auto &s : samples)
    if (!s.ill_conditioned) m = std::max(m, s.magnitude_rel_error);
  return m;
}

double HjbReport::medianFittedScale() const {
  std::vector<double> v;
  for (const auto &s : samples)
    if (!s.ill_conditioned) v.push_back(s.fitted_scale);
  return median(std::move(v));
}

json HjbReport::toJson() const {
  json arr = json::array();
  for (const auto &s : samples) {
    arr.push_back({{"x0", {s.x0.x, s.x0.y}},
                   {"u_star", {s.control.x, s.control.y}},
                   {"value_gradient", {s.value_gradient.x, s.value_gradient.y}},
                   {"predicted", {s.predicted.x, s.predicted.y}},
                   {"angle_deg", s.angle_deg},
                   {"magnitude_rel_error", s.magnitude_rel_error},
                   {"ill_conditioned", s.ill_conditioned},
                   {"fitted_scale", s.fitted_scale}});
  }
  return {{"scale", scale},
          {"samples", arr},
          {"interior_samples", samples.size()},
          {"excluded_saturated", excluded_saturated},
          {"non_converged", non_converged},
          {"max_angle_deg", maxAngle()},
          {"max_magnitude_rel_error", maxMagnitudeError()},
          {"median_fitted_scale", medianFittedScale()},
          {"warning", warning}};
}

HjbReport checkHjbRelation(const VelocityField &field, const std::vector<Vec2> &candidates, double t0,
                           const CostWeights &weights, Vec2 goal, const HorizonSpec &horizon,
                           const ActuationBounds &bounds, const HjbOptions &opt, unsigned threads) {
  if (!(weights.r > 0.0)) throw ConfigError("value-gradient check needs r > 0");
  struct Outcome {
    enum Kind { Interior, Saturated, Failed } kind = Failed;
    HjbSample sample;
  };
  std::vector<Outcome> outcomes(candidates.size());
  parallelFor(candidates.size(), threads, [&](std::size_t n) {
    Outcome &o = outcomes[n];
    OcpProblem p{&field, candidates[n], t0, weights, goal, horizon, bounds};
    try {
      const OcpSolution base = solveOcp(p, opt.solver);
      if (!base.converged) return;
      const Vec2 u = firstAction(base);
      const double limit = opt.interior_fraction * bounds.u_max;
      if (!(std::abs(u.x) < limit && std::abs(u.y) < limit)) {
        o.kind = Outcome::Saturated;
        return;
      }
      auto value = [&](Vec2 x) {
        OcpProblem q = p;
        q.x0 = x;
        const OcpSolution s = solveOcp(q, opt.solver, base.controls);
        if (!s.converged) throw NumericalError("perturbed solve did not converge");
        return s.cost_total;
      };
      const Vec2 x = candidates[n];
      const Vec2 grad{(value({x.x + opt.h, x.y}) - value({x.x - opt.h, x.y})) / (2.0 * opt.h),
                      (value({x.x, x.y + opt.h}) - value({x.x, x.y - opt.h})) / (2.0 * opt.h)};
      HjbSample &s = o.sample;
      s.x0 = x;
      s.control = u;
      s.value_gradient = grad;
      s.predicted = grad * (-opt.scale / weights.r);
      const double nu = u.norm(), np = s.predicted.norm();
      const double cosang = nu > 0.0 && np > 0.0 ? std::clamp(u.dot(s.predicted) / (nu * np), -1.0, 1.0) : 1.0;
      s.angle_deg = std::acos(cosang) * 180.0 / std::numbers::pi;
      s.ill_conditioned = nu < opt.ill_conditioned_below;
      s.magnitude_rel_error = nu > 0.0 ? std::abs(np - nu) / nu : (np == 0.0 ? 0.0 : 1.0);
      const double ng = grad.norm() / weights.r;
      s.fitted_scale = ng > 0.0 ? nu / ng : 0.0;
      o.kind = Outcome::Interior;
    } catch (const NumericalError &) {
      o.kind = Outcome::Failed;
    }
  });
  HjbReport report;
  report.scale = opt.scale;
  for (const auto &o : outcomes) {
    if (o.kind == Outcome::Interior) report.samples.push_back(o.sample);
    else if (o.kind == Outcome::Saturated) ++report.excluded_saturated;
    else ++report.non_converged;
  }
  if (report.samples.empty()) report.warning = "no strictly interior samples found";
  return report;
}

void PatchSpec::validate() const {
  if (!(radius > 0.0)) throw ConfigError("patch radius must be > 0");
  if (n_particles < 1) throw ConfigError("patch needs at least one particle");
  if (!center.finite()) throw ConfigError("patch center must be finite");
}

std::vector<Vec2> sunflowerDisk(Vec2 center, double radius, int n) {
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double r = radius * std::sqrt((k + 0.5) / n);
    const double th = k * golden;
    pts.push_back({center.x + r * std::cos(th), center.y + r * std::sin(th)});
  }
  return pts;
}

std::vector<PatchTrack> advectPatches(const VelocityField &field, const std::vector<PatchSpec> &patches, double t0,
                                      double t_advect, const StepSpec &spec, const std::vector<double> &snapshot_times,
                                      unsigned threads) {
  std::vector<PatchTrack> tracks;
  for (const auto &patch : patches) {
    patch.validate();
    const auto initial = sunflowerDisk(patch.center, patch.radius, patch.n_particles);
    std::vector<std::vector<Vec2>> per_particle(initial.size());
    parallelFor(initial.size(), threads, [&](std::size_t n) {
      per_particle[n] = advectSnapshots(field, initial[n], t0, t_advect, spec, snapshot_times);
    });
    PatchTrack track;
    track.label = patch.label;
    track.positions.assign(snapshot_times.size(), std::vector<Vec2>(initial.size()));
    for (std::size_t s = 0; s < snapshot_times.size(); ++s) {
      Vec2 sum{};
      for (std::size_t n = 0; n < initial.size(); ++n) {
        track.positions[s][n] = per_particle[n][s];
        sum += per_particle[n][s];
      }
      track.centroids.push_back(sum * (1.0 / static_cast<double>(initial.size())));
    }
    tracks.push_back(std::move(track));
  }
  return tracks;
}

double fieldDistance(const ScalarField &a, const ScalarField &b) {
  if (!(a.grid == b.grid)) throw ConfigError("field_distance: grids differ");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < a.values.size(); ++n) {
    if (!a.valid[n] || !b.valid[n]) continue;
    const double d = a.values[n] - b.values[n];
    sum += d * d;
    ++count;
  }
  if (count == 0) throw NumericalError("field_distance: no jointly valid nodes");
  return std::sqrt(sum / static_cast<double>(count));
}

double ridgeCentroidX(const ScalarField &sigma, const std::vector<std::uint8_t> &mask) {
  double wsum = 0.0, xsum = 0.0;
  const GridSpec &g = sigma.grid;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t n = g.index(i, j);
      if (!mask[n] || !sigma.valid[n]) continue;
      wsum += sigma.values[n];
      xsum += sigma.values[n] * g.x(i);
    }
  }
  if (!(wsum > 0.0)) throw NumericalError("ridge centroid: empty or non-positive ridge mask");
  return xsum / wsum;
}

Vec2 dominantStretchDirection(const Mat2 &J) {
  // Eigenvector of the symmetric J^T J for its largest eigenvalue.
  const Mat2 C = J.transpose() * J;
  const double tr = C.a + C.d;
  const double disc = std::sqrt(std::max(0.0, 0.25 * (C.a - C.d) * (C.a - C.d) + C.b * C.b));
  const double lmax = 0.5 * tr + disc;
  Vec2 v = std::abs(C.b) > 1e-300 ? Vec2{C.b, lmax - C.a} : (C.a >= C.d ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0});
  const double n = v.norm();
  return n > 0.0 ? v * (1.0 / n) : Vec2{1.0, 0.0};
}

namespace {

bool pairFits(const DomainBox &box, Vec2 c, Vec2 d, double offset, double radius) {
  for (double s : {-1.0, 1.0}) {
    const Vec2 p = c + d * (s * offset);
    if (p.x - radius < box.x_min || p.x + radius > box.x_max || p.y - radius < box.y_min ||
        p.y + radius > box.y_max)
      return false;
  }
  return true;
}

PatchPair makePair(const FtleResult &ftle, int i, int j, double offset, double radius, int n_particles) {
  PatchPair pair;
  pair.node = ftle.sigma.grid.node(i, j);
  pair.direction = dominantStretchDirection(ftle.jacobian.at(i, j));
  pair.a = {pair.node + pair.direction * offset, radius, n_particles, "a"};
  pair.b = {pair.node - pair.direction * offset, radius, n_particles, "b"};
  return pair;
}

template <typename Better>
PatchPair pickPair(const FtleResult &ftle, double offset, double radius, int n_particles, Better better) {
  const GridSpec &g = ftle.sigma.grid;
  int bi = -1, bj = -1;
  double best = 0.0;
  for (int j = 1; j + 1 < g.ny; ++j) {
    for (int i = 1; i + 1 < g.nx; ++i) {
      if (!ftle.sigma.isValid(i, j) || !ftle.jacobian.isValid(i, j)) continue;
      const double s = ftle.sigma.at(i, j);
      if (bi >= 0 && !better(s, best)) continue;
      const Vec2 d = dominantStretchDirection(ftle.jacobian.at(i, j));
      if (!pairFits(g.domain, g.node(i, j), d, offset, radius)) continue;
      bi = i;
      bj = j;
      best = s;
    }
  }
  if (bi < 0) throw NumericalError("no interior node admits a patch pair inside the domain");
  return makePair(ftle, bi, bj, offset, radius, n_particles);
}

}  // namespace

PatchPair ridgePatchPair(const FtleResult &ftle, double offset, double radius, int n_particles) {
  return pickPair(ftle, offset, radius, n_particles, [](double s, double best) { return s > best; });
}

PatchPair lowSigmaPatchPair(const FtleResult &ftle, double offset, double radius, int n_particles) {
  return pickPair(ftle, offset, radius, n_particles, [](double s, double best) { return s < best; });
}

}  // namespace cftle
