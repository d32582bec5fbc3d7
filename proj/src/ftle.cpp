#include "cftle/ftle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cftle {

JacobianField flowMapJacobian(const VectorField &fm) {
  const GridSpec &g = fm.grid;
  g.validate();
  if (fm.values.size() != g.size()) throw ConfigError("flow map does not match its grid");
  JacobianField jac{g, std::vector<Mat2>(g.size()), std::vector<std::uint8_t>(g.size(), 1)};
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int il = std::max(i - 1, 0), ir = std::min(i + 1, g.nx - 1);
      const int jl = std::max(j - 1, 0), jr = std::min(j + 1, g.ny - 1);
      const std::size_t n = g.index(i, j);
      if (!(fm.isValid(il, j) && fm.isValid(ir, j) && fm.isValid(i, jl) && fm.isValid(i, jr) &&
            fm.isValid(i, j))) {
        jac.valid[n] = 0;
        jac.values[n] = {std::nan(""), std::nan(""), std::nan(""), std::nan("")};
        continue;
      }
      const Vec2 dX = fm.at(ir, j) - fm.at(il, j);
      const Vec2 dY = fm.at(i, jr) - fm.at(i, jl);
      const double hx = g.x(ir) - g.x(il);
      const double hy = g.y(jr) - g.y(jl);
      jac.values[n] = {dX.x / hx, dY.x / hy, dX.y / hx, dY.y / hy};
    }
  }
  return jac;
}

double largestSingularValue(const Mat2 &J) {
  // s_max = (|(a+d, c-b)| + |(a-d, b+c)|) / 2
  const double p = std::hypot(J.a + J.d, J.c - J.b);
  const double q = std::hypot(J.a - J.d, J.b + J.c);
  return 0.5 * (p + q);
}

double sigmaFromJacobian(const Mat2 &J, double t_advect) {
  if (t_advect == 0.0) throw ConfigError("advection time must be nonzero");
  const double s = largestSingularValue(J);
  if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(s) / std::abs(t_advect);
}

ScalarField sigmaField(const JacobianField &jac, double t_advect) {
  ScalarField sigma(jac.grid);
  for (std::size_t n = 0; n < jac.values.size(); ++n) {
    if (!jac.valid[n]) {
      sigma.values[n] = std::nan("");
      sigma.valid[n] = 0;
      continue;
    }
    const double s = sigmaFromJacobian(jac.values[n], t_advect);
    sigma.values[n] = s;
    if (!std::isfinite(s)) sigma.valid[n] = 0;
  }
  return sigma;
}

FtleResult computeFtle(const VelocityField &field, const GridSpec &grid, double t0, double t_advect,
                       const StepSpec &spec, unsigned threads) {
  FtleResult r;
  r.flow_map = flowMapGrid(field, grid, t0, t_advect, spec, threads);
  r.jacobian = flowMapJacobian(r.flow_map);
  r.sigma = sigmaField(r.jacobian, t_advect);
  r.invalid_nodes = grid.size() - r.sigma.validCount();
  r.quality_warning = static_cast<double>(r.invalid_nodes) > 0.1 * static_cast<double>(grid.size());
  return r;
}

double empiricalQuantile(const ScalarField &field, double q) {
  std::vector<double> v;
  v.reserve(field.values.size());
  for (std::size_t n = 0; n < field.values.size(); ++n)
    if (field.valid[n]) v.push_back(field.values[n]);
  if (v.empty()) throw NumericalError("quantile of a field without valid nodes");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (v[lo] == v[hi]) return v[lo];
  return v[lo] + frac * (v[hi] - v[lo]);
}

std::vector<std::uint8_t> extractRidges(const ScalarField &sigma, double percentile) {
  if (!(percentile > 0.0 && percentile < 1.0)) throw ConfigError("ridge percentile must lie in (0, 1)");
  const double threshold = empiricalQuantile(sigma, percentile);
  std::vector<std::uint8_t> mask(sigma.values.size(), 0);
  for (std::size_t n = 0; n < mask.size(); ++n)
    mask[n] = sigma.valid[n] && sigma.values[n] >= threshold ? 1 : 0;
  return mask;
}

}  // namespace cftle
