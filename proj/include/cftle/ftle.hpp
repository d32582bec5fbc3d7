#pragma once

#include <vector>

#include "cftle/flowfield.hpp"
#include "cftle/odeint.hpp"
#include "cftle/types.hpp"

namespace cftle {

/// Flow-map Jacobian on the grid (dX/dx, dX/dy, dY/dx, dY/dy).
struct JacobianField {
  GridSpec grid;
  std::vector<Mat2> values;
  std::vector<std::uint8_t> valid;

  Mat2 at(int i, int j) const { return values[grid.index(i, j)]; }
  bool isValid(int i, int j) const { return valid[grid.index(i, j)] != 0; }
};

/// Central differences in the interior, first-order one-sided differences
/// on the boundary. A node is invalid when any node of its stencil is.
JacobianField flowMapJacobian(const VectorField &final_positions);

/// Largest singular value of a 2x2 matrix, computed in closed form without
/// forming J^T J.
double largestSingularValue(const Mat2 &J);

/// sigma = ln(s_max) / |t_advect|. Returns -inf for a rank-zero map.
double sigmaFromJacobian(const Mat2 &J, double t_advect);

struct FtleResult {
  ScalarField sigma;
  VectorField flow_map;
  JacobianField jacobian;
  std::size_t invalid_nodes = 0;
  /// More than 10% of nodes invalid.
  bool quality_warning = false;
};

FtleResult computeFtle(const VelocityField &field, const GridSpec &grid, double t0, double t_advect,
                       const StepSpec &spec, unsigned threads = 1);

/// Sigma field from an already computed flow map.
ScalarField sigmaField(const JacobianField &jac, double t_advect);

/// Linear-interpolation empirical quantile over valid values (q in [0, 1]).
double empiricalQuantile(const ScalarField &field, double q);

/// Nodes with sigma >= the empirical quantile. Invalid nodes are false.
std::vector<std::uint8_t> extractRidges(const ScalarField &sigma, double percentile);

}  // namespace cftle
