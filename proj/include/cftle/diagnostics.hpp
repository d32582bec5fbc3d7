#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cftle/ftle.hpp"
#include "cftle/ocp.hpp"
#include "cftle/odeint.hpp"
#include "cftle/policy.hpp"

namespace cftle {

/// J_F = |x(t0 + t_advect) - goal|^2 per node.
ScalarField terminalCostField(const VelocityField &field, const GridSpec &grid, double t0, double t_advect,
                              Vec2 goal, const StepSpec &spec, unsigned threads = 1);

/// Same quantity from an existing flow map.
ScalarField terminalCostFromFlowMap(const VectorField &flow_map, Vec2 goal);

/// |u(x, t)|^2 of the interpolated policy per node.
ScalarField energyField(const PolicyGrid &policy, const GridSpec &grid, double t);

struct StateErrorResult {
  ScalarField field;  ///< q-weighted state-error integral of the optimal solve
  std::size_t non_converged = 0;
};

/// One OCP solve per node starting at t0; reports the state term of the
/// optimal cost. Non-converged solves are masked.
StateErrorResult accumulatedStateErrorField(const VelocityField &field, const GridSpec &grid, double t0,
                                            const CostWeights &weights, Vec2 goal, const HorizonSpec &horizon,
                                            const ActuationBounds &bounds, const SolverOptions &solver,
                                            unsigned threads = 1);

struct GradJfReport {
  ScalarField residual;           ///< |grad_fd J_F - 2 (x(T) - goal)^T DPhi|, interior only
  ScalarField relative_residual;  ///< residual / |2 (x(T) - goal)^T DPhi|
  double max_residual = 0.0;
  double median_residual = 0.0;
  double median_relative = 0.0;
  std::size_t samples = 0;

  nlohmann::json summary() const;
};

/// Compares the finite-difference gradient of the terminal cost field with
/// the chain-rule form built from the flow-map Jacobian.
GradJfReport checkGradJf(const VelocityField &field, const GridSpec &grid, double t0, double t_advect, Vec2 goal,
                         const StepSpec &spec, unsigned threads = 1);

/// Same comparison on an existing flow map.
GradJfReport checkGradJf(const VectorField &flow_map, Vec2 goal);

struct HjbSample {
  Vec2 x0;
  Vec2 control;         ///< first optimal action u*
  Vec2 value_gradient;  ///< central-difference gradient of the optimal cost
  Vec2 predicted;       ///< -(scale / r) * value_gradient
  double angle_deg = 0.0;
  double magnitude_rel_error = 0.0;
  bool ill_conditioned = false;  ///< |u*| below 1e-4: magnitude not compared
  double fitted_scale = 0.0;     ///< |u*| / |grad V / r|
};

struct HjbOptions {
  double h = 1e-4;
  /// Multiplier in u* = -(scale / r) grad V.
  double scale = 1.0;
  double interior_fraction = 0.9;
  double ill_conditioned_below = 1e-4;
  SolverOptions solver{.tol = 1e-8};
};

struct HjbReport {
  std::vector<HjbSample> samples;
  std::size_t excluded_saturated = 0;
  std::size_t non_converged = 0;
  std::string warning;
  double scale = 1.0;

  double maxAngle() const;
  double maxMagnitudeError() const;
  double medianFittedScale() const;
  nlohmann::json toJson() const;
};

/// Checks u*(x0) against the value-gradient relation at each candidate point.
/// Candidates whose control is not strictly interior are excluded.
HjbReport checkHjbRelation(const VelocityField &field, const std::vector<Vec2> &candidates, double t0,
                           const CostWeights &weights, Vec2 goal, const HorizonSpec &horizon,
                           const ActuationBounds &bounds, const HjbOptions &options = {}, unsigned threads = 1);

struct PatchSpec {
  Vec2 center;
  double radius = 0.05;
  int n_particles = 64;
  std::string label;

  void validate() const;
};

/// Deterministic golden-angle disk layout.
std::vector<Vec2> sunflowerDisk(Vec2 center, double radius, int n);

struct PatchTrack {
  std::string label;
  std::vector<std::vector<Vec2>> positions;  ///< [snapshot][particle]
  std::vector<Vec2> centroids;               ///< per snapshot
};

std::vector<PatchTrack> advectPatches(const VelocityField &field, const std::vector<PatchSpec> &patches, double t0,
                                      double t_advect, const StepSpec &spec, const std::vector<double> &snapshot_times,
                                      unsigned threads = 1);

/// RMS difference over jointly valid nodes. Throws on grid mismatch.
double fieldDistance(const ScalarField &a, const ScalarField &b);

/// Sigma-weighted mean x of the masked nodes.
double ridgeCentroidX(const ScalarField &sigma, const std::vector<std::uint8_t> &mask);

/// A patch pair straddling a node: centers at node +/- offset * direction.
struct PatchPair {
  Vec2 node;
  Vec2 direction;
  PatchSpec a;
  PatchSpec b;
};

/// Pair across the ridge through the interior sigma maximum. The offset
/// direction is the dominant right singular vector of the flow-map Jacobian
/// there (the direction of maximal stretching, normal to the ridge).
PatchPair ridgePatchPair(const FtleResult &ftle, double offset, double radius, int n_particles);

/// Pair around the lowest-sigma interior node whose patches fit in the
/// domain, oriented the same way.
PatchPair lowSigmaPatchPair(const FtleResult &ftle, double offset, double radius, int n_particles);

/// Right singular vector for the largest singular value.
Vec2 dominantStretchDirection(const Mat2 &J);

}  // namespace cftle
