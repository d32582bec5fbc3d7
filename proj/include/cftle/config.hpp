#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cftle/diagnostics.hpp"
#include "cftle/ocp.hpp"
#include "cftle/odeint.hpp"
#include "cftle/policy.hpp"
#include "cftle/types.hpp"

namespace cftle {

struct TimeConfig {
  double t0 = 0.0;
  double t_advect = 15.0;  ///< signed: negative selects attracting structures
  StepSpec step;
  bool both_directions = false;
};

struct OcpConfig {
  CostWeights weights{1.0, 80.0};
  HorizonSpec horizon{3.0, 0.1};
  Vec2 goal{0.5, 0.5};
  ActuationBounds bounds{0.1};
  SolverOptions solver;
};

struct PolicyConfig {
  double t_start = 0.0;
  double dt_policy = 0.1;
  int n_times = 101;
  bool periodic = true;
  TimeInterp time_interp = TimeInterp::Linear;
};

struct SweepConfig {
  std::vector<double> rq;
  std::vector<double> t_horizon;
  std::vector<Vec2> goals;
  std::vector<double> t_advect;

  bool empty() const { return rq.empty() && t_horizon.empty() && goals.empty() && t_advect.empty(); }
};

struct DiagnosticsConfig {
  bool terminal_cost = true;
  bool energy = true;
  bool state_error = true;
  bool grad_jf = true;
  bool hjb = true;
  double energy_time = 0.0;
  double hjb_h = 1e-4;
  double hjb_scale = 1.0;
  int hjb_nx = 9;
  int hjb_ny = 5;
  std::optional<GridSpec> grid;  ///< state-error grid; defaults to the policy grid
};

struct PatchesConfig {
  std::vector<PatchSpec> patches;
  std::vector<double> snapshot_times{0.0, 3.0, 6.0, 9.0};
  bool auto_pairs = false;
  double pair_offset = 0.1;
  double pair_radius = 0.05;
  int pair_particles = 64;
};

struct RenderConfig {
  std::string colormap = "gray";
  std::optional<std::pair<double, double>> range;
  double percentile = 0.95;
  bool overlay_ridges = true;
  bool write_images = true;
};

struct RunConfig {
  nlohmann::json flow = {{"name", "double_gyre"}};
  GridSpec ftle_grid{{0.0, 2.0, 0.0, 1.0}, 401, 201};
  GridSpec policy_grid{{0.0, 2.0, 0.0, 1.0}, 41, 21};
  TimeConfig time;
  OcpConfig ocp;
  PolicyConfig policy;
  SweepConfig sweep;
  DiagnosticsConfig diagnostics;
  PatchesConfig patches;
  RenderConfig render;
  std::string output_dir;

  /// Canonical JSON of the parsed document and its FNV-1a digest.
  nlohmann::json source;
  std::string hash;

  PolicyRequest policyRequest() const;
};

/// Parses and validates a config document. Unknown keys are errors; messages
/// name the offending key path.
RunConfig parseConfig(const nlohmann::json &doc);
RunConfig loadConfig(const std::filesystem::path &path);

}  // namespace cftle
