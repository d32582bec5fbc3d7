#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cftle/config.hpp"
#include "cftle/field_file.hpp"

namespace cftle {

inline constexpr const char *kVersion = "0.3.0";

struct CommandContext {
  RunConfig config;
  std::filesystem::path out_dir = ".";
  unsigned threads = 0;
  bool seedless = false;
  std::optional<std::filesystem::path> policy_path;
};

struct CommandResult {
  nlohmann::json report = nlohmann::json::object();
  std::vector<std::filesystem::path> outputs;
  /// False when a requested output or validation failed without aborting.
  bool ok = true;
};

CommandResult cmdPassiveFtle(const CommandContext &ctx);
CommandResult cmdGenPolicy(const CommandContext &ctx);
CommandResult cmdCftle(const CommandContext &ctx);
CommandResult cmdDiagnostics(const CommandContext &ctx);
CommandResult cmdSweep(const CommandContext &ctx);
CommandResult cmdPatches(const CommandContext &ctx);

struct RenderRequest {
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> mask;
  RenderOptions options;
};

CommandResult cmdRender(const RenderRequest &request);

/// Dispatches by subcommand name and writes `manifest_<command>.json` into
/// the output directory.
CommandResult runCommand(const std::string &name, const CommandContext &ctx);

/// Forward or backward FTLE of the background field, or of the controlled
/// field when a policy is given. Backward controlled fields are evaluated
/// through the time-reversed policy and require a one-period periodic span.
ScalarField computeSigma(const RunConfig &config, const std::shared_ptr<const PolicyGrid> &policy,
                         double t_advect, unsigned threads, FtleResult *detail = nullptr);

/// Filename-safe rendering of a sweep value ("20", "4.5", "0.5_0.5").
std::string formatValue(double v);

}  // namespace cftle
