// Command-line front end. All work goes through the C API in cftle.h.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "cftle.h"

namespace {

int report(cftle_status status) {
  if (status != CFTLE_OK) std::fprintf(stderr, "error: %s\n", cftle_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"cftle: finite-time Lyapunov exponents of passive and controlled agents"};
  app.set_version_flag("--version", std::string(cftle_version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config, out, policy;
  unsigned threads = 0;
  bool seedless = false;
  app.add_option("--config", config, "JSON run configuration");
  app.add_option("--out", out, "output directory (overrides output_dir in the config)");
  app.add_option("--threads", threads, "worker threads, 0 = one per hardware thread");
  app.add_flag("--seedless", seedless, "assert that no nondeterminism is used");

  const char *config_commands[][2] = {
      {"passive-ftle", "FTLE field of the background flow"},
      {"gen-policy", "precompute an MPC policy grid"},
      {"cftle", "controlled FTLE field for a policy file"},
      {"diagnostics", "terminal cost, energy, state error and identity checks"},
      {"sweep", "hyperparameter sweeps of the controlled FTLE"},
      {"patches", "advect patches of agents and track their centroids"},
  };
  for (const auto &c : config_commands) {
    CLI::App *sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--policy", policy, "policy file");
  }

  std::string input, image, mask, colormap = "gray";
  std::vector<double> range;
  CLI::App *render = app.add_subcommand("render", "render a field file as a binary PGM");
  render->add_option("input", input, "field file")->required();
  render->add_option("-o,--output", image, "PGM path (default: input with .pgm)");
  render->add_option("--mask", mask, "ridge-mask field to burn in at full intensity");
  render->add_option("--range", range, "value range lo hi")->expected(2);
  render->add_option("--colormap", colormap, "gray | gray_inverted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(CFTLE_ERR_CONFIG);
  }

  CLI::App *chosen = app.get_subcommands().front();
  if (chosen == render) {
    if (image.empty()) {
      image = input;
      const auto dot = image.rfind('.');
      if (dot != std::string::npos && image.find('/', dot) == std::string::npos) image.resize(dot);
      image += ".pgm";
    }
    return report(cftle_render(input.c_str(), image.c_str(), mask.empty() ? nullptr : mask.c_str(),
                               range.size() == 2, range.size() == 2 ? range[0] : 0.0,
                               range.size() == 2 ? range[1] : 0.0, colormap.c_str()));
  }
  if (config.empty()) {
    std::fprintf(stderr, "error: --config is required for '%s'\n", chosen->get_name().c_str());
    return static_cast<int>(CFTLE_ERR_CONFIG);
  }
  return report(cftle_run_command(chosen->get_name().c_str(), config.c_str(), out.c_str(),
                                  policy.empty() ? nullptr : policy.c_str(), threads, seedless ? 1 : 0));
}
