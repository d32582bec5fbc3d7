#include "cftle.h"

#include <memory>
#include <string>

#include "cftle/commands.hpp"
#include "cftle/diagnostics.hpp"
#include "cftle/field_file.hpp"
#include "cftle/flowfield.hpp"
#include "cftle/ftle.hpp"
#include "cftle/policy.hpp"

struct cftle_flow {
  cftle::FieldPtr field;
};

struct cftle_policy {
  std::shared_ptr<const cftle::PolicyGrid> policy;
};

struct cftle_field {
  cftle::ScalarField field;
  cftle::FieldFileMeta meta;
};

namespace {

thread_local std::string g_last_error;

struct InvalidArgument : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
cftle_status guard(F &&body) {
  try {
    body();
    g_last_error.clear();
    return CFTLE_OK;
  } catch (const InvalidArgument &e) {
    g_last_error = e.what();
    return CFTLE_ERR_INVALID_ARGUMENT;
  } catch (const cftle::ConfigError &e) {
    g_last_error = e.what();
    return CFTLE_ERR_CONFIG;
  } catch (const cftle::NumericalError &e) {
    g_last_error = e.what();
    return CFTLE_ERR_NUMERICAL;
  } catch (const cftle::IoError &e) {
    g_last_error = e.what();
    return CFTLE_ERR_IO;
  } catch (const nlohmann::json::exception &e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return CFTLE_ERR_CONFIG;
  } catch (const std::exception &e) {
    g_last_error = e.what();
    return CFTLE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CFTLE_ERR_INTERNAL;
  }
}

template <typename T>
void require(T *p, const char *name) {
  if (p == nullptr) throw InvalidArgument(std::string("null argument: ") + name);
}

cftle::GridSpec toGrid(const cftle_grid *g) {
  require(g, "grid");
  cftle::GridSpec s{{g->x_min, g->x_max, g->y_min, g->y_max}, g->nx, g->ny};
  s.validate();
  return s;
}

}  // namespace

extern "C" {

const char *cftle_version(void) { return cftle::kVersion; }

const char *cftle_last_error(void) { return g_last_error.c_str(); }

cftle_status cftle_flow_create(const char *descriptor_json, cftle_flow **out) {
  return guard([&] {
    require(descriptor_json, "descriptor_json");
    require(out, "out");
    *out = new cftle_flow{cftle::makeField(nlohmann::json::parse(descriptor_json))};
  });
}

cftle_status cftle_flow_velocity(const cftle_flow *flow, double x, double y, double t, double *vx, double *vy) {
  return guard([&] {
    require(flow, "flow");
    require(vx, "vx");
    require(vy, "vy");
    const cftle::Vec2 v = flow->field->velocity({x, y}, t);
    *vx = v.x;
    *vy = v.y;
  });
}

void cftle_flow_free(cftle_flow *flow) { delete flow; }

cftle_status cftle_policy_load(const char *path, cftle_policy **out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cftle_policy{std::make_shared<const cftle::PolicyGrid>(cftle::loadPolicy(path))};
  });
}

cftle_status cftle_policy_save(const cftle_policy *policy, const char *path) {
  return guard([&] {
    require(policy, "policy");
    require(path, "path");
    cftle::savePolicy(*policy->policy, path);
  });
}

cftle_status cftle_policy_generate(const cftle_flow *flow, const cftle_grid *grid, double t_start, double dt_policy,
                                   int n_times, double q, double r, double t_horizon, double dt, double goal_x,
                                   double goal_y, double u_max, int periodic, unsigned threads, cftle_policy **out) {
  return guard([&] {
    require(flow, "flow");
    require(out, "out");
    cftle::PolicyRequest req;
    req.grid = toGrid(grid);
    req.t_start = t_start;
    req.dt_policy = dt_policy;
    req.n_times = n_times;
    req.weights = {q, r};
    req.horizon = {t_horizon, dt};
    req.goal = {goal_x, goal_y};
    req.bounds = {u_max};
    req.periodic = periodic != 0;
    *out = new cftle_policy{
        std::make_shared<const cftle::PolicyGrid>(cftle::generateMpcPolicy(*flow->field, req, threads))};
  });
}

cftle_status cftle_policy_interpolate(const cftle_policy *policy, double x, double y, double t, double *ux,
                                      double *uy) {
  return guard([&] {
    require(policy, "policy");
    require(ux, "ux");
    require(uy, "uy");
    const cftle::Vec2 u = cftle::interpolate(*policy->policy, {x, y}, t);
    *ux = u.x;
    *uy = u.y;
  });
}

cftle_status cftle_policy_dims(const cftle_policy *policy, int *nx, int *ny, int *n_times) {
  return guard([&] {
    require(policy, "policy");
    if (nx) *nx = policy->policy->grid.nx;
    if (ny) *ny = policy->policy->grid.ny;
    if (n_times) *n_times = policy->policy->n_times;
  });
}

void cftle_policy_free(cftle_policy *policy) { delete policy; }

cftle_status cftle_ftle_compute(const cftle_flow *flow, const cftle_policy *policy, const cftle_grid *grid,
                                double t0, double t_advect, double dt, unsigned threads, cftle_field **out) {
  return guard([&] {
    require(flow, "flow");
    require(out, "out");
    cftle::RunConfig cfg;
    cfg.flow = flow->field->descriptor();
    cfg.ftle_grid = toGrid(grid);
    cfg.time.t0 = t0;
    cfg.time.t_advect = t_advect;
    cfg.time.step.dt = dt;
    cftle::ScalarField sigma;
    if (policy == nullptr) {
      sigma = cftle::computeFtle(*flow->field, cfg.ftle_grid, t0, t_advect, cfg.time.step, threads).sigma;
    } else {
      // computeSigma rebuilds the background from its descriptor, which
      // loses nothing for the analytic fields.
      sigma = cftle::computeSigma(cfg, policy->policy, t_advect, threads);
    }
    cftle::FieldFileMeta meta;
    meta.t0 = t0;
    meta.t_advect = t_advect;
    meta.quantity = policy ? "cftle" : "ftle";
    *out = new cftle_field{std::move(sigma), meta};
  });
}

cftle_status cftle_field_load(const char *path, cftle_field **out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    cftle::LoadedField f = cftle::readFieldFile(path);
    *out = new cftle_field{std::move(f.field), std::move(f.meta)};
  });
}

cftle_status cftle_field_save(const cftle_field *field, const char *path) {
  return guard([&] {
    require(field, "field");
    require(path, "path");
    cftle::writeFieldFile(path, field->field, field->meta);
  });
}

cftle_status cftle_field_dims(const cftle_field *field, int *nx, int *ny) {
  return guard([&] {
    require(field, "field");
    if (nx) *nx = field->field.grid.nx;
    if (ny) *ny = field->field.grid.ny;
  });
}

const double *cftle_field_values(const cftle_field *field) {
  return field ? field->field.values.data() : nullptr;
}

cftle_status cftle_field_distance(const cftle_field *a, const cftle_field *b, double *out) {
  return guard([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = cftle::fieldDistance(a->field, b->field);
  });
}

void cftle_field_free(cftle_field *field) { delete field; }

cftle_status cftle_run_command(const char *command, const char *config_path, const char *out_dir,
                               const char *policy_path, unsigned threads, int seedless) {
  return guard([&] {
    require(command, "command");
    require(config_path, "config_path");
    cftle::CommandContext ctx;
    ctx.config = cftle::loadConfig(config_path);
    if (out_dir && *out_dir) ctx.out_dir = out_dir;
    else if (!ctx.config.output_dir.empty()) ctx.out_dir = ctx.config.output_dir;
    ctx.threads = threads;
    ctx.seedless = seedless != 0;
    if (policy_path && *policy_path) ctx.policy_path = policy_path;
    const cftle::CommandResult res = cftle::runCommand(command, ctx);
    if (!res.ok) throw cftle::NumericalError("one or more requested outputs failed; see the run manifest");
  });
}

cftle_status cftle_render(const char *field_path, const char *image_path, const char *mask_path, int has_range,
                          double lo, double hi, const char *colormap) {
  return guard([&] {
    require(field_path, "field_path");
    require(image_path, "image_path");
    cftle::RenderRequest req;
    req.input = field_path;
    req.output = image_path;
    if (mask_path && *mask_path) req.mask = mask_path;
    if (has_range) req.options.range = std::make_pair(lo, hi);
    if (colormap && *colormap) req.options.colormap = colormap;
    cftle::cmdRender(req);
  });
}

}  // extern "C"
