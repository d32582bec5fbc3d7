/* C interface to the cftle engine: FTLE and controlled-FTLE fields of
 * kinematic agents in analytic unsteady flows.
 *
 * All handles are opaque and owned by the caller once returned; release them
 * with the matching *_free function. Functions return a cftle_status and,
 * on failure, leave a message retrievable with cftle_last_error() on the
 * same thread. */
#ifndef CFTLE_H
#define CFTLE_H

#include <stddef.h>

#if defined(_WIN32)
#define CFTLE_API __declspec(dllexport)
#else
#define CFTLE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Numeric values double as CLI exit codes. */
typedef enum {
  CFTLE_OK = 0,
  CFTLE_ERR_INVALID_ARGUMENT = 1,
  CFTLE_ERR_CONFIG = 2,
  CFTLE_ERR_NUMERICAL = 3,
  CFTLE_ERR_IO = 4,
  CFTLE_ERR_INTERNAL = 5
} cftle_status;

typedef struct cftle_flow cftle_flow;
typedef struct cftle_policy cftle_policy;
typedef struct cftle_field cftle_field;

typedef struct {
  double x_min, x_max, y_min, y_max;
  int nx, ny;
} cftle_grid;

CFTLE_API const char *cftle_version(void);
CFTLE_API const char *cftle_last_error(void);

/* ---- flows ---- */

/* descriptor_json: e.g. {"name":"double_gyre","A":0.1,"epsilon":0.25,"omega":0.6283185307179586} */
CFTLE_API cftle_status cftle_flow_create(const char *descriptor_json, cftle_flow **out);
CFTLE_API cftle_status cftle_flow_velocity(const cftle_flow *flow, double x, double y, double t, double *vx,
                                           double *vy);
CFTLE_API void cftle_flow_free(cftle_flow *flow);

/* ---- policies ---- */

CFTLE_API cftle_status cftle_policy_load(const char *path, cftle_policy **out);
CFTLE_API cftle_status cftle_policy_save(const cftle_policy *policy, const char *path);
/* Solves one optimal-control problem per node and time sample. */
CFTLE_API cftle_status cftle_policy_generate(const cftle_flow *flow, const cftle_grid *grid, double t_start,
                                             double dt_policy, int n_times, double q, double r, double t_horizon,
                                             double dt, double goal_x, double goal_y, double u_max, int periodic,
                                             unsigned threads, cftle_policy **out);
CFTLE_API cftle_status cftle_policy_interpolate(const cftle_policy *policy, double x, double y, double t,
                                                double *ux, double *uy);
CFTLE_API cftle_status cftle_policy_dims(const cftle_policy *policy, int *nx, int *ny, int *n_times);
CFTLE_API void cftle_policy_free(cftle_policy *policy);

/* ---- scalar fields ---- */

/* FTLE of `flow`, or of flow + policy when `policy` is non-NULL. A negative
 * t_advect gives the attracting (backward) field. */
CFTLE_API cftle_status cftle_ftle_compute(const cftle_flow *flow, const cftle_policy *policy, const cftle_grid *grid,
                                          double t0, double t_advect, double dt, unsigned threads,
                                          cftle_field **out);
CFTLE_API cftle_status cftle_field_load(const char *path, cftle_field **out);
CFTLE_API cftle_status cftle_field_save(const cftle_field *field, const char *path);
CFTLE_API cftle_status cftle_field_dims(const cftle_field *field, int *nx, int *ny);
/* Borrowed pointer to nx*ny values (x fastest); NaN marks invalid nodes. */
CFTLE_API const double *cftle_field_values(const cftle_field *field);
CFTLE_API cftle_status cftle_field_distance(const cftle_field *a, const cftle_field *b, double *out);
CFTLE_API void cftle_field_free(cftle_field *field);

/* ---- commands ---- */

/* Runs a CLI subcommand ("passive-ftle", "gen-policy", "cftle",
 * "diagnostics", "sweep", "patches") with a JSON config file. policy_path
 * may be NULL. threads = 0 selects one worker per hardware thread. */
CFTLE_API cftle_status cftle_run_command(const char *command, const char *config_path, const char *out_dir,
                                         const char *policy_path, unsigned threads, int seedless);

/* Renders a field file to binary PGM. mask_path may be NULL; has_range = 0
 * uses the field's min..max. */
CFTLE_API cftle_status cftle_render(const char *field_path, const char *image_path, const char *mask_path,
                                    int has_range, double lo, double hi, const char *colormap);

#ifdef __cplusplus
}
#endif

#endif /* CFTLE_H */
