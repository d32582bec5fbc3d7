#include "cftle/config.hpp"

#include <cmath>
#include <set>

#include "cftle/binary_io.hpp"
#include "cftle/flowfield.hpp"

namespace cftle {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string &path, const std::string &msg) {
  throw ConfigError("config: " + path + ": " + msg);
}

// Strict object reader: every key must be consumed or listed.
class Section {
 public:
  Section(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  /// Rejects keys that were never looked up.
  void done() const {
    for (const auto &[key, _] : j_.items())
      if (!seen_.count(key)) fail(sub(key), "unknown key");
  }

  bool has(const std::string &key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  std::string sub(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }
  const json &raw(const std::string &key) { return (seen_.insert(key), j_.at(key)); }

  double num(const std::string &key, double fallback) {
    if (!has(key)) return fallback;
    const json &v = j_.at(key);
    if (!v.is_number()) fail(sub(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(sub(key), "must be finite");
    return x;
  }
  int integer(const std::string &key, int fallback) {
    if (!has(key)) return fallback;
    const json &v = j_.at(key);
    if (!v.is_number_integer()) fail(sub(key), "expected an integer");
    return v.get<int>();
  }
  bool boolean(const std::string &key, bool fallback) {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) fail(sub(key), "expected true or false");
    return j_.at(key).get<bool>();
  }
  std::string str(const std::string &key, const std::string &fallback) {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) fail(sub(key), "expected a string");
    return j_.at(key).get<std::string>();
  }
  Vec2 vec2(const std::string &key, Vec2 fallback) {
    if (!has(key)) return fallback;
    return toVec2(j_.at(key), sub(key));
  }
  std::vector<double> numbers(const std::string &key) {
    std::vector<double> out;
    if (!has(key)) return out;
    const json &v = j_.at(key);
    if (!v.is_array()) fail(sub(key), "expected an array of numbers");
    for (const auto &e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) fail(sub(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  static Vec2 toVec2(const json &v, const std::string &path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      fail(path, "expected a two-component array [x, y]");
    const Vec2 p{v[0].get<double>(), v[1].get<double>()};
    if (!p.finite()) fail(path, "must be finite");
    return p;
  }

 private:
  const json &j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void guarded(const std::string &path, F &&f) {
  try {
    f();
  } catch (const ConfigError &e) {
    const std::string msg = e.what();
    if (msg.rfind("config: ", 0) == 0) throw;
    fail(path, msg);
  }
}

GridSpec parseGrid(Section &parent, const std::string &key, GridSpec g) {
  if (!parent.has(key)) return g;
  Section s(parent.raw(key), parent.sub(key));
  g.domain.x_min = s.num("x_min", g.domain.x_min);
  g.domain.x_max = s.num("x_max", g.domain.x_max);
  g.domain.y_min = s.num("y_min", g.domain.y_min);
  g.domain.y_max = s.num("y_max", g.domain.y_max);
  g.nx = s.integer("nx", g.nx);
  g.ny = s.integer("ny", g.ny);
  s.done();
  guarded(parent.sub(key), [&] { g.validate(); });
  return g;
}

}  // namespace

PolicyRequest RunConfig::policyRequest() const {
  PolicyRequest r;
  r.grid = policy_grid;
  r.t_start = policy.t_start;
  r.dt_policy = policy.dt_policy;
  r.n_times = policy.n_times;
  r.weights = ocp.weights;
  r.goal = ocp.goal;
  r.horizon = ocp.horizon;
  r.bounds = ocp.bounds;
  r.solver = ocp.solver;
  r.periodic = policy.periodic;
  r.time_interp = policy.time_interp;
  r.min_spacing = std::nullopt;
  return r;
}

RunConfig parseConfig(const json &doc) {
  RunConfig c;
  {
    Section root(doc, "");
    if (root.has("flow")) {
      c.flow = root.raw("flow");
      guarded("flow", [&] { makeField(c.flow); });
    }
    c.ftle_grid = parseGrid(root, "ftle_grid", c.ftle_grid);
    c.policy_grid = parseGrid(root, "policy_grid", c.policy_grid);

    if (root.has("time")) {
      Section s(root.raw("time"), "time");
      c.time.t0 = s.num("t0", c.time.t0);
      c.time.t_advect = s.num("t_advect", c.time.t_advect);
      c.time.step.dt = s.num("dt", c.time.step.dt);
      if (s.has("scheme")) guarded("time.scheme", [&] { c.time.step.scheme = parseScheme(s.str("scheme", "rk4")); });
      c.time.both_directions = s.boolean("both_directions", c.time.both_directions);
      s.done();
      if (c.time.t_advect == 0.0) fail("time.t_advect", "advection time must be nonzero");
      guarded("time.dt", [&] { c.time.step.validate(); });
    }

    if (root.has("ocp")) {
      Section s(root.raw("ocp"), "ocp");
      c.ocp.weights.q = s.num("q", c.ocp.weights.q);
      c.ocp.weights.r = s.num("r", c.ocp.weights.r);
      if (s.has("rq")) c.ocp.weights.r = s.num("rq", 0.0) * c.ocp.weights.q;
      c.ocp.horizon.t_h = s.num("t_horizon", c.ocp.horizon.t_h);
      c.ocp.horizon.dt = s.num("dt", c.ocp.horizon.dt);
      c.ocp.goal = s.vec2("goal", c.ocp.goal);
      c.ocp.bounds.u_max = s.num("u_max", c.ocp.bounds.u_max);
      c.ocp.solver.tol = s.num("tol", c.ocp.solver.tol);
      c.ocp.solver.max_iter = s.integer("max_iter", c.ocp.solver.max_iter);
      c.ocp.solver.initial_step = s.num("initial_step", c.ocp.solver.initial_step);
      c.ocp.solver.backtrack = s.num("backtrack", c.ocp.solver.backtrack);
      c.ocp.solver.sufficient_decrease = s.num("sufficient_decrease", c.ocp.solver.sufficient_decrease);
      c.ocp.solver.min_step = s.num("min_step", c.ocp.solver.min_step);
      s.done();
      guarded("ocp", [&] {
        c.ocp.weights.validate();
        c.ocp.horizon.validate();
        c.ocp.bounds.validate();
        c.ocp.solver.validate();
      });
    }

    if (root.has("policy")) {
      Section s(root.raw("policy"), "policy");
      c.policy.t_start = s.num("t_start", c.policy.t_start);
      c.policy.dt_policy = s.num("dt_policy", c.policy.dt_policy);
      c.policy.n_times = s.integer("n_times", c.policy.n_times);
      c.policy.periodic = s.boolean("periodic", c.policy.periodic);
      if (s.has("time_interp"))
        guarded("policy.time_interp", [&] { c.policy.time_interp = parseTimeInterp(s.str("time_interp", "")); });
      s.done();
      if (c.policy.n_times < 1) fail("policy.n_times", "must be >= 1");
      if (!(c.policy.dt_policy > 0.0)) fail("policy.dt_policy", "must be > 0");
      if (c.policy.periodic && c.policy.n_times < 2) fail("policy.periodic", "needs n_times >= 2");
    }

    if (root.has("sweep")) {
      Section s(root.raw("sweep"), "sweep");
      c.sweep.rq = s.numbers("rq");
      c.sweep.t_horizon = s.numbers("t_horizon");
      c.sweep.t_advect = s.numbers("t_advect");
      if (s.has("goals")) {
        const json &g = s.raw("goals");
        if (!g.is_array()) fail("sweep.goals", "expected an array of [x, y] pairs");
        for (std::size_t n = 0; n < g.size(); ++n)
          c.sweep.goals.push_back(Section::toVec2(g[n], "sweep.goals[" + std::to_string(n) + "]"));
      }
      s.done();
      for (double v : c.sweep.rq)
        if (!(v >= 0.0)) fail("sweep.rq", "ratios must be >= 0");
      for (double v : c.sweep.t_horizon)
        if (!(v > 0.0)) fail("sweep.t_horizon", "horizons must be > 0");
      for (double v : c.sweep.t_advect)
        if (v == 0.0) fail("sweep.t_advect", "advection time must be nonzero");
    }

    if (root.has("diagnostics")) {
      Section s(root.raw("diagnostics"), "diagnostics");
      auto &d = c.diagnostics;
      d.terminal_cost = s.boolean("terminal_cost", d.terminal_cost);
      d.energy = s.boolean("energy", d.energy);
      d.state_error = s.boolean("state_error", d.state_error);
      d.grad_jf = s.boolean("grad_jf", d.grad_jf);
      d.hjb = s.boolean("hjb", d.hjb);
      d.energy_time = s.num("energy_time", d.energy_time);
      d.hjb_h = s.num("hjb_h", d.hjb_h);
      d.hjb_scale = s.num("hjb_scale", d.hjb_scale);
      d.hjb_nx = s.integer("hjb_nx", d.hjb_nx);
      d.hjb_ny = s.integer("hjb_ny", d.hjb_ny);
      if (s.has("grid")) d.grid = parseGrid(s, "grid", c.policy_grid);
      s.done();
      if (!(d.hjb_h > 0.0)) fail("diagnostics.hjb_h", "must be > 0");
      if (!(d.hjb_scale > 0.0)) fail("diagnostics.hjb_scale", "must be > 0");
      if (d.hjb_nx < 1 || d.hjb_ny < 1) fail("diagnostics.hjb_nx", "sample counts must be >= 1");
    }

    if (root.has("patches")) {
      Section s(root.raw("patches"), "patches");
      auto &p = c.patches;
      if (s.has("list")) {
        const json &l = s.raw("list");
        if (!l.is_array()) fail("patches.list", "expected an array");
        for (std::size_t n = 0; n < l.size(); ++n) {
          const std::string path = "patches.list[" + std::to_string(n) + "]";
          Section e(l[n], path);
          PatchSpec ps;
          ps.center = e.vec2("center", ps.center);
          ps.radius = e.num("radius", ps.radius);
          ps.n_particles = e.integer("n_particles", ps.n_particles);
          ps.label = e.str("label", "patch" + std::to_string(n));
          e.done();
          guarded(path, [&] { ps.validate(); });
          p.patches.push_back(ps);
        }
      }
      if (s.has("snapshot_times")) p.snapshot_times = s.numbers("snapshot_times");
      p.auto_pairs = s.boolean("auto_pairs", p.auto_pairs);
      p.pair_offset = s.num("pair_offset", p.pair_offset);
      p.pair_radius = s.num("pair_radius", p.pair_radius);
      p.pair_particles = s.integer("pair_particles", p.pair_particles);
      s.done();
      if (p.snapshot_times.empty()) fail("patches.snapshot_times", "must not be empty");
      for (std::size_t n = 1; n < p.snapshot_times.size(); ++n)
        if (!(p.snapshot_times[n] > p.snapshot_times[n - 1])) fail("patches.snapshot_times", "must increase");
    }

    if (root.has("render")) {
      Section s(root.raw("render"), "render");
      auto &r = c.render;
      r.colormap = s.str("colormap", r.colormap);
      if (r.colormap != "gray" && r.colormap != "gray_inverted") fail("render.colormap", "use 'gray' or 'gray_inverted'");
      if (s.has("range")) {
        const Vec2 v = s.vec2("range", {});
        if (!(v.x <= v.y)) fail("render.range", "expected [lo, hi] with lo <= hi");
        r.range = std::make_pair(v.x, v.y);
      }
      r.percentile = s.num("percentile", r.percentile);
      if (!(r.percentile > 0.0 && r.percentile < 1.0)) fail("render.percentile", "must lie in (0, 1)");
      r.overlay_ridges = s.boolean("overlay_ridges", r.overlay_ridges);
      r.write_images = s.boolean("write_images", r.write_images);
      s.done();
    }

    c.output_dir = root.str("output_dir", "");
    root.done();
  }
  c.source = doc;
  c.hash = hexDigest(fnv1a(doc.dump()));
  return c;
}

RunConfig loadConfig(const std::filesystem::path &path) {
  const std::string text = readTextFile(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError("config: '" + path.string() + "' is not valid JSON (byte " + std::to_string(e.byte) +
                      "): " + e.what());
  }
  return parseConfig(doc);
}

}  // namespace cftle
