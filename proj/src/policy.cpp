#include "cftle/policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cftle/binary_io.hpp"
#include "cftle/parallel.hpp"

namespace cftle {

using nlohmann::json;

std::string_view timeInterpName(TimeInterp t) { return t == TimeInterp::Linear ? "linear" : "nearest"; }

TimeInterp parseTimeInterp(std::string_view name) {
  if (name == "linear") return TimeInterp::Linear;
  if (name == "nearest") return TimeInterp::Nearest;
  throw ConfigError("unknown time interpolation '" + std::string(name) + "'");
}

void PolicyGrid::validate() const {
  grid.validate();
  if (n_times < 1) throw ConfigError("policy: n_times must be >= 1");
  if (!(dt_policy > 0.0) || !std::isfinite(dt_policy)) throw ConfigError("policy: dt_policy must be > 0");
  if (!std::isfinite(t_start)) throw ConfigError("policy: t_start must be finite");
  if (!(meta.u_max > 0.0)) throw ConfigError("policy: u_max must be > 0");
  const std::size_t expected = static_cast<std::size_t>(n_times) * grid.size();
  if (controls.size() != expected)
    throw ConfigError("policy: control array has " + std::to_string(controls.size()) + " entries, expected " +
                      std::to_string(expected));
  for (std::size_t n = 0; n < controls.size(); ++n) {
    const Vec2 u = controls[n];
    if (!u.finite()) throw ConfigError("policy: non-finite control at entry " + std::to_string(n));
    if (std::abs(u.x) > meta.u_max || std::abs(u.y) > meta.u_max)
      throw ConfigError("policy: bound violation at entry " + std::to_string(n) + " (|u| exceeds u_max = " +
                        std::to_string(meta.u_max) + ")");
  }
}

PolicyGrid zeroPolicy(const GridSpec &grid, double t_start, double dt_policy, int n_times, double u_max) {
  PolicyGrid p;
  p.grid = grid;
  p.t_start = t_start;
  p.dt_policy = dt_policy;
  p.n_times = n_times;
  p.meta.u_max = u_max;
  p.meta.generator = "external";
  p.controls.assign(static_cast<std::size_t>(n_times) * grid.size(), Vec2{});
  p.validate();
  return p;
}

namespace {

// Fractional cell coordinate in [0, n-1], snapped onto nodes within 1e-9.
void locate(double rel, int n, int &cell, double &frac) {
  rel = std::clamp(rel, 0.0, static_cast<double>(n - 1));
  const double r = std::round(rel);
  if (std::abs(rel - r) <= 1e-9) rel = r;
  cell = std::min(static_cast<int>(std::floor(rel)), n - 2);
  if (n == 1) cell = 0;
  frac = n == 1 ? 0.0 : rel - cell;
}

Vec2 lerp(Vec2 a, Vec2 b, double t) {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  return a * (1.0 - t) + b * t;
}

Vec2 bilinear(const PolicyGrid &p, int k, int i, int j, double fx, double fy) {
  const Vec2 bottom = lerp(p.at(k, i, j), p.at(k, i + 1, j), fx);
  const Vec2 top = lerp(p.at(k, i, j + 1), p.at(k, i + 1, j + 1), fx);
  return lerp(bottom, top, fy);
}

}  // namespace

Vec2 interpolate(const PolicyGrid &p, Vec2 x, double t) {
  const GridSpec &g = p.grid;
  const DomainBox &b = g.domain;
  int i, j;
  double fx, fy;
  locate((x.x - b.x_min) * (g.nx - 1) / (b.x_max - b.x_min), g.nx, i, fx);
  locate((x.y - b.y_min) * (g.ny - 1) / (b.y_max - b.y_min), g.ny, j, fy);

  double rel = t - p.t_start;
  if (p.meta.periodic && p.n_times > 1) {
    const double period = p.span();
    rel = std::fmod(rel, period);
    if (rel < 0.0) rel += period;
  }
  Vec2 u;
  if (p.n_times == 1) {
    u = bilinear(p, 0, i, j, fx, fy);
  } else {
    int k;
    double ft;
    locate(rel / p.dt_policy, p.n_times, k, ft);
    if (p.meta.time_interp == TimeInterp::Nearest) {
      u = bilinear(p, ft < 0.5 ? k : k + 1, i, j, fx, fy);
    } else {
      u = lerp(bilinear(p, k, i, j, fx, fy), bilinear(p, k + 1, i, j, fx, fy), ft);
    }
  }
  const double m = p.meta.u_max;
  return {std::clamp(u.x, -m, m), std::clamp(u.y, -m, m)};
}

ControlledField::ControlledField(FieldPtr background, std::shared_ptr<const PolicyGrid> policy)
    : background_(std::move(background)), policy_(std::move(policy)) {
  if (!background_ || !policy_) throw ConfigError("controlled field needs a background field and a policy");
}

Vec2 ControlledField::velocity(Vec2 p, double t) const {
  return background_->velocity(p, t) + interpolate(*policy_, p, t);
}

json ControlledField::descriptor() const {
  return {{"name", "controlled"}, {"background", background_->descriptor()}, {"policy", policyHeader(*policy_)}};
}

PolicyGrid reversePolicyPeriodic(const PolicyGrid &policy, double period) {
  if (!policy.meta.periodic) throw ConfigError("policy reversal requires the periodic extension flag");
  if (std::abs(policy.span() - period) > 1e-9)
    throw ConfigError("policy spans " + std::to_string(policy.span()) + " but reversal needs exactly one period (" +
                      std::to_string(period) + ")");
  PolicyGrid rev = policy;
  const std::size_t plane = policy.grid.size();
  for (int k = 0; k < policy.n_times; ++k) {
    const int src = policy.n_times - 1 - k;
    std::copy_n(policy.controls.begin() + static_cast<std::ptrdiff_t>(src * plane), plane,
                rev.controls.begin() + static_cast<std::ptrdiff_t>(k * plane));
  }
  return rev;
}

ReversedControlledField::ReversedControlledField(FieldPtr background, std::shared_ptr<const PolicyGrid> reversed,
                                                 double t0)
    : background_(std::move(background)), reversed_(std::move(reversed)), t0_(t0) {
  if (!background_ || !reversed_) throw ConfigError("reversed field needs a background field and a policy");
}

Vec2 ReversedControlledField::velocity(Vec2 p, double s) const {
  const Vec2 v = background_->velocity(p, t0_ - s);
  const Vec2 u = interpolate(*reversed_, p, 2.0 * reversed_->t_start - t0_ + s);
  return {-v.x - u.x, -v.y - u.y};
}

json ReversedControlledField::descriptor() const {
  return {{"name", "reversed_controlled"},
          {"background", background_->descriptor()},
          {"t0", t0_},
          {"policy", policyHeader(*reversed_)}};
}

json PolicyReport::toJson() const {
  json f = json::array();
  for (const auto &x : failures) f.push_back({{"i", x.i}, {"j", x.j}, {"k", x.k}, {"kkt_residual", x.kkt_residual}});
  return {{"solves", solves},
          {"non_converged", non_converged},
          {"failures", f},
          {"bound_violations", bound_violations},
          {"max_abs_control", max_abs_control},
          {"total_iterations", total_iterations},
          {"wall_seconds", wall_seconds}};
}

PolicyGrid generateMpcPolicy(const VelocityField &field, const PolicyRequest &req, unsigned threads,
                             PolicyReport *report) {
  const auto start = std::chrono::steady_clock::now();
  req.grid.validate();
  req.weights.validate();
  req.horizon.validate();
  req.bounds.validate();
  req.solver.validate();
  if (req.n_times < 1) throw ConfigError("policy: n_times must be >= 1");
  if (!(req.dt_policy > 0.0)) throw ConfigError("policy: dt_policy must be > 0");
  if (req.min_spacing && (req.grid.dx() < *req.min_spacing - 1e-12 || req.grid.dy() < *req.min_spacing - 1e-12))
    throw ConfigError("policy grid must be coarser than the FTLE grid");
  if (req.periodic) {
    if (req.n_times < 2) throw ConfigError("periodic policy needs at least two time samples");
    if (const auto per = field.period(); per && std::abs((req.n_times - 1) * req.dt_policy - *per) > 1e-9)
      throw ConfigError("periodic policy must span exactly one flow period");
  }

  PolicyGrid policy;
  policy.grid = req.grid;
  policy.t_start = req.t_start;
  policy.dt_policy = req.dt_policy;
  policy.n_times = req.n_times;
  policy.controls.assign(static_cast<std::size_t>(req.n_times) * req.grid.size(), Vec2{});
  policy.meta.weights = req.weights;
  policy.meta.horizon = req.horizon;
  policy.meta.goal = req.goal;
  policy.meta.u_max = req.bounds.u_max;
  policy.meta.flow = field.descriptor();
  policy.meta.generator = "mpc";
  policy.meta.periodic = req.periodic;
  policy.meta.time_interp = req.time_interp;

  const int shift = static_cast<int>(std::lround(req.dt_policy / req.horizon.dt));
  const std::size_t nodes = req.grid.size();
  std::vector<std::vector<PolicyFailure>> node_failures(nodes);
  std::vector<long> node_iterations(nodes, 0);

  parallelFor(nodes, threads, [&](std::size_t n) {
    const int i = static_cast<int>(n % static_cast<std::size_t>(req.grid.nx));
    const int j = static_cast<int>(n / static_cast<std::size_t>(req.grid.nx));
    OcpProblem prob;
    prob.field = &field;
    prob.x0 = req.grid.node(i, j);
    prob.weights = req.weights;
    prob.goal = req.goal;
    prob.horizon = req.horizon;
    prob.bounds = req.bounds;
    std::vector<Vec2> warm;
    for (int k = 0; k < req.n_times; ++k) {
      prob.t0 = policy.time(k);
      OcpSolution sol;
      try {
        sol = solveOcp(prob, req.solver, warm);
      } catch (const NumericalError &) {
        sol = OcpSolution{};
        sol.controls.assign(static_cast<std::size_t>(req.horizon.steps()), Vec2{});
        sol.kkt_residual = std::nan("");
      }
      node_iterations[n] += sol.iterations;
      if (!sol.converged) node_failures[n].push_back({i, j, k, sol.kkt_residual});
      policy.controls[policy.index(k, i, j)] = req.bounds.clamp(firstAction(sol));
      warm = shiftedControls(sol.controls, shift);
    }
  });

  if (report) {
    PolicyReport r;
    r.solves = nodes * static_cast<std::size_t>(req.n_times);
    for (std::size_t n = 0; n < nodes; ++n) {
      r.total_iterations += node_iterations[n];
      for (const auto &f : node_failures[n]) r.failures.push_back(f);
    }
    std::sort(r.failures.begin(), r.failures.end(), [](const PolicyFailure &a, const PolicyFailure &b) {
      return std::tie(a.k, a.j, a.i) < std::tie(b.k, b.j, b.i);
    });
    r.non_converged = r.failures.size();
    for (const Vec2 u : policy.controls) {
      r.max_abs_control = std::max({r.max_abs_control, std::abs(u.x), std::abs(u.y)});
      if (!req.bounds.contains(u)) ++r.bound_violations;
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    *report = std::move(r);
  }
  return policy;
}

json policyHeader(const PolicyGrid &p) {
  const DomainBox &b = p.grid.domain;
  return {{"format_version", 1},
          {"kind", "policy"},
          {"nx", p.grid.nx},
          {"ny", p.grid.ny},
          {"n_times", p.n_times},
          {"domain", {{"x_min", b.x_min}, {"x_max", b.x_max}, {"y_min", b.y_min}, {"y_max", b.y_max}}},
          {"t_start", p.t_start},
          {"dt_policy", p.dt_policy},
          {"u_max", p.meta.u_max},
          {"goal", {p.meta.goal.x, p.meta.goal.y}},
          {"weights", {{"q", p.meta.weights.q}, {"r", p.meta.weights.r}}},
          {"horizon", {{"t_h", p.meta.horizon.t_h}, {"dt", p.meta.horizon.dt}}},
          {"generator", p.meta.generator},
          {"flow", p.meta.flow},
          {"periodic", p.meta.periodic},
          {"time_interp", timeInterpName(p.meta.time_interp)}};
}

void savePolicy(const PolicyGrid &policy, const std::filesystem::path &path) {
  policy.validate();
  std::vector<double> payload;
  payload.reserve(policy.controls.size() * 2);
  for (const Vec2 u : policy.controls) {
    payload.push_back(u.x);
    payload.push_back(u.y);
  }
  writeHeaderedBinary(path, policyHeader(policy), payload);
}

namespace {

template <typename T>
T headerValue(const json &h, const char *key, const std::string &where) {
  if (!h.contains(key)) throw IoError(where + ": header lacks '" + key + "'");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception &) {
    throw IoError(where + ": header field '" + key + "' has the wrong type");
  }
}

}  // namespace

PolicyGrid loadPolicy(const std::filesystem::path &path) {
  const std::string where = "policy '" + path.string() + "'";
  HeaderedPayload file = readHeaderedBinary(path);
  const json &h = file.header;
  if (headerValue<int>(h, "format_version", where) != 1) throw IoError(where + ": unsupported format_version");
  PolicyGrid p;
  p.grid.nx = headerValue<int>(h, "nx", where);
  p.grid.ny = headerValue<int>(h, "ny", where);
  p.n_times = headerValue<int>(h, "n_times", where);
  const json dom = headerValue<json>(h, "domain", where);
  p.grid.domain = {headerValue<double>(dom, "x_min", where), headerValue<double>(dom, "x_max", where),
                   headerValue<double>(dom, "y_min", where), headerValue<double>(dom, "y_max", where)};
  p.t_start = headerValue<double>(h, "t_start", where);
  p.dt_policy = headerValue<double>(h, "dt_policy", where);
  p.meta.u_max = headerValue<double>(h, "u_max", where);
  const auto goal = headerValue<std::vector<double>>(h, "goal", where);
  if (goal.size() != 2) throw IoError(where + ": goal must have two components");
  p.meta.goal = {goal[0], goal[1]};
  const json w = headerValue<json>(h, "weights", where);
  p.meta.weights = {headerValue<double>(w, "q", where), headerValue<double>(w, "r", where)};
  if (h.contains("horizon")) {
    const json hz = h.at("horizon");
    p.meta.horizon = {headerValue<double>(hz, "t_h", where), headerValue<double>(hz, "dt", where)};
  }
  p.meta.generator = headerValue<std::string>(h, "generator", where);
  if (p.meta.generator != "mpc" && p.meta.generator != "external")
    throw IoError(where + ": generator must be 'mpc' or 'external'");
  p.meta.flow = headerValue<json>(h, "flow", where);
  if (h.contains("periodic")) p.meta.periodic = headerValue<bool>(h, "periodic", where);
  if (h.contains("time_interp")) {
    try {
      p.meta.time_interp = parseTimeInterp(headerValue<std::string>(h, "time_interp", where));
    } catch (const ConfigError &e) {
      throw IoError(where + ": " + e.what());
    }
  }
  if (p.grid.nx < 3 || p.grid.ny < 3 || p.n_times < 1) throw IoError(where + ": invalid dimensions in header");

  const std::size_t expected = static_cast<std::size_t>(p.n_times) * p.grid.size() * 2;
  if (file.payload.size() != expected)
    throw IoError(where + ": size mismatch, payload holds " + std::to_string(file.payload.size()) +
                  " values but the header declares " + std::to_string(expected));
  p.controls.resize(expected / 2);
  for (std::size_t n = 0; n < p.controls.size(); ++n) p.controls[n] = {file.payload[2 * n], file.payload[2 * n + 1]};
  try {
    p.validate();
  } catch (const ConfigError &e) {
    throw IoError(where + ": " + e.what());
  }
  return p;
}

}  // namespace cftle
