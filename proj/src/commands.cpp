#include "cftle/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cftle/binary_io.hpp"
#include "cftle/diagnostics.hpp"
#include "cftle/ftle.hpp"
#include "cftle/parallel.hpp"
#include "cftle/policy.hpp"

namespace cftle {

namespace fs = std::filesystem;
using nlohmann::json;

std::string formatValue(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

namespace {

std::string directionName(double t_advect) { return t_advect > 0.0 ? "forward" : "backward"; }

FieldFileMeta metaFor(const RunConfig &c, double t_advect, const std::string &quantity) {
  FieldFileMeta m;
  m.t0 = c.time.t0;
  m.t_advect = t_advect;
  m.quantity = quantity;
  m.config_hash = c.hash;
  return m;
}

void writeField(CommandResult &res, const fs::path &path, const ScalarField &f, const FieldFileMeta &meta) {
  writeFieldFile(path, f, meta);
  res.outputs.push_back(path);
}

void writeImage(CommandResult &res, const RunConfig &c, const fs::path &path, const ScalarField &f,
                const std::vector<std::uint8_t> *overlay) {
  if (!c.render.write_images) return;
  RenderOptions opt;
  opt.range = c.render.range;
  opt.colormap = c.render.colormap;
  opt.overlay = c.render.overlay_ridges ? overlay : nullptr;
  writeFileAtomic(path, renderPgm(f, opt));
  res.outputs.push_back(path);
}

std::shared_ptr<const PolicyGrid> loadMatchingPolicy(const CommandContext &ctx) {
  if (!ctx.policy_path) throw ConfigError("this command needs --policy <path>");
  auto policy = std::make_shared<const PolicyGrid>(loadPolicy(*ctx.policy_path));
  const json configured = makeField(ctx.config.flow)->descriptor();
  if (!sameDescriptor(policy->meta.flow, configured))
    throw ConfigError("flow/policy mismatch: configured flow " + configured.dump() + " but policy was built for " +
                      policy->meta.flow.dump());
  return policy;
}

void ridgeOutputs(CommandResult &res, const RunConfig &c, const fs::path &dir, const std::string &stem,
                  const ScalarField &sigma, double t_advect) {
  const auto mask = extractRidges(sigma, c.render.percentile);
  writeField(res, dir / (stem + "_ridges.field"), maskToField(sigma.grid, mask), metaFor(c, t_advect, "ridge_mask"));
  writeImage(res, c, dir / (stem + ".pgm"), sigma, &mask);
}

json sigmaSummary(const ScalarField &s) {
  double lo = INFINITY, hi = -INFINITY, sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    if (!s.valid[k]) continue;
    lo = std::min(lo, s.values[k]);
    hi = std::max(hi, s.values[k]);
    sum += s.values[k];
    ++n;
  }
  return {{"min", lo}, {"max", hi}, {"mean", n ? sum / n : NAN}, {"valid_nodes", n},
          {"invalid_nodes", s.values.size() - n}, {"quality_warning", s.values.size() - n > s.values.size() / 10}};
}

}  // namespace

ScalarField computeSigma(const RunConfig &c, const std::shared_ptr<const PolicyGrid> &policy, double t_advect,
                         unsigned threads, FtleResult *detail) {
  const FieldPtr background = makeField(c.flow);
  FtleResult r;
  if (!policy) {
    r = computeFtle(*background, c.ftle_grid, c.time.t0, t_advect, c.time.step, threads);
  } else if (t_advect > 0.0) {
    ControlledField controlled(background, policy);
    r = computeFtle(controlled, c.ftle_grid, c.time.t0, t_advect, c.time.step, threads);
  } else {
    if (!policy->meta.periodic)
      throw ConfigError("backward cFTLE needs a policy with the periodic extension flag spanning one period");
    double period = policy->span();
    if (const auto p = background->period()) period = *p;
    auto reversed = std::make_shared<const PolicyGrid>(reversePolicyPeriodic(*policy, period));
    ReversedControlledField rev(background, reversed, c.time.t0);
    // Forward in reversed time s = t0 - t; same stretching as the backward map.
    r = computeFtle(rev, c.ftle_grid, 0.0, -t_advect, c.time.step, threads);
  }
  ScalarField sigma = r.sigma;
  if (detail) *detail = std::move(r);
  return sigma;
}

CommandResult cmdPassiveFtle(const CommandContext &ctx) {
  const RunConfig &c = ctx.config;
  CommandResult res;
  std::vector<double> times{c.time.t_advect};
  if (c.time.both_directions) times.push_back(-c.time.t_advect);
  for (double ta : times) {
    const std::string stem = "ftle_" + directionName(ta);
    const ScalarField sigma = computeSigma(c, nullptr, ta, ctx.threads);
    writeField(res, ctx.out_dir / (stem + ".field"), sigma, metaFor(c, ta, "ftle"));
    ridgeOutputs(res, c, ctx.out_dir, stem, sigma, ta);
    res.report[stem] = sigmaSummary(sigma);
  }
  return res;
}

CommandResult cmdGenPolicy(const CommandContext &ctx) {
  const RunConfig &c = ctx.config;
  CommandResult res;
  if (c.policy_grid.dx() < c.ftle_grid.dx() - 1e-12 || c.policy_grid.dy() < c.ftle_grid.dy() - 1e-12)
    throw ConfigError("config: policy_grid: spacing must not be finer than ftle_grid");
  const FieldPtr field = makeField(c.flow);
  PolicyReport report;
  const PolicyGrid policy = generateMpcPolicy(*field, c.policyRequest(), ctx.threads, &report);
  const fs::path path = ctx.out_dir / "policy.policy";
  savePolicy(policy, path);
  res.outputs.push_back(path);
  res.report["policy"] = report.toJson();
  res.report["policy"]["path"] = path.string();
  writeFileAtomic(ctx.out_dir / "gen_policy_report.json", res.report.dump(2));
  res.outputs.push_back(ctx.out_dir / "gen_policy_report.json");
  return res;
}

CommandResult cmdCftle(const CommandContext &ctx) {
  const RunConfig &c = ctx.config;
  CommandResult res;
  const auto policy = loadMatchingPolicy(ctx);
  std::vector<double> times{c.time.t_advect};
  if (c.time.both_directions) times.push_back(-c.time.t_advect);
  for (double ta : times) {
    const std::string stem = "cftle_" + directionName(ta);
    const ScalarField sigma = computeSigma(c, policy, ta, ctx.threads);
    writeField(res, ctx.out_dir / (stem + ".field"), sigma, metaFor(c, ta, "cftle"));
    ridgeOutputs(res, c, ctx.out_dir, stem, sigma, ta);
    res.report[stem] = sigmaSummary(sigma);
  }
  return res;
}

CommandResult cmdDiagnostics(const CommandContext &ctx) {
  const RunConfig &c = ctx.config;
  const auto &d = c.diagnostics;
  CommandResult res;
  const FieldPtr background = makeField(c.flow);
  std::shared_ptr<const PolicyGrid> policy;
  if (ctx.policy_path) policy = loadMatchingPolicy(ctx);
  FieldPtr agent_field = background;
  if (policy) agent_field = std::make_shared<ControlledField>(background, policy);

  auto attempt = [&](const std::string &name, auto &&body) {
    try {
      body();
    } catch (const NumericalError &e) {
      res.ok = false;
      res.report[name] = {{"failed", true}, {"error", e.what()}};
    }
  };

  if (d.terminal_cost || d.grad_jf) {
    if (!(c.time.t_advect > 0.0)) throw ConfigError("config: time.t_advect: diagnostics need a positive advection time");
    attempt("terminal_cost", [&] {
      const VectorField fm = flowMapGrid(*agent_field, c.ftle_grid, c.time.t0, c.time.t_advect, c.time.step, ctx.threads);
      if (d.terminal_cost) {
        const ScalarField jf = terminalCostFromFlowMap(fm, c.ocp.goal);
        writeField(res, ctx.out_dir / "terminal_cost.field", jf, metaFor(c, c.time.t_advect, "terminal_cost"));
        writeImage(res, c, ctx.out_dir / "terminal_cost.pgm", jf, nullptr);
        res.report["terminal_cost"] = sigmaSummary(jf);
      }
      if (d.grad_jf) {
        const GradJfReport g = checkGradJf(fm, c.ocp.goal);
        writeField(res, ctx.out_dir / "grad_jf_residual.field", g.residual,
                   metaFor(c, c.time.t_advect, "grad_jf_residual"));
        res.report["grad_jf"] = g.summary();
      }
    });
  }
  if (d.energy) {
    if (policy) {
      const ScalarField e = energyField(*policy, c.ftle_grid, d.energy_time);
      FieldFileMeta m = metaFor(c, c.time.t_advect, "energy");
      m.extra = {{"time", d.energy_time}};
      writeField(res, ctx.out_dir / "energy.field", e, m);
      writeImage(res, c, ctx.out_dir / "energy.pgm", e, nullptr);
      res.report["energy"] = sigmaSummary(e);
    } else {
      res.report["energy"] = {{"skipped", "no policy supplied"}};
    }
  }
  if (d.state_error) {
    attempt("state_error", [&] {
      const GridSpec grid = d.grid.value_or(c.policy_grid);
      const StateErrorResult se = accumulatedStateErrorField(*background, grid, c.time.t0, c.ocp.weights, c.ocp.goal,
                                                             c.ocp.horizon, c.ocp.bounds, c.ocp.solver, ctx.threads);
      writeField(res, ctx.out_dir / "state_error.field", se.field, metaFor(c, c.ocp.horizon.t_h, "state_error"));
      writeImage(res, c, ctx.out_dir / "state_error.pgm", se.field, nullptr);
      res.report["state_error"] = sigmaSummary(se.field);
      res.report["state_error"]["non_converged"] = se.non_converged;
    });
  }
  if (d.hjb) {
    attempt("hjb", [&] {
      const DomainBox &b = c.ftle_grid.domain;
      std::vector<Vec2> candidates;
      for (int j = 0; j < d.hjb_ny; ++j)
        for (int i = 0; i < d.hjb_nx; ++i)
          candidates.push_back({b.x_min + (b.x_max - b.x_min) * (i + 1) / (d.hjb_nx + 1),
                                b.y_min + (b.y_max - b.y_min) * (j + 1) / (d.hjb_ny + 1)});
      HjbOptions opt;
      opt.h = d.hjb_h;
      opt.scale = d.hjb_scale;
      const HjbReport h = checkHjbRelation(*background, candidates, c.time.t0, c.ocp.weights, c.ocp.goal,
                                           c.ocp.horizon, c.ocp.bounds, opt, ctx.threads);
      res.report["hjb"] = h.toJson();
    });
  }
  writeFileAtomic(ctx.out_dir / "diagnostics_report.json", res.report.dump(2));
  res.outputs.push_back(ctx.out_dir / "diagnostics_report.json");
  return res;
}

CommandResult cmdSweep(const CommandContext &ctx) {
  const RunConfig &base = ctx.config;
  if (base.sweep.empty()) throw ConfigError("config: sweep: at least one sweep list must be nonempty");
  CommandResult res;
  const FieldPtr background = makeField(base.flow);
  json index = json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "param,value,file,distance_to_passive,ridge_centroid_x,non_converged,status\n";

  std::map<double, ScalarField> passive;
  auto passiveFor = [&](double ta) -> const ScalarField & {
    auto it = passive.find(ta);
    if (it != passive.end()) return it->second;
    ScalarField s = computeSigma(base, nullptr, ta, ctx.threads);
    const fs::path p = ctx.out_dir / ("ftle__t_advect=" + formatValue(ta) + ".field");
    writeField(res, p, s, metaFor(base, ta, "ftle"));
    return passive.emplace(ta, std::move(s)).first->second;
  };

  auto runItem = [&](const std::string &param, const std::string &label, RunConfig cfg) {
    const std::string tag = param + "=" + label;
    json entry = {{"param", param}, {"value", label}};
    try {
      PolicyReport report;
      auto policy = std::make_shared<const PolicyGrid>(
          generateMpcPolicy(*background, cfg.policyRequest(), ctx.threads, &report));
      const fs::path ppath = ctx.out_dir / ("policy__" + tag + ".policy");
      savePolicy(*policy, ppath);
      res.outputs.push_back(ppath);
      const double ta = cfg.time.t_advect;
      const ScalarField sigma = computeSigma(cfg, policy, ta, ctx.threads);
      const fs::path fpath = ctx.out_dir / ("cftle__" + tag + ".field");
      writeField(res, fpath, sigma, metaFor(cfg, ta, "cftle"));
      const auto mask = extractRidges(sigma, cfg.render.percentile);
      writeImage(res, cfg, ctx.out_dir / ("cftle__" + tag + ".pgm"), sigma, &mask);
      const double dist = fieldDistance(sigma, passiveFor(ta));
      const double cx = ridgeCentroidX(sigma, mask);
      entry.update({{"file", fpath.filename().string()},
                    {"policy", ppath.filename().string()},
                    {"distance_to_passive", dist},
                    {"ridge_centroid_x", cx},
                    {"non_converged", report.non_converged},
                    {"status", "ok"}});
      csv << param << ',' << label << ',' << fpath.filename().string() << ',' << dist << ',' << cx << ','
          << report.non_converged << ",ok\n";
    } catch (const std::exception &e) {
      res.ok = false;
      entry.update({{"status", "failed"}, {"error", e.what()}});
      csv << param << ',' << label << ",,,,,failed\n";
    }
    index.push_back(entry);
  };

  for (double rq : base.sweep.rq) {
    RunConfig cfg = base;
    cfg.ocp.weights.r = rq * cfg.ocp.weights.q;
    runItem("rq", formatValue(rq), cfg);
  }
  for (double th : base.sweep.t_horizon) {
    RunConfig cfg = base;
    cfg.ocp.horizon.t_h = th;
    runItem("t_horizon", formatValue(th), cfg);
  }
  for (Vec2 g : base.sweep.goals) {
    RunConfig cfg = base;
    cfg.ocp.goal = g;
    runItem("goal", formatValue(g.x) + "_" + formatValue(g.y), cfg);
  }
  for (double ta : base.sweep.t_advect) {
    RunConfig cfg = base;
    cfg.time.t_advect = ta;
    runItem("t_advect", formatValue(ta), cfg);
  }

  writeFileAtomic(ctx.out_dir / "sweep_index.json", index.dump(2));
  writeFileAtomic(ctx.out_dir / "sweep_summary.csv", csv.str());
  res.outputs.push_back(ctx.out_dir / "sweep_index.json");
  res.outputs.push_back(ctx.out_dir / "sweep_summary.csv");
  res.report["items"] = index;
  return res;
}

CommandResult cmdPatches(const CommandContext &ctx) {
  const RunConfig &c = ctx.config;
  const auto &pc = c.patches;
  CommandResult res;
  const FieldPtr background = makeField(c.flow);
  std::shared_ptr<const PolicyGrid> policy;
  if (ctx.policy_path) policy = loadMatchingPolicy(ctx);
  FieldPtr agent_field = background;
  if (policy) agent_field = std::make_shared<ControlledField>(background, policy);

  std::vector<PatchSpec> patches = pc.patches;
  json pairs = json::array();
  if (pc.auto_pairs) {
    FtleResult detail;
    const ScalarField sigma = computeSigma(c, policy, c.time.t_advect, ctx.threads, &detail);
    writeField(res, ctx.out_dir / "patch_sigma.field", sigma, metaFor(c, c.time.t_advect, policy ? "cftle" : "ftle"));
    const PatchPair ridge = ridgePatchPair(detail, pc.pair_offset, pc.pair_radius, pc.pair_particles);
    const PatchPair low = lowSigmaPatchPair(detail, pc.pair_offset, pc.pair_radius, pc.pair_particles);
    const double median_sigma = empiricalQuantile(sigma, 0.5);
    auto describe = [&](const char *kind, const PatchPair &p) {
      const int i = static_cast<int>(std::lround((p.node.x - c.ftle_grid.domain.x_min) / c.ftle_grid.dx()));
      const int j = static_cast<int>(std::lround((p.node.y - c.ftle_grid.domain.y_min) / c.ftle_grid.dy()));
      return json{{"kind", kind},
                  {"node", {p.node.x, p.node.y}},
                  {"sigma", sigma.at(i, j)},
                  {"median_sigma", median_sigma},
                  {"direction", {p.direction.x, p.direction.y}},
                  {"labels", {std::string(kind) + "_a", std::string(kind) + "_b"}}};
    };
    PatchSpec ra = ridge.a, rb = ridge.b, la = low.a, lb = low.b;
    ra.label = "ridge_a";
    rb.label = "ridge_b";
    la.label = "low_a";
    lb.label = "low_b";
    patches.insert(patches.end(), {ra, rb, la, lb});
    pairs.push_back(describe("ridge", ridge));
    pairs.push_back(describe("low", low));
  }
  if (patches.empty()) throw ConfigError("config: patches: no patches listed and auto_pairs is off");
  for (const auto &p : patches)
    if (!c.ftle_grid.domain.contains(p.center)) throw ConfigError("config: patches: patch '" + p.label + "' lies outside the domain");

  const double t_end = pc.snapshot_times.back();
  const double t_first = pc.snapshot_times.front();
  std::vector<double> snaps;
  for (double s : pc.snapshot_times) snaps.push_back(c.time.t0 + s);
  if (t_first < 0.0) throw ConfigError("config: patches.snapshot_times: must be >= 0 (relative to time.t0)");
  const auto tracks = advectPatches(*agent_field, patches, c.time.t0, t_end > 0.0 ? t_end : c.time.step.dt,
                                    c.time.step, snaps, ctx.threads);

  json jt = json::array();
  std::vector<double> payload;
  for (const auto &t : tracks) {
    json cent = json::array();
    for (const Vec2 v : t.centroids) cent.push_back({v.x, v.y});
    jt.push_back({{"label", t.label}, {"centroids", cent}, {"n_particles", t.positions.front().size()}});
    for (const auto &snap : t.positions)
      for (const Vec2 v : snap) {
        payload.push_back(v.x);
        payload.push_back(v.y);
      }
  }
  auto separation = [&](const std::string &a, const std::string &b) -> json {
    const PatchTrack *ta = nullptr, *tb = nullptr;
    for (const auto &t : tracks) {
      if (t.label == a) ta = &t;
      if (t.label == b) tb = &t;
    }
    if (!ta || !tb) return nullptr;
    const double d0 = (ta->centroids.front() - tb->centroids.front()).norm();
    const double d1 = (ta->centroids.back() - tb->centroids.back()).norm();
    return {{"initial", d0}, {"final", d1}, {"ratio", d1 / d0}};
  };
  res.report = {{"snapshot_times", pc.snapshot_times}, {"layout", "sunflower"}, {"seed", 0}, {"tracks", jt},
                {"pairs", pairs}};
  if (pc.auto_pairs) {
    res.report["separation"] = {{"ridge", separation("ridge_a", "ridge_b")}, {"low", separation("low_a", "low_b")}};
  }
  const fs::path tracks_path = ctx.out_dir / "patch_tracks.bin";
  writeHeaderedBinary(tracks_path,
                      {{"format_version", 1}, {"kind", "patch_tracks"}, {"tracks", jt}, {"config_hash", c.hash}},
                      payload);
  res.outputs.push_back(tracks_path);
  writeFileAtomic(ctx.out_dir / "patches_report.json", res.report.dump(2));
  res.outputs.push_back(ctx.out_dir / "patches_report.json");
  return res;
}

CommandResult cmdRender(const RenderRequest &req) {
  CommandResult res;
  const LoadedField f = readFieldFile(req.input);
  std::vector<std::uint8_t> mask;
  RenderOptions opt = req.options;
  if (req.mask) {
    const LoadedField m = readFieldFile(*req.mask);
    if (!(m.field.grid == f.field.grid)) throw ConfigError("mask grid does not match the field grid");
    mask = fieldToMask(m.field);
    opt.overlay = &mask;
  }
  writeFileAtomic(req.output, renderPgm(f.field, opt));
  res.outputs.push_back(req.output);
  res.report = {{"width", f.field.grid.nx}, {"height", f.field.grid.ny}, {"image", req.output.string()}};
  return res;
}

CommandResult runCommand(const std::string &name, const CommandContext &ctx) {
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + ctx.out_dir.string() + "': " + ec.message());
  CommandResult res;
  if (name == "passive-ftle") res = cmdPassiveFtle(ctx);
  else if (name == "gen-policy") res = cmdGenPolicy(ctx);
  else if (name == "cftle") res = cmdCftle(ctx);
  else if (name == "diagnostics") res = cmdDiagnostics(ctx);
  else if (name == "sweep") res = cmdSweep(ctx);
  else if (name == "patches") res = cmdPatches(ctx);
  else throw ConfigError("unknown command '" + name + "'");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json outputs = json::array();
  for (const auto &p : res.outputs) outputs.push_back(p.string());
  const json manifest = {{"command", name},
                         {"version", kVersion},
                         {"config_hash", ctx.config.hash},
                         {"config", ctx.config.source},
                         {"threads", resolveThreads(ctx.threads)},
                         {"seedless", ctx.seedless},
                         {"nondeterminism_used", false},
                         {"policy", ctx.policy_path ? json(ctx.policy_path->string()) : json(nullptr)},
                         {"wall_seconds", wall},
                         {"ok", res.ok},
                         {"outputs", outputs},
                         {"report", res.report}};
  writeFileAtomic(ctx.out_dir / ("manifest_" + name + ".json"), manifest.dump(2));
  return res;
}

}  // namespace cftle
