// Acceptance run: one PASS/FAIL line per criterion. Criteria that exercise
// the product go through the CLI binary; the adjoint check uses the library.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cftle/config.hpp"
#include "cftle/field_file.hpp"
#include "cftle/flowfield.hpp"
#include "cftle/ocp.hpp"
#include "cftle/policy.hpp"

using namespace cftle;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path g_work;
int g_failed = 0;

json grid(double x0, double x1, double y0, double y1, int nx, int ny) {
  return {{"x_min", x0}, {"x_max", x1}, {"y_min", y0}, {"y_max", y1}, {"nx", nx}, {"ny", ny}};
}

const json kGyreBox = grid(0, 2, 0, 1, 201, 101);

fs::path writeConfig(const std::string &name, const json &doc) {
  const fs::path p = g_work / (name + ".json");
  std::ofstream(p) << doc.dump(2);
  return p;
}

// Runs the CLI; returns its exit status.
int cli(const fs::path &config, const fs::path &out, const std::string &command, unsigned threads,
        const std::string &extra = "") {
  fs::create_directories(out);
  const std::string cmd = std::string(CFTLE_CLI_PATH) + " --config " + config.string() + " --out " + out.string() +
                          " --threads " + std::to_string(threads) + " " + command + " " + extra + " > " +
                          (out / "cli.log").string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

json readJson(const fs::path &p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string bytes(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void criterion(int id, const std::string &name, double budget_s, const std::function<Outcome()> &body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception &e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = budget_s <= 0.0 || secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++g_failed;
  std::printf("%s %2d %-28s %s | %.1f s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs,
              in_time ? "" : " (over budget)");
  std::fflush(stdout);
}

void info(const std::string &text) {
  std::printf("INFO    %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Saddle on [-1,1]^2, T_A = 1, dt = 0.001.
json saddleConfig(double t_advect) {
  return {{"flow", {{"name", "saddle"}, {"lambda", 1.0}}},
          {"ftle_grid", grid(-1, 1, -1, 1, 21, 21)},
          {"policy_grid", grid(-1, 1, -1, 1, 21, 21)},
          {"time", {{"t0", 0}, {"t_advect", t_advect}, {"dt", 0.001}}}};
}

double interiorMaxDeviation(const ScalarField &s, double target) {
  double worst = 0.0;
  for (int j = 1; j < s.grid.ny - 1; ++j)
    for (int i = 1; i < s.grid.nx - 1; ++i) worst = std::max(worst, std::abs(s.at(i, j) - target));
  return worst;
}

json patchesConfig(double t_advect) {
  return {{"ftle_grid", kGyreBox},
          {"time", {{"t_advect", t_advect}}},
          {"patches",
           {{"auto_pairs", true},
            {"pair_offset", 0.1},
            {"pair_radius", 0.05},
            {"snapshot_times", {0, 3, 6, 9}}}}};
}

}  // namespace

int main(int argc, char **argv) {
  g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "cftle_acceptance";
  fs::remove_all(g_work);
  fs::create_directories(g_work);
  std::printf("acceptance work dir: %s\n", g_work.string().c_str());

  const fs::path c1 = writeConfig("c1_saddle", saddleConfig(1.0));
  criterion(1, "saddle FTLE oracle", 5, [&] {
    if (cli(c1, g_work / "c1_t1", "passive-ftle", 1) != 0) return Outcome{false, "cli failed"};
    const double dev = interiorMaxDeviation(readFieldFile(g_work / "c1_t1" / "ftle_forward.field").field, 1.0);
    return Outcome{dev <= 1e-3, fmt("max |sigma - 1| = %.3e (tol 1e-3)", dev)};
  });

  criterion(2, "rotation zero stretch", 5, [&] {
    json d = {{"flow", {{"name", "rotation"}, {"omega", 1.0}}},
              {"ftle_grid", grid(-1, 1, -1, 1, 21, 21)},
              {"policy_grid", grid(-1, 1, -1, 1, 21, 21)},
              {"time", {{"t_advect", 10}}}};
    if (cli(writeConfig("c2_rotation", d), g_work / "c2", "passive-ftle", 1) != 0) return Outcome{false, "cli failed"};
    const ScalarField s = readFieldFile(g_work / "c2" / "ftle_forward.field").field;
    const double mx = *std::max_element(s.values.begin(), s.values.end());
    return Outcome{mx <= 1e-2, fmt("max sigma = %.3e (tol 1e-2)", mx)};
  });

  criterion(3, "steady gyre mirror symmetry", 60, [&] {
    json d = {{"flow", {{"name", "double_gyre"}, {"epsilon", 0.0}}}, {"ftle_grid", kGyreBox}, {"time", {{"t_advect", 15}}}};
    if (cli(writeConfig("c3_steady", d), g_work / "c3", "passive-ftle", 1) != 0) return Outcome{false, "cli failed"};
    const ScalarField s = readFieldFile(g_work / "c3" / "ftle_forward.field").field;
    double asym = 0.0;
    for (int j = 0; j < s.grid.ny; ++j)
      for (int i = 0; i < s.grid.nx; ++i) asym = std::max(asym, std::abs(s.at(i, j) - s.at(s.grid.nx - 1 - i, j)));
    return Outcome{asym <= 1e-6, fmt("max asymmetry = %.3e (tol 1e-6)", asym)};
  });

  criterion(4, "adjoint gradient vs FD", 30, [&] {
    const DoubleGyre dg({});
    std::mt19937_64 rng(20240917u);
    std::uniform_real_distribution<double> ux(0.05, 1.95), uy(0.05, 0.95), ut(0, 10), uu(-0.1, 0.1), urq(1, 200);
    const double h = 1e-6;
    double worst = 0.0, worst_raw = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
      OcpProblem p;
      p.field = &dg;
      p.x0 = {ux(rng), uy(rng)};
      p.t0 = ut(rng);
      p.weights = {1.0, urq(rng)};
      p.horizon = {3.0, 0.1};
      std::vector<Vec2> u(p.horizon.steps());
      for (auto &v : u) v = {uu(rng), uu(rng)};
      const CostGradient g = costGradient(p, u);
      double scale = 0.0;
      for (Vec2 v : g.controls) scale = std::max({scale, std::abs(v.x), std::abs(v.y)});
      for (std::size_t k = 0; k < u.size(); ++k)
        for (int c = 0; c < 2; ++c) {
          auto plus = u, minus = u;
          (c ? plus[k].y : plus[k].x) += h;
          (c ? minus[k].y : minus[k].x) -= h;
          const double fd = (rollout(p, plus).total() - rollout(p, minus).total()) / (2 * h);
          const double ad = c ? g.controls[k].y : g.controls[k].x;
          // FD round-off is ~1e-10 absolute, so tiny components use a floor tied to the gradient scale.
          worst = std::max(worst, std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-3 * scale}));
          worst_raw = std::max(worst_raw, std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-300}));
        }
    }
    info(fmt("crit 4: max relative error without the 1e-3*|g|inf floor = %.3e", worst_raw));
    return Outcome{worst < 1e-5, fmt("max componentwise rel error = %.3e (tol 1e-5, 20 instances)", worst)};
  });

  auto hjbConfig = [](double scale) {
    return json{{"ftle_grid", kGyreBox},
                {"time", {{"t_advect", 3}}},
                {"ocp", {{"q", 1}, {"r", 80}, {"t_horizon", 3}}},
                {"diagnostics",
                 {{"terminal_cost", false}, {"grad_jf", false}, {"energy", false}, {"state_error", false},
                  {"hjb", true}, {"hjb_scale", scale}}}};
  };
  criterion(5, "HJB value-gradient relation", 300, [&] {
    if (cli(writeConfig("c5_hjb", hjbConfig(1.0)), g_work / "c5", "diagnostics", 1) != 0)
      return Outcome{false, "cli failed"};
    const json h = readJson(g_work / "c5" / "diagnostics_report.json")["hjb"];
    const std::size_t n = h["interior_samples"].get<std::size_t>();
    const double ang = h["max_angle_deg"].get<double>(), mag = h["max_magnitude_rel_error"].get<double>();
    info(fmt("crit 5: median |u*| / |grad V / r| = %.4f", h["median_fitted_scale"].get<double>()));
    return Outcome{n >= 10 && ang < 5.0 && mag < 0.1,
                   fmt("samples %zu, max angle %.2f deg (tol 5), max magnitude err %.3f (tol 0.1) vs -(1/r)grad V", n,
                       ang, mag)};
  });
  {
    // Same check against -(1/(2r)) grad V, the minimizer of the implemented cost.
    if (cli(writeConfig("c5_hjb_half", hjbConfig(0.5)), g_work / "c5_half", "diagnostics", 1) == 0) {
      const json h = readJson(g_work / "c5_half" / "diagnostics_report.json")["hjb"];
      info(fmt("crit 5 at scale 1/2: samples %zu, max angle %.2f deg, max magnitude err %.4f",
               h["interior_samples"].get<std::size_t>(), h["max_angle_deg"].get<double>(),
               h["max_magnitude_rel_error"].get<double>()));
    }
  }

  criterion(6, "grad J_F identity", 300, [&] {
    auto run = [&](const std::string &tag, const json &box) {
      json d = {{"ftle_grid", box},
                {"time", {{"t_advect", 5}}},
                {"diagnostics",
                 {{"terminal_cost", false}, {"grad_jf", true}, {"energy", false}, {"state_error", false}, {"hjb", false}}}};
      if (cli(writeConfig("c6_" + tag, d), g_work / ("c6_" + tag), "diagnostics", 1) != 0)
        throw std::runtime_error("cli failed");
      return readJson(g_work / ("c6_" + tag) / "diagnostics_report.json")["grad_jf"];
    };
    const json a = run("201", kGyreBox), b = run("401", grid(0, 2, 0, 1, 401, 201));
    const double rel = a["median_relative_residual"].get<double>();
    const double ratio = a["median_residual"].get<double>() / b["median_residual"].get<double>();
    return Outcome{rel < 1e-2 && ratio >= 1.5,
                   fmt("median rel residual %.3e (tol 1e-2), halving-spacing ratio %.2f (>= 1.5)", rel, ratio)};
  });

  const json c7doc = {{"ftle_grid", kGyreBox},
                      {"time", {{"t0", 0}, {"t_advect", 15}}},
                      {"ocp", {{"t_horizon", 3}}},
                      {"sweep", {{"rq", {20, 40, 80, 160, 320}}}},
                      {"render", {{"write_images", false}}}};
  const fs::path c7 = writeConfig("c7_sweep_rq", c7doc);
  criterion(7, "passive limit in R/Q", 1800, [&] {
    if (cli(c7, g_work / "c7_t1", "sweep", 1) != 0) return Outcome{false, "cli failed"};
    std::vector<double> d;
    for (const auto &item : readJson(g_work / "c7_t1" / "sweep_index.json"))
      d.push_back(item.at("distance_to_passive").get<double>());
    bool decreasing = d.size() == 5;
    for (std::size_t k = 1; k < d.size(); ++k) decreasing = decreasing && d[k] < d[k - 1];
    const double ratio = d.back() / d.front();
    return Outcome{decreasing && ratio < 0.25,
                   fmt("distances %.4f %.4f %.4f %.4f %.4f, strictly decreasing %s, last/first %.3f (< 0.25)", d[0],
                       d[1], d[2], d[3], d[4], decreasing ? "yes" : "no", ratio)};
  });

  const fs::path c8 = writeConfig("c8_goals", {{"ftle_grid", kGyreBox},
                                               {"time", {{"t_advect", 4.5}}},
                                               {"ocp", {{"q", 1}, {"r", 15}, {"t_horizon", 4.5}}},
                                               {"sweep", {{"goals", {{0.5, 0.5}, {1.5, 0.5}}}}},
                                               {"render", {{"write_images", false}}}});
  criterion(8, "goal flux ridge shift", 900, [&] {
    if (cli(c8, g_work / "c8", "sweep", 1) != 0) return Outcome{false, "cli failed"};
    const json idx = readJson(g_work / "c8" / "sweep_index.json");
    const double left = idx[0]["ridge_centroid_x"].get<double>(), right = idx[1]["ridge_centroid_x"].get<double>();
    return Outcome{left > right, fmt("ridge centroid x: goal (0.5,0.5) %.4f, goal (1.5,0.5) %.4f", left, right)};
  });

  const fs::path rq80 = g_work / "c7_t1" / "policy__rq=80.policy";
  const fs::path c9 = writeConfig("c9_patches", patchesConfig(9));
  criterion(9, "transport barrier separation", 300, [&] {
    if (cli(c9, g_work / "c9_t1", "patches", 1, "--policy " + rq80.string()) != 0) return Outcome{false, "cli failed"};
    const json r = readJson(g_work / "c9_t1" / "patches_report.json");
    const double ridge = r["separation"]["ridge"]["ratio"].get<double>();
    const double low = r["separation"]["low"]["ratio"].get<double>();
    const json &lp = r["pairs"][1];
    const double low_sigma = lp["sigma"].get<double>(), median = lp["median_sigma"].get<double>();
    return Outcome{ridge >= 3.0 && low < 2.0 && low_sigma < median,
                   fmt("ridge pair x%.2f (>= 3), low pair x%.2f (< 2), low sigma %.4f vs median %.4f", ridge, low,
                       low_sigma, median)};
  });
  if (cli(writeConfig("c9_patches_ta15", patchesConfig(15)), g_work / "c9_ta15", "patches", 1,
          "--policy " + rq80.string()) == 0) {
    const json r = readJson(g_work / "c9_ta15" / "patches_report.json");
    info(fmt("crit 9 with sigma from T_A = 15: ridge pair x%.2f, low pair x%.2f",
             r["separation"]["ridge"]["ratio"].get<double>(), r["separation"]["low"]["ratio"].get<double>()));
  }

  criterion(10, "goal tracking improvement", 900, [&] {
    const fs::path pol = g_work / "c8" / "policy__goal=0.5_0.5.policy";
    json d = {{"ftle_grid", kGyreBox},
              {"time", {{"t_advect", 15}}},
              {"ocp", {{"q", 1}, {"r", 15}, {"t_horizon", 4.5}, {"goal", {0.5, 0.5}}}},
              {"diagnostics",
               {{"terminal_cost", true}, {"grad_jf", false}, {"energy", false}, {"state_error", false}, {"hjb", false}}},
              {"render", {{"write_images", false}}}};
    const fs::path cfg = writeConfig("c10_terminal", d);
    if (cli(cfg, g_work / "c10_mpc", "diagnostics", 1, "--policy " + pol.string()) != 0 ||
        cli(cfg, g_work / "c10_passive", "diagnostics", 1) != 0)
      return Outcome{false, "cli failed"};
    auto meanDistance = [](const fs::path &p) {
      const ScalarField f = readFieldFile(p).field;
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < f.values.size(); ++k)
        if (f.valid[k]) sum += std::sqrt(f.values[k]), ++n;
      return sum / static_cast<double>(n);
    };
    const double mpc = meanDistance(g_work / "c10_mpc" / "terminal_cost.field");
    const double passive = meanDistance(g_work / "c10_passive" / "terminal_cost.field");
    return Outcome{mpc < passive, fmt("mean terminal distance: MPC %.4f, passive %.4f", mpc, passive)};
  });

  criterion(11, "backward cFTLE", 300, [&] {
    json d = {{"ftle_grid", kGyreBox}, {"time", {{"t_advect", -15}}}, {"render", {{"write_images", false}}}};
    if (cli(writeConfig("c11_backward", d), g_work / "c11", "cftle", 1, "--policy " + rq80.string()) != 0)
      return Outcome{false, "cftle T_A=-15 failed"};
    const ScalarField s = readFieldFile(g_work / "c11" / "cftle_backward.field").field;
    std::size_t finite = 0;
    for (std::size_t k = 0; k < s.values.size(); ++k) finite += s.valid[k] && std::isfinite(s.values[k]);

    // Saddle: a zero periodic policy through the controlled backward path, and the passive backward field.
    const json sd = saddleConfig(-1.0);
    const RunConfig rc = parseConfig(sd);
    PolicyGrid zero = zeroPolicy(rc.policy_grid, 0.0, 0.5, 3, 0.1);
    zero.meta.flow = makeField(rc.flow)->descriptor();
    zero.meta.periodic = true;
    zero.meta.generator = "external";
    savePolicy(zero, g_work / "c11_saddle_zero.policy");
    const fs::path scfg = writeConfig("c11_saddle", sd);
    if (cli(scfg, g_work / "c11_saddle", "cftle", 1, "--policy " + (g_work / "c11_saddle_zero.policy").string()) != 0)
      return Outcome{false, "saddle cftle failed"};
    json both = saddleConfig(1.0);
    both["time"]["both_directions"] = true;
    if (cli(writeConfig("c11_saddle_both", both), g_work / "c11_saddle_both", "passive-ftle", 1) != 0)
      return Outcome{false, "saddle passive failed"};
    const double dc = interiorMaxDeviation(readFieldFile(g_work / "c11_saddle" / "cftle_backward.field").field, 1.0);
    const double dp =
        interiorMaxDeviation(readFieldFile(g_work / "c11_saddle_both" / "ftle_backward.field").field, 1.0);
    return Outcome{finite == s.values.size() && dc <= 1e-3 && dp <= 1e-3,
                   fmt("gyre T_A=-15 finite nodes %zu/%zu; saddle backward max |sigma-1|: controlled %.2e, passive "
                       "%.2e (tol 1e-3)",
                       finite, s.values.size(), dc, dp)};
  });

  criterion(12, "thread determinism", 0, [&] {
    if (cli(c1, g_work / "c1_t8", "passive-ftle", 8) != 0 || cli(c7, g_work / "c7_t8", "sweep", 8) != 0 ||
        cli(c9, g_work / "c9_t8", "patches", 8, "--policy " + rq80.string()) != 0)
      return Outcome{false, "cli failed"};
    std::size_t compared = 0, differing = 0;
    for (const auto &[a, b] : {std::pair{"c1_t1", "c1_t8"}, {"c7_t1", "c7_t8"}, {"c9_t1", "c9_t8"}})
      for (const auto &e : fs::directory_iterator(g_work / a)) {
        const auto ext = e.path().extension();
        if (ext != ".field" && ext != ".policy" && ext != ".bin") continue;
        ++compared;
        if (bytes(e.path()) != bytes(g_work / b / e.path().filename())) ++differing;
      }
    return Outcome{compared > 0 && differing == 0,
                   fmt("%zu field/policy/track files compared, %zu differ (threads 1 vs 8)", compared, differing)};
  });

  std::printf("%d criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
