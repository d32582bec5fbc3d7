#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"

#include "cftle/binary_io.hpp"
#include "cftle/commands.hpp"
#include "cftle/config.hpp"
#include "cftle/field_file.hpp"
#include "support.hpp"

using namespace cftle;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json smallConfig() {
  return {{"flow", {{"name", "double_gyre"}}},
          {"ftle_grid", {{"x_min", 0}, {"x_max", 2}, {"y_min", 0}, {"y_max", 1}, {"nx", 21}, {"ny", 11}}},
          {"policy_grid", {{"x_min", 0}, {"x_max", 2}, {"y_min", 0}, {"y_max", 1}, {"nx", 11}, {"ny", 6}}},
          {"time", {{"t0", 0}, {"t_advect", 2}, {"dt", 0.05}}},
          {"ocp", {{"t_horizon", 1.0}, {"dt", 0.1}}},
          {"policy", {{"t_start", 0}, {"dt_policy", 0.5}, {"n_times", 3}, {"periodic", false}}},
          {"render", {{"write_images", false}}}};
}

fs::path writeConfig(const fs::path &dir, const json &doc, const std::string &name = "config.json") {
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << doc.dump(2);
  return p;
}

json readJson(const fs::path &p) {
  std::ifstream in(p);
  return json::parse(in);
}

int runCli(const std::string &args) {
  const std::string cmd = std::string(CFTLE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

CommandContext contextFor(const json &doc, const fs::path &out) {
  CommandContext ctx;
  ctx.config = parseConfig(doc);
  ctx.out_dir = out;
  ctx.threads = 1;
  fs::create_directories(out);
  return ctx;
}

}  // namespace

TEST_CASE("config: defaults and strict keys") {
  const RunConfig d = parseConfig(json::object());
  CHECK(d.ftle_grid.nx == 401);
  CHECK(d.ftle_grid.ny == 201);
  CHECK(d.time.t_advect == 15.0);
  CHECK(d.ocp.weights.r == 80.0);
  CHECK(d.render.percentile == 0.95);
  CHECK_FALSE(d.hash.empty());

  CHECK_THROWS_WITH_AS(parseConfig(json{{"time", {{"t_adv", 3}}}}), "config: time.t_adv: unknown key", ConfigError);
  CHECK_THROWS_WITH_AS(parseConfig(json{{"bogus", 1}}), "config: bogus: unknown key", ConfigError);
  CHECK_THROWS_WITH_AS(parseConfig(json{{"time", {{"t_advect", 0}}}}),
                       "config: time.t_advect: advection time must be nonzero", ConfigError);
  CHECK_THROWS_AS(parseConfig(json{{"ftle_grid", {{"nx", 2}}}}), ConfigError);
  CHECK_THROWS_AS(parseConfig(json{{"ocp", {{"r", -1}}}}), ConfigError);
  CHECK_THROWS_AS(parseConfig(json{{"render", {{"colormap", "jet"}}}}), ConfigError);
}

TEST_CASE("config: hash depends on content only") {
  const json a = smallConfig();
  json b = json::parse(a.dump());
  CHECK(parseConfig(a).hash == parseConfig(b).hash);
  b["time"]["t_advect"] = 3;
  CHECK(parseConfig(a).hash != parseConfig(b).hash);
}

TEST_CASE("field file round trip is bit exact") {
  const fs::path dir = scratchDir("field_io");
  GridSpec g{{0, 2, 0, 1}, 13, 7};
  ScalarField f(g);
  auto rng = testRng();
  std::normal_distribution<double> n01;
  for (double &v : f.values) v = n01(rng);
  f.valid[5] = 0;
  FieldFileMeta meta;
  meta.t0 = 1.5;
  meta.t_advect = -4.0;
  meta.config_hash = "abc";
  writeFieldFile(dir / "f.field", f, meta);
  const LoadedField l = readFieldFile(dir / "f.field");
  CHECK(l.field.grid == g);
  CHECK(l.meta.t_advect == -4.0);
  CHECK(l.meta.config_hash == "abc");
  CHECK_FALSE(l.field.valid[5]);
  for (std::size_t n = 0; n < g.size(); ++n)
    if (n != 5) CHECK(l.field.values[n] == f.values[n]);

  std::string bytes = slurp(dir / "f.field");
  bytes.resize(bytes.size() - 8);
  std::ofstream(dir / "short.field", std::ios::binary) << bytes;
  CHECK_THROWS(readFieldFile(dir / "short.field"));
  CHECK_THROWS_AS(readFieldFile(dir / "missing.field"), IoError);
}

TEST_CASE("renderPgm") {
  GridSpec g{{0, 2, 0, 1}, 401, 201};
  ScalarField c(g, 3.0);
  const std::string flat = renderPgm(c);
  const std::string head = "P5\n401 201\n255\n";
  REQUIRE(flat.compare(0, head.size(), head) == 0);
  CHECK(flat.size() == head.size() + g.size());
  for (std::size_t n = head.size(); n < flat.size(); ++n) CHECK(static_cast<unsigned char>(flat[n]) == 128);

  GridSpec s{{0, 1, 0, 1}, 3, 2};
  ScalarField r(s);
  for (std::size_t n = 0; n < s.size(); ++n) r.values[n] = static_cast<double>(n);
  r.valid[1] = 0;
  std::vector<std::uint8_t> overlay(s.size(), 0);
  overlay[2] = 1;
  RenderOptions o;
  o.overlay = &overlay;
  const std::string img = renderPgm(r, o);
  CHECK(img == renderPgm(r, o));
  const std::string h2 = "P5\n3 2\n255\n";
  // Top row is j = 1 (nodes 3, 4, 5), bottom row j = 0.
  const auto px = [&](int i, int j) { return static_cast<unsigned char>(img[h2.size() + (1 - j) * 3 + i]); };
  CHECK(px(0, 0) == 0);    // value 0 is the minimum
  CHECK(px(1, 0) == 0);    // invalid
  CHECK(px(2, 0) == 255);  // overlay
  CHECK(px(2, 1) == 255);  // maximum
  CHECK(px(0, 1) > px(0, 0));

  o.colormap = "gray_inverted";
  o.overlay = nullptr;
  const std::string inv = renderPgm(r, o);
  CHECK(static_cast<unsigned char>(inv[h2.size() + 2]) == 0);  // (2, 1) is the maximum
}

TEST_CASE("cli: exit codes") {
  const fs::path dir = scratchDir("cli_exit");
  json doc = smallConfig();
  const fs::path good = writeConfig(dir, doc);
  CHECK(runCli("--config " + good.string() + " --out " + (dir / "ok").string() + " --threads 1 passive-ftle") == 0);
  CHECK(fs::exists(dir / "ok" / "ftle_forward.field"));
  CHECK(fs::exists(dir / "ok" / "manifest_passive-ftle.json"));

  doc["time"]["t_advect"] = 0;
  const fs::path zero = writeConfig(dir, doc, "zero.json");
  CHECK(runCli("--config " + zero.string() + " --out " + (dir / "z").string() + " passive-ftle") == 2);

  json sweep = smallConfig();
  sweep["sweep"] = {{"rq", json::array()}};
  const fs::path empty = writeConfig(dir, sweep, "sweep.json");
  CHECK(runCli("--config " + empty.string() + " --out " + (dir / "s").string() + " sweep") == 2);

  CHECK(runCli("--config " + good.string() + " --out " + (dir / "p").string() +
               " cftle --policy " + (dir / "nope.policy").string()) == 4);
  CHECK(runCli("--config " + (dir / "absent.json").string() + " passive-ftle") == 4);
  CHECK(runCli("--config " + good.string() + " no-such-command") == 2);
  CHECK(runCli("--version") == 0);
}

TEST_CASE("commands: zero policy reproduces the passive field bit for bit") {
  const fs::path dir = scratchDir("cli_zero");
  json doc = smallConfig();
  CommandContext ctx = contextFor(doc, dir);
  runCommand("passive-ftle", ctx);

  PolicyGrid z = zeroPolicy(ctx.config.policy_grid, 0.0, 0.5, 3, 0.1);
  z.meta.flow = makeField(ctx.config.flow)->descriptor();
  savePolicy(z, dir / "zero.policy");
  ctx.policy_path = dir / "zero.policy";
  runCommand("cftle", ctx);

  const LoadedField a = readFieldFile(dir / "ftle_forward.field");
  const LoadedField b = readFieldFile(dir / "cftle_forward.field");
  CHECK(a.field.values == b.field.values);
  CHECK(b.meta.quantity == "cftle");

  const json manifest = readJson(dir / "manifest_cftle.json");
  CHECK(manifest["command"] == "cftle");

  // Non-periodic policies cannot drive the backward controlled field.
  doc["time"]["t_advect"] = -2;
  CommandContext back = contextFor(doc, dir / "back");
  back.policy_path = dir / "zero.policy";
  CHECK_THROWS_AS(runCommand("cftle", back), ConfigError);

  // Policies built for another flow are refused.
  doc["flow"] = {{"name", "saddle"}, {"lambda", 1.0}};
  doc["time"]["t_advect"] = 2;
  CommandContext other = contextFor(doc, dir / "other");
  other.policy_path = dir / "zero.policy";
  CHECK_THROWS_WITH_AS(runCommand("cftle", other), doctest::Contains("flow/policy mismatch"), ConfigError);
}

TEST_CASE("commands: gen-policy on a toy grid") {
  const fs::path dir = scratchDir("cli_gen");
  json doc = smallConfig();
  CommandContext ctx = contextFor(doc, dir / "a");
  const CommandResult r = runCommand("gen-policy", ctx);
  const json rep = readJson(dir / "a" / "gen_policy_report.json");
  CHECK(rep["policy"]["bound_violations"] == 0);
  CHECK(rep["policy"]["solves"] == 11 * 6 * 3);
  const PolicyGrid p = loadPolicy(dir / "a" / "policy.policy");
  CHECK(p.n_times == 3);
  CHECK(p.meta.flow == makeField(ctx.config.flow)->descriptor());
  CHECK(r.report["policy"]["max_abs_control"].get<double>() <= 0.1 + 1e-12);

  doc["ocp"]["r"] = 1e6;
  CommandContext timid = contextFor(doc, dir / "b");
  runCommand("gen-policy", timid);
  CHECK(readJson(dir / "b" / "gen_policy_report.json")["policy"]["max_abs_control"].get<double>() < 1e-3);
}

TEST_CASE("commands: diagnostics oracles") {
  const fs::path dir = scratchDir("cli_diag");
  json doc = smallConfig();
  doc["flow"] = {{"name", "zero"}};
  doc["diagnostics"] = {{"energy", false}, {"state_error", false}, {"hjb", false}};
  CommandContext ctx = contextFor(doc, dir / "zero");
  runCommand("diagnostics", ctx);
  const LoadedField jf = readFieldFile(dir / "zero" / "terminal_cost.field");
  const GridSpec &g = jf.field.grid;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) CHECK(jf.field.at(i, j) == (g.node(i, j) - Vec2{0.5, 0.5}).squaredNorm());

  doc["flow"] = {{"name", "saddle"}, {"lambda", 1.0}};
  doc["ftle_grid"] = {{"x_min", -1}, {"x_max", 1}, {"y_min", -1}, {"y_max", 1}, {"nx", 21}, {"ny", 21}};
  doc["policy_grid"] = doc["ftle_grid"];
  doc["time"] = {{"t_advect", 1}, {"dt", 0.001}};
  doc["ocp"]["goal"] = {0.3, -0.2};
  CommandContext sad = contextFor(doc, dir / "saddle");
  runCommand("diagnostics", sad);
  const json rep = readJson(dir / "saddle" / "diagnostics_report.json");
  CHECK(rep["grad_jf"]["median_relative_residual"].get<double>() < 1e-3);
}

TEST_CASE("commands: patches need something to advect") {
  const fs::path dir = scratchDir("cli_patch");
  json doc = smallConfig();
  CommandContext ctx = contextFor(doc, dir);
  CHECK_THROWS_WITH_AS(runCommand("patches", ctx), "config: patches: no patches listed and auto_pairs is off",
                       ConfigError);

  doc["patches"] = {{"list", {{{"center", {0.5, 0.5}}, {"radius", 0.05}, {"n_particles", 16}, {"label", "p"}}}},
                    {"snapshot_times", {0, 1, 2}}};
  CommandContext one = contextFor(doc, dir / "one");
  runCommand("patches", one);
  const json rep = readJson(dir / "one" / "patches_report.json");
  REQUIRE(rep["tracks"].size() == 1);
  CHECK(rep["tracks"][0]["centroids"].size() == 3);
  // (0.5, 0.5) is a fixed point of the gyre at every time only when epsilon = 0; here it just stays inside.
  for (const auto &c : rep["tracks"][0]["centroids"]) {
    CHECK(c[0].get<double>() >= 0.0);
    CHECK(c[0].get<double>() <= 2.0);
  }
}

TEST_CASE("commands: sweep writes one field per value and a summary") {
  const fs::path dir = scratchDir("cli_sweep");
  json doc = smallConfig();
  doc["sweep"] = {{"rq", {20, 1e6}}};
  CommandContext ctx = contextFor(doc, dir);
  runCommand("sweep", ctx);
  CHECK(fs::exists(dir / "cftle__rq=20.field"));
  CHECK(fs::exists(dir / "policy__rq=20.policy"));
  CHECK(fs::exists(dir / "sweep_summary.csv"));
  const std::string csv = slurp(dir / "sweep_summary.csv");
  CHECK(csv.rfind("param,value,file,distance_to_passive,ridge_centroid_x,non_converged,status", 0) == 0);
  const json idx = readJson(dir / "sweep_index.json");
  REQUIRE(idx.size() >= 2);
  CHECK(formatValue(20.0) == "20");
  CHECK(formatValue(4.5) == "4.5");
}
