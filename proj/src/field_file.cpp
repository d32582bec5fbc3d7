#include "cftle/field_file.hpp"

#include <algorithm>
#include <cmath>

#include "cftle/binary_io.hpp"

namespace cftle {

using nlohmann::json;

void writeFieldFile(const std::filesystem::path &path, const ScalarField &field, const FieldFileMeta &meta) {
  const GridSpec &g = field.grid;
  if (field.values.size() != g.size()) throw ConfigError("field does not match its grid");
  json header = {{"format_version", 1},
                 {"kind", "field"},
                 {"nx", g.nx},
                 {"ny", g.ny},
                 {"domain",
                  {{"x_min", g.domain.x_min}, {"x_max", g.domain.x_max}, {"y_min", g.domain.y_min},
                   {"y_max", g.domain.y_max}}},
                 {"t0", meta.t0},
                 {"t_advect", meta.t_advect},
                 {"quantity", meta.quantity},
                 {"config_hash", meta.config_hash}};
  if (!meta.extra.empty()) header["extra"] = meta.extra;
  std::vector<double> payload(field.values);
  for (std::size_t n = 0; n < payload.size(); ++n)
    if (!field.valid[n]) payload[n] = std::nan("");
  writeHeaderedBinary(path, header, payload);
}

LoadedField readFieldFile(const std::filesystem::path &path) {
  const std::string where = "field '" + path.string() + "'";
  HeaderedPayload file = readHeaderedBinary(path);
  const json &h = file.header;
  LoadedField out;
  try {
    if (h.at("format_version").get<int>() != 1) throw IoError(where + ": unsupported format_version");
    GridSpec g;
    g.nx = h.at("nx").get<int>();
    g.ny = h.at("ny").get<int>();
    const json &d = h.at("domain");
    g.domain = {d.at("x_min").get<double>(), d.at("x_max").get<double>(), d.at("y_min").get<double>(),
                d.at("y_max").get<double>()};
    out.meta.t0 = h.at("t0").get<double>();
    out.meta.t_advect = h.at("t_advect").get<double>();
    out.meta.quantity = h.at("quantity").get<std::string>();
    out.meta.config_hash = h.value("config_hash", std::string());
    if (h.contains("extra")) out.meta.extra = h.at("extra");
    try {
      g.validate();
    } catch (const ConfigError &e) {
      throw IoError(where + ": " + e.what());
    }
    out.field.grid = g;
  } catch (const json::exception &e) {
    throw IoError(where + ": malformed header: " + e.what());
  }
  const std::size_t expected = out.field.grid.size();
  if (file.payload.size() != expected)
    throw IoError(where + ": size mismatch, payload holds " + std::to_string(file.payload.size()) +
                  " values but the header declares " + std::to_string(expected));
  out.field.values = std::move(file.payload);
  out.field.valid.resize(expected);
  for (std::size_t n = 0; n < expected; ++n) out.field.valid[n] = std::isfinite(out.field.values[n]) ? 1 : 0;
  return out;
}

ScalarField maskToField(const GridSpec &grid, const std::vector<std::uint8_t> &mask) {
  ScalarField f(grid);
  for (std::size_t n = 0; n < mask.size(); ++n) f.values[n] = mask[n] ? 1.0 : 0.0;
  return f;
}

std::vector<std::uint8_t> fieldToMask(const ScalarField &field) {
  std::vector<std::uint8_t> mask(field.values.size());
  for (std::size_t n = 0; n < mask.size(); ++n) mask[n] = field.valid[n] && field.values[n] != 0.0 ? 1 : 0;
  return mask;
}

std::string renderPgm(const ScalarField &field, const RenderOptions &options) {
  const GridSpec &g = field.grid;
  if (options.colormap != "gray" && options.colormap != "gray_inverted")
    throw ConfigError("unsupported colormap '" + options.colormap + "'");
  if (options.overlay && options.overlay->size() != g.size()) throw ConfigError("overlay mask does not match the field");
  double lo = 0.0, hi = 0.0;
  if (options.range) {
    std::tie(lo, hi) = *options.range;
    if (!(lo <= hi)) throw ConfigError("render range must satisfy lo <= hi");
  } else {
    bool any = false;
    for (std::size_t n = 0; n < field.values.size(); ++n) {
      if (!field.valid[n]) continue;
      lo = any ? std::min(lo, field.values[n]) : field.values[n];
      hi = any ? std::max(hi, field.values[n]) : field.values[n];
      any = true;
    }
  }
  std::string out = "P5\n" + std::to_string(g.nx) + " " + std::to_string(g.ny) + "\n255\n";
  const std::size_t offset = out.size();
  out.resize(offset + g.size());
  for (int row = 0; row < g.ny; ++row) {
    const int j = g.ny - 1 - row;
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t n = g.index(i, j);
      int level = 0;
      if (options.overlay && (*options.overlay)[n]) {
        level = 255;
      } else if (field.valid[n]) {
        if (hi == lo) {
          level = 128;
        } else {
          const double s = std::clamp((field.values[n] - lo) / (hi - lo), 0.0, 1.0);
          level = static_cast<int>(std::lround(255.0 * s));
          if (options.colormap == "gray_inverted") level = 255 - level;
        }
      }
      out[offset + static_cast<std::size_t>(row) * g.nx + i] = static_cast<char>(level);
    }
  }
  return out;
}

}  // namespace cftle
