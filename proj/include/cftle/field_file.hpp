#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cftle/types.hpp"

namespace cftle {

struct FieldFileMeta {
  double t0 = 0.0;
  double t_advect = 0.0;
  std::string quantity = "ftle";
  std::string config_hash;
  nlohmann::json extra = nlohmann::json::object();
};

/// Header JSON + `---BINARY---` line + nx*ny little-endian float64 values,
/// row-major with x fastest. Invalid nodes are stored as NaN.
void writeFieldFile(const std::filesystem::path &path, const ScalarField &field, const FieldFileMeta &meta);

struct LoadedField {
  ScalarField field;
  FieldFileMeta meta;
};

LoadedField readFieldFile(const std::filesystem::path &path);

/// Boolean mask stored as a 0/1 field with quantity "ridge_mask".
ScalarField maskToField(const GridSpec &grid, const std::vector<std::uint8_t> &mask);
std::vector<std::uint8_t> fieldToMask(const ScalarField &field);

struct RenderOptions {
  std::optional<std::pair<double, double>> range;  ///< default: min..max of valid values
  std::string colormap = "gray";                   ///< "gray" or "gray_inverted"
  const std::vector<std::uint8_t> *overlay = nullptr;
};

/// Binary PGM (P5, 8-bit), one pixel per node, top row = largest y.
/// Constant fields map to 128; invalid nodes to 0; overlay pixels to 255.
std::string renderPgm(const ScalarField &field, const RenderOptions &options = {});

}  // namespace cftle
