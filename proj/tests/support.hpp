#pragma once

#include <filesystem>
#include <random>
#include <string>

// Scratch directory per test binary, wiped on construction.
inline std::filesystem::path scratchDir(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cftle_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::mt19937_64 testRng(unsigned seed = 20240917u) { return std::mt19937_64(seed); }
