#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "tactile_eit/mesh.hpp"

namespace test_support {

// Max |a - b| / max(|a|, |b|, floor).
inline double rel_diff(double a, double b, double floor = 1e-300) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline tactile_eit::ConductivityField random_field(const tactile_eit::Mesh& mesh,
                                                    std::uint64_t seed, double lo = 0.5,
                                                    double hi = 5.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(mesh.element_count());
  for (auto& x : v) x = u(rng);
  return tactile_eit::ConductivityField(std::move(v));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tactile_eit_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test_support
