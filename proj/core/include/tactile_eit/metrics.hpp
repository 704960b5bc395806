#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tactile_eit/forward.hpp"
#include "tactile_eit/inverse.hpp"
#include "tactile_eit/mesh.hpp"

namespace tactile_eit {

inline constexpr double kNegligibleVoltage = 1e-12;  // volts
inline constexpr double kDefaultBlobThreshold = 0.3;
// Components with fewer elements are treated as speckle and dropped.
inline constexpr std::size_t kDefaultMinBlobElements = 3;

struct SensitivityReport {
  double mean_relative_change = 0.0;
  // |touched - reference| / |reference| for each kept measurement.
  std::vector<double> per_measurement_changes;
  std::size_t excluded = 0;  // measurements with |reference| < kNegligibleVoltage
  std::string config_label;
};

SensitivityReport mean_relative_change(const MeasurementFrame& reference,
                                       const MeasurementFrame& touched,
                                       std::string config_label = {});

struct Blob {
  Point2 centroid;  // area weighted, mm
  double area = 0.0;
  double peak = 0.0;
  std::vector<std::size_t> elements;
};

struct BlobReport {
  std::vector<Blob> blobs;
  double threshold = kDefaultBlobThreshold;
  std::size_t min_elements = kDefaultMinBlobElements;
};

// Edge-connected components of elements with value >= threshold * max,
// ordered by their lowest element index.
BlobReport detect_blobs(const ReconstructionImage& image, const Mesh& mesh,
                        double threshold = kDefaultBlobThreshold,
                        std::size_t min_elements = kDefaultMinBlobElements);

// Minimum total distance one-to-one assignment of blobs to true centers.
// Result i is the distance from truth[i] to its matched blob.
std::vector<double> localization_error(const BlobReport& report, std::span<const Point2> truth);

// Optimal assignment for a square cost matrix (Hungarian method).
// Returns assignment[row] = column.
std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace tactile_eit
