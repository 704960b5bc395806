#include "tactile_eit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "tactile_eit/error.hpp"

namespace tactile_eit {

SensitivityReport mean_relative_change(const MeasurementFrame& reference,
                                       const MeasurementFrame& touched,
                                       std::string config_label) {
  if (reference.voltages.size() != touched.voltages.size() ||
      reference.protocol_id != touched.protocol_id) {
    throw EitError(ErrorCode::kDimensionMismatch, "frames come from different protocols");
  }
  SensitivityReport report;
  report.config_label = std::move(config_label);
  double sum = 0.0;
  for (std::size_t i = 0; i < reference.voltages.size(); ++i) {
    const double ref = reference.voltages[i];
    if (std::abs(ref) < kNegligibleVoltage) {
      ++report.excluded;
      continue;
    }
    const double change = std::abs(touched.voltages[i] - ref) / std::abs(ref);
    report.per_measurement_changes.push_back(change);
    sum += change;
  }
  if (!report.per_measurement_changes.empty()) {
    report.mean_relative_change = sum / static_cast<double>(report.per_measurement_changes.size());
  }
  return report;
}

BlobReport detect_blobs(const ReconstructionImage& image, const Mesh& mesh, double threshold,
                        std::size_t min_elements) {
  if (image.values.size() != mesh.element_count()) {
    throw EitError(ErrorCode::kDimensionMismatch, "image does not match the mesh");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw EitError(ErrorCode::kInvalidArgument, "blob threshold must be in (0, 1)");
  }
  BlobReport report;
  report.threshold = threshold;
  report.min_elements = min_elements;
  const double max = image.values.empty()
                         ? 0.0
                         : *std::max_element(image.values.begin(), image.values.end());
  if (!(max > 0.0)) return report;
  const double cut = threshold * max;

  std::vector<bool> seen(image.values.size(), false);
  for (std::size_t seed = 0; seed < image.values.size(); ++seed) {
    if (seen[seed] || image.values[seed] < cut) continue;
    Blob blob;
    std::queue<std::size_t> frontier;
    frontier.push(seed);
    seen[seed] = true;
    double wx = 0.0, wy = 0.0;
    while (!frontier.empty()) {
      const auto k = frontier.front();
      frontier.pop();
      blob.elements.push_back(k);
      const double a = mesh.area(k);
      blob.area += a;
      wx += a * mesh.centroid(k).x;
      wy += a * mesh.centroid(k).y;
      blob.peak = std::max(blob.peak, image.values[k]);
      for (auto nb : mesh.neighbors(k)) {
        if (!seen[nb] && image.values[nb] >= cut) {
          seen[nb] = true;
          frontier.push(nb);
        }
      }
    }
    if (blob.elements.size() < min_elements) continue;
    std::sort(blob.elements.begin(), blob.elements.end());
    blob.centroid = {wx / blob.area, wy / blob.area};
    report.blobs.push_back(std::move(blob));
  }
  return report;
}

std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  // Jonker-Volgenant style O(n^3) Hungarian with potentials; 1-based scratch.
  const std::size_t n = cost.size();
  for (const auto& row : cost) {
    if (row.size() != n) throw EitError(ErrorCode::kInvalidArgument, "cost matrix not square");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (match[j] != 0) assignment[match[j] - 1] = j - 1;
  }
  return assignment;
}

std::vector<double> localization_error(const BlobReport& report, std::span<const Point2> truth) {
  if (report.blobs.size() != truth.size()) {
    throw EitError(ErrorCode::kCountMismatch,
                   "found " + std::to_string(report.blobs.size()) + " blobs for " +
                       std::to_string(truth.size()) + " true touches");
  }
  std::vector<std::vector<double>> cost(truth.size(), std::vector<double>(truth.size()));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      cost[i][j] = distance(truth[i], report.blobs[j].centroid);
    }
  }
  const auto assignment = min_cost_assignment(cost);
  std::vector<double> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) out[i] = cost[i][assignment[i]];
  return out;
}

}  // namespace tactile_eit
