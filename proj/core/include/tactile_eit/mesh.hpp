#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tactile_eit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

double distance(Point2 a, Point2 b);

using Triangle = std::array<std::size_t, 3>;

// Portion [t_begin, t_end] of the boundary edge node_a -> node_b covered by
// an electrode, in edge-local parameter t (0 at node_a, 1 at node_b).
struct ElectrodeSegment {
  std::size_t node_a = 0;
  std::size_t node_b = 0;
  double t_begin = 0.0;
  double t_end = 1.0;

  friend bool operator==(const ElectrodeSegment&, const ElectrodeSegment&) = default;
};

struct Electrode {
  std::vector<ElectrodeSegment> segments;

  friend bool operator==(const Electrode&, const Electrode&) = default;
};

// Triangulated square [0, side] x [0, side] (mm) with boundary electrodes.
// Immutable after construction.
class Mesh {
 public:
  // Validates every invariant; throws EitError on violation.
  Mesh(std::vector<Point2> nodes, std::vector<Triangle> elements,
       std::vector<Electrode> electrodes, double side_mm,
       std::size_t divisions = 0);

  std::span<const Point2> nodes() const { return nodes_; }
  std::span<const Triangle> elements() const { return elements_; }
  std::span<const Electrode> electrodes() const { return electrodes_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t element_count() const { return elements_.size(); }
  std::size_t electrode_count() const { return electrodes_.size(); }
  double side() const { return side_; }
  // Structured grid resolution, or 0 for meshes of unknown structure.
  std::size_t divisions() const { return divisions_; }

  double area(std::size_t element) const { return areas_[element]; }
  Point2 centroid(std::size_t element) const { return centroids_[element]; }
  double electrode_length(std::size_t electrode) const;
  Point2 segment_point(const ElectrodeSegment& seg, double t) const;

  // Stable 64-bit content hash, printed as hex in provenance fields.
  std::string id() const;

  // Triangles sharing an edge with `element`.
  const std::vector<std::size_t>& neighbors(std::size_t element) const {
    return neighbors_[element];
  }

  // Boundary-inclusive; ties resolved to the lowest element index.
  std::optional<std::size_t> locate_element(Point2 p) const;

 private:
  std::vector<Point2> nodes_;
  std::vector<Triangle> elements_;
  std::vector<Electrode> electrodes_;
  double side_;
  std::size_t divisions_;
  std::vector<double> areas_;
  std::vector<Point2> centroids_;
  std::vector<std::vector<std::size_t>> neighbors_;
  // Uniform bucket grid over element bounding boxes for point location.
  std::size_t bucket_n_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

double signed_area(Point2 a, Point2 b, Point2 c);
bool triangle_contains(Point2 a, Point2 b, Point2 c, Point2 p, double tol = 1e-9);

// Structured right-triangle grid, each cell split along its rising diagonal.
// Electrodes are numbered counterclockwise starting at the bottom-left of the
// bottom side, electrode_count/4 centered evenly per side.
Mesh build_mesh(double side_mm, std::size_t divisions, std::size_t electrode_count,
                double electrode_width_mm);

// Per-element conductivity in S/m.
class ConductivityField {
 public:
  explicit ConductivityField(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  ConductivityField scaled(double factor) const;
  ConductivityField with_value(std::size_t element, double sigma) const;

  friend bool operator==(const ConductivityField&, const ConductivityField&) = default;

 private:
  std::vector<double> values_;
};

inline constexpr double kBackgroundConductivity = 1.0;

ConductivityField uniform_field(const Mesh& mesh, double sigma = kBackgroundConductivity);

}  // namespace tactile_eit
