#pragma once

#include <span>
#include <string>
#include <vector>

#include "tactile_eit/mesh.hpp"

namespace tactile_eit {

struct TouchSpec {
  enum class Shape { kDisc, kAnnulus };

  Shape shape = Shape::kDisc;
  Point2 center;
  double inner_radius = 0.0;  // annulus only
  double outer_radius = 0.0;  // disc radius for discs
  double level = 5.0;         // S/m

  static TouchSpec disc(Point2 center, double radius, double level);
  static TouchSpec annulus(Point2 center, double inner, double outer, double level);

  void validate() const;
  bool contains(Point2 p) const;
};

// Elements whose centroid lies inside a touch take its level; later touches
// win on overlap.
ConductivityField apply_touches(const ConductivityField& field, const Mesh& mesh,
                                std::span<const TouchSpec> touches);

struct LatticeSpec {
  double pitch = 20.0;           // mm between channel centerlines
  double channel_width = 2.0;    // mm
  double background_conductivity = 1e-6;  // S/m, filler between channels

  void validate() const;
};

// Orthogonal channel grid at x, y = k * pitch. An element is conductive if its
// centroid is within channel_width / 2 of a centerline or of the boundary, or
// if it touches the boundary. Throws kLatticeDisconnected when the conductive
// elements do not join every electrode into one network.
ConductivityField apply_lattice(const Mesh& mesh, const LatticeSpec& spec,
                                double channel_conductivity = kBackgroundConductivity);

// True when every electrode touches conductive elements (value > threshold)
// and all of them lie in one edge-connected component.
bool electrodes_connected(const Mesh& mesh, const ConductivityField& field, double threshold);

// Linear press-depth surrogate: base + gain * depth, never below base.
double press_to_level(double depth_mm, double base = kBackgroundConductivity, double gain = 0.8);

}  // namespace tactile_eit
