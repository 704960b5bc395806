#include "tactile_eit/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "tactile_eit/error.hpp"

namespace tactile_eit {

TouchSpec TouchSpec::disc(Point2 center, double radius, double level) {
  TouchSpec t{Shape::kDisc, center, 0.0, radius, level};
  t.validate();
  return t;
}

TouchSpec TouchSpec::annulus(Point2 center, double inner, double outer, double level) {
  TouchSpec t{Shape::kAnnulus, center, inner, outer, level};
  t.validate();
  return t;
}

void TouchSpec::validate() const {
  if (!(level > 0.0)) throw EitError(ErrorCode::kNonPositiveConductivity, "touch level must be > 0");
  if (!(outer_radius > 0.0)) throw EitError(ErrorCode::kInvalidArgument, "touch radius must be > 0");
  if (shape == Shape::kAnnulus && !(inner_radius > 0.0 && inner_radius < outer_radius)) {
    throw EitError(ErrorCode::kInvalidArgument, "annulus needs 0 < inner < outer");
  }
}

bool TouchSpec::contains(Point2 p) const {
  const double d = distance(p, center);
  if (shape == Shape::kDisc) return d <= outer_radius;
  return d >= inner_radius && d <= outer_radius;
}

ConductivityField apply_touches(const ConductivityField& field, const Mesh& mesh,
                                std::span<const TouchSpec> touches) {
  if (field.size() != mesh.element_count()) {
    throw EitError(ErrorCode::kDimensionMismatch, "field does not match the mesh");
  }
  for (const auto& t : touches) {
    t.validate();
    if (t.center.x < 0.0 || t.center.y < 0.0 || t.center.x > mesh.side() ||
        t.center.y > mesh.side()) {
      throw EitError(ErrorCode::kInvalidArgument, "touch center lies outside the sensor");
    }
  }
  std::vector<double> values(field.values().begin(), field.values().end());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Point2 c = mesh.centroid(k);
    for (const auto& t : touches) {
      if (t.contains(c)) values[k] = t.level;
    }
  }
  return ConductivityField(std::move(values));
}

void LatticeSpec::validate() const {
  if (!(pitch > 0.0)) throw EitError(ErrorCode::kInvalidArgument, "lattice pitch must be > 0");
  if (!(channel_width > 0.0 && channel_width <= pitch)) {
    throw EitError(ErrorCode::kInvalidArgument, "channel width must be in (0, pitch]");
  }
  if (!(background_conductivity > 0.0)) {
    throw EitError(ErrorCode::kNonPositiveConductivity, "lattice background must be > 0");
  }
}

namespace {

double distance_to_gridline(double v, double pitch) {
  const double r = std::fmod(v, pitch);
  return std::min(std::abs(r), std::abs(pitch - std::abs(r)));
}

bool on_boundary(Point2 p, double side) {
  const double tol = 1e-9 * side;
  return p.x <= tol || p.y <= tol || p.x >= side - tol || p.y >= side - tol;
}

}  // namespace

ConductivityField apply_lattice(const Mesh& mesh, const LatticeSpec& spec,
                                double channel_conductivity) {
  spec.validate();
  if (!(channel_conductivity > 0.0)) {
    throw EitError(ErrorCode::kNonPositiveConductivity, "channel conductivity must be > 0");
  }
  const double half = 0.5 * spec.channel_width;
  const double side = mesh.side();
  const auto nodes = mesh.nodes();
  std::vector<double> values(mesh.element_count(), spec.background_conductivity);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Point2 c = mesh.centroid(k);
    bool conductive = distance_to_gridline(c.x, spec.pitch) <= half ||
                      distance_to_gridline(c.y, spec.pitch) <= half ||
                      std::min({c.x, c.y, side - c.x, side - c.y}) <= half;
    for (auto n : mesh.elements()[k]) conductive = conductive || on_boundary(nodes[n], side);
    if (conductive) values[k] = channel_conductivity;
  }
  ConductivityField field(std::move(values));
  const double threshold = std::sqrt(spec.background_conductivity * channel_conductivity);
  if (channel_conductivity > spec.background_conductivity &&
      !electrodes_connected(mesh, field, threshold)) {
    throw EitError(ErrorCode::kLatticeDisconnected,
                   "lattice leaves an electrode outside the conductive network");
  }
  return field;
}

bool electrodes_connected(const Mesh& mesh, const ConductivityField& field, double threshold) {
  // Elements owning each electrode's boundary edges.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> boundary_owner;
  const auto elements = mesh.elements();
  for (std::size_t k = 0; k < elements.size(); ++k) {
    for (int e = 0; e < 3; ++e) {
      auto a = elements[k][e], b = elements[k][(e + 1) % 3];
      boundary_owner[{std::min(a, b), std::max(a, b)}] = k;
    }
  }
  std::vector<std::size_t> contacts;
  for (const auto& electrode : mesh.electrodes()) {
    bool any = false;
    for (const auto& seg : electrode.segments) {
      const auto k = boundary_owner.at(
          {std::min(seg.node_a, seg.node_b), std::max(seg.node_a, seg.node_b)});
      if (field[k] > threshold) {
        contacts.push_back(k);
        any = true;
      }
    }
    if (!any) return false;
  }

  std::vector<int> component(mesh.element_count(), -1);
  std::queue<std::size_t> frontier;
  frontier.push(contacts.front());
  component[contacts.front()] = 0;
  while (!frontier.empty()) {
    const auto k = frontier.front();
    frontier.pop();
    for (auto nb : mesh.neighbors(k)) {
      if (component[nb] < 0 && field[nb] > threshold) {
        component[nb] = 0;
        frontier.push(nb);
      }
    }
  }
  return std::all_of(contacts.begin(), contacts.end(),
                     [&](std::size_t k) { return component[k] == 0; });
}

double press_to_level(double depth_mm, double base, double gain) {
  return std::max(base, base + gain * depth_mm);
}

}  // namespace tactile_eit
