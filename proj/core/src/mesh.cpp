#include "tactile_eit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "fnv.hpp"
#include "tactile_eit/error.hpp"

namespace tactile_eit {

namespace {

constexpr double kGeomTol = 1e-9;

bool on_boundary_line(Point2 p, double side) {
  const double tol = kGeomTol * std::max(1.0, side);
  return std::abs(p.x) <= tol || std::abs(p.y) <= tol || std::abs(p.x - side) <= tol ||
         std::abs(p.y - side) <= tol;
}

std::pair<std::size_t, std::size_t> edge_key(std::size_t a, std::size_t b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double signed_area(Point2 a, Point2 b, Point2 c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

bool triangle_contains(Point2 a, Point2 b, Point2 c, Point2 p, double tol) {
  const double total = signed_area(a, b, c);
  const double scale = tol * std::abs(total);
  return signed_area(a, b, p) >= -scale && signed_area(b, c, p) >= -scale &&
         signed_area(c, a, p) >= -scale;
}

Mesh::Mesh(std::vector<Point2> nodes, std::vector<Triangle> elements,
           std::vector<Electrode> electrodes, double side_mm, std::size_t divisions)
    : nodes_(std::move(nodes)),
      elements_(std::move(elements)),
      electrodes_(std::move(electrodes)),
      side_(side_mm),
      divisions_(divisions) {
  if (!(side_ > 0.0)) throw EitError(ErrorCode::kInvalidArgument, "mesh side must be positive");
  if (elements_.empty()) throw EitError(ErrorCode::kInvalidArgument, "mesh has no elements");
  if (electrodes_.size() < 4) {
    throw EitError(ErrorCode::kInvalidArgument, "mesh needs at least 4 electrodes");
  }

  areas_.reserve(elements_.size());
  centroids_.reserve(elements_.size());
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> edge_owners;
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& t = elements_[k];
    for (auto idx : t) {
      if (idx >= nodes_.size()) {
        throw EitError(ErrorCode::kInvalidArgument,
                       "element " + std::to_string(k) + " references a missing node");
      }
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw EitError(ErrorCode::kInvalidArgument,
                     "element " + std::to_string(k) + " has repeated nodes");
    }
    const Point2 a = nodes_[t[0]], b = nodes_[t[1]], c = nodes_[t[2]];
    const double area = signed_area(a, b, c);
    if (!(area > 0.0)) {
      throw EitError(ErrorCode::kInvalidArgument,
                     "element " + std::to_string(k) + " is not counterclockwise");
    }
    areas_.push_back(area);
    centroids_.push_back({(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0});
    for (int e = 0; e < 3; ++e) edge_owners[edge_key(t[e], t[(e + 1) % 3])].push_back(k);
  }

  neighbors_.assign(elements_.size(), {});
  for (const auto& [edge, owners] : edge_owners) {
    if (owners.size() > 2) throw EitError(ErrorCode::kInvalidArgument, "non-manifold edge");
    if (owners.size() == 2) {
      neighbors_[owners[0]].push_back(owners[1]);
      neighbors_[owners[1]].push_back(owners[0]);
    }
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());

  // Electrodes: segments on boundary edges, no two electrodes sharing coverage.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<double, double>>> coverage;
  for (std::size_t e = 0; e < electrodes_.size(); ++e) {
    if (electrodes_[e].segments.empty()) {
      throw EitError(ErrorCode::kMeshResolution,
                     "electrode " + std::to_string(e) + " covers no boundary edge");
    }
    for (const auto& seg : electrodes_[e].segments) {
      if (seg.node_a >= nodes_.size() || seg.node_b >= nodes_.size()) {
        throw EitError(ErrorCode::kInvalidArgument, "electrode segment node out of range");
      }
      auto it = edge_owners.find(edge_key(seg.node_a, seg.node_b));
      if (it == edge_owners.end() || it->second.size() != 1 ||
          !on_boundary_line(nodes_[seg.node_a], side_) ||
          !on_boundary_line(nodes_[seg.node_b], side_)) {
        throw EitError(ErrorCode::kInvalidArgument,
                       "electrode " + std::to_string(e) + " segment is not a boundary edge");
      }
      if (!(seg.t_begin >= 0.0 && seg.t_begin < seg.t_end && seg.t_end <= 1.0)) {
        throw EitError(ErrorCode::kInvalidArgument, "electrode segment has an empty range");
      }
      // Normalize the interval to the key's node order.
      double lo = seg.t_begin, hi = seg.t_end;
      if (seg.node_a > seg.node_b) {
        lo = 1.0 - seg.t_end;
        hi = 1.0 - seg.t_begin;
      }
      auto& cov = coverage[edge_key(seg.node_a, seg.node_b)];
      for (const auto& [clo, chi] : cov) {
        if (std::min(hi, chi) - std::max(lo, clo) > kGeomTol) {
          throw EitError(ErrorCode::kElectrodeOverlap, "electrodes overlap on a boundary edge");
        }
      }
      cov.emplace_back(lo, hi);
    }
  }

  // Bucket grid for locate_element.
  bucket_n_ = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::sqrt(static_cast<double>(elements_.size()) / 2.0)));
  buckets_.assign(bucket_n_ * bucket_n_, {});
  const double cell = side_ / static_cast<double>(bucket_n_);
  auto clamp_cell = [&](double v) {
    const auto raw = static_cast<long long>(std::floor(v / cell));
    return static_cast<std::size_t>(
        std::clamp<long long>(raw, 0, static_cast<long long>(bucket_n_) - 1));
  };
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    double xmin = side_, xmax = 0.0, ymin = side_, ymax = 0.0;
    for (auto idx : elements_[k]) {
      xmin = std::min(xmin, nodes_[idx].x);
      xmax = std::max(xmax, nodes_[idx].x);
      ymin = std::min(ymin, nodes_[idx].y);
      ymax = std::max(ymax, nodes_[idx].y);
    }
    const double pad = kGeomTol * side_;
    for (auto j = clamp_cell(ymin - pad); j <= clamp_cell(ymax + pad); ++j) {
      for (auto i = clamp_cell(xmin - pad); i <= clamp_cell(xmax + pad); ++i) {
        buckets_[j * bucket_n_ + i].push_back(k);
      }
    }
  }
}

double Mesh::electrode_length(std::size_t electrode) const {
  double total = 0.0;
  for (const auto& seg : electrodes_.at(electrode).segments) {
    total += (seg.t_end - seg.t_begin) * distance(nodes_[seg.node_a], nodes_[seg.node_b]);
  }
  return total;
}

Point2 Mesh::segment_point(const ElectrodeSegment& seg, double t) const {
  const Point2 a = nodes_[seg.node_a], b = nodes_[seg.node_b];
  return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

std::string Mesh::id() const {
  detail::Fnv1a h;
  h.add(side_);
  h.add(static_cast<std::uint64_t>(nodes_.size()));
  for (const auto& p : nodes_) {
    h.add(p.x);
    h.add(p.y);
  }
  for (const auto& t : elements_) {
    for (auto i : t) h.add(static_cast<std::uint64_t>(i));
  }
  for (const auto& e : electrodes_) {
    h.add(static_cast<std::uint64_t>(e.segments.size()));
    for (const auto& s : e.segments) {
      h.add(static_cast<std::uint64_t>(s.node_a));
      h.add(static_cast<std::uint64_t>(s.node_b));
      h.add(s.t_begin);
      h.add(s.t_end);
    }
  }
  return h.hex();
}

std::optional<std::size_t> Mesh::locate_element(Point2 p) const {
  const double tol = kGeomTol * side_;
  if (p.x < -tol || p.y < -tol || p.x > side_ + tol || p.y > side_ + tol) return std::nullopt;
  const double cell = side_ / static_cast<double>(bucket_n_);
  const auto ci = std::min(bucket_n_ - 1, static_cast<std::size_t>(std::max(0.0, p.x / cell)));
  const auto cj = std::min(bucket_n_ - 1, static_cast<std::size_t>(std::max(0.0, p.y / cell)));
  std::optional<std::size_t> best;
  for (auto k : buckets_[cj * bucket_n_ + ci]) {
    if (best && k >= *best) continue;
    const auto& t = elements_[k];
    if (triangle_contains(nodes_[t[0]], nodes_[t[1]], nodes_[t[2]], p)) best = k;
  }
  return best;
}

Mesh build_mesh(double side_mm, std::size_t divisions, std::size_t electrode_count,
                double electrode_width_mm) {
  if (!(side_mm > 0.0)) throw EitError(ErrorCode::kInvalidArgument, "side must be positive");
  if (electrode_count < 4 || electrode_count % 4 != 0) {
    throw EitError(ErrorCode::kInvalidArgument,
                   "electrode count must be a positive multiple of 4");
  }
  if (!(electrode_width_mm > 0.0)) {
    throw EitError(ErrorCode::kInvalidArgument, "electrode width must be positive");
  }
  const std::size_t per_side = electrode_count / 4;
  const double pitch = side_mm / static_cast<double>(per_side);
  if (electrode_width_mm > pitch) {
    throw EitError(ErrorCode::kElectrodeOverlap, "electrodes of this width cannot fit");
  }
  if (divisions < 2) {
    throw EitError(ErrorCode::kMeshResolution, "at least 2 divisions per side are required");
  }

  const std::size_t n = divisions;
  const double h = side_mm / static_cast<double>(n);
  std::vector<Point2> nodes;
  nodes.reserve((n + 1) * (n + 1));
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      // Exact endpoints keep boundary nodes on the boundary lines.
      const double x = i == n ? side_mm : static_cast<double>(i) * h;
      const double y = j == n ? side_mm : static_cast<double>(j) * h;
      nodes.push_back({x, y});
    }
  }
  auto node = [n](std::size_t i, std::size_t j) { return j * (n + 1) + i; };

  std::vector<Triangle> elements;
  elements.reserve(2 * n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      elements.push_back({node(i, j), node(i + 1, j), node(i + 1, j + 1)});
      elements.push_back({node(i, j), node(i + 1, j + 1), node(i, j + 1)});
    }
  }

  // Boundary node at arc parameter step s (0..n) along side `sd`, walking
  // counterclockwise: bottom, right, top, left.
  auto side_node = [&](std::size_t sd, std::size_t s) {
    switch (sd) {
      case 0: return node(s, 0);
      case 1: return node(n, s);
      case 2: return node(n - s, n);
      default: return node(0, n - s);
    }
  };

  std::vector<Electrode> electrodes;
  electrodes.reserve(electrode_count);
  for (std::size_t sd = 0; sd < 4; ++sd) {
    for (std::size_t e = 0; e < per_side; ++e) {
      const double center = (static_cast<double>(e) + 0.5) * pitch;
      const double lo = center - 0.5 * electrode_width_mm;
      const double hi = center + 0.5 * electrode_width_mm;
      Electrode electrode;
      for (std::size_t s = 0; s < n; ++s) {
        const double s0 = static_cast<double>(s) * h;
        const double s1 = static_cast<double>(s + 1) * h;
        const double a = std::max(lo, s0), b = std::min(hi, s1);
        if (b - a <= kGeomTol * h) continue;
        electrode.segments.push_back(
            {side_node(sd, s), side_node(sd, s + 1), std::clamp((a - s0) / h, 0.0, 1.0),
             std::clamp((b - s0) / h, 0.0, 1.0)});
      }
      if (electrode.segments.empty()) {
        throw EitError(ErrorCode::kMeshResolution, "electrode captures no boundary edge");
      }
      electrodes.push_back(std::move(electrode));
    }
  }
  return Mesh(std::move(nodes), std::move(elements), std::move(electrodes), side_mm, divisions);
}

ConductivityField::ConductivityField(std::vector<double> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
      throw EitError(ErrorCode::kNonPositiveConductivity,
                     "conductivity of element " + std::to_string(i) + " is not positive");
    }
  }
}

ConductivityField ConductivityField::scaled(double factor) const {
  std::vector<double> v = values_;
  for (auto& x : v) x *= factor;
  return ConductivityField(std::move(v));
}

ConductivityField ConductivityField::with_value(std::size_t element, double sigma) const {
  std::vector<double> v = values_;
  v.at(element) = sigma;
  return ConductivityField(std::move(v));
}

ConductivityField uniform_field(const Mesh& mesh, double sigma) {
  if (!(sigma > 0.0)) {
    throw EitError(ErrorCode::kNonPositiveConductivity, "uniform conductivity must be positive");
  }
  return ConductivityField(std::vector<double>(mesh.element_count(), sigma));
}

}  // namespace tactile_eit
