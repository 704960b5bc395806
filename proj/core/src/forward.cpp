#include "tactile_eit/forward.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <random>

#include "tactile_eit/error.hpp"

namespace tactile_eit {

struct LinearSystem::Factor {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

MeasurementFrame difference(const MeasurementFrame& touched, const MeasurementFrame& reference) {
  if (touched.voltages.size() != reference.voltages.size() ||
      touched.protocol_id != reference.protocol_id) {
    throw EitError(ErrorCode::kDimensionMismatch, "frames come from different protocols");
  }
  MeasurementFrame out = touched;
  for (std::size_t i = 0; i < out.voltages.size(); ++i) {
    out.voltages[i] = touched.voltages[i] - reference.voltages[i];
  }
  return out;
}

ElementGradients element_gradients(const Mesh& mesh) {
  ElementGradients grads(mesh.element_count());
  const auto nodes = mesh.nodes();
  const auto elements = mesh.elements();
  for (std::size_t k = 0; k < elements.size(); ++k) {
    const double inv2a = 1.0 / (2.0 * mesh.area(k));
    for (int i = 0; i < 3; ++i) {
      const Point2 pj = nodes[elements[k][(i + 1) % 3]];
      const Point2 pk = nodes[elements[k][(i + 2) % 3]];
      grads[k][i] = Eigen::Vector2d((pj.y - pk.y) * inv2a, (pk.x - pj.x) * inv2a);
    }
  }
  return grads;
}

LinearSystem::LinearSystem(const Mesh& mesh, const ConductivityField& field)
    : factor_(std::make_unique<Factor>()) {
  if (field.size() != mesh.element_count()) {
    throw EitError(ErrorCode::kDimensionMismatch,
                   "field has " + std::to_string(field.size()) + " values for " +
                       std::to_string(mesh.element_count()) + " elements");
  }
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  const auto grads = element_gradients(mesh);
  const auto elements = mesh.elements();

  std::vector<Eigen::Triplet<double>> full, grounded;
  full.reserve(9 * elements.size());
  grounded.reserve(9 * elements.size() + 1);
  for (std::size_t k = 0; k < elements.size(); ++k) {
    const double scale = field[k] * mesh.area(k);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const auto r = static_cast<Eigen::Index>(elements[k][i]);
        const auto c = static_cast<Eigen::Index>(elements[k][j]);
        const double v = scale * grads[k][i].dot(grads[k][j]);
        full.emplace_back(r, c, v);
        if (r != kGroundNode && c != kGroundNode) grounded.emplace_back(r, c, v);
      }
    }
  }
  grounded.emplace_back(kGroundNode, kGroundNode, 1.0);

  stiffness_.resize(n, n);
  stiffness_.setFromTriplets(full.begin(), full.end());
  Eigen::SparseMatrix<double> g(n, n);
  g.setFromTriplets(grounded.begin(), grounded.end());
  factor_->ldlt.compute(g);
  if (factor_->ldlt.info() != Eigen::Success) {
    throw EitError(ErrorCode::kSingularSystem, "stiffness factorization failed");
  }
}

LinearSystem::~LinearSystem() = default;
LinearSystem::LinearSystem(LinearSystem&&) noexcept = default;
LinearSystem& LinearSystem::operator=(LinearSystem&&) noexcept = default;

namespace {

// rhs - K x accumulated in long double; the ground row is left at zero.
Eigen::MatrixXd extended_residual(const Eigen::SparseMatrix<double>& k, const Eigen::MatrixXd& rhs,
                                  const Eigen::MatrixXd& x) {
  using Wide = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  Wide acc = rhs.cast<long double>();
  for (Eigen::Index c = 0; c < k.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(k, c); it; ++it) {
      const long double a = it.value();
      acc.row(it.row()) -= a * x.row(it.col()).cast<long double>();
    }
  }
  Eigen::MatrixXd r = acc.cast<double>();
  r.row(LinearSystem::kGroundNode).setZero();
  return r;
}

}  // namespace

Eigen::VectorXd LinearSystem::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != stiffness_.rows()) {
    throw EitError(ErrorCode::kDimensionMismatch, "right-hand side has the wrong length");
  }
  return solve(Eigen::MatrixXd(rhs)).col(0);
}

Eigen::MatrixXd LinearSystem::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != stiffness_.rows()) {
    throw EitError(ErrorCode::kDimensionMismatch, "right-hand side has the wrong length");
  }
  Eigen::MatrixXd b = rhs;
  b.row(kGroundNode).setZero();
  Eigen::MatrixXd x = factor_->ldlt.solve(b);
  // One step of refinement with the residual in extended precision. Finite
  // differences of simulated frames need the extra digits.
  if (x.allFinite()) x += factor_->ldlt.solve(extended_residual(stiffness_, b, x));
  if (factor_->ldlt.info() != Eigen::Success || !x.allFinite()) {
    throw EitError(ErrorCode::kSingularSystem, "stiffness solve failed");
  }
  return x;
}

LinearSystem assemble_system(const Mesh& mesh, const ConductivityField& field) {
  return LinearSystem(mesh, field);
}

Eigen::VectorXd electrode_load(const Mesh& mesh, std::size_t electrode) {
  if (electrode >= mesh.electrode_count()) {
    throw EitError(ErrorCode::kInvalidArgument, "electrode index out of range");
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.node_count()));
  const double length = mesh.electrode_length(electrode);
  const auto nodes = mesh.nodes();
  for (const auto& seg : mesh.electrodes()[electrode].segments) {
    const double h = distance(nodes[seg.node_a], nodes[seg.node_b]);
    const double t0 = seg.t_begin, t1 = seg.t_end;
    // Integrals of the hat functions (1 - t) and t over [t0, t1].
    const double w_b = 0.5 * (t1 * t1 - t0 * t0);
    const double w_a = (t1 - t0) - w_b;
    g[static_cast<Eigen::Index>(seg.node_a)] += h * w_a / length;
    g[static_cast<Eigen::Index>(seg.node_b)] += h * w_b / length;
  }
  return g;
}

Eigen::VectorXd drive_load(const Mesh& mesh, std::size_t plus, std::size_t minus,
                           double current) {
  return current * (electrode_load(mesh, plus) - electrode_load(mesh, minus));
}

PotentialField solve_drive(const LinearSystem& system, const Mesh& mesh, std::size_t drive_plus,
                           std::size_t drive_minus, double current) {
  if (drive_plus == drive_minus) {
    throw EitError(ErrorCode::kInvalidArgument, "drive electrodes must differ");
  }
  return {system.solve(drive_load(mesh, drive_plus, drive_minus, current))};
}

Eigen::Index PairPotentials::column(std::size_t plus, std::size_t minus) const {
  const auto it = columns.find({plus, minus});
  if (it == columns.end()) throw EitError(ErrorCode::kInvalidArgument, "electrode pair not solved");
  return it->second;
}

PairPotentials pair_potentials(const LinearSystem& system, const Mesh& mesh,
                               const Protocol& protocol) {
  PairPotentials out;
  for (const auto& p : protocol.patterns()) {
    out.columns.emplace(std::pair{p.drive_plus, p.drive_minus}, 0);
    out.columns.emplace(std::pair{p.meas_plus, p.meas_minus}, 0);
  }
  Eigen::MatrixXd loads(static_cast<Eigen::Index>(mesh.node_count()),
                        static_cast<Eigen::Index>(out.columns.size()));
  Eigen::Index c = 0;
  for (auto& [pair, col] : out.columns) {
    col = c;
    loads.col(c++) = drive_load(mesh, pair.first, pair.second, 1.0);
  }
  out.values = system.solve(loads);
  return out;
}

MeasurementFrame simulate_frame(const Mesh& mesh, const ConductivityField& field,
                                const Protocol& protocol, double current) {
  if (protocol.electrode_count() != mesh.electrode_count()) {
    throw EitError(ErrorCode::kDimensionMismatch, "protocol and mesh electrode counts differ");
  }
  const LinearSystem system(mesh, field);
  const PairPotentials potentials = pair_potentials(system, mesh, protocol);

  // Mean potential of each electrode under each solved pair.
  const auto e = static_cast<Eigen::Index>(mesh.electrode_count());
  Eigen::MatrixXd readout(static_cast<Eigen::Index>(mesh.node_count()), e);
  for (Eigen::Index i = 0; i < e; ++i) {
    readout.col(i) = electrode_load(mesh, static_cast<std::size_t>(i));
  }
  const Eigen::MatrixXd means = readout.transpose() * potentials.values;

  MeasurementFrame frame;
  frame.protocol_id = protocol.id();
  frame.drive_current = current;
  frame.voltages.reserve(protocol.size());
  for (const auto& p : protocol.patterns()) {
    const Eigen::Index d = potentials.column(p.drive_plus, p.drive_minus);
    const double v = means(static_cast<Eigen::Index>(p.meas_plus), d) -
                     means(static_cast<Eigen::Index>(p.meas_minus), d);
    frame.voltages.push_back(current * v);
  }
  return frame;
}

MeasurementFrame add_noise(const MeasurementFrame& frame, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return frame;
  if (!std::isfinite(snr_db)) throw EitError(ErrorCode::kInvalidArgument, "snr must be finite");
  double power = 0.0;
  for (double v : frame.voltages) power += v * v;
  if (frame.voltages.empty() || power == 0.0) return frame;
  power /= static_cast<double>(frame.voltages.size());
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  MeasurementFrame out = frame;
  for (auto& v : out.voltages) v += normal(rng);
  return out;
}

}  // namespace tactile_eit
