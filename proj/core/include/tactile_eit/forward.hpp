#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tactile_eit/mesh.hpp"
#include "tactile_eit/protocol.hpp"

namespace tactile_eit {

inline constexpr double kDefaultDriveCurrent = 1e-3;  // amperes

// Per-node potential in volts, grounded at node 0.
struct PotentialField {
  Eigen::VectorXd node_potentials;
};

struct MeasurementFrame {
  std::vector<double> voltages;  // protocol pattern order
  std::string protocol_id;
  double drive_current = kDefaultDriveCurrent;
};

// touched - reference, element-wise. Protocols must match.
MeasurementFrame difference(const MeasurementFrame& touched, const MeasurementFrame& reference);

// Constant P1 basis gradients of each triangle, one per local node (1/mm).
using ElementGradients = std::vector<std::array<Eigen::Vector2d, 3>>;
ElementGradients element_gradients(const Mesh& mesh);

// P1 stiffness for piecewise-constant conductivity with node 0 grounded,
// factorized once (sparse LDLT) and reused for every right-hand side.
class LinearSystem {
 public:
  LinearSystem(const Mesh& mesh, const ConductivityField& field);
  ~LinearSystem();
  LinearSystem(LinearSystem&&) noexcept;
  LinearSystem& operator=(LinearSystem&&) noexcept;

  // Stiffness before grounding: symmetric, positive semidefinite.
  const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }
  std::size_t size() const { return static_cast<std::size_t>(stiffness_.rows()); }
  static constexpr std::size_t kGroundNode = 0;

  // Solves the grounded system; the ground entry of `rhs` is ignored.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

 private:
  struct Factor;
  Eigen::SparseMatrix<double> stiffness_;
  std::unique_ptr<Factor> factor_;
};

LinearSystem assemble_system(const Mesh& mesh, const ConductivityField& field);

// Nodal load of a unit current spread uniformly over electrode `e`
// (integral of the P1 basis over the covered segments / electrode length).
// Entries sum to one. Also the readout weights for the electrode's mean
// potential.
Eigen::VectorXd electrode_load(const Mesh& mesh, std::size_t electrode);

// +current on `plus`, -current on `minus`.
Eigen::VectorXd drive_load(const Mesh& mesh, std::size_t plus, std::size_t minus,
                           double current);

PotentialField solve_drive(const LinearSystem& system, const Mesh& mesh, std::size_t drive_plus,
                           std::size_t drive_minus, double current = kDefaultDriveCurrent);

// Potentials for unit current through each distinct (plus, minus) pair that
// drives or measures in `protocol`, one column per pair. The loads are net
// zero, so the ground only fixes the constant and no point sink enters the
// field.
struct PairPotentials {
  std::map<std::pair<std::size_t, std::size_t>, Eigen::Index> columns;
  Eigen::MatrixXd values;

  Eigen::Index column(std::size_t plus, std::size_t minus) const;
};

PairPotentials pair_potentials(const LinearSystem& system, const Mesh& mesh,
                               const Protocol& protocol);

MeasurementFrame simulate_frame(const Mesh& mesh, const ConductivityField& field,
                                const Protocol& protocol, double current = kDefaultDriveCurrent);

// Zero-mean Gaussian noise with standard deviation chosen so that
// 10 log10(mean(v^2) / sigma^2) = snr_db. snr_db = +inf is a passthrough.
MeasurementFrame add_noise(const MeasurementFrame& frame, double snr_db, std::uint64_t seed);

}  // namespace tactile_eit
