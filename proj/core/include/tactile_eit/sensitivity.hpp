#pragma once

#include <Eigen/Core>
#include <span>
#include <string>

#include "tactile_eit/forward.hpp"

namespace tactile_eit {

// Linearized map from per-element conductivity change (S/m) to voltage
// change (V); rows follow protocol order, columns element order.
struct SensitivityMatrix {
  Eigen::MatrixXd entries;
  ConductivityField reference_field;
  std::string protocol_id;
  std::string mesh_id;
  double drive_current = kDefaultDriveCurrent;

  std::size_t rows() const { return static_cast<std::size_t>(entries.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(entries.cols()); }
};

// Adjoint-field Jacobian: dV_p/dsigma_k = -I * area_k * grad(u_drive) . grad(u_meas)
// where u_drive and u_meas carry unit current through the pattern's drive and
// measurement pairs. Needs one factorization and one solve per electrode.
SensitivityMatrix compute_jacobian(const Mesh& mesh, const ConductivityField& field,
                                   const Protocol& protocol,
                                   double current = kDefaultDriveCurrent);

MeasurementFrame predict_delta(const SensitivityMatrix& jacobian,
                               std::span<const double> delta_sigma);

}  // namespace tactile_eit
