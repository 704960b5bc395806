#include "tactile_eit/sensitivity.hpp"

#include "tactile_eit/error.hpp"

namespace tactile_eit {

SensitivityMatrix compute_jacobian(const Mesh& mesh, const ConductivityField& field,
                                   const Protocol& protocol, double current) {
  if (protocol.electrode_count() != mesh.electrode_count()) {
    throw EitError(ErrorCode::kDimensionMismatch, "protocol and mesh electrode counts differ");
  }
  const LinearSystem system(mesh, field);
  const PairPotentials pairs = pair_potentials(system, mesh, protocol);
  const Eigen::MatrixXd& potentials = pairs.values;
  const auto grads = element_gradients(mesh);
  const auto elements = mesh.elements();
  const auto n_el = static_cast<Eigen::Index>(mesh.element_count());
  const auto n_e = potentials.cols();

  // Per-element field gradient for unit current through each pair.
  Eigen::MatrixXd gx(n_el, n_e), gy(n_el, n_e);
  Eigen::VectorXd area(n_el);
  for (Eigen::Index k = 0; k < n_el; ++k) {
    const auto& tri = elements[static_cast<std::size_t>(k)];
    const auto& gk = grads[static_cast<std::size_t>(k)];
    area[k] = mesh.area(static_cast<std::size_t>(k));
    for (Eigen::Index e = 0; e < n_e; ++e) {
      Eigen::Vector2d g = Eigen::Vector2d::Zero();
      for (int i = 0; i < 3; ++i) g += potentials(static_cast<Eigen::Index>(tri[i]), e) * gk[i];
      gx(k, e) = g.x();
      gy(k, e) = g.y();
    }
  }

  SensitivityMatrix j{Eigen::MatrixXd(static_cast<Eigen::Index>(protocol.size()), n_el), field,
                      protocol.id(), mesh.id(), current};
  for (std::size_t p = 0; p < protocol.size(); ++p) {
    const auto& pat = protocol[p];
    const Eigen::Index d = pairs.column(pat.drive_plus, pat.drive_minus);
    const Eigen::Index m = pairs.column(pat.meas_plus, pat.meas_minus);
    const Eigen::ArrayXd dx = gx.col(d), dy = gy.col(d), mx = gx.col(m), my = gy.col(m);
    j.entries.row(static_cast<Eigen::Index>(p)) =
        (-current * area.array() * (dx * mx + dy * my)).matrix().transpose();
  }
  return j;
}

MeasurementFrame predict_delta(const SensitivityMatrix& jacobian,
                               std::span<const double> delta_sigma) {
  if (delta_sigma.size() != jacobian.cols()) {
    throw EitError(ErrorCode::kDimensionMismatch, "conductivity change has the wrong length");
  }
  const Eigen::Map<const Eigen::VectorXd> d(delta_sigma.data(),
                                            static_cast<Eigen::Index>(delta_sigma.size()));
  const Eigen::VectorXd v = jacobian.entries * d;
  return {std::vector<double>(v.begin(), v.end()), jacobian.protocol_id, jacobian.drive_current};
}

}  // namespace tactile_eit
