#include "tactile_eit/inverse.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <random>

#include "tactile_eit/error.hpp"

namespace tactile_eit {

namespace {

Eigen::VectorXd to_vector(const MeasurementFrame& frame) {
  return Eigen::Map<const Eigen::VectorXd>(frame.voltages.data(),
                                           static_cast<Eigen::Index>(frame.voltages.size()));
}

void check_dims(const Eigen::MatrixXd& j, const Eigen::VectorXd& b) {
  if (j.rows() != b.size()) {
    throw EitError(ErrorCode::kDimensionMismatch,
                   "voltage vector has " + std::to_string(b.size()) + " entries for " +
                       std::to_string(j.rows()) + " Jacobian rows");
  }
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

ReconstructionImage make_image(const Eigen::VectorXd& x, const std::string& mesh_id) {
  return {std::vector<double>(x.begin(), x.end()), mesh_id, false, 0.0};
}

}  // namespace

const char* to_string(Method m) { return m == Method::kTikhonov ? "tikhonov" : "l1"; }

const char* to_string(LambdaScaling s) {
  return s == LambdaScaling::kAbsolute ? "absolute" : "spectral";
}

Method parse_method(const std::string& s) {
  if (s == "tikhonov") return Method::kTikhonov;
  if (s == "l1") return Method::kL1;
  throw EitError(ErrorCode::kInvalidArgument, "unknown reconstruction method '" + s + "'");
}

const char* to_string(Prior p) { return p == Prior::kIdentity ? "identity" : "sensitivity"; }

Prior parse_prior(const std::string& s) {
  if (s == "identity") return Prior::kIdentity;
  if (s == "sensitivity") return Prior::kSensitivity;
  throw EitError(ErrorCode::kInvalidArgument, "unknown prior '" + s + "'");
}

LambdaScaling parse_lambda_scaling(const std::string& s) {
  if (s == "absolute") return LambdaScaling::kAbsolute;
  if (s == "spectral") return LambdaScaling::kSpectral;
  throw EitError(ErrorCode::kInvalidArgument, "unknown lambda scaling '" + s + "'");
}

void ReconstructionParams::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw EitError(ErrorCode::kInvalidArgument, "lambda must be finite and non-negative");
  }
  if (iterations < 1) throw EitError(ErrorCode::kInvalidArgument, "iterations must be >= 1");
}

ReconstructionParams ReconstructionParams::tikhonov(double lambda, LambdaScaling s, Prior prior) {
  return {Method::kTikhonov, lambda, kDefaultL1Iterations, s, prior};
}

ReconstructionParams ReconstructionParams::l1(double lambda, int iterations, LambdaScaling s,
                                              Prior prior) {
  return {Method::kL1, lambda, iterations, s, prior};
}

Eigen::VectorXd column_weights(const Eigen::MatrixXd& j, Prior prior) {
  if (prior == Prior::kIdentity || j.cols() == 0) return Eigen::VectorXd::Ones(j.cols());
  const Eigen::VectorXd norms = j.colwise().norm().transpose();
  const double max_norm = norms.maxCoeff();
  Eigen::VectorXd w(norms.size());
  for (Eigen::Index k = 0; k < norms.size(); ++k) {
    w[k] = norms[k] > 0.0 ? max_norm / norms[k] : 0.0;
  }
  return w;
}

double effective_lambda(const Eigen::MatrixXd& j, const ReconstructionParams& params) {
  params.validate();
  if (params.lambda_scaling == LambdaScaling::kAbsolute) return params.lambda;
  // diag(J^T J) = squared column norms.
  const double max_diag = j.size() == 0 ? 0.0 : j.colwise().squaredNorm().maxCoeff();
  return params.lambda * max_diag;
}

Eigen::VectorXd solve_tikhonov(const Eigen::MatrixXd& j, const Eigen::VectorXd& b, double lambda) {
  check_dims(j, b);
  if (lambda < 0.0) throw EitError(ErrorCode::kInvalidArgument, "lambda must be non-negative");
  if (lambda == 0.0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(j);
    if (qr.rank() < j.cols()) {
      throw EitError(ErrorCode::kIllPosed,
                     "unregularized problem is rank deficient; use lambda > 0");
    }
    return qr.solve(b);
  }
  if (j.rows() < j.cols()) {
    // (J^T J + lambda I)^{-1} J^T = J^T (J J^T + lambda I)^{-1}
    Eigen::MatrixXd gram = j * j.transpose();
    gram.diagonal().array() += lambda;
    return j.transpose() * gram.ldlt().solve(b);
  }
  Eigen::MatrixXd normal = j.transpose() * j;
  normal.diagonal().array() += lambda;
  return normal.ldlt().solve(j.transpose() * b);
}

double largest_eigenvalue(const Eigen::MatrixXd& j, int max_iterations, double tolerance) {
  // J J^T and J^T J share their nonzero spectrum; iterate on the smaller one.
  const bool wide = j.rows() < j.cols();
  const Eigen::MatrixXd gram = wide ? Eigen::MatrixXd(j * j.transpose())
                                    : Eigen::MatrixXd(j.transpose() * j);
  if (gram.size() == 0) return 0.0;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.5, 1.5);
  Eigen::VectorXd v(gram.rows());
  for (auto& x : v) x = uni(rng);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd w = gram * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const bool converged = std::abs(next - estimate) <= tolerance * std::abs(next);
    estimate = next;
    if (converged) break;
  }
  return estimate;
}

double l1_objective(const Eigen::MatrixXd& j, const Eigen::VectorXd& b, const Eigen::VectorXd& x,
                    double lambda) {
  return 0.5 * (j * x - b).squaredNorm() + lambda * x.lpNorm<1>();
}

Eigen::VectorXd solve_ista(const Eigen::MatrixXd& j, const Eigen::VectorXd& b, double lambda,
                           int iterations, std::vector<double>* objective_trace) {
  return solve_ista(j, b, lambda, iterations, largest_eigenvalue(j), objective_trace);
}

Eigen::VectorXd solve_ista(const Eigen::MatrixXd& j, const Eigen::VectorXd& b, double lambda,
                           int iterations, double lipschitz,
                           std::vector<double>* objective_trace) {
  check_dims(j, b);
  if (iterations < 1) throw EitError(ErrorCode::kInvalidArgument, "iterations must be >= 1");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(j.cols());
  if (objective_trace) objective_trace->clear();
  if (!(lipschitz > 0.0)) {
    // J = 0: every x has the same residual; zero minimizes the penalty.
    if (objective_trace) objective_trace->assign(iterations, l1_objective(j, b, x, lambda));
    return x;
  }
  const double step = 1.0 / lipschitz;
  const double threshold = lambda * step;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = j.transpose() * (j * x - b);
    x -= step * grad;
    for (auto& v : x) v = soft_threshold(v, threshold);
    if (objective_trace) objective_trace->push_back(l1_objective(j, b, x, lambda));
  }
  return x;
}

ReconstructionImage tikhonov_reconstruct(const SensitivityMatrix& jacobian,
                                         const MeasurementFrame& delta_v,
                                         const ReconstructionParams& params) {
  if (params.method != Method::kTikhonov) {
    throw EitError(ErrorCode::kInvalidArgument, "params are not for Tikhonov");
  }
  return Reconstructor(jacobian, params)(delta_v);
}

ReconstructionImage l1_reconstruct(const SensitivityMatrix& jacobian,
                                   const MeasurementFrame& delta_v,
                                   const ReconstructionParams& params) {
  if (params.method != Method::kL1) {
    throw EitError(ErrorCode::kInvalidArgument, "params are not for L1");
  }
  return Reconstructor(jacobian, params)(delta_v);
}

ReconstructionImage reconstruct(const SensitivityMatrix& jacobian, const MeasurementFrame& delta_v,
                                const ReconstructionParams& params) {
  return params.method == Method::kTikhonov ? tikhonov_reconstruct(jacobian, delta_v, params)
                                            : l1_reconstruct(jacobian, delta_v, params);
}

ReconstructionImage postprocess(const ReconstructionImage& image) {
  if (image.postprocessed) return image;
  ReconstructionImage out = image;
  double peak = 0.0;
  for (auto& v : out.values) {
    v = std::max(v, 0.0);
    peak = std::max(peak, v);
  }
  if (peak > 0.0) {
    for (auto& v : out.values) v /= peak;
  }
  out.raw_peak = peak;
  out.postprocessed = true;
  return out;
}

Reconstructor::Reconstructor(const SensitivityMatrix& jacobian, const ReconstructionParams& params)
    : weights_(column_weights(jacobian.entries, params.prior)),
      mesh_id_(jacobian.mesh_id),
      params_(params) {
  j_ = jacobian.entries * weights_.asDiagonal();
  lambda_eff_ = effective_lambda(j_, params_);
  if (params_.method == Method::kL1) {
    lipschitz_ = largest_eigenvalue(j_);
  } else if (lambda_eff_ > 0.0 && j_.rows() < j_.cols()) {
    Eigen::MatrixXd gram = j_ * j_.transpose();
    gram.diagonal().array() += lambda_eff_;
    dual_.compute(gram);
    use_dual_ = true;
  }
}

ReconstructionImage Reconstructor::operator()(const MeasurementFrame& delta_v) const {
  const Eigen::VectorXd b = to_vector(delta_v);
  check_dims(j_, b);
  Eigen::VectorXd x;
  if (params_.method == Method::kL1) {
    x = solve_ista(j_, b, lambda_eff_, params_.iterations, lipschitz_);
  } else if (use_dual_) {
    x = j_.transpose() * dual_.solve(b);
  } else {
    x = solve_tikhonov(j_, b, lambda_eff_);
  }
  return make_image(weights_.cwiseProduct(x), mesh_id_);
}

std::vector<std::vector<double>> rasterize(const ReconstructionImage& image, const Mesh& mesh,
                                           std::size_t resolution) {
  if (image.values.size() != mesh.element_count()) {
    throw EitError(ErrorCode::kDimensionMismatch, "image does not match the mesh");
  }
  if (resolution == 0) throw EitError(ErrorCode::kInvalidArgument, "raster resolution is zero");
  const double px = mesh.side() / static_cast<double>(resolution);
  std::vector<std::vector<double>> grid(resolution, std::vector<double>(resolution, 0.0));
  for (std::size_t r = 0; r < resolution; ++r) {
    const double y = mesh.side() - (static_cast<double>(r) + 0.5) * px;
    for (std::size_t c = 0; c < resolution; ++c) {
      const double x = (static_cast<double>(c) + 0.5) * px;
      if (auto k = mesh.locate_element({x, y})) grid[r][c] = image.values[*k];
    }
  }
  return grid;
}

}  // namespace tactile_eit
