#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <cstddef>
#include <string>
#include <vector>

#include "tactile_eit/sensitivity.hpp"

namespace tactile_eit {

enum class Method { kTikhonov, kL1 };
enum class LambdaScaling { kAbsolute, kSpectral };
// kSensitivity solves in equilibrated variables: every Jacobian column is
// rescaled to the largest column norm, which makes the Tikhonov penalty
// proportional to diag(J^T J) and the L1 penalty sensitivity weighted.
enum class Prior { kIdentity, kSensitivity };

const char* to_string(Method m);
const char* to_string(LambdaScaling s);
const char* to_string(Prior p);
Method parse_method(const std::string& s);
LambdaScaling parse_lambda_scaling(const std::string& s);
Prior parse_prior(const std::string& s);

inline constexpr double kDefaultLambda = 0.01;
inline constexpr int kDefaultL1Iterations = 200;

struct ReconstructionParams {
  Method method = Method::kTikhonov;
  double lambda = kDefaultLambda;
  int iterations = kDefaultL1Iterations;  // L1 only
  // Spectral: lambda is relative to the largest diagonal entry of J^T J.
  LambdaScaling lambda_scaling = LambdaScaling::kSpectral;
  Prior prior = Prior::kSensitivity;

  void validate() const;

  static ReconstructionParams tikhonov(double lambda = kDefaultLambda,
                                       LambdaScaling s = LambdaScaling::kSpectral,
                                       Prior prior = Prior::kSensitivity);
  static ReconstructionParams l1(double lambda = kDefaultLambda,
                                 int iterations = kDefaultL1Iterations,
                                 LambdaScaling s = LambdaScaling::kSpectral,
                                 Prior prior = Prior::kSensitivity);
};

struct ReconstructionImage {
  std::vector<double> values;  // per-element delta sigma, S/m until postprocessed
  std::string mesh_id;
  bool postprocessed = false;
  // Largest clamped value before normalization; set by postprocess().
  double raw_peak = 0.0;
};

// Lambda for the system actually solved (after column weighting).
double effective_lambda(const Eigen::MatrixXd& j, const ReconstructionParams& params);

// Per-column weights w with delta_sigma = w .* x: all ones for kIdentity,
// max_norm / ||J_k|| for kSensitivity (0 for an all-zero column).
Eigen::VectorXd column_weights(const Eigen::MatrixXd& j, Prior prior);

// (J^T J + lambda I) x = J^T b. Uses the m x m dual system when J is wide.
// lambda = 0 requires J to have full column rank.
Eigen::VectorXd solve_tikhonov(const Eigen::MatrixXd& j, const Eigen::VectorXd& b, double lambda);

// Largest eigenvalue of J^T J by power iteration.
double largest_eigenvalue(const Eigen::MatrixXd& j, int max_iterations = 50,
                          double tolerance = 1e-6);

double l1_objective(const Eigen::MatrixXd& j, const Eigen::VectorXd& b, const Eigen::VectorXd& x,
                    double lambda);

// ISTA from zero for exactly `iterations` steps with step 1/L. When
// `objective_trace` is given it receives the objective after every step.
Eigen::VectorXd solve_ista(const Eigen::MatrixXd& j, const Eigen::VectorXd& b, double lambda,
                           int iterations, std::vector<double>* objective_trace = nullptr);
Eigen::VectorXd solve_ista(const Eigen::MatrixXd& j, const Eigen::VectorXd& b, double lambda,
                           int iterations, double lipschitz,
                           std::vector<double>* objective_trace = nullptr);

ReconstructionImage tikhonov_reconstruct(const SensitivityMatrix& jacobian,
                                         const MeasurementFrame& delta_v,
                                         const ReconstructionParams& params);
ReconstructionImage l1_reconstruct(const SensitivityMatrix& jacobian,
                                   const MeasurementFrame& delta_v,
                                   const ReconstructionParams& params);
// Dispatches on params.method.
ReconstructionImage reconstruct(const SensitivityMatrix& jacobian, const MeasurementFrame& delta_v,
                                const ReconstructionParams& params);

// Clamp negatives to zero, then scale so the maximum is 1. Already
// processed images are returned unchanged.
ReconstructionImage postprocess(const ReconstructionImage& image);

// Reconstructor with the per-J work (dual factorization, Lipschitz constant)
// done once, for repeated frames against one Jacobian.
class Reconstructor {
 public:
  Reconstructor(const SensitivityMatrix& jacobian, const ReconstructionParams& params);

  ReconstructionImage operator()(const MeasurementFrame& delta_v) const;
  const ReconstructionParams& params() const { return params_; }

 private:
  Eigen::MatrixXd j_;  // column weighted
  Eigen::VectorXd weights_;
  std::string mesh_id_;
  ReconstructionParams params_;
  double lambda_eff_ = 0.0;
  double lipschitz_ = 0.0;
  bool use_dual_ = false;
  Eigen::LDLT<Eigen::MatrixXd> dual_;
};

// Row-major grid sampled at pixel centers by element lookup; row 0 is the
// top edge (y = side). Pixels outside the mesh read 0.
std::vector<std::vector<double>> rasterize(const ReconstructionImage& image, const Mesh& mesh,
                                           std::size_t resolution);

}  // namespace tactile_eit
