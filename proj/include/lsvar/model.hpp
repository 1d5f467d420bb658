#ifndef LSVAR_MODEL_HPP
#define LSVAR_MODEL_HPP

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "lsvar/common.hpp"

namespace lsvar {

/// Data-generating process of a locally stationary VAR(1):
///   X_t - mu(t/T) = A(t/T) (X_{t-1} - mu((t-1)/T)) + eps_t,  eps_t ~ N(0, innovation_cov).
struct ModelSpec {
  int r = 1;
  std::function<VectorXd(double)> mean_curve;
  std::function<MatrixXd(double)> var_curve;
  MatrixXd innovation_cov;
  /// Human-readable tag, e.g. "builtin:mean_r3" or "custom".
  std::string tag = "custom";
  /// Sample size the design was specified with, 0 if none.
  int default_T = 0;

  /// Throws InvalidArgument unless curves are set, shapes agree with r, and
  /// innovation_cov is symmetric positive definite.
  void check() const;
};

enum class DesignTag { ZeroMeanR6, MeanR3 };

/// Parameters of the two built-in simulation designs.
struct BuiltinDesign {
  DesignTag tag = DesignTag::ZeroMeanR6;
  double a1 = 0.2;
  double a2 = 0.1;
  int T = 800;
  /// Per-coordinate frequency and phase of the mean curve (MeanR3 only).
  std::vector<double> omega;
  std::vector<double> phi;

  int dimension() const { return tag == DesignTag::ZeroMeanR6 ? 6 : 3; }

  static BuiltinDesign zero_mean_r6();
  static BuiltinDesign mean_r3();
};

struct DesignCurves {
  VectorXd mean;
  MatrixXd var;
};

DesignCurves builtin_curves(const BuiltinDesign& design, double u);

/// ModelSpec backed by a built-in design, with identity innovation covariance.
ModelSpec make_builtin_spec(const BuiltinDesign& design);

/// ModelSpec whose curves are linearly interpolated from tabulated values.
/// Each row of `table` is (u, mu_1..mu_r, A_11, A_12, ..., A_rr); u strictly increasing.
ModelSpec make_tabulated_spec(const MatrixXd& table, MatrixXd innovation_cov);

/// Largest eigenvalue modulus of a general real square matrix.
template <typename Derived>
typename Derived::RealScalar spectral_radius(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) throw Error(ErrorCode::InvalidArgument, "spectral_radius needs a square matrix");
  if (!a.allFinite()) throw Error(ErrorCode::InvalidArgument, "spectral_radius needs finite entries");
  const Eigen::Index n = a.rows();
  if (n == 0) return 0;
  Eigen::EigenSolver<Matrix<Scalar>> solver;
  solver.setMaxIterations(std::max<Eigen::Index>(10 * n * n, 40 * n));
  solver.compute(a.derived(), false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NoConvergence, "eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

struct StabilityReport {
  double max_radius = 0.0;
  double argmax_u = 0.0;
  bool pass = false;
};

StabilityReport validate_stability(const ModelSpec& spec, const std::vector<double>& grid);

/// u = k/200, k = 1..199.
std::vector<double> default_stability_grid();

}  // namespace lsvar

#endif  // LSVAR_MODEL_HPP
