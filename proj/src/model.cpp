#include "lsvar/model.hpp"

#include <cmath>
#include <numbers>

namespace lsvar {

namespace {

constexpr double kPi = std::numbers::pi;

MatrixXd zero_mean_r6_var(const BuiltinDesign& d, double u) {
  MatrixXd a(6, 6);
  // Two blocks of three rows, anchored at j = 1 and j = 4 (1-based).
  for (int j : {1, 4}) {
    const double sj4 = std::sqrt(j + 4.0);
    for (int k = 1; k <= 6; ++k) {
      const double scale = 1.0 / std::log(k + 3.0);
      a(j - 1, k - 1) = d.a1 * std::sqrt(j + 3.0) * scale * std::sin(4.0 * kPi * u * sj4 / std::log(k + 4.0));
      a(j, k - 1) = d.a1 * std::sqrt(j + 2.0) * scale * std::cos(2.0 * kPi * u * sj4 / std::log(k + 2.0));
      a(j + 1, k - 1) = d.a2 * std::sqrt(j + 1.0) * scale * std::sin(kPi * u * sj4 / std::log(k + 2.0));
    }
  }
  return a;
}

MatrixXd mean_r3_var(const BuiltinDesign& d, double u) {
  MatrixXd a(3, 3);
  const double s7 = std::sqrt(7.0);
  for (int k = 1; k <= 3; ++k) {
    const double scale = 1.0 / std::log(k + 3.0);
    a(0, k - 1) = d.a1 * std::sqrt(6.0) * scale * std::sin(1.2 + 2.0 * kPi * u * s7 / std::log(k + 4.0));
    a(1, k - 1) = d.a1 * std::sqrt(5.0) * scale * std::cos(1.2 + 2.0 * kPi * u * s7 / std::log(k + 2.0));
    a(2, k - 1) = d.a2 * 2.0 * scale * std::sin(1.2 + kPi * u * s7 / std::log(k + 2.0));
  }
  return a;
}

VectorXd mean_r3_mean(const BuiltinDesign& d, double u) {
  VectorXd mu(3);
  for (int k = 0; k < 3; ++k) {
    mu(k) = std::sqrt(6.0) * std::sin(kPi * d.omega[k] * u - d.phi[k]);
  }
  return mu;
}

}  // namespace

void ModelSpec::check() const {
  if (r < 1) throw Error(ErrorCode::InvalidArgument, "model dimension must be >= 1");
  if (!mean_curve || !var_curve) throw Error(ErrorCode::InvalidArgument, "model curves are not set");
  if (innovation_cov.rows() != r || innovation_cov.cols() != r) {
    throw Error(ErrorCode::InvalidArgument, "innovation covariance must be r x r");
  }
  if ((innovation_cov - innovation_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "innovation covariance is not symmetric");
  }
  Eigen::LLT<MatrixXd> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "innovation covariance is not positive definite");
  }
}

BuiltinDesign BuiltinDesign::zero_mean_r6() {
  BuiltinDesign d;
  d.tag = DesignTag::ZeroMeanR6;
  d.a1 = 0.2;
  d.a2 = 0.1;
  d.T = 800;
  return d;
}

BuiltinDesign BuiltinDesign::mean_r3() {
  BuiltinDesign d;
  d.tag = DesignTag::MeanR3;
  d.a1 = 0.3;
  d.a2 = 0.2;
  d.T = 600;
  for (int k = 1; k <= 3; ++k) {
    d.omega.push_back(0.5 + k);
    d.phi.push_back(0.2 + k / 3.0);
  }
  return d;
}

DesignCurves builtin_curves(const BuiltinDesign& design, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw Error(ErrorCode::InvalidArgument, "u must lie in [0,1]");
  if (design.tag == DesignTag::ZeroMeanR6) {
    return {VectorXd::Zero(6), zero_mean_r6_var(design, u)};
  }
  if (design.omega.size() != 3 || design.phi.size() != 3) {
    throw Error(ErrorCode::InvalidArgument, "mean_r3 design needs three (omega, phi) pairs");
  }
  return {mean_r3_mean(design, u), mean_r3_var(design, u)};
}

ModelSpec make_builtin_spec(const BuiltinDesign& design) {
  ModelSpec spec;
  spec.r = design.dimension();
  spec.mean_curve = [design](double u) { return builtin_curves(design, u).mean; };
  spec.var_curve = [design](double u) { return builtin_curves(design, u).var; };
  spec.innovation_cov = MatrixXd::Identity(spec.r, spec.r);
  spec.tag = design.tag == DesignTag::ZeroMeanR6 ? "builtin:zero_mean_r6" : "builtin:mean_r3";
  spec.default_T = design.T;
  return spec;
}

ModelSpec make_tabulated_spec(const MatrixXd& table, MatrixXd innovation_cov) {
  const Eigen::Index cols = table.cols();
  int r = 0;
  while (1 + r + r * r < cols) ++r;
  if (r < 1 || 1 + r + r * r != cols) {
    throw Error(ErrorCode::InvalidArgument,
                "curve table needs 1 + r + r*r columns, got " + std::to_string(cols));
  }
  if (table.rows() < 2) throw Error(ErrorCode::InvalidArgument, "curve table needs at least two rows");
  for (Eigen::Index i = 1; i < table.rows(); ++i) {
    if (!(table(i, 0) > table(i - 1, 0))) {
      throw Error(ErrorCode::InvalidArgument, "curve table u column must be strictly increasing");
    }
  }
  if (!table.allFinite()) throw Error(ErrorCode::InvalidArgument, "curve table has non-finite entries");

  // Row of the table at u, linear in u between knots and flat beyond the ends.
  auto row_at = [table](double u) -> VectorXd {
    const Eigen::Index n = table.rows();
    if (u <= table(0, 0)) return table.row(0).transpose();
    if (u >= table(n - 1, 0)) return table.row(n - 1).transpose();
    Eigen::Index hi = 1;
    while (table(hi, 0) < u) ++hi;
    const double t = (u - table(hi - 1, 0)) / (table(hi, 0) - table(hi - 1, 0));
    return ((1.0 - t) * table.row(hi - 1) + t * table.row(hi)).transpose();
  };

  ModelSpec spec;
  spec.r = r;
  spec.mean_curve = [row_at, r](double u) -> VectorXd { return row_at(u).segment(1, r); };
  spec.var_curve = [row_at, r](double u) -> MatrixXd {
    const VectorXd row = row_at(u);
    MatrixXd a(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) a(i, j) = row(1 + r + i * r + j);
    return a;
  };
  spec.innovation_cov = innovation_cov.size() == 0 ? MatrixXd::Identity(r, r) : std::move(innovation_cov);
  spec.tag = "custom";
  return spec;
}

StabilityReport validate_stability(const ModelSpec& spec, const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "stability grid is empty");
  StabilityReport report;
  for (double u : grid) {
    if (!(u > 0.0 && u < 1.0)) throw Error(ErrorCode::InvalidArgument, "stability grid points must lie in (0,1)");
    const double rho = spectral_radius(spec.var_curve(u));
    if (rho > report.max_radius || u == grid.front()) {
      report.max_radius = rho;
      report.argmax_u = u;
    }
  }
  report.pass = report.max_radius < 1.0;
  return report;
}

std::vector<double> default_stability_grid() {
  std::vector<double> grid;
  grid.reserve(199);
  for (int k = 1; k <= 199; ++k) grid.push_back(k / 200.0);
  return grid;
}

}  // namespace lsvar
