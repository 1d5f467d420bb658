#ifndef LSVAR_ESTIMATORS_HPP
#define LSVAR_ESTIMATORS_HPP

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsvar/common.hpp"
#include "lsvar/kernel.hpp"
#include "lsvar/simulator.hpp"

namespace lsvar {

enum class Method { YuleWalker, LocalConstant, LocalLinear, Ridge };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view name);

/// Estimate of B(u) = [m(u) | A(u)] at one rescaled-time point.
///
/// For the weighted least-squares methods the fit also carries the
/// centered-moment decomposition: A = G1 G0^{-1}, m = mu1 - A mu0, where
/// mu0, mu1 are weighted means of the lagged and current observations and
/// G0, G1 their weighted (cross-)covariances. For Yule-Walker, m is zero,
/// mu0/mu1 are empty and G0, G1 hold the uncentered lag-0 and lag-1 moments.
template <typename Scalar = double>
struct LocalFit {
  Scalar u{};
  Method method = Method::LocalConstant;
  Matrix<Scalar> B_hat;
  Vector<Scalar> m;
  Matrix<Scalar> A;
  Vector<Scalar> mu0;
  Vector<Scalar> mu1;
  Matrix<Scalar> G0;
  Matrix<Scalar> G1;
  /// 1 / rcond of the matrix that was factored to produce B_hat.
  Scalar condition{};
  /// Relative Frobenius gap between B_hat and the [mu1 - A mu0 | G1 G0^{-1}] route.
  Scalar identity_gap{};
  /// Ridge only: Frobenius norm of the full stacked (level and slope) coefficient.
  Scalar penalized_norm{};

  bool has_mean_terms() const { return mu1.size() > 0; }
};

namespace detail {

template <typename Scalar>
Eigen::LLT<Matrix<Scalar>> factor_checked(const Matrix<Scalar>& gram, ErrorCode code, const char* what, Scalar u,
                                          Scalar* condition = nullptr) {
  Eigen::LLT<Matrix<Scalar>> llt(gram);
  const Scalar rcond = llt.info() == Eigen::Success ? llt.rcond() : Scalar(0);
  if (!(rcond >= Scalar(kSingularRcond))) {
    throw Error(code, std::string(what) + " is numerically singular at u=" + std::to_string(static_cast<double>(u)));
  }
  if (condition) *condition = Scalar(1) / rcond;
  return llt;
}

/// Support-restricted rows of a T x k matrix.
template <typename Scalar>
auto support_rows(const Matrix<Scalar>& m, const WeightVector<Scalar>& w) {
  return m.middleRows(w.support_begin, w.support_size());
}

/// L^T K R as a weighted sum over the kernel support.
template <typename Scalar>
Matrix<Scalar> kernel_cross(const WeightVector<Scalar>& w, const Matrix<Scalar>& left, const Matrix<Scalar>& right) {
  const auto ws = w.weights.segment(w.support_begin, w.support_size());
  return support_rows(left, w).transpose() * ws.asDiagonal() * support_rows(right, w);
}

/// Closed-form solution shared by the local-constant and local-linear fits,
/// given zz = Z0^T Omega Z0 and xz = X1^T Omega Z0 for a weighting Omega.
template <typename Scalar>
LocalFit<Scalar> solve_from_moments(const Matrix<Scalar>& zz, const Matrix<Scalar>& xz, Scalar u, Method method) {
  const Eigen::Index r = xz.rows();
  LocalFit<Scalar> fit;
  fit.u = u;
  fit.method = method;

  const auto llt = factor_checked<Scalar>(zz, ErrorCode::SingularGram, "Z0' W Z0", u, &fit.condition);
  fit.B_hat = llt.solve(xz.transpose()).transpose();
  fit.m = fit.B_hat.col(0);
  fit.A = fit.B_hat.rightCols(r);

  const Scalar total = zz(0, 0);
  const auto cross0 = zz.col(0).tail(r);
  fit.mu0 = cross0 / total;
  fit.mu1 = xz.col(0) / total;
  fit.G0 = zz.bottomRightCorner(r, r) - cross0 * cross0.transpose() / total;
  fit.G1 = xz.rightCols(r) - xz.col(0) * cross0.transpose() / total;

  Eigen::LLT<Matrix<Scalar>> g0(fit.G0);
  if (g0.info() == Eigen::Success) {
    Matrix<Scalar> decomposed(r, r + 1);
    decomposed.rightCols(r) = g0.solve(fit.G1.transpose()).transpose();
    decomposed.col(0) = fit.mu1 - decomposed.rightCols(r) * fit.mu0;
    const Scalar scale = std::max(fit.B_hat.norm(), std::numeric_limits<Scalar>::min());
    fit.identity_gap = (decomposed - fit.B_hat).norm() / scale;
  } else {
    fit.identity_gap = std::numeric_limits<Scalar>::infinity();
  }
  return fit;
}

}  // namespace detail

/// Localized Yule-Walker estimate A(u) = [X1^T K X0][X0^T K X0]^{-1}.
template <typename Scalar>
LocalFit<Scalar> yule_walker_local(const DesignMatrices<Scalar>& design, const WeightVector<Scalar>& weights) {
  const Eigen::Index r = design.r();
  LocalFit<Scalar> fit;
  fit.u = weights.u;
  fit.method = Method::YuleWalker;
  fit.G0 = detail::kernel_cross(weights, design.lagged, design.lagged);
  fit.G1 = detail::kernel_cross(weights, design.current, design.lagged);
  const auto llt =
      detail::factor_checked<Scalar>(fit.G0, ErrorCode::SingularGram, "X0' K X0", weights.u, &fit.condition);
  fit.A = llt.solve(fit.G1.transpose()).transpose();
  fit.m = Vector<Scalar>::Zero(r);
  fit.B_hat.resize(r, r + 1);
  fit.B_hat << fit.m, fit.A;
  return fit;
}

template <typename Scalar>
LocalFit<Scalar> yule_walker_local(const DesignMatrices<Scalar>& design, const KernelSpec& kernel, Scalar u) {
  return yule_walker_local(design, make_weights<Scalar>(kernel, design.T(), u));
}

/// Local-constant weighted least squares: B(u) = X1^T K Z0 (Z0^T K Z0)^{-1}.
template <typename Scalar>
LocalFit<Scalar> local_constant_fit(const DesignMatrices<Scalar>& design, const WeightVector<Scalar>& weights) {
  const Matrix<Scalar> zz = detail::kernel_cross(weights, design.regressors, design.regressors);
  const Matrix<Scalar> xz = detail::kernel_cross(weights, design.current, design.regressors);
  return detail::solve_from_moments<Scalar>(zz, xz, weights.u, Method::LocalConstant);
}

template <typename Scalar>
LocalFit<Scalar> local_constant_fit(const DesignMatrices<Scalar>& design, const KernelSpec& kernel, Scalar u) {
  return local_constant_fit(design, make_weights<Scalar>(kernel, design.T(), u));
}

/// Factored form of the local-linear weighting matrix
///   W = K - Q S^{-1} Q^T,  Q = K D Z0,  S = Z0^T D K D Z0,
/// with K the kernel weights and D the offsets t/T - u, both diagonal.
/// Q is stored only over the kernel support; no T x T matrix is formed.
template <typename Scalar = double>
struct LocalLinearWeights {
  WeightVector<Scalar> base;
  /// Rows base.support_begin .. support_end-1 of Q.
  Matrix<Scalar> correction;
  Matrix<Scalar> slope_gram;
  Eigen::LLT<Matrix<Scalar>> slope_factor;

  Scalar u() const { return base.u; }

  /// W v for a length-T vector, in O(T r).
  Vector<Scalar> apply(const Vector<Scalar>& v) const {
    const Eigen::Index b = base.support_begin;
    const Eigen::Index n = base.support_size();
    Vector<Scalar> out = Vector<Scalar>::Zero(v.size());
    const Vector<Scalar> coef = slope_factor.solve(correction.transpose() * v.segment(b, n));
    out.segment(b, n) = base.weights.segment(b, n).cwiseProduct(v.segment(b, n)) - correction * coef;
    return out;
  }

  /// W M for a T x k matrix.
  Matrix<Scalar> apply(const Matrix<Scalar>& v) const {
    Matrix<Scalar> out(v.rows(), v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) out.col(j) = apply(Vector<Scalar>(v.col(j)));
    return out;
  }

  /// L^T W R for T x a and T x b matrices.
  Matrix<Scalar> cross(const Matrix<Scalar>& left, const Matrix<Scalar>& right) const {
    const auto ls = detail::support_rows(left, base);
    const auto rs = detail::support_rows(right, base);
    const Matrix<Scalar> ql = correction.transpose() * ls;
    const Matrix<Scalar> qr = correction.transpose() * rs;
    return detail::kernel_cross(base, left, right) - ql.transpose() * slope_factor.solve(qr);
  }
};

template <typename Scalar>
LocalLinearWeights<Scalar> local_linear_weights(const DesignMatrices<Scalar>& design, WeightVector<Scalar> weights) {
  LocalLinearWeights<Scalar> lw;
  const Eigen::Index b = weights.support_begin;
  const Eigen::Index n = weights.support_size();
  const Vector<Scalar> wd = weights.weights.segment(b, n).cwiseProduct(weights.deltas.segment(b, n));
  const auto z = design.regressors.middleRows(b, n);
  lw.correction = wd.asDiagonal() * z;
  const Vector<Scalar> d = weights.deltas.segment(b, n);
  lw.slope_gram = lw.correction.transpose() * d.asDiagonal() * z;
  lw.slope_factor = detail::factor_checked<Scalar>(lw.slope_gram, ErrorCode::SingularCorrection, "Z0' D K D Z0",
                                                   weights.u);
  lw.base = std::move(weights);
  return lw;
}

template <typename Scalar>
LocalLinearWeights<Scalar> local_linear_weights(const DesignMatrices<Scalar>& design, const KernelSpec& kernel,
                                                Scalar u) {
  return local_linear_weights(design, make_weights<Scalar>(kernel, design.T(), u));
}

/// Local-linear weighted least squares: B(u) = X1^T W Z0 (Z0^T W Z0)^{-1}.
template <typename Scalar>
LocalFit<Scalar> local_linear_fit(const DesignMatrices<Scalar>& design, const LocalLinearWeights<Scalar>& lw) {
  const Matrix<Scalar> zz = lw.cross(design.regressors, design.regressors);
  const Matrix<Scalar> xz = lw.cross(design.current, design.regressors);
  return detail::solve_from_moments<Scalar>(zz, xz, lw.u(), Method::LocalLinear);
}

template <typename Scalar>
LocalFit<Scalar> local_linear_fit(const DesignMatrices<Scalar>& design, const WeightVector<Scalar>& weights) {
  return local_linear_fit(design, local_linear_weights(design, weights));
}

template <typename Scalar>
LocalFit<Scalar> local_linear_fit(const DesignMatrices<Scalar>& design, const KernelSpec& kernel, Scalar u) {
  return local_linear_fit(design, make_weights<Scalar>(kernel, design.T(), u));
}

/// Kernel-weighted ridge on the stacked design [Z0 | D Z0]:
///   C = X1^T K Zs (Zs^T K Zs + lambda I)^{-1},
/// reporting the level block (first r+1 columns) as [m | A]. lambda = 0
/// reproduces the local-linear fit.
template <typename Scalar>
LocalFit<Scalar> ridge_fit(const DesignMatrices<Scalar>& design, const WeightVector<Scalar>& weights, Scalar lambda) {
  if (!(lambda >= Scalar(0))) throw Error(ErrorCode::InvalidArgument, "ridge lambda must be >= 0");
  const Eigen::Index r = design.r();
  const Eigen::Index p = r + 1;
  const Eigen::Index b = weights.support_begin;
  const Eigen::Index n = weights.support_size();
  const auto w = weights.weights.segment(b, n);
  const auto z = design.regressors.middleRows(b, n);

  Matrix<Scalar> stacked(n, 2 * p);
  stacked.leftCols(p) = z;
  stacked.rightCols(p) = weights.deltas.segment(b, n).asDiagonal() * z;
  Matrix<Scalar> gram = stacked.transpose() * w.asDiagonal() * stacked;
  gram.diagonal().array() += lambda;
  const Matrix<Scalar> cross = design.current.middleRows(b, n).transpose() * w.asDiagonal() * stacked;

  LocalFit<Scalar> fit;
  fit.u = weights.u;
  fit.method = Method::Ridge;
  Eigen::LLT<Matrix<Scalar>> llt(gram);
  const Scalar rcond = llt.info() == Eigen::Success ? llt.rcond() : Scalar(0);
  if (!(rcond >= Scalar(kSingularRcond))) {
    // With lambda > 0 the system is positive definite in exact arithmetic; only
    // the unpenalized problem is reported as singular.
    if (lambda == Scalar(0) || llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularGram,
                  "stacked Gram is numerically singular at u=" + std::to_string(static_cast<double>(weights.u)));
    }
  }
  fit.condition = Scalar(1) / rcond;
  const Matrix<Scalar> coef = llt.solve(cross.transpose()).transpose();
  fit.penalized_norm = coef.norm();
  fit.B_hat = coef.leftCols(p);
  fit.m = fit.B_hat.col(0);
  fit.A = fit.B_hat.rightCols(r);
  return fit;
}

template <typename Scalar>
LocalFit<Scalar> ridge_fit(const DesignMatrices<Scalar>& design, const KernelSpec& kernel, Scalar u, Scalar lambda) {
  return ridge_fit(design, make_weights<Scalar>(kernel, design.T(), u), lambda);
}

enum class MeanMode {
  /// The weighted mean mu1 stored in the fit.
  Smoother,
  /// (I - A)^{-1} m, the fixed point of the local recursion.
  Stationary,
};

template <typename Scalar>
Vector<Scalar> recover_mean(const LocalFit<Scalar>& fit, MeanMode mode = MeanMode::Smoother) {
  if (mode == MeanMode::Smoother) {
    if (!fit.has_mean_terms()) throw Error(ErrorCode::InvalidArgument, "fit carries no weighted mean");
    return fit.mu1;
  }
  const Eigen::Index r = fit.A.rows();
  const Matrix<Scalar> lhs = Matrix<Scalar>::Identity(r, r) - fit.A;
  Eigen::FullPivLU<Matrix<Scalar>> lu(lhs);
  if (!lu.isInvertible() || lu.rcond() < Scalar(kSingularRcond)) {
    throw Error(ErrorCode::SingularIminusA, "I - A is singular at u=" + std::to_string(static_cast<double>(fit.u)));
  }
  return lu.solve(fit.m);
}

/// Outcome of one grid point: either a fit or the reason it failed.
struct PointFailure {
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;
};

template <typename Scalar = double>
struct GridFit {
  std::optional<LocalFit<Scalar>> fit;
  std::optional<PointFailure> failure;

  bool ok() const { return fit.has_value(); }
};

template <typename Scalar = double>
struct FitGrid {
  std::vector<Scalar> grid;
  std::vector<GridFit<Scalar>> fits;
  KernelSpec kernel;
  Method method = Method::LocalConstant;
  Scalar lambda{};
  /// Dimension r of the fitted panel.
  int r = 0;

  std::size_t failure_count() const {
    std::size_t n = 0;
    for (const auto& f : fits) n += f.ok() ? 0 : 1;
    return n;
  }
};

template <typename Scalar>
LocalFit<Scalar> fit_point(const DesignMatrices<Scalar>& design, const KernelSpec& kernel, Method method, Scalar u,
                           Scalar lambda = Scalar(0)) {
  const auto weights = make_weights<Scalar>(kernel, design.T(), u);
  switch (method) {
    case Method::YuleWalker: return yule_walker_local(design, weights);
    case Method::LocalConstant: return local_constant_fit(design, weights);
    case Method::LocalLinear: return local_linear_fit(design, weights);
    case Method::Ridge: return ridge_fit(design, weights, lambda);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

/// Throws EmptyGrid for an empty grid and InvalidArgument for a grid that is
/// not strictly increasing inside (0,1).
template <typename Scalar>
void check_grid(const std::vector<Scalar>& grid) {
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "evaluation grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > Scalar(0) && grid[i] < Scalar(1))) {
      throw Error(ErrorCode::InvalidArgument, "grid points must lie in (0,1)");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) throw Error(ErrorCode::InvalidArgument, "grid must be strictly increasing");
  }
}

/// Pointwise fits over a grid; a failure at one u is recorded, not thrown.
template <typename Scalar>
FitGrid<Scalar> fit_grid(const DesignMatrices<Scalar>& design, const KernelSpec& kernel, Method method,
                         const std::vector<Scalar>& grid, Scalar lambda = Scalar(0)) {
  check_grid(grid);
  FitGrid<Scalar> out;
  out.grid = grid;
  out.kernel = kernel;
  out.method = method;
  out.lambda = lambda;
  out.r = static_cast<int>(design.lagged.cols());
  out.fits.reserve(grid.size());
  for (Scalar u : grid) {
    GridFit<Scalar> point;
    try {
      point.fit = fit_point(design, kernel, method, u, lambda);
    } catch (const Error& e) {
      point.failure = PointFailure{e.code(), e.what()};
    }
    out.fits.push_back(std::move(point));
  }
  return out;
}

template <typename Scalar = double>
FitGrid<Scalar> fit_grid(const Panel& panel, const KernelSpec& kernel, Method method, const std::vector<Scalar>& grid,
                         Scalar lambda = Scalar(0)) {
  return fit_grid(build_design<Scalar>(panel), kernel, method, grid, lambda);
}

/// u = t/T on the interior grid t = 1..T-1. Kernel-constant methods
/// (Yule-Walker, local constant) are restricted to t = ceil(hT)..floor((1-h)T)
/// unless `include_boundary` is set.
std::vector<double> default_grid(int T, double bandwidth, Method method, bool include_boundary = false);

/// Long-format CSV "u,method,entry,row,col,value" (1-based row/col, entries
/// m, A, mu0, mu1; 17 significant digits). Failed grid points are skipped.
void write_fit_grid_csv(std::ostream& out, const FitGrid<double>& grid);
void write_fit_grid_csv(const std::string& path, const FitGrid<double>& grid);

inline std::string_view to_string(Method method) {
  switch (method) {
    case Method::YuleWalker: return "yule_walker";
    case Method::LocalConstant: return "local_constant";
    case Method::LocalLinear: return "local_linear";
    case Method::Ridge: return "ridge";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name) {
  if (name == "yule_walker") return Method::YuleWalker;
  if (name == "local_constant") return Method::LocalConstant;
  if (name == "local_linear") return Method::LocalLinear;
  if (name == "ridge") return Method::Ridge;
  return std::nullopt;
}

}  // namespace lsvar

#endif  // LSVAR_ESTIMATORS_HPP
