#ifndef LSVAR_SIMULATOR_HPP
#define LSVAR_SIMULATOR_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "lsvar/common.hpp"
#include "lsvar/model.hpp"

namespace lsvar {

/// One sample path X_1..X_T; row t-1 of `values` holds X_t^T. X_0 = 0 is implicit.
struct Panel {
  MatrixXd values;

  Eigen::Index T() const { return values.rows(); }
  Eigen::Index r() const { return values.cols(); }
};

/// Lagged design of a panel:
///   lagged  (X0): rows X_0 .. X_{T-1}
///   current (X1): rows X_1 .. X_T
///   regressors (Z0): [1 | X0]
template <typename Scalar = double>
struct DesignMatrices {
  Matrix<Scalar> lagged;
  Matrix<Scalar> current;
  Matrix<Scalar> regressors;

  Eigen::Index T() const { return current.rows(); }
  Eigen::Index r() const { return current.cols(); }
};

template <typename Scalar = double>
DesignMatrices<Scalar> build_design(const Panel& panel) {
  const Eigen::Index T = panel.T();
  const Eigen::Index r = panel.r();
  if (T < 2 || r < 1) throw Error(ErrorCode::InvalidArgument, "panel needs T >= 2 and r >= 1");
  if (!panel.values.allFinite()) throw Error(ErrorCode::InvalidArgument, "panel has non-finite entries");
  DesignMatrices<Scalar> d;
  d.current = panel.values.cast<Scalar>();
  d.lagged = Matrix<Scalar>::Zero(T, r);
  d.lagged.bottomRows(T - 1) = d.current.topRows(T - 1);
  d.regressors.resize(T, r + 1);
  d.regressors.col(0).setOnes();
  d.regressors.rightCols(r) = d.lagged;
  return d;
}

/// Runs the recursion from X_0 = 0 with explicitly supplied innovations
/// (row t-1 is eps_t). Throws UnstableModel when the path exceeds 1e12.
Panel simulate_with_innovations(const ModelSpec& spec, const MatrixXd& innovations);

/// Draws eps_t ~ N(0, innovation_cov) from a seeded mt19937_64 stream
/// (Boost.Random normal transform) and runs the recursion.
Panel simulate(const ModelSpec& spec, int T, std::uint64_t seed);

/// Message describing the mismatch when mu(0) is not the zero vector; the
/// simulator still starts from X_0 = 0.
std::optional<std::string> initial_mean_warning(const ModelSpec& spec);

/// CSV with header "t,x1,...,xr", 17 significant digits.
void write_panel_csv(std::ostream& out, const Panel& panel);
void write_panel_csv(const std::string& path, const Panel& panel);

/// Parses a panel CSV. `expected_r`, when given, must match the column count.
/// Malformed content throws ConfigError naming `source_name`.
Panel read_panel_csv(std::istream& in, const std::string& source_name, std::optional<int> expected_r = {});
Panel read_panel_csv(const std::string& path, std::optional<int> expected_r = {});

}  // namespace lsvar

#endif  // LSVAR_SIMULATOR_HPP
