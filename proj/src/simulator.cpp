#include "lsvar/simulator.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "lsvar/csv.hpp"

namespace lsvar {

namespace {
constexpr double kExplosionLimit = 1e12;
}

Panel simulate_with_innovations(const ModelSpec& spec, const MatrixXd& innovations) {
  const Eigen::Index T = innovations.rows();
  const int r = spec.r;
  if (T < 2) throw Error(ErrorCode::InvalidArgument, "T must be >= 2");
  if (innovations.cols() != r) throw Error(ErrorCode::InvalidArgument, "innovations must have r columns");
  if (!spec.mean_curve || !spec.var_curve) throw Error(ErrorCode::InvalidArgument, "model curves are not set");

  Panel panel;
  panel.values.resize(T, r);
  VectorXd prev = VectorXd::Zero(r);
  VectorXd prev_mean = spec.mean_curve(0.0);
  const double Td = static_cast<double>(T);
  for (Eigen::Index t = 1; t <= T; ++t) {
    const double u = static_cast<double>(t) / Td;
    const VectorXd mean = spec.mean_curve(u);
    VectorXd x = mean + spec.var_curve(u) * (prev - prev_mean) + innovations.row(t - 1).transpose();
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kExplosionLimit) {
      throw Error(ErrorCode::UnstableModel, "sample path exceeded 1e12 at t=" + std::to_string(t));
    }
    panel.values.row(t - 1) = x.transpose();
    prev = std::move(x);
    prev_mean = mean;
  }
  return panel;
}

Panel simulate(const ModelSpec& spec, int T, std::uint64_t seed) {
  spec.check();
  if (T < 2) throw Error(ErrorCode::InvalidArgument, "T must be >= 2");
  const int r = spec.r;
  const MatrixXd chol = spec.innovation_cov.llt().matrixL();

  boost::random::mt19937_64 engine(seed);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd standard(T, r);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < r; ++k) standard(t, k) = normal(engine);
  return simulate_with_innovations(spec, standard * chol.transpose());
}

std::optional<std::string> initial_mean_warning(const ModelSpec& spec) {
  const VectorXd mu0 = spec.mean_curve(0.0);
  if (mu0.cwiseAbs().maxCoeff() == 0.0) return std::nullopt;
  std::ostringstream msg;
  msg << "mean curve is nonzero at u=0 (max |mu(0)| = " << mu0.cwiseAbs().maxCoeff()
      << "); simulation still starts from X_0 = 0";
  return msg.str();
}

void write_panel_csv(std::ostream& out, const Panel& panel) {
  out << "t";
  for (Eigen::Index k = 1; k <= panel.r(); ++k) out << ",x" << k;
  out << '\n';
  for (Eigen::Index t = 0; t < panel.T(); ++t) {
    out << (t + 1);
    for (Eigen::Index k = 0; k < panel.r(); ++k) out << ',' << csv::format_double(panel.values(t, k));
    out << '\n';
  }
}

void write_panel_csv(const std::string& path, const Panel& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_panel_csv(out, panel);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

Panel read_panel_csv(std::istream& in, const std::string& source_name, std::optional<int> expected_r) {
  const csv::Table table = csv::read(in, source_name);
  const auto ncols = static_cast<int>(table.header.size());
  if (ncols < 2 || table.header.front() != "t") {
    throw Error(ErrorCode::ConfigError, source_name + ": panel header must be \"t,x1,...,xr\"");
  }
  const int r = ncols - 1;
  if (expected_r && *expected_r != r) {
    throw Error(ErrorCode::ConfigError, source_name + ": expected r=" + std::to_string(*expected_r) +
                                            " value columns, found " + std::to_string(r));
  }
  for (int k = 1; k <= r; ++k) {
    if (table.header[k] != "x" + std::to_string(k)) {
      throw Error(ErrorCode::ConfigError, source_name + ": column " + std::to_string(k + 1) + " must be named x" +
                                              std::to_string(k));
    }
  }
  if (table.rows.size() < 2) throw Error(ErrorCode::ConfigError, source_name + ": panel needs at least 2 rows");

  Panel panel;
  panel.values.resize(static_cast<Eigen::Index>(table.rows.size()), r);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (static_cast<int>(row.size()) != ncols) {
      throw Error(ErrorCode::ConfigError, source_name + ": row " + std::to_string(i + 2) + " has " +
                                              std::to_string(row.size()) + " fields, expected r=" +
                                              std::to_string(r) + " plus t");
    }
    const double t = csv::parse_double(row[0], source_name, i + 2);
    if (t != static_cast<double>(i + 1)) {
      throw Error(ErrorCode::ConfigError, source_name + ": t column must run 1..T (row " + std::to_string(i + 2) + ")");
    }
    for (int k = 0; k < r; ++k) panel.values(static_cast<Eigen::Index>(i), k) = csv::parse_double(row[k + 1], source_name, i + 2);
  }
  return panel;
}

Panel read_panel_csv(const std::string& path, std::optional<int> expected_r) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_panel_csv(in, path, expected_r);
}

}  // namespace lsvar
