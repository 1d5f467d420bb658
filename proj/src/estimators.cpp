#include "lsvar/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "lsvar/csv.hpp"

namespace lsvar {

std::vector<double> default_grid(int T, double bandwidth, Method method, bool include_boundary) {
  if (T < 2) throw Error(ErrorCode::InvalidArgument, "T must be >= 2");
  int first = 1;
  int last = T - 1;
  const bool kernel_constant = method == Method::YuleWalker || method == Method::LocalConstant;
  if (kernel_constant && !include_boundary) {
    // Guard against h*T landing a rounding error above an integer.
    first = std::max(first, static_cast<int>(std::ceil(bandwidth * T - 1e-9)));
    last = std::min(last, static_cast<int>(std::floor((1.0 - bandwidth) * T + 1e-9)));
  }
  std::vector<double> grid;
  for (int t = first; t <= last; ++t) grid.push_back(static_cast<double>(t) / T);
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "bandwidth leaves no interior grid points");
  return grid;
}

namespace {

void emit_vector(std::ostream& out, const std::string& prefix, const char* entry, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << prefix << entry << ',' << (i + 1) << ",1," << csv::format_double(v(i)) << '\n';
  }
}

}  // namespace

void write_fit_grid_csv(std::ostream& out, const FitGrid<double>& grid) {
  out << "u,method,entry,row,col,value\n";
  const std::string method(to_string(grid.method));
  for (std::size_t i = 0; i < grid.fits.size(); ++i) {
    const auto& point = grid.fits[i];
    if (!point.ok()) continue;
    const LocalFit<double>& fit = *point.fit;
    const std::string prefix = csv::format_double(grid.grid[i]) + ',' + method + ',';
    emit_vector(out, prefix, "m", fit.m);
    for (Eigen::Index r = 0; r < fit.A.rows(); ++r)
      for (Eigen::Index c = 0; c < fit.A.cols(); ++c)
        out << prefix << "A," << (r + 1) << ',' << (c + 1) << ',' << csv::format_double(fit.A(r, c)) << '\n';
    if (fit.has_mean_terms()) {
      emit_vector(out, prefix, "mu0", fit.mu0);
      emit_vector(out, prefix, "mu1", fit.mu1);
    }
  }
}

void write_fit_grid_csv(const std::string& path, const FitGrid<double>& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_fit_grid_csv(out, grid);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

}  // namespace lsvar
