#include "lsvar/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "lsvar/csv.hpp"

namespace lsvar {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Row-major (point, key) values of one replication; NaN marks a failed point.
std::vector<double> flatten(const FitGrid<double>& fits, const std::vector<CellKey>& layout) {
  std::vector<double> values(fits.fits.size() * layout.size(), kMissing);
  for (std::size_t i = 0; i < fits.fits.size(); ++i) {
    if (!fits.fits[i].ok()) continue;
    for (std::size_t j = 0; j < layout.size(); ++j) values[i * layout.size() + j] = cell_value(*fits.fits[i].fit, layout[j]);
  }
  return values;
}

void check_options(const ReplicateOptions& options) {
  if (options.band_levels.empty()) throw Error(ErrorCode::InvalidArgument, "at least one band level is required");
  for (double level : options.band_levels) {
    if (!(level > 0.0 && level <= 1.0)) throw Error(ErrorCode::InvalidArgument, "band levels must lie in (0,1]");
  }
  if (options.primary_band >= options.band_levels.size()) {
    throw Error(ErrorCode::InvalidArgument, "primary band index out of range");
  }
}

ReplicationSummary aggregate(const std::vector<double>& grid, const std::vector<CellKey>& layout,
                             const std::vector<std::vector<double>>& per_rep, const TruthFunction& truth,
                             const ReplicateOptions& options) {
  ReplicationSummary s;
  s.grid = grid;
  s.layout = layout;
  s.band_levels = options.band_levels;
  s.primary_band = options.primary_band;
  s.M = static_cast<int>(per_rep.size());
  s.failures_per_point.assign(grid.size(), 0);
  s.cells.resize(grid.size() * layout.size());

  std::vector<double> samples;
  samples.reserve(per_rep.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < layout.size(); ++j) {
      const std::size_t idx = i * layout.size() + j;
      CellSummary& cell = s.cells[idx];
      cell.u = grid[i];
      cell.key = layout[j];
      samples.clear();
      for (const auto& rep : per_rep) {
        if (!std::isnan(rep[idx])) samples.push_back(rep[idx]);
      }
      cell.count = static_cast<int>(samples.size());
      cell.nfail = s.M - cell.count;
      if (truth) cell.truth = truth(grid[i], layout[j]);
      if (samples.empty()) {
        cell.mean = kMissing;
        cell.bands.assign(options.band_levels.size(), {kMissing, kMissing});
        continue;
      }
      double sum = 0.0;
      for (double v : samples) sum += v;
      cell.mean = sum / static_cast<double>(samples.size());
      if (cell.truth) {
        double sq = 0.0;
        for (double v : samples) sq += (v - *cell.truth) * (v - *cell.truth);
        cell.rmse = std::sqrt(sq / static_cast<double>(samples.size()));
      }
      for (double level : options.band_levels) cell.bands.push_back(quantile_band(samples, level));
    }
    if (!layout.empty()) s.failures_per_point[i] = s.cells[i * layout.size()].nfail;
  }
  return s;
}

}  // namespace

std::string_view to_string(Entry entry) {
  switch (entry) {
    case Entry::m: return "m";
    case Entry::A: return "A";
    case Entry::mu0: return "mu0";
    case Entry::mu1: return "mu1";
  }
  return "?";
}

std::vector<CellKey> cell_layout(Method method, int r) {
  std::vector<CellKey> layout;
  if (method != Method::YuleWalker) {
    for (int i = 1; i <= r; ++i) layout.push_back({Entry::m, i, 1});
  }
  for (int i = 1; i <= r; ++i)
    for (int j = 1; j <= r; ++j) layout.push_back({Entry::A, i, j});
  if (method == Method::LocalConstant || method == Method::LocalLinear) {
    for (int i = 1; i <= r; ++i) layout.push_back({Entry::mu0, i, 1});
    for (int i = 1; i <= r; ++i) layout.push_back({Entry::mu1, i, 1});
  }
  return layout;
}

double cell_value(const LocalFit<double>& fit, const CellKey& key) {
  switch (key.entry) {
    case Entry::m: return fit.m(key.row - 1);
    case Entry::A: return fit.A(key.row - 1, key.col - 1);
    case Entry::mu0: return fit.mu0(key.row - 1);
    case Entry::mu1: return fit.mu1(key.row - 1);
  }
  return kMissing;
}

std::pair<double, double> quantile_band(std::vector<double> samples, double level) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "quantile_band needs at least one sample");
  if (!(level > 0.0 && level <= 1.0)) throw Error(ErrorCode::InvalidArgument, "band level must lie in (0,1]");
  std::sort(samples.begin(), samples.end());
  const auto quantile = [&samples](double p) {
    const double h = static_cast<double>(samples.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, samples.size() - 1);
    return samples[lo] + (h - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
  };
  const double tail = (1.0 - level) / 2.0;
  return {quantile(tail), quantile(1.0 - tail)};
}

TruthFunction model_truth(const ModelSpec& spec, int T) {
  return [spec, T](double u, const CellKey& key) -> std::optional<double> {
    const double prev = std::max(0.0, u - 1.0 / T);
    const int i = key.row - 1;
    switch (key.entry) {
      case Entry::A: return spec.var_curve(u)(i, key.col - 1);
      case Entry::m: return (spec.mean_curve(u) - spec.var_curve(u) * spec.mean_curve(prev))(i);
      case Entry::mu0: return spec.mean_curve(prev)(i);
      case Entry::mu1: return spec.mean_curve(u)(i);
    }
    return std::nullopt;
  };
}

bool ReplicationSummary::has_truth() const {
  return !cells.empty() && std::all_of(cells.begin(), cells.end(), [](const CellSummary& c) { return c.truth.has_value(); });
}

std::vector<std::size_t> ReplicationSummary::flagged_points() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < failures_per_point.size(); ++i) {
    if (M > 0 && 10 * failures_per_point[i] > M) out.push_back(i);
  }
  return out;
}

ReplicationSummary summarize(const std::vector<FitGrid<double>>& replications, const TruthFunction& truth,
                             const ReplicateOptions& options) {
  check_options(options);
  if (replications.empty()) throw Error(ErrorCode::InvalidArgument, "no replications to summarize");
  const auto& first = replications.front();
  for (const auto& rep : replications) {
    if (rep.grid != first.grid) throw Error(ErrorCode::InvalidArgument, "replications use different grids");
    if (rep.r != first.r) throw Error(ErrorCode::InvalidArgument, "replications differ in dimension");
  }
  const int r = first.r;
  const auto layout = r > 0 ? cell_layout(first.method, r) : std::vector<CellKey>{};
  std::vector<std::vector<double>> per_rep;
  per_rep.reserve(replications.size());
  for (const auto& rep : replications) per_rep.push_back(flatten(rep, layout));
  ReplicationSummary s = aggregate(first.grid, layout, per_rep, truth, options);
  s.method = first.method;
  s.kernel = first.kernel;
  return s;
}

ReplicationSummary replicate_panels(const std::function<Panel(int)>& panel_source, int M, const KernelSpec& kernel,
                                    Method method, const std::vector<double>& grid, const TruthFunction& truth,
                                    const ReplicateOptions& options) {
  check_options(options);
  if (M < 2) throw Error(ErrorCode::InvalidArgument, "replication count M must be >= 2");
  check_grid(grid);

  std::vector<std::vector<double>> per_rep(static_cast<std::size_t>(M));
  std::vector<int> dims(static_cast<std::size_t>(M), 0);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  // The layout depends on r, which is known only once a panel exists, so each
  // worker flattens with the layout of its own panel.
  const auto worker = [&]() {
    for (int i = next++; i < M; i = next++) {
      try {
        const Panel panel = panel_source(i);
        const auto fits = fit_grid<double>(panel, kernel, method, grid, options.lambda);
        dims[static_cast<std::size_t>(i)] = static_cast<int>(panel.r());
        per_rep[static_cast<std::size_t>(i)] = flatten(fits, cell_layout(method, static_cast<int>(panel.r())));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = M;
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(M)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  for (int d : dims) {
    if (d != dims.front()) throw Error(ErrorCode::InvalidArgument, "replicated panels differ in dimension");
  }

  ReplicationSummary s = aggregate(grid, cell_layout(method, dims.front()), per_rep, truth, options);
  s.method = method;
  s.kernel = kernel;
  return s;
}

ReplicationSummary replicate(const ModelSpec& spec, const KernelSpec& kernel, Method method,
                             const std::vector<double>& grid, int M, std::uint64_t seed,
                             const ReplicateOptions& options) {
  spec.check();
  const int T = options.T > 0 ? options.T : spec.default_T;
  if (T < 2) throw Error(ErrorCode::InvalidArgument, "sample size T must be >= 2");
  const auto stability = validate_stability(spec, default_stability_grid());
  if (!stability.pass) {
    throw Error(ErrorCode::UnstableModel,
                "model violates the stability condition (max spectral radius " + std::to_string(stability.max_radius) + ")");
  }
  const auto source = [&spec, T, seed](int i) { return simulate(spec, T, seed + static_cast<std::uint64_t>(i) + 1); };
  ReplicationSummary s = replicate_panels(source, M, kernel, method, grid, model_truth(spec, T), options);
  s.seed = seed;
  s.T = T;
  s.model_tag = spec.tag;
  return s;
}

double ErrorMetrics::average(Entry entry, double EntryMetrics::*field) const {
  double sum = 0.0;
  int n = 0;
  for (const auto& e : entries) {
    if (e.key.entry != entry) continue;
    sum += e.*field;
    ++n;
  }
  return n > 0 ? sum / n : kMissing;
}

ErrorMetrics error_metrics(const ReplicationSummary& summary, double interior_trim, double boundary_width) {
  if (!summary.has_truth()) throw Error(ErrorCode::NoTruth, "summary carries no truth values");
  ErrorMetrics out;
  out.interior_trim = interior_trim;
  out.boundary_width = boundary_width;
  constexpr double eps = 1e-12;
  for (std::size_t j = 0; j < summary.layout.size(); ++j) {
    EntryMetrics em;
    em.key = summary.layout[j];
    double ise = 0.0, interior_bias = 0.0, boundary_bias = 0.0;
    int n_interior = 0, n_boundary = 0;
    for (std::size_t i = 0; i < summary.grid.size(); ++i) {
      const CellSummary& c = summary.cell(i, j);
      if (c.count == 0) continue;
      const double bias = c.mean - *c.truth;
      const double u = c.u;
      if (u >= interior_trim - eps && u <= 1.0 - interior_trim + eps) {
        ise += bias * bias;
        interior_bias += std::abs(bias);
        ++n_interior;
      }
      if (u <= boundary_width + eps || u >= 1.0 - boundary_width - eps) {
        boundary_bias += std::abs(bias);
        ++n_boundary;
      }
    }
    em.ise = n_interior > 0 ? ise / n_interior : kMissing;
    em.interior_abs_bias = n_interior > 0 ? interior_bias / n_interior : kMissing;
    em.boundary_abs_bias = n_boundary > 0 ? boundary_bias / n_boundary : kMissing;
    out.entries.push_back(em);
  }
  return out;
}

void write_summary_csv(std::ostream& out, const ReplicationSummary& summary) {
  const auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  const auto num = [](double v) { return std::isnan(v) ? std::string() : csv::format_double(v); };
  out << "u,entry,row,col,mean,lo,hi,truth,rmse,nfail\n";
  for (const CellSummary& c : summary.cells) {
    const auto& band = c.bands.at(summary.primary_band);
    out << csv::format_double(c.u) << ',' << to_string(c.key.entry) << ',' << c.key.row << ',' << c.key.col << ','
        << num(c.mean) << ',' << num(band.first) << ',' << num(band.second) << ',' << opt(c.truth) << ','
        << opt(c.rmse) << ',' << c.nfail << '\n';
  }
}

void write_summary_csv(const std::string& path, const ReplicationSummary& summary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_summary_csv(out, summary);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

}  // namespace lsvar
