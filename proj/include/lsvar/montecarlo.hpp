#ifndef LSVAR_MONTECARLO_HPP
#define LSVAR_MONTECARLO_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lsvar/estimators.hpp"
#include "lsvar/model.hpp"

namespace lsvar {

enum class Entry { m, A, mu0, mu1 };

std::string_view to_string(Entry entry);

/// One scalar coefficient of a fit: entry name plus 1-based row/col.
struct CellKey {
  Entry entry = Entry::A;
  int row = 1;
  int col = 1;

  friend bool operator==(const CellKey&, const CellKey&) = default;
};

/// Coefficients reported for a method at dimension r, in output order.
std::vector<CellKey> cell_layout(Method method, int r);

double cell_value(const LocalFit<double>& fit, const CellKey& key);

/// Lower/upper empirical quantiles at (1-level)/2 and 1-(1-level)/2, using
/// linear interpolation between order statistics (the "type 7" rule).
std::pair<double, double> quantile_band(std::vector<double> samples, double level);

/// True value of a coefficient at u for a sample of size T, or nullopt when
/// the model does not pin it down.
using TruthFunction = std::function<std::optional<double>(double u, const CellKey& key)>;

/// Truth implied by a model: A(u); m(u) = mu(u) - A(u) mu(u - 1/T);
/// mu1 -> mu(u); mu0 -> mu(u - 1/T).
TruthFunction model_truth(const ModelSpec& spec, int T);

struct CellSummary {
  double u = 0.0;
  CellKey key;
  double mean = 0.0;
  /// One (lo, hi) pair per configured band level.
  std::vector<std::pair<double, double>> bands;
  std::optional<double> truth;
  std::optional<double> rmse;
  int count = 0;
  int nfail = 0;
};

struct ReplicationSummary {
  std::vector<double> grid;
  std::vector<CellKey> layout;
  /// cells[i * layout.size() + j] summarizes layout[j] at grid[i].
  std::vector<CellSummary> cells;
  std::vector<double> band_levels;
  /// Index into band_levels written to the CSV lo/hi columns.
  std::size_t primary_band = 0;
  std::vector<int> failures_per_point;
  int M = 0;
  std::uint64_t seed = 0;
  int T = 0;
  Method method = Method::LocalConstant;
  KernelSpec kernel;
  std::string model_tag;

  bool has_truth() const;
  const CellSummary& cell(std::size_t point, std::size_t key_index) const {
    return cells[point * layout.size() + key_index];
  }
  /// Grid indices where more than 10% of the replications failed.
  std::vector<std::size_t> flagged_points() const;
};

struct ReplicateOptions {
  std::vector<double> band_levels{0.90, 0.95};
  std::size_t primary_band = 0;
  double lambda = 0.0;
  /// 0 or 1 runs serially.
  unsigned jobs = 1;
  /// Sample size; 0 means the model's default_T.
  int T = 0;
};

/// Aggregates already-computed fit grids (one per replication, identical grids).
ReplicationSummary summarize(const std::vector<FitGrid<double>>& replications, const TruthFunction& truth,
                             const ReplicateOptions& options);

/// Generic driver: replication i (0-based) fits `panel_source(i)`.
ReplicationSummary replicate_panels(const std::function<Panel(int)>& panel_source, int M, const KernelSpec& kernel,
                                    Method method, const std::vector<double>& grid, const TruthFunction& truth,
                                    const ReplicateOptions& options);

/// Simulates M panels with seeds seed+1..seed+M, fits each over the grid and
/// summarizes against the model's truth.
ReplicationSummary replicate(const ModelSpec& spec, const KernelSpec& kernel, Method method,
                             const std::vector<double>& grid, int M, std::uint64_t seed,
                             const ReplicateOptions& options = {});

struct EntryMetrics {
  CellKey key;
  /// Mean over the interior grid of (mean - truth)^2.
  double ise = 0.0;
  /// Average |mean - truth| over u within `boundary_width` of 0 or 1.
  double boundary_abs_bias = 0.0;
  /// Average |mean - truth| over the interior grid.
  double interior_abs_bias = 0.0;
};

struct ErrorMetrics {
  double interior_trim = 0.1;
  double boundary_width = 0.05;
  std::vector<EntryMetrics> entries;

  /// Mean of `field` over the entries of one kind.
  double average(Entry entry, double EntryMetrics::*field) const;
};

/// Interior is u in [trim, 1 - trim]. Throws NoTruth without truth values.
ErrorMetrics error_metrics(const ReplicationSummary& summary, double interior_trim = 0.1,
                           double boundary_width = 0.05);

/// "u,entry,row,col,mean,lo,hi,truth,rmse,nfail"; missing values are empty fields.
void write_summary_csv(std::ostream& out, const ReplicationSummary& summary);
void write_summary_csv(const std::string& path, const ReplicationSummary& summary);

}  // namespace lsvar

#endif  // LSVAR_MONTECARLO_HPP
