#ifndef LSVAR_APP_HPP
#define LSVAR_APP_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsvar/estimators.hpp"
#include "lsvar/model.hpp"

namespace lsvar::app {

inline constexpr const char* kToolVersion = "lsvar 1.0.0";

enum class Command { Simulate, Estimate, Replicate, Compare };

struct GridSpec {
  enum class Kind { Default, Range, List };
  Kind kind = Kind::Default;
  bool include_boundary = false;
  double from = 0.0;
  double to = 0.0;
  double step = 0.0;
  std::vector<double> values;

  std::vector<double> resolve(int T, double bandwidth, Method method) const;
};

/// Batch job description. Parsed strictly: unknown keys are rejected.
struct RunConfig {
  Command command = Command::Simulate;
  /// "builtin:zero_mean_r6", "builtin:mean_r3" or "custom".
  std::string model;
  /// Curve table for "custom": CSV "u,mu1..mur,A11,A12,..,Arr".
  std::string model_file;
  std::optional<MatrixXd> innovation_cov;
  std::optional<KernelSpec> kernel;
  std::vector<Method> methods;
  GridSpec grid;
  int T = 0;
  int M = 0;
  std::uint64_t seed = 0;
  double band = 0.90;
  double lambda = 0.0;
  /// Panel CSV read by "estimate".
  std::string input;
  std::optional<int> r;
  std::string output = ".";
  unsigned jobs = 1;
  double interior_trim = 0.1;
  double boundary_width = 0.05;
};

/// Throws ConfigError naming the offending key. Accepts either a bare config
/// object or run metadata, which nests the config under "config".
RunConfig parse_config(const nlohmann::json& doc, const std::string& source_name);
RunConfig load_config(const std::string& path);

/// Inverse of parse_config for a validated config.
nlohmann::json to_json(const RunConfig& config);

/// Builds the model named by the config (builtin tag or tabulated curves).
ModelSpec resolve_model(const RunConfig& config);

/// Executes a run and writes its artifacts into config.output. Returns the
/// process exit code: 0 success, 1 I/O failure, 2 configuration error,
/// 3 numerical failure. Diagnostics go to `log`.
int run(const RunConfig& config, std::ostream& log);

}  // namespace lsvar::app

#endif  // LSVAR_APP_HPP
