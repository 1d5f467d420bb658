#include "lsvar/app.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "lsvar/csv.hpp"
#include "lsvar/montecarlo.hpp"
#include "lsvar/simulator.hpp"

namespace lsvar::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& source, const std::string& key, const std::string& what) {
  throw Error(ErrorCode::ConfigError, source + ": key \"" + key + "\": " + what);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& source,
                    const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) config_error(source, prefix + key, "unknown key");
  }
}

double get_number(const json& obj, const std::string& key, const std::string& source) {
  const json& v = obj.at(key);
  if (!v.is_number()) config_error(source, key, "expected a number");
  return v.get<double>();
}

long long get_integer(const json& obj, const std::string& key, const std::string& source) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) config_error(source, key, "expected an integer");
  return v.get<long long>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& source) {
  const json& v = obj.at(key);
  if (!v.is_string()) config_error(source, key, "expected a string");
  return v.get<std::string>();
}

Method parse_method_or_throw(const json& v, const std::string& key, const std::string& source) {
  if (!v.is_string()) config_error(source, key, "expected a method name");
  const auto m = parse_method(v.get<std::string>());
  if (!m) config_error(source, key, "unknown method \"" + v.get<std::string>() + "\"");
  return *m;
}

std::string_view command_name(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Estimate: return "estimate";
    case Command::Replicate: return "replicate";
    case Command::Compare: return "compare";
  }
  return "?";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyGrid: return 2;
    case ErrorCode::IoError: return 1;
    default: return 3;
  }
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

json kernel_json(const KernelSpec& k) {
  return {{"family", std::string(to_string(k.family))}, {"bandwidth", k.bandwidth}};
}

json summary_json(const ReplicationSummary& s) {
  std::vector<double> flagged;
  for (std::size_t i : s.flagged_points()) flagged.push_back(s.grid[i]);
  return {{"model", s.model_tag},
          {"method", std::string(to_string(s.method))},
          {"kernel", kernel_json(s.kernel)},
          {"T", s.T},
          {"M", s.M},
          {"seed", s.seed},
          {"band_level", s.band_levels.at(s.primary_band)},
          {"band_levels", s.band_levels},
          {"quantile_rule", "type7-linear-interpolation"},
          {"grid_points", s.grid.size()},
          {"flagged_points", flagged},
          {"tool_version", kToolVersion}};
}

json metrics_json(const ErrorMetrics& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"entry", std::string(to_string(e.key.entry))},
                       {"row", e.key.row},
                       {"col", e.key.col},
                       {"ise", e.ise},
                       {"boundary_abs_bias", e.boundary_abs_bias},
                       {"interior_abs_bias", e.interior_abs_bias}});
  }
  return {{"interior_trim", m.interior_trim},
          {"boundary_width", m.boundary_width},
          {"A_mean_ise", m.average(Entry::A, &EntryMetrics::ise)},
          {"A_mean_boundary_abs_bias", m.average(Entry::A, &EntryMetrics::boundary_abs_bias)},
          {"entries", entries}};
}

ReplicateOptions replicate_options(const RunConfig& c, int T) {
  ReplicateOptions options;
  options.band_levels = {c.band};
  for (double level : {0.90, 0.95}) {
    if (std::abs(level - c.band) > 1e-12) options.band_levels.push_back(level);
  }
  options.primary_band = 0;
  options.lambda = c.lambda;
  options.jobs = c.jobs;
  options.T = T;
  return options;
}

void require(bool ok, const std::string& source, const std::string& key, const std::string& what) {
  if (!ok) config_error(source, key, what);
}

}  // namespace

std::vector<double> GridSpec::resolve(int T, double bandwidth, Method method) const {
  std::vector<double> grid;
  switch (kind) {
    case Kind::Default: return default_grid(T, bandwidth, method, include_boundary);
    case Kind::List: grid = values; break;
    case Kind::Range: {
      if (!(step > 0.0)) throw Error(ErrorCode::ConfigError, "grid step must be positive");
      const auto n = static_cast<long>(std::floor((to - from) / step + 1e-9));
      for (long k = 0; k <= n; ++k) grid.push_back(from + static_cast<double>(k) * step);
      break;
    }
  }
  check_grid(grid);
  return grid;
}

RunConfig parse_config(const json& doc_in, const std::string& source) {
  if (!doc_in.is_object()) throw Error(ErrorCode::ConfigError, source + ": config must be a JSON object");
  const json* doc = &doc_in;
  if (doc_in.contains("config") && doc_in.contains("tool_version")) doc = &doc_in.at("config");
  if (!doc->is_object()) throw Error(ErrorCode::ConfigError, source + ": \"config\" must be an object");

  reject_unknown(*doc,
                 {"command", "model", "model_file", "innovation_cov", "kernel", "method", "methods", "grid", "T", "M",
                  "seed", "band", "lambda", "input", "r", "output", "jobs", "interior_trim", "boundary_width"},
                 source, "");
  const json& d = *doc;
  RunConfig c;

  require(d.contains("command"), source, "command", "missing");
  const std::string cmd = get_string(d, "command", source);
  if (cmd == "simulate") c.command = Command::Simulate;
  else if (cmd == "estimate") c.command = Command::Estimate;
  else if (cmd == "replicate") c.command = Command::Replicate;
  else if (cmd == "compare") c.command = Command::Compare;
  else config_error(source, "command", "expected simulate|estimate|replicate|compare");

  if (d.contains("model")) c.model = get_string(d, "model", source);
  if (d.contains("model_file")) c.model_file = get_string(d, "model_file", source);
  if (d.contains("innovation_cov")) {
    const json& m = d.at("innovation_cov");
    require(m.is_array() && !m.empty(), source, "innovation_cov", "expected a square array of arrays");
    const auto n = static_cast<Eigen::Index>(m.size());
    MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const json& row = m.at(static_cast<std::size_t>(i));
      require(row.is_array() && static_cast<Eigen::Index>(row.size()) == n, source, "innovation_cov",
              "expected a square array of arrays");
      for (Eigen::Index j = 0; j < n; ++j) {
        require(row.at(static_cast<std::size_t>(j)).is_number(), source, "innovation_cov", "entries must be numbers");
        cov(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
      }
    }
    c.innovation_cov = cov;
  }
  if (d.contains("kernel")) {
    const json& k = d.at("kernel");
    require(k.is_object(), source, "kernel", "expected an object {family, bandwidth}");
    reject_unknown(k, {"family", "bandwidth"}, source, "kernel.");
    require(k.contains("family"), source, "kernel.family", "missing");
    require(k.contains("bandwidth"), source, "kernel.bandwidth", "missing");
    const auto family = parse_kernel_family(get_string(k, "family", source));
    if (!family) config_error(source, "kernel.family", "expected \"gaussian\" or \"epanechnikov\"");
    const double h = get_number(k, "bandwidth", source);
    require(h > 0.0 && std::isfinite(h), source, "kernel.bandwidth", "must be positive");
    c.kernel = KernelSpec(*family, h);
  }
  if (d.contains("method") && d.contains("methods")) config_error(source, "methods", "give either method or methods");
  if (d.contains("method")) c.methods.push_back(parse_method_or_throw(d.at("method"), "method", source));
  if (d.contains("methods")) {
    const json& ms = d.at("methods");
    require(ms.is_array() && !ms.empty(), source, "methods", "expected a nonempty array");
    for (const auto& m : ms) c.methods.push_back(parse_method_or_throw(m, "methods", source));
  }
  if (d.contains("grid")) {
    const json& g = d.at("grid");
    require(g.is_object(), source, "grid", "expected an object");
    reject_unknown(g, {"type", "include_boundary", "from", "to", "step", "values"}, source, "grid.");
    const std::string type = g.contains("type") ? get_string(g, "type", source) : "default";
    if (g.contains("include_boundary")) {
      require(g.at("include_boundary").is_boolean(), source, "grid.include_boundary", "expected a boolean");
      c.grid.include_boundary = g.at("include_boundary").get<bool>();
    }
    if (type == "default") {
      c.grid.kind = GridSpec::Kind::Default;
    } else if (type == "range") {
      c.grid.kind = GridSpec::Kind::Range;
      for (const char* key : {"from", "to", "step"}) require(g.contains(key), source, std::string("grid.") + key, "missing");
      c.grid.from = get_number(g, "from", source);
      c.grid.to = get_number(g, "to", source);
      c.grid.step = get_number(g, "step", source);
      require(c.grid.step > 0.0, source, "grid.step", "must be positive");
    } else if (type == "list") {
      c.grid.kind = GridSpec::Kind::List;
      require(g.contains("values") && g.at("values").is_array(), source, "grid.values", "expected an array");
      for (const auto& v : g.at("values")) {
        require(v.is_number(), source, "grid.values", "entries must be numbers");
        c.grid.values.push_back(v.get<double>());
      }
    } else {
      config_error(source, "grid.type", "expected default|range|list");
    }
  }
  if (d.contains("T")) c.T = static_cast<int>(get_integer(d, "T", source));
  if (d.contains("M")) c.M = static_cast<int>(get_integer(d, "M", source));
  if (d.contains("seed")) {
    require(d.at("seed").is_number_unsigned() || (d.at("seed").is_number_integer() && d.at("seed").get<long long>() >= 0),
            source, "seed", "expected a nonnegative integer");
    c.seed = d.at("seed").get<std::uint64_t>();
  }
  if (d.contains("band")) c.band = get_number(d, "band", source);
  if (d.contains("lambda")) c.lambda = get_number(d, "lambda", source);
  if (d.contains("input")) c.input = get_string(d, "input", source);
  if (d.contains("r")) c.r = static_cast<int>(get_integer(d, "r", source));
  if (d.contains("output")) c.output = get_string(d, "output", source);
  if (d.contains("jobs")) {
    const long long jobs = get_integer(d, "jobs", source);
    require(jobs >= 1, source, "jobs", "must be >= 1");
    c.jobs = static_cast<unsigned>(jobs);
  }
  if (d.contains("interior_trim")) c.interior_trim = get_number(d, "interior_trim", source);
  if (d.contains("boundary_width")) c.boundary_width = get_number(d, "boundary_width", source);

  // Per-command requirements.
  const bool needs_model = c.command != Command::Estimate;
  if (needs_model) {
    require(!c.model.empty(), source, "model", "missing");
    require(c.model == "builtin:zero_mean_r6" || c.model == "builtin:mean_r3" || c.model == "custom", source, "model",
            "expected builtin:zero_mean_r6, builtin:mean_r3 or custom");
    if (c.model == "custom") {
      require(!c.model_file.empty(), source, "model_file", "required for a custom model");
      require(fs::exists(c.model_file), source, "model_file", "file not found: " + c.model_file);
    }
  }
  if (c.command == Command::Estimate) {
    require(!c.input.empty(), source, "input", "missing");
    require(fs::exists(c.input), source, "input", "file not found: " + c.input);
  }
  if (c.command != Command::Simulate) {
    require(c.kernel.has_value(), source, "kernel", "missing");
    require(!c.methods.empty(), source, "method", "missing");
  }
  if (c.command == Command::Compare) {
    require(c.methods.size() == 2, source, "methods", "compare needs exactly two methods");
  } else if (c.command != Command::Simulate) {
    require(c.methods.size() == 1, source, "method", "expected a single method");
  }
  if (c.command == Command::Replicate || c.command == Command::Compare) {
    require(c.M >= 2, source, "M", "must be >= 2");
  }
  if (d.contains("T")) require(c.T >= 2, source, "T", "must be >= 2");
  if (c.r) require(*c.r >= 1, source, "r", "must be >= 1");
  require(c.band > 0.0 && c.band <= 1.0, source, "band", "must lie in (0,1]");
  require(c.lambda >= 0.0, source, "lambda", "must be >= 0");
  require(c.interior_trim >= 0.0 && c.interior_trim < 0.5, source, "interior_trim", "must lie in [0,0.5)");
  require(c.boundary_width >= 0.0 && c.boundary_width < 0.5, source, "boundary_width", "must lie in [0,0.5)");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path + ": invalid JSON: " + e.what());
  }
  return parse_config(doc, path);
}

json to_json(const RunConfig& c) {
  json d;
  d["command"] = std::string(command_name(c.command));
  if (!c.model.empty()) d["model"] = c.model;
  if (!c.model_file.empty()) d["model_file"] = c.model_file;
  if (c.innovation_cov) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < c.innovation_cov->rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < c.innovation_cov->cols(); ++j) row.push_back((*c.innovation_cov)(i, j));
      rows.push_back(row);
    }
    d["innovation_cov"] = rows;
  }
  if (c.kernel) d["kernel"] = kernel_json(*c.kernel);
  if (!c.methods.empty()) {
    json ms = json::array();
    for (Method m : c.methods) ms.push_back(std::string(to_string(m)));
    d["methods"] = ms;
  }
  json g;
  switch (c.grid.kind) {
    case GridSpec::Kind::Default: g = {{"type", "default"}, {"include_boundary", c.grid.include_boundary}}; break;
    case GridSpec::Kind::Range: g = {{"type", "range"}, {"from", c.grid.from}, {"to", c.grid.to}, {"step", c.grid.step}}; break;
    case GridSpec::Kind::List: g = {{"type", "list"}, {"values", c.grid.values}}; break;
  }
  d["grid"] = g;
  if (c.T > 0) d["T"] = c.T;
  if (c.M > 0) d["M"] = c.M;
  d["seed"] = c.seed;
  d["band"] = c.band;
  d["lambda"] = c.lambda;
  if (!c.input.empty()) d["input"] = c.input;
  if (c.r) d["r"] = *c.r;
  d["output"] = c.output;
  d["jobs"] = c.jobs;
  d["interior_trim"] = c.interior_trim;
  d["boundary_width"] = c.boundary_width;
  return d;
}

ModelSpec resolve_model(const RunConfig& c) {
  ModelSpec spec;
  if (c.model == "builtin:zero_mean_r6") {
    spec = make_builtin_spec(BuiltinDesign::zero_mean_r6());
  } else if (c.model == "builtin:mean_r3") {
    spec = make_builtin_spec(BuiltinDesign::mean_r3());
  } else if (c.model == "custom") {
    const csv::Table table = csv::read_file(c.model_file);
    if (table.header.empty() || table.header.front() != "u") {
      throw Error(ErrorCode::ConfigError, c.model_file + ": first column must be \"u\"");
    }
    MatrixXd values(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      if (table.rows[i].size() != table.header.size()) {
        throw Error(ErrorCode::ConfigError, c.model_file + ": row " + std::to_string(i + 2) + " has the wrong field count");
      }
      for (std::size_t j = 0; j < table.header.size(); ++j) {
        values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            csv::parse_double(table.rows[i][j], c.model_file, i + 2);
      }
    }
    try {
      spec = make_tabulated_spec(values, MatrixXd());
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, c.model_file + ": " + e.what());
    }
  } else {
    throw Error(ErrorCode::ConfigError, "unknown model \"" + c.model + "\"");
  }
  if (c.innovation_cov) {
    if (c.innovation_cov->rows() != spec.r) {
      throw Error(ErrorCode::ConfigError, "key \"innovation_cov\": expected " + std::to_string(spec.r) + " x " +
                                              std::to_string(spec.r));
    }
    spec.innovation_cov = *c.innovation_cov;
  }
  try {
    spec.check();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return spec;
}

namespace {

int sample_size(const RunConfig& c, const ModelSpec& spec) {
  const int T = c.T > 0 ? c.T : spec.default_T;
  if (T < 2) throw Error(ErrorCode::ConfigError, "key \"T\": required for model " + spec.tag);
  return T;
}

json run_simulate(const RunConfig& c, const fs::path& out, std::vector<std::string>& warnings) {
  const ModelSpec spec = resolve_model(c);
  const int T = sample_size(c, spec);
  const auto stability = validate_stability(spec, default_stability_grid());
  if (!stability.pass) {
    throw Error(ErrorCode::UnstableModel, "max spectral radius " + std::to_string(stability.max_radius) + " >= 1");
  }
  if (auto w = initial_mean_warning(spec)) warnings.push_back(*w);
  const Panel panel = simulate(spec, T, c.seed);
  write_panel_csv((out / "panel.csv").string(), panel);
  return {{"artifacts", {"panel.csv"}}, {"T", T}, {"r", spec.r}, {"max_spectral_radius", stability.max_radius}};
}

json run_estimate(const RunConfig& c, const fs::path& out, std::vector<std::string>& warnings, bool& hard_failure) {
  const Panel panel = read_panel_csv(c.input, c.r);
  const Method method = c.methods.front();
  const auto grid = c.grid.resolve(static_cast<int>(panel.T()), c.kernel->bandwidth, method);
  const FitGrid<double> fits = fit_grid<double>(panel, *c.kernel, method, grid, c.lambda);
  write_fit_grid_csv((out / "fit_grid.csv").string(), fits);
  json failures = json::array();
  for (std::size_t i = 0; i < fits.fits.size(); ++i) {
    if (fits.fits[i].ok()) continue;
    const auto& f = *fits.fits[i].failure;
    failures.push_back({{"u", grid[i]}, {"error", to_string(f.code)}, {"message", f.message}});
    warnings.push_back("fit failed at u=" + csv::format_double(grid[i]) + ": " + f.message);
  }
  hard_failure = fits.failure_count() == fits.fits.size();
  return {{"artifacts", {"fit_grid.csv"}}, {"T", panel.T()}, {"r", panel.r()}, {"failures", failures}};
}

ReplicationSummary run_one_replication(const RunConfig& c, const ModelSpec& spec, Method method, int T) {
  const auto grid = c.grid.resolve(T, c.kernel->bandwidth, method);
  return replicate(spec, *c.kernel, method, grid, c.M, c.seed, replicate_options(c, T));
}

json run_replicate(const RunConfig& c, const fs::path& out, std::vector<std::string>& warnings) {
  const ModelSpec spec = resolve_model(c);
  const int T = sample_size(c, spec);
  if (auto w = initial_mean_warning(spec)) warnings.push_back(*w);
  const ReplicationSummary s = run_one_replication(c, spec, c.methods.front(), T);
  write_summary_csv((out / "summary.csv").string(), s);
  write_json(out / "summary.json", summary_json(s));
  for (std::size_t i : s.flagged_points()) {
    warnings.push_back("more than 10% of fits failed at u=" + csv::format_double(s.grid[i]));
  }
  return {{"artifacts", {"summary.csv", "summary.json"}}, {"T", T}};
}

json run_compare(const RunConfig& c, const fs::path& out, std::vector<std::string>& warnings) {
  const ModelSpec spec = resolve_model(c);
  const int T = sample_size(c, spec);
  if (auto w = initial_mean_warning(spec)) warnings.push_back(*w);
  // Both methods share one grid so their error profiles are comparable point by point.
  RunConfig shared = c;
  if (shared.grid.kind == GridSpec::Kind::Default) shared.grid.include_boundary = true;

  json artifacts = json::array();
  json report = json::object();
  std::vector<ErrorMetrics> metrics;
  for (Method method : c.methods) {
    const std::string name(to_string(method));
    const ReplicationSummary s = run_one_replication(shared, spec, method, T);
    write_summary_csv((out / ("summary_" + name + ".csv")).string(), s);
    write_json(out / ("summary_" + name + ".json"), summary_json(s));
    artifacts.push_back("summary_" + name + ".csv");
    artifacts.push_back("summary_" + name + ".json");
    metrics.push_back(error_metrics(s, c.interior_trim, c.boundary_width));
    report[name] = metrics_json(metrics.back());
  }
  const std::string first(to_string(c.methods[0]));
  const std::string second(to_string(c.methods[1]));
  int wins = 0;
  int a_entries = 0;
  for (std::size_t j = 0; j < metrics[0].entries.size(); ++j) {
    if (metrics[0].entries[j].key.entry != Entry::A) continue;
    ++a_entries;
    if (metrics[1].entries[j].ise < metrics[0].entries[j].ise) ++wins;
  }
  report["comparison"] = {
      {"A_entries", a_entries},
      {"A_entries_where_" + second + "_has_lower_ise", wins},
      {"A_mean_ise_" + first, metrics[0].average(Entry::A, &EntryMetrics::ise)},
      {"A_mean_ise_" + second, metrics[1].average(Entry::A, &EntryMetrics::ise)},
  };
  write_json(out / "metrics.json", report);
  artifacts.push_back("metrics.json");
  return {{"artifacts", artifacts}, {"T", T}};
}

}  // namespace

int run(const RunConfig& c, std::ostream& log) {
  std::vector<std::string> warnings;
  json details;
  bool hard_failure = false;
  const fs::path out(c.output);
  try {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + out.string());
    switch (c.command) {
      case Command::Simulate: details = run_simulate(c, out, warnings); break;
      case Command::Estimate: details = run_estimate(c, out, warnings, hard_failure); break;
      case Command::Replicate: details = run_replicate(c, out, warnings); break;
      case Command::Compare: details = run_compare(c, out, warnings); break;
    }
    json meta = {{"config", to_json(c)}, {"tool_version", kToolVersion}, {"warnings", warnings}, {"details", details}};
    write_json(out / "metadata.json", meta);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
  for (const auto& w : warnings) log << "warning: " << w << '\n';
  if (hard_failure) {
    log << "error: every grid point failed to fit\n";
    return 3;
  }
  return 0;
}

}  // namespace lsvar::app
