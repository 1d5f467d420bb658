#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "lsvar/montecarlo.hpp"

using namespace lsvar;

namespace {

/// One-point YW fit grid (r = 1) whose A estimate equals `a`, or a failure.
FitGrid<double> scalar_grid(std::optional<double> a, const std::vector<double>& grid = {0.5}) {
  FitGrid<double> g;
  g.grid = grid;
  g.method = Method::YuleWalker;
  g.r = 1;
  for (double u : grid) {
    GridFit<double> point;
    if (a) {
      LocalFit<double> fit;
      fit.u = u;
      fit.method = Method::YuleWalker;
      fit.A = Eigen::MatrixXd::Constant(1, 1, *a);
      fit.m = Eigen::VectorXd::Zero(1);
      fit.B_hat = fit.A;
      point.fit = fit;
    } else {
      point.failure = PointFailure{ErrorCode::SingularGram, "singular"};
    }
    g.fits.push_back(point);
  }
  return g;
}

ModelSpec constant_ar1(double a) {
  ModelSpec spec;
  spec.r = 1;
  spec.mean_curve = [](double) { return Eigen::VectorXd::Zero(1); };
  spec.var_curve = [a](double) { return Eigen::MatrixXd::Constant(1, 1, a); };
  spec.innovation_cov = Eigen::MatrixXd::Identity(1, 1);
  spec.default_T = 400;
  spec.tag = "ar1";
  return spec;
}

}  // namespace

TEST_CASE("quantile_band worked examples") {
  CHECK(quantile_band({1, 2, 3, 4, 5}, 1.0) == std::pair<double, double>(1.0, 5.0));
  const auto c = quantile_band(std::vector<double>(7, 2.5), 0.9);
  CHECK(c.first == 2.5);
  CHECK(c.second == 2.5);
  std::vector<double> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[i] = i + 1;
  const auto b = quantile_band(hundred, 0.90);
  CHECK(b.first == doctest::Approx(5.95).epsilon(1e-14));
  CHECK(b.second == doctest::Approx(95.05).epsilon(1e-14));
  CHECK_THROWS_AS(quantile_band({}, 0.9), Error);
  CHECK_THROWS_AS(quantile_band({1.0}, 0.0), Error);
}

TEST_CASE("quantile_band properties") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(5 + trial);
    for (auto& v : s) v = normal(rng);
    auto shuffled = s;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto b90 = quantile_band(s, 0.90);
    CHECK(quantile_band(shuffled, 0.90) == b90);
    const auto b95 = quantile_band(s, 0.95);
    CHECK(b95.first <= b90.first);
    CHECK(b95.second >= b90.second);
    CHECK(b90.first <= b90.second);
    CHECK(b90.first >= *std::min_element(s.begin(), s.end()));
    CHECK(b90.second <= *std::max_element(s.begin(), s.end()));
  }
}

TEST_CASE("cell layouts") {
  CHECK(cell_layout(Method::YuleWalker, 2).size() == 4);
  CHECK(cell_layout(Method::Ridge, 2).size() == 6);
  const auto lc = cell_layout(Method::LocalConstant, 3);
  CHECK(lc.size() == 3 + 9 + 3 + 3);
  CHECK(lc.front() == CellKey{Entry::m, 1, 1});
  CHECK(lc[3] == CellKey{Entry::A, 1, 1});
  CHECK(lc[4] == CellKey{Entry::A, 1, 2});
  CHECK(lc.back() == CellKey{Entry::mu1, 3, 1});
}

TEST_CASE("three fixed replications") {
  const std::vector<FitGrid<double>> reps{scalar_grid(1.0), scalar_grid(2.0), scalar_grid(3.0)};
  ReplicateOptions opt;
  opt.band_levels = {1.0};
  const auto s = summarize(reps, [](double, const CellKey&) { return std::optional<double>(2.0); }, opt);
  REQUIRE(s.cells.size() == 1);
  CHECK(s.cells[0].mean == 2.0);
  CHECK(s.cells[0].bands[0] == std::pair<double, double>(1.0, 3.0));
  CHECK(*s.cells[0].rmse == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
  CHECK(s.M == 3);
  CHECK(s.cells[0].count == 3);
}

TEST_CASE("failed replications are excluded and counted") {
  std::vector<FitGrid<double>> reps{scalar_grid(1.0), scalar_grid(std::nullopt), scalar_grid(3.0)};
  const auto s = summarize(reps, nullptr, {});
  CHECK(s.cells[0].mean == 2.0);
  CHECK(s.cells[0].nfail == 1);
  CHECK(s.failures_per_point[0] == 1);
  CHECK(s.flagged_points() == std::vector<std::size_t>{0});
  CHECK_FALSE(s.has_truth());
  CHECK_FALSE(s.cells[0].rmse.has_value());
  CHECK_THROWS_AS(error_metrics(s), Error);

  std::vector<FitGrid<double>> mostly_ok(20, scalar_grid(1.0));
  mostly_ok[3] = scalar_grid(std::nullopt);
  mostly_ok[9] = scalar_grid(std::nullopt);
  CHECK(summarize(mostly_ok, nullptr, {}).flagged_points().empty());
  mostly_ok[11] = scalar_grid(std::nullopt);
  CHECK(summarize(mostly_ok, nullptr, {}).flagged_points().size() == 1);

  std::ostringstream out;
  write_summary_csv(out, summarize({scalar_grid(std::nullopt), scalar_grid(std::nullopt)}, nullptr, {}));
  CHECK(out.str() == "u,entry,row,col,mean,lo,hi,truth,rmse,nfail\n0.5,A,1,1,,,,,,2\n");
}

TEST_CASE("aggregation is linear and RMSE bounds the bias") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> normal;
  std::vector<FitGrid<double>> a, b, sum;
  for (int i = 0; i < 30; ++i) {
    const double x = normal(rng), y = normal(rng);
    a.push_back(scalar_grid(x));
    b.push_back(scalar_grid(y));
    sum.push_back(scalar_grid(2.0 * x + 3.0 * y));
  }
  const auto truth = [](double, const CellKey&) { return std::optional<double>(0.25); };
  const auto sa = summarize(a, truth, {}), sb = summarize(b, truth, {}), ss = summarize(sum, truth, {});
  CHECK(ss.cells[0].mean == doctest::Approx(2.0 * sa.cells[0].mean + 3.0 * sb.cells[0].mean).epsilon(1e-12));
  for (const auto* s : {&sa, &sb, &ss}) {
    CHECK(*s->cells[0].rmse >= std::abs(s->cells[0].mean - 0.25) - 1e-15);
  }
}

TEST_CASE("error metrics") {
  const std::vector<double> grid{0.02, 0.1, 0.5, 0.9, 0.97};
  const std::vector<FitGrid<double>> reps{scalar_grid(1.0, grid), scalar_grid(1.0, grid)};
  const auto exact = summarize(reps, [](double, const CellKey&) { return std::optional<double>(1.0); }, {});
  const auto m0 = error_metrics(exact);
  REQUIRE(m0.entries.size() == 1);
  CHECK(m0.entries[0].ise == 0.0);
  CHECK(m0.entries[0].boundary_abs_bias == 0.0);

  const auto shifted = summarize(reps, [](double, const CellKey&) { return std::optional<double>(0.7); }, {});
  const auto m1 = error_metrics(shifted);
  CHECK(m1.entries[0].ise == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(m1.entries[0].interior_abs_bias == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(m1.entries[0].boundary_abs_bias == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(m1.average(Entry::A, &EntryMetrics::ise) == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(std::isnan(m1.average(Entry::m, &EntryMetrics::ise)));
}

TEST_CASE("model truth") {
  const auto spec = make_builtin_spec(BuiltinDesign::mean_r3());
  const auto truth = model_truth(spec, 600);
  const double u = 0.4;
  const Eigen::VectorXd mu = spec.mean_curve(u), prev = spec.mean_curve(u - 1.0 / 600);
  const Eigen::MatrixXd a = spec.var_curve(u);
  CHECK(*truth(u, {Entry::A, 2, 3}) == a(1, 2));
  CHECK(*truth(u, {Entry::mu1, 1, 1}) == mu(0));
  CHECK(*truth(u, {Entry::mu0, 3, 1}) == prev(2));
  CHECK(*truth(u, {Entry::m, 2, 1}) == doctest::Approx((mu - a * prev)(1)).epsilon(1e-14));
}

TEST_CASE("replicate is deterministic and independent of thread count") {
  const auto spec = constant_ar1(0.5);
  const KernelSpec k(KernelFamily::Gaussian, 0.15);
  const std::vector<double> grid{0.3, 0.5, 0.7};
  ReplicateOptions serial;
  ReplicateOptions threaded;
  threaded.jobs = 4;
  const auto a = replicate(spec, k, Method::LocalLinear, grid, 8, 5, serial);
  const auto b = replicate(spec, k, Method::LocalLinear, grid, 8, 5, threaded);
  std::ostringstream sa, sb;
  write_summary_csv(sa, a);
  write_summary_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a.T == 400);
  CHECK(a.seed == 5);
  CHECK(a.model_tag == "ar1");

  // Replication i uses seed + i + 1.
  const auto manual = replicate_panels([&](int i) { return simulate(spec, 400, 5 + i + 1); }, 8, k,
                                       Method::LocalLinear, grid, model_truth(spec, 400), serial);
  std::ostringstream sm;
  write_summary_csv(sm, manual);
  CHECK(sm.str() == sa.str());

  CHECK_THROWS_AS(replicate(spec, k, Method::LocalLinear, grid, 1, 5), Error);
  try {
    replicate(constant_ar1(1.2), k, Method::LocalLinear, grid, 4, 5);
    FAIL("expected UnstableModel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnstableModel);
  }
}

TEST_CASE("bands cover the truth for a correctly specified model") {
  const auto spec = constant_ar1(0.5);
  std::vector<double> grid;
  for (int k = 3; k <= 7; ++k) grid.push_back(k / 10.0);
  const auto s = replicate(spec, KernelSpec(KernelFamily::Gaussian, 0.15), Method::LocalConstant, grid, 60, 9);
  int covered = 0, total = 0;
  for (const auto& c : s.cells) {
    if (c.key.entry != Entry::A) continue;
    ++total;
    if (c.bands[0].first <= *c.truth && *c.truth <= c.bands[0].second) ++covered;
  }
  CHECK(total == 5);
  CHECK(covered >= total / 2);
}
