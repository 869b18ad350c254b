#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "csdml/bench.hpp"
#include "oracles.hpp"

using namespace csdml;

namespace {

std::vector<VectorXd> wrap(std::initializer_list<std::initializer_list<double>> lists) {
  std::vector<VectorXd> out;
  for (const auto& list : lists) {
    VectorXd v(list.size());
    int i = 0;
    for (double x : list) v[i++] = x;
    out.push_back(v);
  }
  return out;
}

std::string strip_time_column(const std::string& csv) {
  std::stringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string field;
    int index = 0;
    while (std::getline(row, field, ',')) {
      if (index != 4) out += field + ",";
      ++index;
    }
    out += "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("rmse") {
  CHECK(rmse(wrap({{1.0, 2.0}}), wrap({{1.0, 2.0}})) == 0.0);
  CHECK(rmse(wrap({{5.0}}), wrap({{6.0}})) == doctest::Approx(1.0));
  CHECK(rmse(wrap({{0.0, 10.0}, {0.0, 10.0}}),
             wrap({{1.0, 11.0}, {-1.0, 9.0}})) == doctest::Approx(1.0));
  // estimates are paired after sorting
  CHECK(rmse(wrap({{0.0, 10.0}}), wrap({{10.0, 0.0}})) == 0.0);
  CHECK_THROWS(rmse(wrap({{1.0}}), wrap({{1.0}, {2.0}})));
}

TEST_CASE("grid lower bound, uniform DOAs") {
  CHECK(glb_uniform(2.0) == doctest::Approx(0.577350269));
  CHECK(glb_uniform(1.0) == doctest::Approx(0.288675135));
  CHECK(glb_uniform(1e-9) < 1e-9);
  CHECK_THROWS(glb_uniform(0.0));
}

TEST_CASE("grid lower bound, fixed DOAs") {
  const AngleGrid grid = build_grid_explicit(2.0);

  VectorXd on_grid(2);
  on_grid << -14.0, 22.0;
  CHECK(glb_fixed(on_grid, grid) == doctest::Approx(0.0));

  VectorXd fig4(2);
  fig4 << 2.37, 30.82;
  CHECK(glb_fixed(fig4, grid) == doctest::Approx(0.636121058));

  // midpoint resolves to the lower grid point at half-interval error
  VectorXd midpoint(1);
  midpoint << 1.0;
  CHECK(glb_fixed(midpoint, grid) == doctest::Approx(1.0));
}

TEST_CASE("CRB") {
  const ArrayGeometry geom = ArrayGeometry::ula(8);
  VectorXd theta(2);
  theta << deg2rad(2.37), deg2rad(30.82);

  SUBCASE("frozen reference value") {
    const SourceScenario scenario = SourceScenario::equal_power(theta, 10.0, 200);
    CHECK(crb_rmse(geom, scenario) == doctest::Approx(0.144170988).epsilon(1e-6));
  }

  SUBCASE("scalings in T and SNR") {
    const SourceScenario base = SourceScenario::equal_power(theta, 10.0, 200);
    const SourceScenario twice_t = SourceScenario::equal_power(theta, 10.0, 400);
    const SourceScenario plus10 = SourceScenario::equal_power(theta, 20.0, 200);
    CHECK(crb_rmse(geom, twice_t) ==
          doctest::Approx(crb_rmse(geom, base) / std::sqrt(2.0)));
    CHECK(crb_rmse(geom, plus10) ==
          doctest::Approx(crb_rmse(geom, base) / std::sqrt(10.0)));
  }

  SUBCASE("matches the finite-difference Fisher oracle") {
    for (double snr : {0.0, 10.0}) {
      const SourceScenario scenario = SourceScenario::equal_power(theta, snr, 100);
      const double fd = oracles::fd_fisher_crb_deg(geom, scenario, 1e-6);
      CHECK(std::abs(crb_rmse(geom, scenario) - fd) / fd < 1e-4);
    }
  }

  SUBCASE("needs noise") {
    const SourceScenario noiseless(theta, VectorXd::Ones(2), 0.0, 100);
    CHECK_THROWS(crb_rmse(geom, noiseless));
  }
}

TEST_CASE("run_sweep determinism and schema") {
  ExperimentConfig config;
  config.doas.fixed = VectorXd(2);
  config.doas.fixed << deg2rad(2.37), deg2rad(30.82);
  config.sweep = SweepVar::snr;
  config.sweep_values = {10.0};
  config.methods = {Method::omp};
  config.trials = 3;
  config.base_seed = 11;

  SUBCASE("bit-identical CSV with timing disabled") {
    config.record_timing = false;
    const std::string a = to_csv(run_sweep(config));
    const std::string b = to_csv(run_sweep(config));
    CHECK(a == b);
    CHECK(a.rfind("sweep_var,sweep_value,method,rmse_deg,mean_time_s,failures,trials\n",
                  0) == 0);
  }

  SUBCASE("identical statistics with timing enabled") {
    config.record_timing = true;
    const std::string a = strip_time_column(to_csv(run_sweep(config)));
    const std::string b = strip_time_column(to_csv(run_sweep(config)));
    CHECK(a == b);
  }

  SUBCASE("row layout: methods then references per sweep value") {
    config.methods = {Method::omp, Method::csdml_omp};
    const ExperimentResult result = run_sweep(config);
    REQUIRE(result.rows.size() == 4);
    CHECK(result.rows[0].method == "omp");
    CHECK(result.rows[1].method == "csdml-omp");
    CHECK(result.rows[2].method == "CRB");
    CHECK(result.rows[3].method == "GLB");
  }
}

TEST_CASE("paired sweep: refinement never loses to the on-grid stage") {
  ExperimentConfig config;
  config.doas.fixed = VectorXd(2);
  config.doas.fixed << deg2rad(2.37), deg2rad(30.82);
  config.sweep = SweepVar::snr;
  config.sweep_values = {0.0, 10.0};
  config.methods = {Method::omp, Method::sbl, Method::csdml_omp,
                    Method::csdml_sbl};
  config.trials = 25;
  config.base_seed = 4;
  config.record_timing = false;
  const ExperimentResult result = run_sweep(config);
  for (double value : config.sweep_values) {
    const double omp = result.find("omp", value)->rmse_deg;
    const double sbl = result.find("sbl", value)->rmse_deg;
    const double csdml_omp = result.find("csdml-omp", value)->rmse_deg;
    const double csdml_sbl = result.find("csdml-sbl", value)->rmse_deg;
    CHECK(csdml_omp <= omp + 1e-12);
    CHECK(csdml_sbl <= sbl + 1e-12);
    // fixed-DOA floor for the on-grid methods
    const double floor = glb_fixed(rad2deg(config.doas.fixed),
                                   build_grid_explicit(config.grid_interval_deg));
    CHECK(omp >= floor - 0.01);
    CHECK(sbl >= floor - 0.01);
  }
}

TEST_CASE("uniform-DOA sweep respects the statistical floor") {
  ExperimentConfig config;
  config.doas.random = true;
  config.doas.intervals = {{deg2rad(-3.0), deg2rad(3.0)},
                           {deg2rad(27.0), deg2rad(33.0)}};
  config.sweep = SweepVar::grid;
  config.sweep_values = {2.0};
  config.methods = {Method::omp};
  config.trials = 400;
  config.base_seed = 6;
  config.record_timing = false;
  const ExperimentResult result = run_sweep(config);
  CHECK(result.find("omp", 2.0)->rmse_deg >= glb_uniform(2.0) - 0.02);
  CHECK(result.find("GLB", 2.0)->rmse_deg == doctest::Approx(glb_uniform(2.0)));
}

TEST_CASE("snapshot sweep scales like the CRB") {
  ExperimentConfig config;
  config.doas.fixed = VectorXd(2);
  config.doas.fixed << deg2rad(2.37), deg2rad(30.82);
  config.sweep = SweepVar::snapshots;
  config.sweep_values = {100.0, 400.0};
  config.methods = {Method::csdml_omp};
  config.trials = 20;
  config.base_seed = 12;
  config.record_timing = false;
  const ExperimentResult result = run_sweep(config);
  // quadrupling T halves the CRB exactly and the estimator roughly
  CHECK(result.find("CRB", 400.0)->rmse_deg ==
        doctest::Approx(result.find("CRB", 100.0)->rmse_deg / 2.0));
  CHECK(result.find("csdml-omp", 400.0)->rmse_deg <
        result.find("csdml-omp", 100.0)->rmse_deg);
}

TEST_CASE("explicit positions reproduce the equivalent ULA") {
  ExperimentConfig config;
  config.sensors = 6;
  config.doas.fixed = VectorXd(1);
  config.doas.fixed << deg2rad(11.2);
  config.sweep = SweepVar::snr;
  config.sweep_values = {10.0};
  config.methods = {Method::csdml_omp};
  config.trials = 4;
  config.base_seed = 9;
  config.record_timing = false;
  const std::string by_count = to_csv(run_sweep(config));
  config.positions = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
  const std::string by_positions = to_csv(run_sweep(config));
  CHECK(by_count == by_positions);
}

TEST_CASE("timing table shape") {
  ExperimentConfig config;
  config.doas.fixed = VectorXd(2);
  config.doas.fixed << deg2rad(2.37), deg2rad(30.82);
  config.sweep = SweepVar::grid;
  config.sweep_values = {4.0};
  config.trials = 3;
  config.base_seed = 2;
  const std::vector<TimingRow> rows = timing_table(config);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].stage == "sbl");
  CHECK(rows[1].stage == "dml(sbl)");
  CHECK(rows[2].stage == "csdml(sbl)");
  CHECK(rows[3].stage == "omp");
  CHECK(rows[4].stage == "dml(omp)");
  CHECK(rows[5].stage == "csdml(omp)");
  CHECK(rows[2].mean_time_s ==
        doctest::Approx(rows[0].mean_time_s + rows[1].mean_time_s));
  const std::string csv = to_csv(rows);
  CHECK(csv.rfind("sweep_var,sweep_value,stage,mean_time_s,trials\n", 0) == 0);
}

TEST_CASE("SBL stage time shrinks as the grid coarsens") {
  ExperimentConfig config;
  config.doas.fixed = VectorXd(2);
  config.doas.fixed << deg2rad(2.37), deg2rad(30.82);
  config.sweep = SweepVar::grid;
  config.sweep_values = {1.0, 6.0};
  config.trials = 10;
  config.base_seed = 3;
  const std::vector<TimingRow> rows = timing_table(config);
  double fine = -1.0, coarse = -1.0;
  for (const auto& row : rows) {
    if (row.stage != "sbl") continue;
    (row.sweep_value == 1.0 ? fine : coarse) = row.mean_time_s;
  }
  // the fine grid has ~6x the atoms; anything above 2x is a safe assertion
  CHECK(fine > 2.0 * coarse);
}

TEST_CASE("convexity metrics smoke") {
  ConvexityMetricsConfig config;
  config.sensors = 8;
  config.doas = VectorXd(2);
  config.doas << deg2rad(-7.5), deg2rad(7.5);
  config.use_exact_covariance = true;
  const ConvexityMetricsResult result = convexity_metrics(config);
  REQUIRE(result.trials.size() == 1);
  CHECK(result.degenerate_trials == 0);
  for (double value :
       {result.mean_irr_criterion, result.mean_iar_criterion,
        result.mean_irr_half_beamwidth, result.mean_iar_half_beamwidth}) {
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);
  }
  // exact covariance: re-running reproduces the numbers exactly
  const ConvexityMetricsResult again = convexity_metrics(config);
  CHECK(again.mean_irr_criterion == result.mean_irr_criterion);
  CHECK(again.mean_iar_criterion == result.mean_iar_criterion);
}

TEST_CASE("method names round-trip") {
  for (Method method : {Method::omp, Method::sbl, Method::csdml_omp,
                        Method::csdml_sbl}) {
    CHECK(parse_method(method_name(method)) == method);
  }
  CHECK_FALSE(parse_method("nope").has_value());
  CHECK(parse_sweep_var("grid") == SweepVar::grid);
  CHECK_FALSE(parse_sweep_var("r").has_value());
}
