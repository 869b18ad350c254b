#include "csdml/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace csdml {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

VectorXd sorted(VectorXd v) {
  std::sort(v.data(), v.data() + v.size());
  return v;
}

struct MethodTally {
  double squared_error_sum = 0.0;  // degrees^2
  double time_sum = 0.0;
  int successes = 0;
  int failures = 0;
};

struct TrialOutcome {
  bool ok = false;
  VectorXd estimate;  // radians
  double seconds = 0.0;
};

/// Runs one method on one realization. Recovery/Newton share the stage
/// timings reported by csdml_estimate(); on-grid methods time only the recovery call.
TrialOutcome run_method(Method method, const SnapshotMatrix& snapshots,
                        const ArrayGeometry& geom, const Dictionary& dict,
                        const SourceScenario& scenario,
                        const ExperimentConfig& config) {
  const int k = scenario.sources();
  TrialOutcome outcome;
  try {
    switch (method) {
      case Method::omp: {
        const MatrixXcd reduced = svd_reduce(snapshots, k);
        const double t0 = now_seconds();
        const RecoveryResult rec = m_omp(dict, reduced, k);
        outcome.seconds = now_seconds() - t0;
        if (static_cast<int>(rec.support.size()) < k) return outcome;
        outcome.estimate = rec.coarse_doas;
        outcome.ok = true;
        return outcome;
      }
      case Method::sbl: {
        const MatrixXcd reduced = svd_reduce(snapshots, k);
        MsblOptions options;
        if (config.sbl_true_noise) options.noise_power = scenario.noise_power;
        const double t0 = now_seconds();
        const RecoveryResult rec = m_sbl(dict, reduced, k, options);
        outcome.seconds = now_seconds() - t0;
        if (static_cast<int>(rec.support.size()) < k) return outcome;
        outcome.estimate = rec.coarse_doas;
        outcome.ok = true;
        return outcome;
      }
      case Method::csdml_omp:
      case Method::csdml_sbl: {
        CsdmlOptions options;
        options.method = method == Method::csdml_omp ? RecoveryMethod::omp
                                                     : RecoveryMethod::sbl;
        options.grid_interval_deg = rad2deg(dict.grid.interval);
        options.newton = config.newton;
        if (config.sbl_true_noise) {
          options.sbl_noise_power = scenario.noise_power;
        }
        const CsdmlResult res = csdml_estimate(snapshots, geom, k, options);
        outcome.seconds = res.recovery_seconds + res.newton_seconds;
        const bool newton_failed =
            !res.newton.converged && res.newton.grad_norm > 1e-3;
        if (res.recovery_short || newton_failed) return outcome;
        outcome.estimate = res.doas;
        outcome.ok = true;
        return outcome;
      }
    }
  } catch (const std::exception&) {
    outcome.ok = false;
  }
  return outcome;
}

VectorXd draw_doas(const DoaSpec& spec, Rng& rng) {
  if (!spec.random) return spec.fixed;
  VectorXd doas(spec.intervals.size());
  for (std::size_t i = 0; i < spec.intervals.size(); ++i) {
    const auto& [lo, hi] = spec.intervals[i];
    doas[static_cast<int>(i)] = lo + rng.uniform() * (hi - lo);
  }
  return sorted(std::move(doas));
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::omp: return "omp";
    case Method::sbl: return "sbl";
    case Method::csdml_omp: return "csdml-omp";
    case Method::csdml_sbl: return "csdml-sbl";
  }
  return "?";
}

std::optional<Method> parse_method(const std::string& name) {
  if (name == "omp") return Method::omp;
  if (name == "sbl") return Method::sbl;
  if (name == "csdml-omp") return Method::csdml_omp;
  if (name == "csdml-sbl") return Method::csdml_sbl;
  return std::nullopt;
}

std::string sweep_var_name(SweepVar var) {
  switch (var) {
    case SweepVar::snr: return "snr";
    case SweepVar::snapshots: return "snapshots";
    case SweepVar::grid: return "grid";
  }
  return "?";
}

std::optional<SweepVar> parse_sweep_var(const std::string& name) {
  if (name == "snr") return SweepVar::snr;
  if (name == "snapshots") return SweepVar::snapshots;
  if (name == "grid") return SweepVar::grid;
  return std::nullopt;
}

ArrayGeometry make_geometry(int sensors, const std::vector<double>& positions) {
  if (!positions.empty()) return ArrayGeometry(positions);
  return ArrayGeometry::ula(sensors);
}

const ResultRow* ExperimentResult::find(const std::string& method,
                                        double sweep_value) const {
  for (const auto& row : rows) {
    if (row.method == method && row.sweep_value == sweep_value) return &row;
  }
  return nullptr;
}

double rmse(const std::vector<VectorXd>& truths,
            const std::vector<VectorXd>& estimates) {
  if (truths.size() != estimates.size()) {
    throw std::invalid_argument("need one estimate per truth");
  }
  if (truths.empty()) throw std::invalid_argument("need at least one trial");
  double acc = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i].size() != estimates[i].size()) {
      throw std::invalid_argument("trial dimension mismatch");
    }
    const VectorXd t = sorted(truths[i]);
    const VectorXd e = sorted(estimates[i]);
    acc += (t - e).squaredNorm();
    count += t.size();
  }
  return std::sqrt(acc / static_cast<double>(count));
}

double glb_uniform(double r_degrees) {
  if (!(r_degrees > 0.0)) throw std::invalid_argument("grid interval must be > 0");
  return r_degrees / (2.0 * std::sqrt(3.0));
}

double glb_fixed(const VectorXd& truths_deg, const AngleGrid& grid) {
  double acc = 0.0;
  for (int k = 0; k < truths_deg.size(); ++k) {
    const double truth = truths_deg[k];
    double best = rad2deg(grid.angles[0]);
    double best_dist = std::abs(truth - best);
    for (int n = 1; n < grid.size(); ++n) {
      const double angle = rad2deg(grid.angles[n]);
      const double dist = std::abs(truth - angle);
      if (dist < best_dist - 1e-12) {  // ties keep the lower grid point
        best_dist = dist;
        best = angle;
      }
    }
    acc += (truth - best) * (truth - best);
  }
  return std::sqrt(acc / static_cast<double>(truths_deg.size()));
}

double crb_rmse(const ArrayGeometry& geom, const SourceScenario& scenario) {
  if (!(scenario.noise_power > 0.0)) {
    throw std::invalid_argument("CRB needs positive noise power");
  }
  const ProjectorBundle bundle = projector_bundle(geom, scenario.doas);
  const MatrixXcd dpd = bundle.deriv.adjoint() * bundle.perp * bundle.deriv;
  const MatrixXd info =
      (dpd.cwiseProduct(MatrixXcd(scenario.powers.asDiagonal()).transpose()))
          .real();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(info);
  if (!(eig.eigenvalues()[0] > 0.0)) {
    throw std::runtime_error("singular Fisher information matrix");
  }
  const MatrixXd crb = (scenario.noise_power /
                        (2.0 * static_cast<double>(scenario.snapshots))) *
                       info.inverse();
  return rad2deg(std::sqrt(crb.trace() / scenario.sources()));
}

ExperimentResult run_sweep(const ExperimentConfig& config) {
  if (config.trials < 1) throw std::invalid_argument("need at least one trial");
  if (config.sweep_values.empty()) {
    throw std::invalid_argument("need at least one sweep value");
  }
  if (config.methods.empty()) throw std::invalid_argument("need a method list");
  for (std::size_t i = 1; i < config.doas.intervals.size(); ++i) {
    if (config.doas.intervals[i].first < config.doas.intervals[i - 1].second) {
      throw std::invalid_argument("DOA intervals must not overlap");
    }
  }

  const ArrayGeometry geom = make_geometry(config.sensors, config.positions);
  const std::string var = sweep_var_name(config.sweep);
  ExperimentResult result;

  for (double value : config.sweep_values) {
    const double snr = config.sweep == SweepVar::snr ? value : config.snr_db;
    const int snapshots = config.sweep == SweepVar::snapshots
                              ? static_cast<int>(value)
                              : config.snapshots;
    const double r_deg =
        config.sweep == SweepVar::grid ? value : config.grid_interval_deg;

    const AngleGrid grid = (config.gamma && config.sweep != SweepVar::grid)
                               ? build_grid(geom, *config.gamma)
                               : build_grid_explicit(r_deg);
    const Dictionary dict = build_dictionary(geom, grid);

    std::vector<MethodTally> tallies(config.methods.size());
    double crb_sum = 0.0;

    for (int trial = 0; trial < config.trials; ++trial) {
      const std::uint64_t trial_seed = mix_seed(config.base_seed, trial);
      Rng doa_rng(mix_seed(trial_seed, 1));
      const VectorXd doas = draw_doas(config.doas, doa_rng);
      const SourceScenario scenario =
          SourceScenario::equal_power(doas, snr, snapshots);
      const SnapshotMatrix snapshots_data =
          synthesize_snapshots(geom, scenario, mix_seed(trial_seed, 2));
      crb_sum += crb_rmse(geom, scenario);

      const VectorXd truth_deg = rad2deg(sorted(doas));
      for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        const TrialOutcome outcome = run_method(
            config.methods[mi], snapshots_data, geom, dict, scenario, config);
        if (!outcome.ok) {
          ++tallies[mi].failures;
          continue;
        }
        const VectorXd estimate_deg = rad2deg(sorted(outcome.estimate));
        tallies[mi].squared_error_sum +=
            (truth_deg - estimate_deg).squaredNorm();
        tallies[mi].time_sum += outcome.seconds;
        ++tallies[mi].successes;
      }
    }

    const int k = config.doas.sources();
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const MethodTally& tally = tallies[mi];
      ResultRow row;
      row.sweep_var = var;
      row.sweep_value = value;
      row.method = method_name(config.methods[mi]);
      row.trials = config.trials;
      row.failures = tally.failures;
      row.rmse_deg =
          tally.successes > 0
              ? std::sqrt(tally.squared_error_sum /
                          (static_cast<double>(tally.successes) * k))
              : std::numeric_limits<double>::quiet_NaN();
      row.mean_time_s = (config.record_timing && tally.successes > 0)
                            ? tally.time_sum / tally.successes
                            : 0.0;
      result.rows.push_back(std::move(row));
    }

    ResultRow crb_row;
    crb_row.sweep_var = var;
    crb_row.sweep_value = value;
    crb_row.method = "CRB";
    crb_row.rmse_deg = crb_sum / config.trials;
    crb_row.trials = config.trials;
    result.rows.push_back(std::move(crb_row));

    ResultRow glb_row;
    glb_row.sweep_var = var;
    glb_row.sweep_value = value;
    glb_row.method = "GLB";
    glb_row.rmse_deg = config.doas.random
                           ? glb_uniform(rad2deg(grid.interval))
                           : glb_fixed(rad2deg(config.doas.fixed), grid);
    glb_row.trials = config.trials;
    result.rows.push_back(std::move(glb_row));
  }
  return result;
}

std::string to_csv(const ExperimentResult& result) {
  std::string csv = "sweep_var,sweep_value,method,rmse_deg,mean_time_s,failures,trials\n";
  for (const auto& row : result.rows) {
    csv += row.sweep_var;
    csv += ',';
    csv += format_double(row.sweep_value);
    csv += ',';
    csv += row.method;
    csv += ',';
    csv += format_double(row.rmse_deg);
    csv += ',';
    csv += format_double(row.mean_time_s);
    csv += ',';
    csv += std::to_string(row.failures);
    csv += ',';
    csv += std::to_string(row.trials);
    csv += '\n';
  }
  return csv;
}

std::vector<TimingRow> timing_table(const ExperimentConfig& config) {
  const ArrayGeometry geom = make_geometry(config.sensors, config.positions);
  const std::string var = sweep_var_name(config.sweep);
  std::vector<TimingRow> rows;

  for (double value : config.sweep_values) {
    const double snr = config.sweep == SweepVar::snr ? value : config.snr_db;
    const int snapshots = config.sweep == SweepVar::snapshots
                              ? static_cast<int>(value)
                              : config.snapshots;
    const double r_deg =
        config.sweep == SweepVar::grid ? value : config.grid_interval_deg;

    double omp_s = 0.0, dml_omp_s = 0.0, sbl_s = 0.0, dml_sbl_s = 0.0;
    for (int trial = 0; trial < config.trials; ++trial) {
      const std::uint64_t trial_seed = mix_seed(config.base_seed, trial);
      Rng doa_rng(mix_seed(trial_seed, 1));
      const VectorXd doas = draw_doas(config.doas, doa_rng);
      const SourceScenario scenario =
          SourceScenario::equal_power(doas, snr, snapshots);
      const SnapshotMatrix snapshots_data =
          synthesize_snapshots(geom, scenario, mix_seed(trial_seed, 2));

      for (RecoveryMethod method : {RecoveryMethod::omp, RecoveryMethod::sbl}) {
        CsdmlOptions options;
        options.method = method;
        options.grid_interval_deg = r_deg;
        options.newton = config.newton;
        if (config.sbl_true_noise) {
          options.sbl_noise_power = scenario.noise_power;
        }
        const CsdmlResult res =
            csdml_estimate(snapshots_data, geom, scenario.sources(), options);
        if (method == RecoveryMethod::omp) {
          omp_s += res.recovery_seconds;
          dml_omp_s += res.newton_seconds;
        } else {
          sbl_s += res.recovery_seconds;
          dml_sbl_s += res.newton_seconds;
        }
      }
    }

    const double n = static_cast<double>(config.trials);
    const auto add = [&](const char* stage, double total) {
      rows.push_back({var, value, stage, total / n, config.trials});
    };
    add("sbl", sbl_s);
    add("dml(sbl)", dml_sbl_s);
    add("csdml(sbl)", sbl_s + dml_sbl_s);
    add("omp", omp_s);
    add("dml(omp)", dml_omp_s);
    add("csdml(omp)", omp_s + dml_omp_s);
  }
  return rows;
}

std::string to_csv(const std::vector<TimingRow>& rows) {
  std::string csv = "sweep_var,sweep_value,stage,mean_time_s,trials\n";
  for (const auto& row : rows) {
    csv += row.sweep_var;
    csv += ',';
    csv += format_double(row.sweep_value);
    csv += ',';
    csv += row.stage;
    csv += ',';
    csv += format_double(row.mean_time_s);
    csv += ',';
    csv += std::to_string(row.trials);
    csv += '\n';
  }
  return csv;
}

ConvexityMetricsResult convexity_metrics(const ConvexityMetricsConfig& config) {
  if (!config.use_exact_covariance && config.trials < 1) {
    throw std::invalid_argument("need at least one trial");
  }
  const ArrayGeometry geom = make_geometry(config.sensors, config.positions);
  RegionScanSpec spec = RegionScanSpec::defaults(geom, config.doas);
  spec.psd_tolerance = config.psd_tolerance;
  if (config.half_width_deg) {
    spec.half_width.setConstant(deg2rad(*config.half_width_deg));
  }
  if (config.step_deg) spec.step.setConstant(deg2rad(*config.step_deg));

  const ConvexRegion approx_criterion =
      approx_region(geom, spec, ApproxMode::criterion);
  const ConvexRegion approx_halfbw =
      approx_region(geom, spec, ApproxMode::half_beamwidth);

  ConvexityMetricsResult result;
  const int k = static_cast<int>(config.doas.size());
  const int trials = config.use_exact_covariance ? 1 : config.trials;

  for (int trial = 0; trial < trials; ++trial) {
    MatrixXcd covariance;
    const SourceScenario scenario = SourceScenario::equal_power(
        config.doas, config.snr_db, config.snapshots);
    if (config.use_exact_covariance) {
      covariance = exact_covariance(geom, scenario).data;
    } else {
      const std::uint64_t trial_seed = mix_seed(config.base_seed, trial);
      covariance =
          sample_covariance(
              synthesize_snapshots(geom, scenario, mix_seed(trial_seed, 2)))
              .data;
    }
    const RegionScan scan = exact_region(geom, spec, covariance);
    if (scan.region.cells.empty()) {
      ++result.degenerate_trials;
      continue;
    }
    ConvexityMetricsResult::Trial row;
    row.trial = trial;
    std::tie(row.irr_criterion, row.iar_criterion) =
        irr_iar(scan.region, approx_criterion, k);
    std::tie(row.irr_half_beamwidth, row.iar_half_beamwidth) =
        irr_iar(scan.region, approx_halfbw, k);
    result.trials.push_back(row);
  }

  const double n = std::max<std::size_t>(result.trials.size(), 1);
  for (const auto& row : result.trials) {
    result.mean_irr_criterion += row.irr_criterion / n;
    result.mean_iar_criterion += row.iar_criterion / n;
    result.mean_irr_half_beamwidth += row.irr_half_beamwidth / n;
    result.mean_iar_half_beamwidth += row.iar_half_beamwidth / n;
  }
  return result;
}

}  // namespace csdml
