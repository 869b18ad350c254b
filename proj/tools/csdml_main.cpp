#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csdml/bench.hpp"

namespace {

using namespace csdml;

VectorXd parse_list_deg(const std::vector<double>& values) {
  VectorXd v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    v[static_cast<int>(i)] = deg2rad(values[i]);
  }
  return v;
}

std::vector<std::pair<double, double>> parse_intervals_deg(
    const std::string& text) {
  std::vector<std::pair<double, double>> intervals;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw CLI::ValidationError("--doa-intervals",
                                 "expected lo:hi pairs separated by commas");
    }
    intervals.emplace_back(deg2rad(std::stod(item.substr(0, colon))),
                           deg2rad(std::stod(item.substr(colon + 1))));
  }
  return intervals;
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << text;
}

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

struct SweepFlags {
  int sensors = 8;
  std::vector<double> positions;
  std::vector<double> doas_deg;
  std::string intervals;
  double snr_db = 10.0;
  int snapshots = 200;
  double r_deg = 2.0;
  double gamma = 0.0;  // > 0 switches the grid to gamma-derived
  std::string vary = "snr";
  std::vector<double> values;
  std::vector<std::string> methods{"omp", "sbl", "csdml-omp", "csdml-sbl"};
  int trials = 1000;
  std::uint64_t seed = 1;
  bool no_times = false;
  bool estimate_noise = false;
  std::string out;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& flags) {
  cmd->add_option("--sensors,-M", flags.sensors, "ULA sensor count");
  cmd->add_option("--positions", flags.positions,
                  "explicit sensor positions in wavelengths (overrides --sensors)")
      ->delimiter(',');
  cmd->add_option("--doas", flags.doas_deg,
                  "fixed true DOAs in degrees (comma separated)")
      ->delimiter(',');
  cmd->add_option("--doa-intervals", flags.intervals,
                  "per-source uniform intervals lo:hi,lo:hi (degrees), drawn "
                  "fresh each trial");
  cmd->add_option("--snr", flags.snr_db, "SNR in dB (when not swept)");
  cmd->add_option("--snapshots,-T", flags.snapshots,
                  "snapshot count (when not swept)");
  cmd->add_option("--r", flags.r_deg, "grid interval in degrees (when not swept)");
  cmd->add_option("--gamma", flags.gamma,
                  "derive the grid interval as gamma*BW/2 instead of --r");
  cmd->add_option("--trials", flags.trials, "Monte Carlo trials per sweep value");
  cmd->add_option("--seed", flags.seed, "base seed");
  cmd->add_flag("--no-times", flags.no_times,
                "zero the time column for bit-stable output");
  cmd->add_flag("--estimate-noise", flags.estimate_noise,
                "let M-SBL estimate the noise power instead of using the true one");
  cmd->add_option("--out", flags.out, "write CSV here instead of stdout");
}

ExperimentConfig to_config(const SweepFlags& flags) {
  ExperimentConfig config;
  config.sensors = flags.sensors;
  config.positions = flags.positions;
  if (!flags.intervals.empty()) {
    config.doas.random = true;
    config.doas.intervals = parse_intervals_deg(flags.intervals);
  } else {
    config.doas.fixed = parse_list_deg(flags.doas_deg);
  }
  config.snr_db = flags.snr_db;
  config.snapshots = flags.snapshots;
  config.grid_interval_deg = flags.r_deg;
  if (flags.gamma > 0.0) config.gamma = flags.gamma;
  config.trials = flags.trials;
  config.base_seed = flags.seed;
  config.record_timing = !flags.no_times;
  config.sbl_true_noise = !flags.estimate_noise;
  for (const auto& name : flags.methods) {
    const auto method = parse_method(name);
    if (!method) throw CLI::ValidationError("--methods", "unknown method " + name);
    config.methods.push_back(*method);
  }
  return config;
}

int run_single(const SweepFlags& flags, const std::string& method_name,
               std::uint64_t seed) {
  const ArrayGeometry geom = make_geometry(flags.sensors, flags.positions);
  const VectorXd doas = parse_list_deg(flags.doas_deg);
  const SourceScenario scenario =
      SourceScenario::equal_power(doas, flags.snr_db, flags.snapshots);
  const SnapshotMatrix snapshots = synthesize_snapshots(geom, scenario, seed);

  CsdmlOptions options;
  if (method_name == "sbl") {
    options.method = RecoveryMethod::sbl;
  } else if (method_name != "omp") {
    throw CLI::ValidationError("--method", "expected omp or sbl");
  }
  if (flags.gamma > 0.0) {
    options.gamma = flags.gamma;
  } else {
    options.grid_interval_deg = flags.r_deg;
  }
  if (!flags.estimate_noise) options.sbl_noise_power = scenario.noise_power;

  const CsdmlResult result =
      csdml_estimate(snapshots, geom, scenario.sources(), options);

  std::printf("method: csdml(%s)\n", method_name.c_str());
  std::printf("coarse DOAs (deg):");
  for (int i = 0; i < result.coarse_doas.size(); ++i) {
    std::printf(" %s", fmt(rad2deg(result.coarse_doas[i])).c_str());
  }
  std::printf("\nrefined DOAs (deg):");
  for (int i = 0; i < result.doas.size(); ++i) {
    std::printf(" %s", fmt(rad2deg(result.doas[i])).c_str());
  }
  std::printf("\niterations: %d\nobjective: %s\ngradient norm: %s\n",
              result.newton.iterations, fmt(result.newton.objective).c_str(),
              fmt(result.newton.grad_norm).c_str());
  std::printf("converged: %s\nrecovery time (s): %s\nnewton time (s): %s\n",
              result.newton.converged ? "yes" : "no",
              fmt(result.recovery_seconds).c_str(),
              fmt(result.newton_seconds).c_str());
  return 0;
}

int run_convexity_map(int sensors, const std::vector<double>& positions,
                      const std::vector<double>& doas_deg, double snr_db,
                      int snapshots, bool exact_r, double half_width_deg,
                      double step_deg, double psd_tol,
                      const std::string& mode_name, std::uint64_t seed,
                      const std::string& out) {
  const ArrayGeometry geom = make_geometry(sensors, positions);
  const VectorXd doas = parse_list_deg(doas_deg);
  RegionScanSpec spec = RegionScanSpec::defaults(geom, doas);
  spec.psd_tolerance = psd_tol;
  if (half_width_deg > 0.0) spec.half_width.setConstant(deg2rad(half_width_deg));
  if (step_deg > 0.0) spec.step.setConstant(deg2rad(step_deg));

  const SourceScenario scenario =
      SourceScenario::equal_power(doas, snr_db, snapshots);
  MatrixXcd covariance;
  if (exact_r) {
    covariance = exact_covariance(geom, scenario).data;
  } else {
    covariance =
        sample_covariance(synthesize_snapshots(geom, scenario, seed)).data;
  }

  const ApproxMode mode = mode_name == "half_beamwidth"
                              ? ApproxMode::half_beamwidth
                              : ApproxMode::criterion;
  const RegionScan scan = exact_region(geom, spec, covariance);
  const ConvexRegion approx = approx_region(geom, spec, mode);

  std::string csv;
  const int k = scan.region.lattice.axes();
  for (int i = 0; i < k; ++i) {
    csv += "theta" + std::to_string(i + 1) + "_deg,";
  }
  csv += "lambda_min,in_exact,in_approx\n";

  // Enumerate in the scan's order so min_eigs stays aligned.
  std::size_t flat = 0;
  const ScanLattice& lattice = scan.region.lattice;
  std::vector<int> cell(k);
  for (int i = 0; i < k; ++i) cell[i] = -lattice.half_cells[i];
  while (true) {
    const VectorXd angles = lattice.cell_angles(cell);
    for (int i = 0; i < k; ++i) csv += fmt(rad2deg(angles[i])) + ",";
    csv += fmt(scan.min_eigs[flat]);
    csv += scan.region.contains(cell) ? ",1" : ",0";
    csv += approx.contains(cell) ? ",1\n" : ",0\n";
    ++flat;
    int axis = k - 1;
    while (axis >= 0 && cell[axis] == lattice.half_cells[axis]) {
      cell[axis] = -lattice.half_cells[axis];
      --axis;
    }
    if (axis < 0) break;
    ++cell[axis];
  }
  write_output(csv, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSDML off-grid DOA estimation: compressed-sensing coarse "
               "stage, Newton-refined deterministic maximum likelihood, and "
               "convexity-region analysis"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "read options from a key=value file ([subcommand] sections)");

  // single-run
  SweepFlags single_flags;
  std::string single_method = "omp";
  std::uint64_t single_seed = 1;
  auto* single = app.add_subcommand(
      "single-run", "run the two-stage estimator once and print the result");
  single->add_option("--sensors,-M", single_flags.sensors, "ULA sensor count");
  single->add_option("--positions", single_flags.positions,
                     "explicit sensor positions in wavelengths")
      ->delimiter(',');
  single->add_option("--doas", single_flags.doas_deg, "true DOAs in degrees")
      ->delimiter(',')
      ->required();
  single->add_option("--snr", single_flags.snr_db, "SNR in dB");
  single->add_option("--snapshots,-T", single_flags.snapshots, "snapshot count");
  single->add_option("--r", single_flags.r_deg, "grid interval in degrees");
  single->add_option("--gamma", single_flags.gamma,
                     "derive the grid interval as gamma*BW/2");
  single->add_option("--method", single_method, "recovery method: omp | sbl");
  single->add_option("--seed", single_seed, "snapshot seed");
  single->add_flag("--estimate-noise", single_flags.estimate_noise,
                   "let M-SBL estimate the noise power");

  // rmse-sweep
  SweepFlags sweep_flags;
  auto* sweep = app.add_subcommand(
      "rmse-sweep", "Monte Carlo RMSE sweep with CRB/GLB reference rows");
  sweep->add_option("--vary", sweep_flags.vary,
                    "sweep variable: snr | snapshots | grid")
      ->required();
  sweep->add_option("--values", sweep_flags.values, "sweep values")
      ->delimiter(',')
      ->required();
  sweep->add_option("--methods", sweep_flags.methods,
                    "methods: omp, sbl, csdml-omp, csdml-sbl")
      ->delimiter(',');
  add_sweep_flags(sweep, sweep_flags);

  // timing
  SweepFlags timing_flags;
  timing_flags.trials = 100;
  auto* timing = app.add_subcommand(
      "timing", "mean per-stage times (recovery vs Newton) across a sweep");
  timing->add_option("--vary", timing_flags.vary,
                     "sweep variable: snr | snapshots | grid");
  timing->add_option("--values", timing_flags.values, "sweep values")
      ->delimiter(',')
      ->required();
  add_sweep_flags(timing, timing_flags);

  // crb
  SweepFlags crb_flags;
  auto* crb = app.add_subcommand("crb", "print the CRB-level RMSE in degrees");
  crb->add_option("--sensors,-M", crb_flags.sensors, "ULA sensor count");
  crb->add_option("--positions", crb_flags.positions,
                  "explicit sensor positions in wavelengths")
      ->delimiter(',');
  crb->add_option("--doas", crb_flags.doas_deg, "true DOAs in degrees")
      ->delimiter(',')
      ->required();
  crb->add_option("--snr", crb_flags.snr_db, "SNR in dB");
  crb->add_option("--snapshots,-T", crb_flags.snapshots, "snapshot count");

  // convexity-map
  int map_sensors = 8;
  std::vector<double> map_positions;
  std::vector<double> map_doas;
  double map_snr = 10.0, map_half_width = 0.0, map_step = 0.0,
         map_psd_tol = 1e-8;
  int map_snapshots = 200;
  bool map_exact = false;
  std::string map_mode = "criterion", map_out;
  std::uint64_t map_seed = 1;
  auto* cmap = app.add_subcommand(
      "convexity-map",
      "scan the Hessian PSD region around the true DOAs, one CSV row per cell");
  cmap->add_option("--sensors,-M", map_sensors, "ULA sensor count");
  cmap->add_option("--positions", map_positions,
                   "explicit sensor positions in wavelengths")
      ->delimiter(',');
  cmap->add_option("--doas", map_doas, "true DOAs in degrees")
      ->delimiter(',')
      ->required();
  cmap->add_option("--snr", map_snr, "SNR in dB");
  cmap->add_option("--snapshots,-T", map_snapshots, "snapshot count");
  cmap->add_flag("--exact-r", map_exact,
                 "use the exact covariance instead of sampled data");
  cmap->add_option("--half-width", map_half_width,
                   "scan half width per axis (degrees)");
  cmap->add_option("--step", map_step, "scan step per axis (degrees)");
  cmap->add_option("--psd-tol", map_psd_tol, "relative eigenvalue tolerance");
  cmap->add_option("--approx-mode", map_mode, "criterion | half_beamwidth");
  cmap->add_option("--seed", map_seed, "snapshot seed");
  cmap->add_option("--out", map_out, "write CSV here instead of stdout");

  // convexity-metrics
  std::vector<int> metrics_sensors{8};
  std::vector<double> metrics_positions;
  std::vector<double> metrics_doas, metrics_snrs{10.0};
  int metrics_snapshots = 200, metrics_trials = 100;
  bool metrics_exact = false;
  double metrics_half_width = 0.0, metrics_step = 0.0, metrics_psd_tol = 1e-8;
  std::uint64_t metrics_seed = 1;
  std::string metrics_out;
  auto* cmetrics = app.add_subcommand(
      "convexity-metrics",
      "per-trial and mean IRR/IAR across seeds, SNRs and sensor counts");
  cmetrics->add_option("--sensors,-M", metrics_sensors, "ULA sensor counts")
      ->delimiter(',');
  cmetrics->add_option("--positions", metrics_positions,
                       "explicit sensor positions in wavelengths (single geometry)")
      ->delimiter(',');
  cmetrics->add_option("--doas", metrics_doas, "true DOAs in degrees")
      ->delimiter(',')
      ->required();
  cmetrics->add_option("--snr", metrics_snrs, "SNR values in dB")->delimiter(',');
  cmetrics->add_option("--snapshots,-T", metrics_snapshots, "snapshot count");
  cmetrics->add_option("--trials", metrics_trials, "trials per combination");
  cmetrics->add_flag("--exact-r", metrics_exact,
                     "use the exact covariance (one deterministic trial)");
  cmetrics->add_option("--half-width", metrics_half_width,
                       "scan half width (degrees)");
  cmetrics->add_option("--step", metrics_step, "scan step (degrees)");
  cmetrics->add_option("--psd-tol", metrics_psd_tol,
                       "relative eigenvalue tolerance");
  cmetrics->add_option("--seed", metrics_seed, "base seed");
  cmetrics->add_option("--out", metrics_out, "write CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (single->parsed()) {
      return run_single(single_flags, single_method, single_seed);
    }
    if (sweep->parsed()) {
      ExperimentConfig config = to_config(sweep_flags);
      const auto var = parse_sweep_var(sweep_flags.vary);
      if (!var) {
        throw CLI::ValidationError("--vary", "expected snr | snapshots | grid");
      }
      config.sweep = *var;
      config.sweep_values = sweep_flags.values;
      write_output(to_csv(run_sweep(config)), sweep_flags.out);
      return 0;
    }
    if (timing->parsed()) {
      ExperimentConfig config = to_config(timing_flags);
      const auto var = parse_sweep_var(timing_flags.vary);
      if (!var) {
        throw CLI::ValidationError("--vary", "expected snr | snapshots | grid");
      }
      config.sweep = *var;
      config.sweep_values = timing_flags.values;
      write_output(to_csv(timing_table(config)), timing_flags.out);
      return 0;
    }
    if (crb->parsed()) {
      const ArrayGeometry geom =
          make_geometry(crb_flags.sensors, crb_flags.positions);
      const SourceScenario scenario = SourceScenario::equal_power(
          parse_list_deg(crb_flags.doas_deg), crb_flags.snr_db,
          crb_flags.snapshots);
      std::printf("%s\n", fmt(crb_rmse(geom, scenario)).c_str());
      return 0;
    }
    if (cmap->parsed()) {
      return run_convexity_map(map_sensors, map_positions, map_doas, map_snr,
                               map_snapshots, map_exact, map_half_width,
                               map_step, map_psd_tol, map_mode, map_seed,
                               map_out);
    }
    if (cmetrics->parsed()) {
      std::string csv = "sensors,snr_db,mode,trial,irr,iar\n";
      for (int sensors : metrics_sensors) {
        for (double snr : metrics_snrs) {
          ConvexityMetricsConfig config;
          config.sensors = sensors;
          config.positions = metrics_positions;
          config.doas = parse_list_deg(metrics_doas);
          config.snr_db = snr;
          config.snapshots = metrics_snapshots;
          config.trials = metrics_trials;
          config.base_seed = metrics_seed;
          config.use_exact_covariance = metrics_exact;
          config.psd_tolerance = metrics_psd_tol;
          if (metrics_half_width > 0.0) {
            config.half_width_deg = metrics_half_width;
          }
          if (metrics_step > 0.0) config.step_deg = metrics_step;
          const ConvexityMetricsResult result = convexity_metrics(config);
          const auto row_prefix = [&](const char* mode) {
            return std::to_string(sensors) + "," + fmt(snr) + "," + mode + ",";
          };
          for (const auto& trial : result.trials) {
            csv += row_prefix("criterion") + std::to_string(trial.trial) + "," +
                   fmt(trial.irr_criterion) + "," + fmt(trial.iar_criterion) +
                   "\n";
            csv += row_prefix("half_beamwidth") + std::to_string(trial.trial) +
                   "," + fmt(trial.irr_half_beamwidth) + "," +
                   fmt(trial.iar_half_beamwidth) + "\n";
          }
          csv += row_prefix("criterion") + "mean," +
                 fmt(result.mean_irr_criterion) + "," +
                 fmt(result.mean_iar_criterion) + "\n";
          csv += row_prefix("half_beamwidth") + "mean," +
                 fmt(result.mean_irr_half_beamwidth) + "," +
                 fmt(result.mean_iar_half_beamwidth) + "\n";
        }
      }
      write_output(csv, metrics_out);
      return 0;
    }
  } catch (const CLI::Error& error) {
    return app.exit(error);
  } catch (const std::exception& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return 1;
  }
  return 0;
}
