#ifndef CSDML_BENCH_HPP
#define CSDML_BENCH_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csdml/array_model.hpp"
#include "csdml/common.hpp"
#include "csdml/convexity.hpp"
#include "csdml/dml.hpp"
#include "csdml/sparse_recovery.hpp"

namespace csdml {

enum class Method { omp, sbl, csdml_omp, csdml_sbl };

std::string method_name(Method method);
std::optional<Method> parse_method(const std::string& name);

/// Truth specification: fixed DOAs, or one uniform interval per source drawn
/// fresh each trial. All radians.
struct DoaSpec {
  bool random = false;
  VectorXd fixed;
  std::vector<std::pair<double, double>> intervals;

  int sources() const {
    return random ? static_cast<int>(intervals.size())
                  : static_cast<int>(fixed.size());
  }
};

enum class SweepVar { snr, snapshots, grid };

std::string sweep_var_name(SweepVar var);
std::optional<SweepVar> parse_sweep_var(const std::string& name);

struct ExperimentConfig {
  int sensors = 8;
  /// Explicit sensor positions in wavelengths; overrides `sensors` when
  /// non-empty.
  std::vector<double> positions;
  DoaSpec doas;
  double snr_db = 10.0;          ///< used unless SNR is the sweep variable
  int snapshots = 200;           ///< used unless snapshots are swept
  double grid_interval_deg = 2.0;  ///< used unless the grid is swept
  std::optional<double> gamma;   ///< derive the grid from gamma instead
  SweepVar sweep = SweepVar::snr;
  std::vector<double> sweep_values;
  std::vector<Method> methods;
  int trials = 1000;
  std::uint64_t base_seed = 1;
  NewtonConfig newton{};
  bool sbl_true_noise = true;    ///< hand M-SBL the true noise power
  bool record_timing = true;     ///< zero the time column for bit-stable CSV
};

struct ResultRow {
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string method;
  double rmse_deg = 0.0;
  double mean_time_s = 0.0;
  int failures = 0;
  int trials = 0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;

  const ResultRow* find(const std::string& method, double sweep_value) const;
};

/// RMSE over trials, both vectors of each pair sorted ascending before
/// differencing. Degrees in, degrees out.
double rmse(const std::vector<VectorXd>& truths,
            const std::vector<VectorXd>& estimates);

/// RMSE floor of on-grid estimators for uniformly distributed DOAs:
/// r / (2 sqrt(3)). Degrees in/out.
double glb_uniform(double r_degrees);

/// RMSE floor for fixed DOAs: distance to the nearest grid points, ties
/// resolved to the lower point. Truths in degrees, result in degrees.
double glb_fixed(const VectorXd& truths_deg, const AngleGrid& grid);

/// Deterministic CRB at the true DOAs,
/// (sigma^2 / 2T) * inv(Re[(D^H P_perp D) .* Sigma^T]), reported as
/// sqrt(tr(CRB)/K) in degrees.
double crb_rmse(const ArrayGeometry& geom, const SourceScenario& scenario);

/// Monte Carlo sweep: every method sees the same snapshots per trial, trial
/// seeds derive from the base seed, and rows carry CRB/GLB references per
/// sweep value. Fully deterministic given the config.
ExperimentResult run_sweep(const ExperimentConfig& config);

std::string to_csv(const ExperimentResult& result);

struct TimingRow {
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string stage;
  double mean_time_s = 0.0;
  int trials = 0;
};

/// Mean per-stage times of the two-stage estimator (recovery vs Newton,
/// SVD excluded) across the sweep.
std::vector<TimingRow> timing_table(const ExperimentConfig& config);

std::string to_csv(const std::vector<TimingRow>& rows);

struct ConvexityMetricsConfig {
  int sensors = 8;
  std::vector<double> positions;  ///< overrides `sensors` when non-empty
  VectorXd doas;                  ///< radians
  double snr_db = 10.0;
  int snapshots = 200;
  int trials = 100;
  std::uint64_t base_seed = 1;
  bool use_exact_covariance = false;
  double psd_tolerance = 1e-8;
  std::optional<double> half_width_deg;
  std::optional<double> step_deg;
};

struct ConvexityMetricsResult {
  struct Trial {
    int trial = 0;
    double irr_criterion = 0.0;
    double iar_criterion = 0.0;
    double irr_half_beamwidth = 0.0;
    double iar_half_beamwidth = 0.0;
  };
  std::vector<Trial> trials;
  double mean_irr_criterion = 0.0;
  double mean_iar_criterion = 0.0;
  double mean_irr_half_beamwidth = 0.0;
  double mean_iar_half_beamwidth = 0.0;
  int degenerate_trials = 0;  ///< trials with an empty exact region
};

/// IRR/IAR of the scanned exact region against both approximate-region
/// modes, per trial and averaged.
ConvexityMetricsResult convexity_metrics(const ConvexityMetricsConfig& config);

/// ULA of `sensors` elements, or the explicit position list when non-empty.
ArrayGeometry make_geometry(int sensors, const std::vector<double>& positions);

}  // namespace csdml

#endif  // CSDML_BENCH_HPP
