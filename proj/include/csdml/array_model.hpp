#ifndef CSDML_ARRAY_MODEL_HPP
#define CSDML_ARRAY_MODEL_HPP

#include <cstdint>
#include <vector>

#include "csdml/common.hpp"

namespace csdml {

/// Sensor positions of a 1-D array, in wavelengths (the wavelength is
/// normalized to 1 throughout; only d/lambda enters any phase).
class ArrayGeometry {
 public:
  explicit ArrayGeometry(std::vector<double> positions);

  /// Uniform linear array with half-wavelength spacing, first sensor at 0.
  static ArrayGeometry ula(int sensors);
  /// Same ULA with the origin at the array midpoint.
  static ArrayGeometry ula_centered(int sensors);

  int sensors() const { return static_cast<int>(positions_.size()); }
  const std::vector<double>& positions() const { return positions_; }

 private:
  std::vector<double> positions_;
};

/// True source configuration: DOAs (radians), per-source powers (the
/// diagonal of the source covariance), noise power and snapshot count.
struct SourceScenario {
  VectorXd doas;
  VectorXd powers;
  double noise_power = 1.0;
  int snapshots = 1;

  SourceScenario(VectorXd doas_rad, VectorXd source_powers, double noise_var,
                 int snapshot_count);

  /// Non-coherent equal unit-power sources at the given SNR (dB), so
  /// noise_power = 10^(-snr/10).
  static SourceScenario equal_power(VectorXd doas_rad, double snr_db,
                                    int snapshot_count);

  int sources() const { return static_cast<int>(doas.size()); }
};

/// M x T array output, column t = x(t).
struct SnapshotMatrix {
  MatrixXcd data;

  int sensors() const { return static_cast<int>(data.rows()); }
  int snapshots() const { return static_cast<int>(data.cols()); }
};

enum class CovarianceKind { exact, sample };

struct CovarianceMatrix {
  MatrixXcd data;
  CovarianceKind kind = CovarianceKind::sample;

  int sensors() const { return static_cast<int>(data.rows()); }
};

/// Unit-norm steering vector, element m = exp(-j*2*pi*sin(angle)*d_m)/sqrt(M).
VectorXcd steering_vector(const ArrayGeometry& geom, double angle);

/// d/dangle of the steering vector: -j*2*pi*cos(angle)*d_m * a_m(angle).
VectorXcd steering_derivative(const ArrayGeometry& geom, double angle);

/// d^2/dangle^2 of the steering vector:
/// (j*2*pi*sin(angle)*d_m + (-j*2*pi*cos(angle)*d_m)^2) * a_m(angle).
VectorXcd steering_second_derivative(const ArrayGeometry& geom, double angle);

/// M x K matrix with column k = steering_vector(angles[k]).
MatrixXcd steering_matrix(const ArrayGeometry& geom, const VectorXd& angles);

namespace detail {
/// Steering evaluation without the open-interval angle check; dictionary
/// atoms may sit exactly at +-90 degrees.
VectorXcd steering_unchecked(const ArrayGeometry& geom, double angle);
}  // namespace detail

/// Draws x(t) = A s(t) + n(t) for t = 1..T with s(t) circular complex
/// Gaussian of diagonal covariance diag(powers) and n(t) ~ CN(0, sigma^2 I).
/// Deterministic given the seed.
SnapshotMatrix synthesize_snapshots(const ArrayGeometry& geom,
                                    const SourceScenario& scenario,
                                    std::uint64_t seed);

/// (1/T) sum_t x(t) x(t)^H.
CovarianceMatrix sample_covariance(const SnapshotMatrix& snapshots);

/// A diag(powers) A^H + sigma^2 I.
CovarianceMatrix exact_covariance(const ArrayGeometry& geom,
                                  const SourceScenario& scenario);

/// Full 3 dB beamwidth: the width BW such that
/// |a(+-BW/2)^H a(0)|^2 = 1/2, found by bisection to 1e-10 rad.
double half_power_beamwidth(const ArrayGeometry& geom);

}  // namespace csdml

#endif  // CSDML_ARRAY_MODEL_HPP
