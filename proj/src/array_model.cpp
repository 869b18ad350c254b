#include "csdml/array_model.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace csdml {

namespace {

void require_valid_angle(double angle) {
  if (!(std::abs(angle) < kPi / 2.0)) {
    throw std::domain_error("angle must lie in the open interval (-pi/2, pi/2)");
  }
}

}  // namespace

ArrayGeometry::ArrayGeometry(std::vector<double> positions)
    : positions_(std::move(positions)) {
  if (positions_.size() < 2) {
    throw std::invalid_argument("array needs at least 2 sensors");
  }
  for (std::size_t m = 1; m < positions_.size(); ++m) {
    if (!(positions_[m] > positions_[m - 1])) {
      throw std::invalid_argument("sensor positions must be strictly increasing");
    }
  }
}

ArrayGeometry ArrayGeometry::ula(int sensors) {
  if (sensors < 2) throw std::invalid_argument("ULA needs at least 2 sensors");
  std::vector<double> pos(sensors);
  for (int m = 0; m < sensors; ++m) pos[m] = 0.5 * m;
  return ArrayGeometry(std::move(pos));
}

ArrayGeometry ArrayGeometry::ula_centered(int sensors) {
  if (sensors < 2) throw std::invalid_argument("ULA needs at least 2 sensors");
  const double shift = 0.25 * (sensors - 1);
  std::vector<double> pos(sensors);
  for (int m = 0; m < sensors; ++m) pos[m] = 0.5 * m - shift;
  return ArrayGeometry(std::move(pos));
}

SourceScenario::SourceScenario(VectorXd doas_rad, VectorXd source_powers,
                               double noise_var, int snapshot_count)
    : doas(std::move(doas_rad)),
      powers(std::move(source_powers)),
      noise_power(noise_var),
      snapshots(snapshot_count) {
  if (powers.size() != doas.size()) {
    throw std::invalid_argument("need one power per source");
  }
  for (int k = 0; k < doas.size(); ++k) {
    if (!(std::abs(doas[k]) < kPi / 2.0)) {
      throw std::domain_error("DOAs must lie in (-pi/2, pi/2)");
    }
    if (k > 0 && !(doas[k] > doas[k - 1])) {
      throw std::invalid_argument("DOAs must be strictly increasing");
    }
    if (!(powers[k] > 0.0)) {
      throw std::invalid_argument("source powers must be positive");
    }
  }
  // noise_power == 0 is admitted for noiseless synthesis checks.
  if (!(noise_power >= 0.0)) {
    throw std::invalid_argument("noise power must be non-negative");
  }
  if (snapshots < 1) throw std::invalid_argument("need at least one snapshot");
}

SourceScenario SourceScenario::equal_power(VectorXd doas_rad, double snr_db,
                                           int snapshot_count) {
  const int k = static_cast<int>(doas_rad.size());
  const double sigma2 = std::pow(10.0, -snr_db / 10.0);
  return SourceScenario(std::move(doas_rad), VectorXd::Ones(k), sigma2,
                        snapshot_count);
}

namespace detail {

VectorXcd steering_unchecked(const ArrayGeometry& geom, double angle) {
  const int m = geom.sensors();
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  const double phase_rate = -2.0 * kPi * std::sin(angle);
  VectorXcd a(m);
  for (int i = 0; i < m; ++i) {
    a[i] = scale * std::polar(1.0, phase_rate * geom.positions()[i]);
  }
  return a;
}

}  // namespace detail

VectorXcd steering_vector(const ArrayGeometry& geom, double angle) {
  require_valid_angle(angle);
  return detail::steering_unchecked(geom, angle);
}

VectorXcd steering_derivative(const ArrayGeometry& geom, double angle) {
  require_valid_angle(angle);
  const VectorXcd a = detail::steering_unchecked(geom, angle);
  const Complex factor(0.0, -2.0 * kPi * std::cos(angle));
  VectorXcd d(geom.sensors());
  for (int i = 0; i < geom.sensors(); ++i) {
    d[i] = factor * geom.positions()[i] * a[i];
  }
  return d;
}

VectorXcd steering_second_derivative(const ArrayGeometry& geom, double angle) {
  require_valid_angle(angle);
  const VectorXcd a = detail::steering_unchecked(geom, angle);
  const double c = 2.0 * kPi * std::cos(angle);
  const double s = 2.0 * kPi * std::sin(angle);
  VectorXcd f(geom.sensors());
  for (int i = 0; i < geom.sensors(); ++i) {
    const double dm = geom.positions()[i];
    // (a')' = (j*2*pi*sin(t)*d_m + (-j*2*pi*cos(t)*d_m)^2) a_m
    f[i] = (Complex(0.0, s * dm) - Complex(c * dm, 0.0) * Complex(c * dm, 0.0)) *
           a[i];
  }
  return f;
}

MatrixXcd steering_matrix(const ArrayGeometry& geom, const VectorXd& angles) {
  MatrixXcd a(geom.sensors(), angles.size());
  for (int k = 0; k < angles.size(); ++k) {
    a.col(k) = steering_vector(geom, angles[k]);
  }
  return a;
}

SnapshotMatrix synthesize_snapshots(const ArrayGeometry& geom,
                                    const SourceScenario& scenario,
                                    std::uint64_t seed) {
  const int m = geom.sensors();
  const int k = scenario.sources();
  const int t = scenario.snapshots;
  if (k >= m) throw std::invalid_argument("need fewer sources than sensors");

  const MatrixXcd a = steering_matrix(geom, scenario.doas);
  VectorXd amp(k);
  for (int i = 0; i < k; ++i) amp[i] = std::sqrt(scenario.powers[i]);
  const double noise_amp = std::sqrt(scenario.noise_power);

  Rng rng(seed);
  SnapshotMatrix out;
  out.data.resize(m, t);
  VectorXcd s(k);
  for (int col = 0; col < t; ++col) {
    for (int i = 0; i < k; ++i) s[i] = amp[i] * rng.complex_normal();
    out.data.col(col) = a * s;
    for (int row = 0; row < m; ++row) {
      out.data(row, col) += noise_amp * rng.complex_normal();
    }
  }
  return out;
}

CovarianceMatrix sample_covariance(const SnapshotMatrix& snapshots) {
  const int t = snapshots.snapshots();
  if (t < 1) throw std::invalid_argument("need at least one snapshot");
  CovarianceMatrix r;
  r.data = (snapshots.data * snapshots.data.adjoint()) / static_cast<double>(t);
  // Symmetrize away the last bits of rounding skew.
  r.data = 0.5 * (r.data + r.data.adjoint().eval());
  r.kind = CovarianceKind::sample;
  return r;
}

CovarianceMatrix exact_covariance(const ArrayGeometry& geom,
                                  const SourceScenario& scenario) {
  const int m = geom.sensors();
  CovarianceMatrix r;
  r.data = scenario.noise_power * MatrixXcd::Identity(m, m);
  if (scenario.sources() > 0) {
    const MatrixXcd a = steering_matrix(geom, scenario.doas);
    r.data += a * scenario.powers.asDiagonal() * a.adjoint();
  }
  r.data = 0.5 * (r.data + r.data.adjoint().eval());
  r.kind = CovarianceKind::exact;
  return r;
}

double half_power_beamwidth(const ArrayGeometry& geom) {
  const VectorXcd a0 = detail::steering_unchecked(geom, 0.0);
  const auto power = [&](double offset) {
    const Complex c = detail::steering_unchecked(geom, offset).dot(a0);
    return std::norm(c);
  };
  // Bracket the first crossing of 1/2 on the positive side of broadside.
  double lo = 0.0;
  double hi = 0.0;
  const double coarse = 1e-4;
  for (double x = coarse; x < kPi / 2.0; x += coarse) {
    if (power(x) <= 0.5) {
      hi = x;
      lo = x - coarse;
      break;
    }
  }
  if (hi == 0.0) throw std::runtime_error("no half-power crossing found");
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (power(mid) > 0.5 ? lo : hi) = mid;
  }
  return lo + hi;  // full width = 2 * (midpoint)
}

}  // namespace csdml
