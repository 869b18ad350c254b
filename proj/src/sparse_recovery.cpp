#include "csdml/sparse_recovery.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace csdml {

namespace {

AngleGrid uniform_grid(double r_degrees, double gamma) {
  const int steps = static_cast<int>(std::floor(180.0 / r_degrees + 1e-9));
  AngleGrid grid;
  grid.interval = deg2rad(r_degrees);
  grid.gamma = gamma;
  grid.angles.resize(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    grid.angles[i] = deg2rad(-90.0 + i * r_degrees);
  }
  return grid;
}

void sort_by_support(RecoveryResult& result) {
  std::vector<int> order(result.support.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return result.support[a] < result.support[b];
  });
  RecoveryResult sorted;
  sorted.converged = result.converged;
  sorted.support.resize(result.support.size());
  sorted.coarse_doas.resize(result.coarse_doas.size());
  sorted.coefficients.resize(result.coefficients.rows(),
                             result.coefficients.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted.support[i] = result.support[order[i]];
    sorted.coarse_doas[static_cast<int>(i)] =
        result.coarse_doas[order[i]];
    sorted.coefficients.row(static_cast<int>(i)) =
        result.coefficients.row(order[i]);
  }
  result = std::move(sorted);
}

}  // namespace

AngleGrid build_grid(const ArrayGeometry& geom, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in (0, 1]");
  }
  const double r0 = rad2deg(gamma * half_power_beamwidth(geom) / 2.0);
  // Snap down so 180/r is an integer and both endpoints land on the grid.
  const int intervals = static_cast<int>(std::ceil(180.0 / r0 - 1e-12));
  return uniform_grid(180.0 / intervals, gamma);
}

AngleGrid build_grid_explicit(double r_degrees) {
  if (!(r_degrees > 0.0 && r_degrees <= 30.0)) {
    throw std::invalid_argument("grid interval must lie in (0, 30] degrees");
  }
  return uniform_grid(r_degrees, std::numeric_limits<double>::quiet_NaN());
}

Dictionary build_dictionary(const ArrayGeometry& geom, const AngleGrid& grid) {
  if (grid.size() <= geom.sensors()) {
    throw std::invalid_argument("grid must be overcomplete (N > M)");
  }
  Dictionary dict;
  dict.grid = grid;
  dict.psi.resize(geom.sensors(), grid.size());
  for (int n = 0; n < grid.size(); ++n) {
    dict.psi.col(n) = detail::steering_unchecked(geom, grid.angles[n]);
  }
  return dict;
}

MatrixXcd svd_reduce(const SnapshotMatrix& snapshots, int sources) {
  if (snapshots.snapshots() < sources) {
    throw std::invalid_argument("need at least K snapshots for SVD reduction");
  }
  Eigen::JacobiSVD<MatrixXcd> svd(snapshots.data, Eigen::ComputeThinV);
  return snapshots.data * svd.matrixV().leftCols(sources);
}

RecoveryResult m_omp(const Dictionary& dict, const MatrixXcd& observations,
                     int sources) {
  const int m = static_cast<int>(dict.psi.rows());
  const int n = dict.atoms();
  if (sources >= m) throw std::invalid_argument("need K < M");
  if (observations.rows() != m) {
    throw std::invalid_argument("observation rows must match sensor count");
  }

  MatrixXcd residual = observations;
  std::vector<int> support;
  std::vector<char> selected(n, 0);
  MatrixXcd coeffs;

  for (int pass = 0; pass < sources; ++pass) {
    const VectorXd scores = (dict.psi.adjoint() * residual).rowwise().norm();
    int best = -1;
    double best_score = -1.0;
    for (int atom = 0; atom < n; ++atom) {
      if (selected[atom]) continue;
      if (scores[atom] > best_score) {  // ties keep the lowest index
        best_score = scores[atom];
        best = atom;
      }
    }
    support.push_back(best);
    selected[best] = 1;

    MatrixXcd sub(m, support.size());
    for (std::size_t i = 0; i < support.size(); ++i) {
      sub.col(static_cast<int>(i)) = dict.psi.col(support[i]);
    }
    Eigen::ColPivHouseholderQR<MatrixXcd> qr(sub);
    if (qr.rank() < static_cast<Eigen::Index>(support.size())) {
      throw std::runtime_error("rank-deficient subdictionary in M-OMP refit");
    }
    coeffs = qr.solve(observations);
    residual = observations - sub * coeffs;
  }

  RecoveryResult result;
  result.support = support;
  result.coefficients = coeffs;
  result.coarse_doas.resize(sources);
  for (int i = 0; i < sources; ++i) {
    result.coarse_doas[i] = dict.grid.angles[support[i]];
  }
  sort_by_support(result);
  return result;
}

RecoveryResult m_sbl(const Dictionary& dict, const MatrixXcd& observations,
                     int sources, const MsblOptions& options) {
  const int m = static_cast<int>(dict.psi.rows());
  const int n = dict.atoms();
  const int t = static_cast<int>(observations.cols());
  if (sources >= m) throw std::invalid_argument("need K < M");
  if (observations.rows() != m) {
    throw std::invalid_argument("observation rows must match sensor count");
  }

  RecoveryResult result;
  if (observations.norm() == 0.0) {
    result.converged = false;
    result.coarse_doas.resize(0);
    result.coefficients.resize(0, t);
    return result;
  }

  double noise = options.noise_power;
  if (!(noise > 0.0)) {
    // Fallback estimate from the observations' own sample covariance.
    const MatrixXcd cov = observations * observations.adjoint() /
                          static_cast<double>(t);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(cov);
    double acc = 0.0;
    for (int i = 0; i < m - sources; ++i) acc += eig.eigenvalues()[i];
    noise = acc / std::max(1, m - sources);
    noise = std::max(noise, 1e-6 * eig.eigenvalues().mean());
  }

  // One hyperparameter per atom, shared across the T' responses.
  VectorXd gamma = (dict.psi.adjoint() * observations).rowwise().squaredNorm() /
                   static_cast<double>(t);
  MatrixXcd posterior_mean(n, t);
  bool converged = false;

  const MatrixXcd identity = MatrixXcd::Identity(m, m);
  for (int iter = 0; iter < options.max_iters; ++iter) {
    const MatrixXcd sigma_y =
        noise * identity +
        dict.psi * gamma.asDiagonal() * dict.psi.adjoint();
    Eigen::LLT<MatrixXcd> llt(sigma_y);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("M-SBL response covariance not positive definite");
    }
    const MatrixXcd xi = llt.solve(dict.psi).adjoint();  // N x M, = Psi^H Sy^-1
    posterior_mean = gamma.asDiagonal() * (xi * observations);

    VectorXd next(n);
    for (int atom = 0; atom < n; ++atom) {
      const double quad =
          std::real((xi.row(atom) * dict.psi.col(atom))(0, 0));
      const double post_var = gamma[atom] - gamma[atom] * gamma[atom] * quad;
      next[atom] = posterior_mean.row(atom).squaredNorm() /
                       static_cast<double>(t) +
                   std::max(post_var, 0.0);
    }
    const double scale = std::max(gamma.cwiseAbs().maxCoeff(), 1e-300);
    const double change = (next - gamma).cwiseAbs().maxCoeff() / scale;
    gamma = next;
    if (change < options.tol) {
      converged = true;
      break;
    }
  }

  // Peaks first: K largest local maxima of the hyperparameter profile, so a
  // single source cannot claim two adjacent cells.
  std::vector<int> peaks;
  for (int atom = 0; atom < n; ++atom) {
    const bool left_ok = atom == 0 || gamma[atom] > gamma[atom - 1];
    const bool right_ok = atom == n - 1 || gamma[atom] >= gamma[atom + 1];
    if (left_ok && right_ok && gamma[atom] > 0.0) peaks.push_back(atom);
  }
  std::sort(peaks.begin(), peaks.end(),
            [&](int a, int b) { return gamma[a] > gamma[b]; });
  std::vector<int> support(peaks.begin(),
                           peaks.begin() + std::min<std::size_t>(
                                               peaks.size(), sources));
  if (static_cast<int>(support.size()) < sources) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return gamma[a] > gamma[b]; });
    for (int atom : order) {
      if (static_cast<int>(support.size()) >= sources) break;
      if (std::find(support.begin(), support.end(), atom) == support.end()) {
        support.push_back(atom);
      }
    }
  }

  result.converged = converged;
  result.support = support;
  result.coarse_doas.resize(support.size());
  result.coefficients.resize(support.size(), t);
  for (std::size_t i = 0; i < support.size(); ++i) {
    result.coarse_doas[static_cast<int>(i)] = dict.grid.angles[support[i]];
    result.coefficients.row(static_cast<int>(i)) =
        posterior_mean.row(support[i]);
  }
  sort_by_support(result);
  return result;
}

}  // namespace csdml
