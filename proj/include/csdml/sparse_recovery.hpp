#ifndef CSDML_SPARSE_RECOVERY_HPP
#define CSDML_SPARSE_RECOVERY_HPP

#include <limits>
#include <vector>

#include "csdml/array_model.hpp"
#include "csdml/common.hpp"

namespace csdml {

/// Uniform candidate grid over [-90, +90] degrees (stored in radians).
/// `gamma` is the regulation parameter the interval was derived from; NaN
/// when the interval was given explicitly.
struct AngleGrid {
  VectorXd angles;
  double interval = 0.0;
  double gamma = std::numeric_limits<double>::quiet_NaN();

  int size() const { return static_cast<int>(angles.size()); }
};

/// Grid interval r = gamma * BW_0.5 / 2, then snapped down so that 180/r is
/// an integer and the grid hits both endpoints exactly.
AngleGrid build_grid(const ArrayGeometry& geom, double gamma = 0.5);

/// Grid at an explicitly chosen interval (degrees), 0 < r <= 30.
AngleGrid build_grid_explicit(double r_degrees);

/// Array manifold sampled on the grid; columns are unit-norm steering
/// vectors.
struct Dictionary {
  MatrixXcd psi;
  AngleGrid grid;

  int atoms() const { return static_cast<int>(psi.cols()); }
};

Dictionary build_dictionary(const ArrayGeometry& geom, const AngleGrid& grid);

/// Projection of the snapshots onto the K dominant right singular vectors:
/// X_SV = X * V_K, columns ordered by descending singular value.
MatrixXcd svd_reduce(const SnapshotMatrix& snapshots, int sources);

struct RecoveryResult {
  std::vector<int> support;   ///< grid indices, sorted ascending
  VectorXd coarse_doas;       ///< grid angles at the support (radians)
  MatrixXcd coefficients;     ///< recovered rows, one per support index
  bool converged = true;
};

/// Orthogonal matching pursuit for the multiple-response model: K passes of
/// atom selection by the l2 row norm of the residual correlations, with a
/// full least-squares refit on the accumulated support each pass.
RecoveryResult m_omp(const Dictionary& dict, const MatrixXcd& observations,
                     int sources);

struct MsblOptions {
  /// Noise power used by the EM updates; negative means "estimate from the
  /// observations" (mean of the smallest M-K eigenvalues of their sample
  /// covariance).
  double noise_power = -1.0;
  int max_iters = 200;
  double tol = 1e-4;
};

/// Sparse Bayesian learning for the multiple-response model: EM updates of
/// one hyperparameter per atom shared across responses. The support is taken
/// from the K largest local maxima of the final hyperparameter profile
/// (falling back to the K largest values).
RecoveryResult m_sbl(const Dictionary& dict, const MatrixXcd& observations,
                     int sources, const MsblOptions& options = {});

}  // namespace csdml

#endif  // CSDML_SPARSE_RECOVERY_HPP
