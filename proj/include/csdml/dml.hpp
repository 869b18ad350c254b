#ifndef CSDML_DML_HPP
#define CSDML_DML_HPP

#include <optional>
#include <vector>

#include "csdml/array_model.hpp"
#include "csdml/common.hpp"
#include "csdml/sparse_recovery.hpp"

namespace csdml {

/// Everything the DML criterion needs at a candidate DOA vector: the
/// steering matrix B, its pseudo-inverse, the complement projector
/// P_perp = I - B B^+, and the first/second steering derivative columns.
struct ProjectorBundle {
  VectorXd vartheta;
  MatrixXcd steering;        ///< B, M x K
  MatrixXcd pinv;            ///< B^+ = (B^H B)^-1 B^H, K x M
  MatrixXcd perp;            ///< P_perp, M x M
  MatrixXcd deriv;           ///< D, columns a'(vartheta_i)
  MatrixXcd second_deriv;    ///< F, columns a''(vartheta_i)

  int sensors() const { return static_cast<int>(steering.rows()); }
  int sources() const { return static_cast<int>(steering.cols()); }
};

/// Builds the bundle at vartheta. Throws if any angle leaves (-pi/2, pi/2)
/// or the steering matrix is numerically rank-deficient (condition > 1e12,
/// e.g. coincident angles).
ProjectorBundle projector_bundle(const ArrayGeometry& geom,
                                 const VectorXd& vartheta);

namespace detail {
/// Bundle from precomputed steering columns (used by grid scanners that
/// cache per-axis steering evaluations).
ProjectorBundle make_bundle(VectorXd vartheta, const MatrixXcd& steering,
                            const MatrixXcd& deriv,
                            const MatrixXcd& second_deriv);
}  // namespace detail

/// tr(P_perp R).
double dml_objective(const ProjectorBundle& bundle, const MatrixXcd& covariance);

/// -2 Re(diag(B^+ R P_perp D)).
VectorXd dml_gradient(const ProjectorBundle& bundle, const MatrixXcd& covariance);

/// 2 Re(C) with all five Hadamard terms of C, including the second-derivative
/// term; symmetrized as (H + H^T) / 2.
MatrixXd dml_hessian(const ProjectorBundle& bundle, const MatrixXcd& covariance);

struct DmlEvaluation {
  double objective = 0.0;
  VectorXd gradient;
  MatrixXd hessian;
};

DmlEvaluation dml_evaluate(const ProjectorBundle& bundle,
                           const MatrixXcd& covariance);

struct NewtonConfig {
  double tol = 1e-8;      ///< stop when the iterate moves by <= tol (radians)
  int max_iters = 50;
  /// Minimum-eigenvalue floor added when the Hessian is not positive
  /// definite; non-positive means the default 1e-12 * tr(R).
  double damping = -1.0;
  int max_halvings = 10;
};

struct NewtonDiagnostics {
  int iterations = 0;
  double grad_norm = 0.0;
  int pd_fallbacks = 0;
  bool clamped = false;
  bool converged = false;
  double objective = 0.0;
  std::vector<double> objective_trace;  ///< accepted iterates, start included
};

struct NewtonResult {
  VectorXd doas;  ///< sorted ascending
  NewtonDiagnostics diagnostics;
};

/// Damped Newton descent on tr(P_perp R): full Newton steps inside the
/// convex basin, eigenvalue-shift damping plus step halving outside it.
/// Iterates that leave (-pi/2, pi/2) are clamped and flagged.
NewtonResult newton_refine(const ArrayGeometry& geom,
                           const MatrixXcd& covariance, const VectorXd& init,
                           const NewtonConfig& config = {});

enum class RecoveryMethod { omp, sbl };

struct CsdmlOptions {
  RecoveryMethod method = RecoveryMethod::omp;
  double gamma = 0.5;
  /// Explicit grid interval in degrees; overrides gamma when set.
  std::optional<double> grid_interval_deg;
  NewtonConfig newton{};
  /// Noise power handed to M-SBL; non-positive means "estimate from the
  /// sample covariance" (mean of its M-K smallest eigenvalues).
  double sbl_noise_power = -1.0;
};

struct CsdmlResult {
  VectorXd doas;         ///< refined estimate, sorted ascending
  VectorXd coarse_doas;  ///< first-stage estimate fed to Newton
  NewtonDiagnostics newton;
  bool recovery_converged = true;
  bool recovery_short = false;   ///< fewer than K peaks came back, padded
  bool coarse_adjusted = false;  ///< coincident/missing peaks were separated
  double recovery_seconds = 0.0;
  double newton_seconds = 0.0;
};

/// The two-stage estimator: grid + recovery (on SVD-reduced data) for coarse
/// DOAs, then Newton refinement of the DML criterion against the sample
/// covariance of the snapshots.
CsdmlResult csdml_estimate(const SnapshotMatrix& snapshots, const ArrayGeometry& geom,
                  int sources, const CsdmlOptions& options = {});

/// Sorts `values` and pushes entries apart until adjacent ones differ by at
/// least `min_separation`. Returns whether anything moved.
bool enforce_min_separation(VectorXd& values, double min_separation);

}  // namespace csdml

#endif  // CSDML_DML_HPP
