#include "csdml/dml.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace csdml {

namespace {

constexpr double kAngleMargin = 1e-6;  // clamp target inside (-pi/2, pi/2)

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

namespace detail {

ProjectorBundle make_bundle(VectorXd vartheta, const MatrixXcd& steering,
                            const MatrixXcd& deriv,
                            const MatrixXcd& second_deriv) {
  const int m = static_cast<int>(steering.rows());
  const int k = static_cast<int>(steering.cols());

  Eigen::JacobiSVD<MatrixXcd> svd(steering,
                                  Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()[0];
  const double smin = svd.singularValues()[k - 1];
  // cond(B^H B) = cond(B)^2 > 1e12 counts as singular
  if (!(smin > 0.0) || smax / smin > 1e6) {
    throw std::runtime_error("steering matrix ill-conditioned (coincident DOAs?)");
  }

  ProjectorBundle bundle;
  bundle.vartheta = std::move(vartheta);
  bundle.steering = steering;
  bundle.deriv = deriv;
  bundle.second_deriv = second_deriv;
  // B^+ and P_perp through the orthogonal factor; identical to the normal
  // equations form in exact arithmetic, better conditioned in floating point.
  const MatrixXcd u = svd.matrixU();  // M x K, orthonormal columns
  bundle.pinv = svd.matrixV() *
                svd.singularValues().cwiseInverse().asDiagonal() * u.adjoint();
  bundle.perp = MatrixXcd::Identity(m, m) - u * u.adjoint();
  bundle.perp = 0.5 * (bundle.perp + bundle.perp.adjoint().eval());
  return bundle;
}

}  // namespace detail

ProjectorBundle projector_bundle(const ArrayGeometry& geom,
                                 const VectorXd& vartheta) {
  const int k = static_cast<int>(vartheta.size());
  if (k < 1 || k >= geom.sensors()) {
    throw std::invalid_argument("need 1 <= K < M candidate DOAs");
  }
  MatrixXcd b(geom.sensors(), k), d(geom.sensors(), k), f(geom.sensors(), k);
  for (int i = 0; i < k; ++i) {
    b.col(i) = steering_vector(geom, vartheta[i]);
    d.col(i) = steering_derivative(geom, vartheta[i]);
    f.col(i) = steering_second_derivative(geom, vartheta[i]);
  }
  return detail::make_bundle(vartheta, b, d, f);
}

double dml_objective(const ProjectorBundle& bundle,
                     const MatrixXcd& covariance) {
  return (bundle.perp * covariance).trace().real();
}

VectorXd dml_gradient(const ProjectorBundle& bundle,
                      const MatrixXcd& covariance) {
  const MatrixXcd g =
      bundle.pinv * covariance * bundle.perp * bundle.deriv;  // K x K
  return -2.0 * g.diagonal().real();
}

MatrixXd dml_hessian(const ProjectorBundle& bundle,
                     const MatrixXcd& covariance) {
  const MatrixXcd& perp = bundle.perp;
  const MatrixXcd& pinv = bundle.pinv;
  const MatrixXcd& d = bundle.deriv;

  const MatrixXcd perp_d = perp * d;                       // M x K
  const MatrixXcd r_perp_d = covariance * perp_d;          // M x K
  const MatrixXcd pinv_r = pinv * covariance;              // K x M

  const MatrixXcd dh_perp_d = d.adjoint() * perp_d;                  // D^H Pp D
  const MatrixXcd pinv_r_pinvh = pinv_r * pinv.adjoint();            // B+ R B+H
  const MatrixXcd dh_perp_r_perp_d = perp_d.adjoint() * r_perp_d;    // D^H Pp R Pp D
  const MatrixXcd pinv_pinvh = pinv * pinv.adjoint();                // B+ B+H
  const MatrixXcd pinv_d = pinv * d;                                 // B+ D
  const MatrixXcd pinv_r_perp_d = pinv * r_perp_d;                   // B+ R Pp D
  const MatrixXcd pinv_r_perp_f = pinv_r * (perp * bundle.second_deriv);

  MatrixXcd c = dh_perp_d.cwiseProduct(pinv_r_pinvh.transpose());
  c -= dh_perp_r_perp_d.cwiseProduct(pinv_pinvh.transpose());
  c += pinv_d.cwiseProduct(pinv_r_perp_d.transpose());
  c += pinv_d.transpose().cwiseProduct(pinv_r_perp_d);
  c -= MatrixXcd(pinv_r_perp_f.diagonal().asDiagonal());

  const MatrixXd h = 2.0 * c.real();
  return 0.5 * (h + h.transpose());
}

DmlEvaluation dml_evaluate(const ProjectorBundle& bundle,
                           const MatrixXcd& covariance) {
  DmlEvaluation eval;
  eval.objective = dml_objective(bundle, covariance);
  eval.gradient = dml_gradient(bundle, covariance);
  eval.hessian = dml_hessian(bundle, covariance);
  return eval;
}

bool enforce_min_separation(VectorXd& values, double min_separation) {
  std::sort(values.data(), values.data() + values.size());
  bool moved = false;
  for (int i = 1; i < values.size(); ++i) {
    if (values[i] - values[i - 1] < min_separation) {
      values[i] = values[i - 1] + min_separation;
      moved = true;
    }
  }
  return moved;
}

NewtonResult newton_refine(const ArrayGeometry& geom,
                           const MatrixXcd& covariance, const VectorXd& init,
                           const NewtonConfig& config) {
  if (!(config.tol > 0.0) || config.max_iters < 1) {
    throw std::invalid_argument("invalid Newton configuration");
  }
  const double limit = kPi / 2.0 - kAngleMargin;
  const double damping_floor = config.damping > 0.0
                                   ? config.damping
                                   : 1e-12 * covariance.trace().real();

  NewtonResult result;
  NewtonDiagnostics& diag = result.diagnostics;

  VectorXd current = init;
  bool init_clamped = false;
  for (int i = 0; i < current.size(); ++i) {
    const double clamped = std::clamp(current[i], -limit, limit);
    init_clamped |= clamped != current[i];
    current[i] = clamped;
  }
  diag.clamped = init_clamped;

  ProjectorBundle bundle = projector_bundle(geom, current);
  DmlEvaluation eval = dml_evaluate(bundle, covariance);
  diag.objective_trace.push_back(eval.objective);

  for (int iter = 0; iter < config.max_iters; ++iter) {
    diag.iterations = iter + 1;

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(eval.hessian);
    VectorXd values = eig.eigenvalues();
    const double min_eig = values[0];
    if (min_eig <= 0.0) {
      const double shift = -min_eig + damping_floor;
      if (!(min_eig + shift > 0.0)) {
        throw std::runtime_error("singular damped Newton system");
      }
      values.array() += shift;
      ++diag.pd_fallbacks;
    }
    VectorXd step = eig.eigenvectors() *
                    (eig.eigenvectors().transpose() * eval.gradient)
                        .cwiseQuotient(values);
    if (step.norm() <= config.tol) {
      diag.converged = true;
      break;
    }
    // A freshly damped system can propose a step of order 1/damping; cap it
    // so the line search operates on a sane scale. Inside the convex basin
    // Newton steps are far below the cap and nothing changes.
    const double cap = 0.2;  // radians per iteration
    const double largest = step.cwiseAbs().maxCoeff();
    if (largest > cap) step *= cap / largest;

    // Step halving keeps the objective non-increasing; candidates that leave
    // the angle domain are clamped, ones with coincident entries rejected.
    double alpha = 1.0;
    bool accepted = false;
    VectorXd candidate;
    ProjectorBundle cand_bundle;
    DmlEvaluation cand_eval;
    for (int h = 0; h <= config.max_halvings; ++h, alpha *= 0.5) {
      candidate = current - alpha * step;
      for (int i = 0; i < candidate.size(); ++i) {
        const double clamped = std::clamp(candidate[i], -limit, limit);
        if (clamped != candidate[i]) {
          diag.clamped = true;
          candidate[i] = clamped;
        }
      }
      try {
        cand_bundle = projector_bundle(geom, candidate);
      } catch (const std::runtime_error&) {
        continue;  // coincident angles; try a shorter step
      }
      cand_eval = dml_evaluate(cand_bundle, covariance);
      if (cand_eval.objective <= eval.objective) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no acceptable step left; report where we stand

    const double move = (candidate - current).norm();
    current = candidate;
    bundle = std::move(cand_bundle);
    eval = std::move(cand_eval);
    diag.objective_trace.push_back(eval.objective);
    if (move <= config.tol) {
      diag.converged = true;
      break;
    }
  }

  diag.grad_norm = eval.gradient.norm();
  diag.objective = eval.objective;
  result.doas = current;
  std::sort(result.doas.data(), result.doas.data() + result.doas.size());
  return result;
}

CsdmlResult csdml_estimate(const SnapshotMatrix& snapshots, const ArrayGeometry& geom,
                  int sources, const CsdmlOptions& options) {
  if (sources < 1 || sources >= geom.sensors()) {
    throw std::invalid_argument("need 1 <= K < M");
  }

  const AngleGrid grid = options.grid_interval_deg
                             ? build_grid_explicit(*options.grid_interval_deg)
                             : build_grid(geom, options.gamma);
  const Dictionary dict = build_dictionary(geom, grid);
  const MatrixXcd reduced = svd_reduce(snapshots, sources);
  const CovarianceMatrix sample = sample_covariance(snapshots);

  CsdmlResult result;
  const auto recovery_start = std::chrono::steady_clock::now();
  RecoveryResult recovery;
  if (options.method == RecoveryMethod::omp) {
    recovery = m_omp(dict, reduced, sources);
  } else {
    MsblOptions sbl_options;
    sbl_options.noise_power = options.sbl_noise_power;
    if (!(sbl_options.noise_power > 0.0)) {
      Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(sample.data);
      double acc = 0.0;
      const int tail = geom.sensors() - sources;
      for (int i = 0; i < tail; ++i) acc += eig.eigenvalues()[i];
      sbl_options.noise_power =
          std::max(acc / tail, 1e-10 * eig.eigenvalues().mean());
    }
    recovery = m_sbl(dict, reduced, sources, sbl_options);
  }
  result.recovery_seconds = seconds_since(recovery_start);
  result.recovery_converged = recovery.converged;

  VectorXd init = recovery.coarse_doas;
  if (init.size() < sources) {
    if (init.size() == 0) {
      throw std::runtime_error("recovery stage returned no DOA candidates");
    }
    VectorXd padded(sources);
    const int have = static_cast<int>(init.size());
    for (int i = 0; i < sources; ++i) padded[i] = init[std::min(i, have - 1)];
    init = padded;
    result.recovery_short = true;
    result.coarse_adjusted = true;
  }
  result.coarse_adjusted |= enforce_min_separation(init, grid.interval / 4.0);
  result.coarse_doas = init;

  const auto newton_start = std::chrono::steady_clock::now();
  NewtonResult refined =
      newton_refine(geom, sample.data, init, options.newton);
  result.newton_seconds = seconds_since(newton_start);

  result.doas = refined.doas;
  result.newton = refined.diagnostics;
  return result;
}

}  // namespace csdml
