#include "csdml/convexity.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "csdml/dml.hpp"

namespace csdml {

namespace {

/// Runs fn(cell) over the lattice in enumeration order (last axis fastest).
template <typename Fn>
void for_each_cell(const ScanLattice& lattice, Fn&& fn) {
  const int axes = lattice.axes();
  std::vector<int> cell(axes);
  for (int i = 0; i < axes; ++i) cell[i] = -lattice.half_cells[i];
  while (true) {
    fn(cell);
    int axis = axes - 1;
    while (axis >= 0 && cell[axis] == lattice.half_cells[axis]) {
      cell[axis] = -lattice.half_cells[axis];
      --axis;
    }
    if (axis < 0) break;
    ++cell[axis];
  }
}

}  // namespace

RegionScanSpec RegionScanSpec::defaults(const ArrayGeometry& geom,
                                        VectorXd center) {
  const double bw = half_power_beamwidth(geom);
  RegionScanSpec spec;
  const int k = static_cast<int>(center.size());
  spec.center = std::move(center);
  spec.half_width = VectorXd::Constant(k, 1.5 * bw);
  spec.step = VectorXd::Constant(k, bw / 40.0);
  return spec;
}

long ScanLattice::total_cells() const {
  long total = 1;
  for (int h : half_cells) total *= 2L * h + 1;
  return total;
}

VectorXd ScanLattice::cell_angles(const std::vector<int>& cell) const {
  VectorXd angles = center;
  for (int i = 0; i < axes(); ++i) angles[i] += cell[i] * step[i];
  return angles;
}

bool ScanLattice::matches(const ScanLattice& other) const {
  if (half_cells != other.half_cells) return false;
  if (center.size() != other.center.size()) return false;
  return (center - other.center).cwiseAbs().maxCoeff() < 1e-12 &&
         (step - other.step).cwiseAbs().maxCoeff() < 1e-12;
}

ScanLattice make_lattice(const RegionScanSpec& spec) {
  const int k = static_cast<int>(spec.center.size());
  if (spec.half_width.size() != k || spec.step.size() != k) {
    throw std::invalid_argument("scan spec axis counts disagree");
  }
  ScanLattice lattice;
  lattice.center = spec.center;
  lattice.step = spec.step;
  lattice.half_cells.resize(k);
  for (int i = 0; i < k; ++i) {
    if (!(spec.step[i] > 0.0) || spec.half_width[i] < spec.step[i]) {
      throw std::invalid_argument("scan spec needs step > 0, half_width >= step");
    }
    lattice.half_cells[i] =
        static_cast<int>(std::floor(spec.half_width[i] / spec.step[i] + 1e-9));
  }
  return lattice;
}

RegionScan exact_region(const ArrayGeometry& geom, const RegionScanSpec& spec,
                        const MatrixXcd& covariance) {
  const ScanLattice lattice = make_lattice(spec);
  const int k = lattice.axes();
  const double limit = kPi / 2.0;

  // Cells share per-axis angles; cache the steering evaluations once.
  std::vector<std::vector<VectorXcd>> a(k), da(k), d2a(k);
  std::vector<std::vector<bool>> valid(k);
  for (int axis = 0; axis < k; ++axis) {
    const int count = 2 * lattice.half_cells[axis] + 1;
    a[axis].resize(count);
    da[axis].resize(count);
    d2a[axis].resize(count);
    valid[axis].assign(count, false);
    for (int j = 0; j < count; ++j) {
      const double angle =
          lattice.center[axis] + (j - lattice.half_cells[axis]) * lattice.step[axis];
      if (std::abs(angle) >= limit) continue;
      a[axis][j] = steering_vector(geom, angle);
      da[axis][j] = steering_derivative(geom, angle);
      d2a[axis][j] = steering_second_derivative(geom, angle);
      valid[axis][j] = true;
    }
  }

  RegionScan scan;
  scan.region.lattice = lattice;
  scan.min_eigs.reserve(lattice.total_cells());

  MatrixXcd b(geom.sensors(), k), d(geom.sensors(), k), f(geom.sensors(), k);
  for_each_cell(lattice, [&](const std::vector<int>& cell) {
    bool ok = true;
    for (int axis = 0; axis < k; ++axis) {
      const int j = cell[axis] + lattice.half_cells[axis];
      if (!valid[axis][j]) {
        ok = false;
        break;
      }
      b.col(axis) = a[axis][j];
      d.col(axis) = da[axis][j];
      f.col(axis) = d2a[axis][j];
    }
    if (ok) {
      try {
        const ProjectorBundle bundle =
            detail::make_bundle(lattice.cell_angles(cell), b, d, f);
        const MatrixXd hessian = dml_hessian(bundle, covariance);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(hessian);
        const double min_eig = eig.eigenvalues()[0];
        const double norm = eig.eigenvalues().cwiseAbs().maxCoeff();
        scan.min_eigs.push_back(min_eig);
        if (min_eig >= -spec.psd_tolerance * norm) {
          scan.region.cells.insert(cell);
        }
        return;
      } catch (const std::runtime_error&) {
        ok = false;
      }
    }
    ++scan.failed_cells;
    scan.min_eigs.push_back(std::numeric_limits<double>::quiet_NaN());
  });
  return scan;
}

ConvexRegion approx_region(const ArrayGeometry& geom,
                           const RegionScanSpec& spec, ApproxMode mode) {
  const ScanLattice lattice = make_lattice(spec);
  const int k = lattice.axes();

  // Both modes factor across axes; precompute per-axis inclusion.
  std::vector<std::vector<bool>> include(k);
  if (mode == ApproxMode::criterion) {
    for (int axis = 0; axis < k; ++axis) {
      const VectorXcd truth =
          detail::steering_unchecked(geom, lattice.center[axis]);
      const int count = 2 * lattice.half_cells[axis] + 1;
      include[axis].assign(count, false);
      for (int j = 0; j < count; ++j) {
        const double angle = lattice.center[axis] +
                             (j - lattice.half_cells[axis]) * lattice.step[axis];
        if (std::abs(angle) >= kPi / 2.0) continue;
        const double beta =
            std::norm(detail::steering_unchecked(geom, angle).dot(truth));
        include[axis][j] = beta >= 0.5;
      }
    }
  } else {
    const double half_extent = half_power_beamwidth(geom) / 4.0;
    for (int axis = 0; axis < k; ++axis) {
      const int count = 2 * lattice.half_cells[axis] + 1;
      include[axis].assign(count, false);
      for (int j = 0; j < count; ++j) {
        const double offset = (j - lattice.half_cells[axis]) * lattice.step[axis];
        include[axis][j] = std::abs(offset) <= half_extent + 1e-12;
      }
    }
  }

  ConvexRegion region;
  region.lattice = lattice;
  for_each_cell(lattice, [&](const std::vector<int>& cell) {
    for (int axis = 0; axis < k; ++axis) {
      if (!include[axis][cell[axis] + lattice.half_cells[axis]]) return;
    }
    region.cells.insert(cell);
  });
  return region;
}

std::pair<double, double> irr_iar(const ConvexRegion& exact,
                                  const ConvexRegion& approx, int sources) {
  if (!exact.lattice.matches(approx.lattice)) {
    throw std::invalid_argument("regions scanned on different lattices");
  }
  if (exact.cells.empty() || approx.cells.empty()) {
    throw std::domain_error("IRR/IAR undefined for an empty region");
  }
  std::size_t overlap = 0;
  const ConvexRegion& small =
      exact.cells.size() <= approx.cells.size() ? exact : approx;
  const ConvexRegion& large =
      exact.cells.size() <= approx.cells.size() ? approx : exact;
  for (const auto& cell : small.cells) overlap += large.contains(cell);

  const double root = 1.0 / static_cast<double>(sources);
  const double irr =
      std::pow(static_cast<double>(overlap) / exact.measure(), root);
  const double iar =
      std::pow(static_cast<double>(overlap) / approx.measure(), root);
  return {irr, iar};
}

ConvexRegion connected_component(const ConvexRegion& region,
                                 const std::vector<int>& seed) {
  ConvexRegion component;
  component.lattice = region.lattice;
  if (!region.contains(seed)) return component;

  std::deque<std::vector<int>> frontier{seed};
  component.cells.insert(seed);
  while (!frontier.empty()) {
    const std::vector<int> cell = frontier.front();
    frontier.pop_front();
    for (int axis = 0; axis < region.lattice.axes(); ++axis) {
      for (int dir : {-1, 1}) {
        std::vector<int> next = cell;
        next[axis] += dir;
        if (std::abs(next[axis]) > region.lattice.half_cells[axis]) continue;
        if (!region.contains(next) || component.contains(next)) continue;
        component.cells.insert(next);
        frontier.push_back(next);
      }
    }
  }
  return component;
}

std::vector<std::pair<double, double>> region_extent(
    const ConvexRegion& region) {
  const int axes = region.lattice.axes();
  std::vector<std::pair<double, double>> extent(
      axes, {std::numeric_limits<double>::quiet_NaN(),
             std::numeric_limits<double>::quiet_NaN()});
  if (region.cells.empty()) return extent;
  std::vector<int> lo(axes, std::numeric_limits<int>::max());
  std::vector<int> hi(axes, std::numeric_limits<int>::min());
  for (const auto& cell : region.cells) {
    for (int axis = 0; axis < axes; ++axis) {
      lo[axis] = std::min(lo[axis], cell[axis]);
      hi[axis] = std::max(hi[axis], cell[axis]);
    }
  }
  for (int axis = 0; axis < axes; ++axis) {
    extent[axis] = {region.lattice.center[axis] +
                        lo[axis] * region.lattice.step[axis],
                    region.lattice.center[axis] +
                        hi[axis] * region.lattice.step[axis]};
  }
  return extent;
}

bool touches_boundary(const ConvexRegion& region) {
  for (const auto& cell : region.cells) {
    for (int axis = 0; axis < region.lattice.axes(); ++axis) {
      if (std::abs(cell[axis]) == region.lattice.half_cells[axis]) return true;
    }
  }
  return false;
}

}  // namespace csdml
