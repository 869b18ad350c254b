#ifndef CSDML_CONVEXITY_HPP
#define CSDML_CONVEXITY_HPP

#include <set>
#include <utility>
#include <vector>

#include "csdml/array_model.hpp"
#include "csdml/common.hpp"

namespace csdml {

/// Uniform scan box around the true DOAs: per-axis half widths and steps
/// (radians). Cells carry integer offsets in [-n_i, +n_i] per axis.
struct RegionScanSpec {
  VectorXd center;       ///< true DOAs theta
  VectorXd half_width;
  VectorXd step;
  double psd_tolerance = 1e-8;

  /// Half width 1.5 * BW_0.5 and step BW_0.5/40 on every axis. The step
  /// resolves the region boundary to about 2.5% of the beamwidth; the box is
  /// wide enough to catch the convex patches around permuted and sidelobe
  /// minima next to the central basin.
  static RegionScanSpec defaults(const ArrayGeometry& geom, VectorXd center);
};

/// The lattice a region was scanned on; regions are only comparable when
/// their lattices match.
struct ScanLattice {
  VectorXd center;
  VectorXd step;
  std::vector<int> half_cells;

  int axes() const { return static_cast<int>(half_cells.size()); }
  long total_cells() const;
  VectorXd cell_angles(const std::vector<int>& cell) const;
  bool matches(const ScanLattice& other) const;
};

ScanLattice make_lattice(const RegionScanSpec& spec);

/// A set of lattice cells plus its raw cell-count measure.
struct ConvexRegion {
  ScanLattice lattice;
  std::set<std::vector<int>> cells;

  std::size_t measure() const { return cells.size(); }
  bool contains(const std::vector<int>& cell) const {
    return cells.count(cell) != 0;
  }
};

struct RegionScan {
  ConvexRegion region;
  /// lambda_min(H) per cell in lattice enumeration order (last axis fastest);
  /// NaN where the bundle could not be formed.
  std::vector<double> min_eigs;
  int failed_cells = 0;
};

/// Cells where the full DML Hessian at the given covariance is positive
/// semidefinite up to the relative tolerance. Cells whose projector bundle
/// cannot be built count as non-convex failures.
RegionScan exact_region(const ArrayGeometry& geom, const RegionScanSpec& spec,
                        const MatrixXcd& covariance);

enum class ApproxMode { criterion, half_beamwidth };

/// `criterion`: cells where beta_i = |a(vartheta_i)^H a(theta_i)|^2 >= 1/2
/// on every axis. `half_beamwidth`: the box of per-axis width BW_0.5/2
/// centered on theta.
ConvexRegion approx_region(const ArrayGeometry& geom,
                           const RegionScanSpec& spec,
                           ApproxMode mode = ApproxMode::criterion);

/// K-th-root ratios (M(I)/M(R))^(1/K), (M(I)/M(A))^(1/K) with
/// I = R intersect A. Throws if either region is empty or the lattices
/// differ.
std::pair<double, double> irr_iar(const ConvexRegion& exact,
                                  const ConvexRegion& approx, int sources);

/// Face-connected component of `region` containing `seed` (empty region if
/// the seed cell is outside).
ConvexRegion connected_component(const ConvexRegion& region,
                                 const std::vector<int>& seed);

/// Per-axis [min, max] angles (radians) covered by the region's cells.
std::vector<std::pair<double, double>> region_extent(const ConvexRegion& region);

/// Whether any cell sits on the scan box boundary on some axis.
bool touches_boundary(const ConvexRegion& region);

}  // namespace csdml

#endif  // CSDML_CONVEXITY_HPP
