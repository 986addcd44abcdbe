#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace mf {

/// Axis-aligned box [lower, upper] in R^D.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  int dimension() const { return static_cast<int>(lower.size()); }
  double volume() const;
  double diameter() const;
  bool contains(std::span<const double> q) const;
};

/// Midpoint-rule discretization of a box. Nodes sit at cell centres, weights
/// are cell volumes. Immutable once built; share through GridPtr.
class Grid {
 public:
  static std::shared_ptr<const Grid> build(int dimension, Box bounds, int cells_per_axis);

  int dimension() const { return dim_; }
  std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
  int cells_per_axis() const { return cells_; }
  const Box& bounds() const { return bounds_; }

  std::span<const double> node(std::size_t i) const {
    return {nodes_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  const Eigen::VectorXd& weights() const { return weights_; }
  double total_volume() const { return volume_; }
  double cell_width(int axis) const;
  double diameter() const { return bounds_.diameter(); }

  /// Index of the cell containing q (points on the upper face go to the last cell).
  std::size_t cell_index(std::span<const double> q) const;

  bool same_as(const Grid& other) const;
  nlohmann::json to_json() const;

 private:
  Grid() = default;

  int dim_ = 0;
  int cells_ = 0;
  Box bounds_;
  std::vector<double> nodes_;
  Eigen::VectorXd weights_;
  double volume_ = 0.0;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr build_grid(int dimension, Box bounds, int cells_per_axis) {
  return Grid::build(dimension, std::move(bounds), cells_per_axis);
}

/// Probability density (w.r.t. Lebesgue measure) sampled at grid nodes.
class DensityField {
 public:
  /// Takes values as given; throws ContractViolation unless they are
  /// nonnegative and integrate to one (relative 1e-10).
  DensityField(GridPtr grid, Eigen::VectorXd values);

  /// Rescales nonnegative values so that they integrate to one.
  static DensityField normalized(GridPtr grid, Eigen::VectorXd values);
  /// Builds a density from cell masses (sum of masses must be positive).
  static DensityField from_masses(GridPtr grid, const Eigen::VectorXd& masses);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd masses() const { return values_.cwiseProduct(grid_->weights()); }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

 private:
  GridPtr grid_;
  Eigen::VectorXd values_;
};

DensityField uniform_density(const GridPtr& grid);

/// Weighted point set in R^D (equal weights unless given), e.g. pooled MCMC samples.
struct WeightedSamples {
  int dimension = 1;
  std::vector<double> coords;   // row-major, dimension entries per point
  std::vector<double> weights;  // empty means equal weights

  std::size_t size() const { return coords.size() / static_cast<std::size_t>(dimension); }
};

struct TransportDistance {
  double value = 0.0;
  bool exact = true;            // exact 1-Wasserstein (D = 1)
  double regularization = 0.0;  // entropic strength used when !exact
};

/// 1-Wasserstein distance. D = 1 is exact (CDF difference); D > 1 uses
/// entropic optimal transport with strength 0.01 x domain diameter.
TransportDistance w1_distance(const DensityField& a, const DensityField& b);
TransportDistance w1_distance(const WeightedSamples& a, const DensityField& b);

/// Exact 1-D distance between two discrete measures given as (x, mass) atoms.
/// Masses are normalized internally.
double w1_exact_1d(std::span<const double> xa, std::span<const double> ma,
                   std::span<const double> xb, std::span<const double> mb);

}  // namespace mf
