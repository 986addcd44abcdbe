#include "meanfield/domain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "meanfield/errors.hpp"

namespace mf {

double Box::volume() const {
  double v = 1.0;
  for (std::size_t a = 0; a < lower.size(); ++a) v *= upper[a] - lower[a];
  return v;
}

double Box::diameter() const {
  double s = 0.0;
  for (std::size_t a = 0; a < lower.size(); ++a) s += (upper[a] - lower[a]) * (upper[a] - lower[a]);
  return std::sqrt(s);
}

bool Box::contains(std::span<const double> q) const {
  for (std::size_t a = 0; a < lower.size(); ++a)
    if (!(q[a] >= lower[a] && q[a] <= upper[a])) return false;
  return true;
}

GridPtr Grid::build(int dimension, Box bounds, int cells_per_axis) {
  if (dimension < 1 || dimension > 3)
    throw ConfigError("grid dimension must be 1, 2 or 3 (got " + std::to_string(dimension) + ")");
  if (bounds.lower.size() != static_cast<std::size_t>(dimension) ||
      bounds.upper.size() != static_cast<std::size_t>(dimension))
    throw ConfigError("grid bounds must have one entry per dimension");
  for (int a = 0; a < dimension; ++a)
    if (!(bounds.upper[a] > bounds.lower[a]) || !std::isfinite(bounds.upper[a] - bounds.lower[a]))
      throw ConfigError("grid extent along axis " + std::to_string(a) + " must be positive and finite");
  if (cells_per_axis < 2) throw ConfigError("cells_per_axis must be at least 2");

  auto g = std::shared_ptr<Grid>(new Grid());
  g->dim_ = dimension;
  g->cells_ = cells_per_axis;
  g->bounds_ = std::move(bounds);

  std::size_t n = 1;
  for (int a = 0; a < dimension; ++a) n *= static_cast<std::size_t>(cells_per_axis);
  g->nodes_.resize(n * static_cast<std::size_t>(dimension));
  double cell_volume = 1.0;
  for (int a = 0; a < dimension; ++a) cell_volume *= g->cell_width(a);
  g->weights_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), cell_volume);

  // axis 0 varies fastest
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rem = i;
    for (int a = 0; a < dimension; ++a) {
      const auto k = rem % static_cast<std::size_t>(cells_per_axis);
      rem /= static_cast<std::size_t>(cells_per_axis);
      g->nodes_[i * dimension + a] = g->bounds_.lower[a] + (static_cast<double>(k) + 0.5) * g->cell_width(a);
    }
  }
  g->volume_ = g->weights_.sum();
  return g;
}

double Grid::cell_width(int axis) const {
  return (bounds_.upper[axis] - bounds_.lower[axis]) / static_cast<double>(cells_);
}

std::size_t Grid::cell_index(std::span<const double> q) const {
  std::size_t idx = 0;
  std::size_t stride = 1;
  for (int a = 0; a < dim_; ++a) {
    auto k = static_cast<long>(std::floor((q[a] - bounds_.lower[a]) / cell_width(a)));
    k = std::clamp(k, 0L, static_cast<long>(cells_) - 1);
    idx += static_cast<std::size_t>(k) * stride;
    stride *= static_cast<std::size_t>(cells_);
  }
  return idx;
}

bool Grid::same_as(const Grid& other) const {
  return this == &other || (dim_ == other.dim_ && cells_ == other.cells_ &&
                            bounds_.lower == other.bounds_.lower && bounds_.upper == other.bounds_.upper);
}

nlohmann::json Grid::to_json() const {
  return {{"dimension", dim_},
          {"bounds", {{"lower", bounds_.lower}, {"upper", bounds_.upper}}},
          {"cells_per_axis", cells_},
          {"weights", std::vector<double>(weights_.data(), weights_.data() + weights_.size())},
          {"total_volume", volume_}};
}

DensityField::DensityField(GridPtr grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw ContractViolation("density needs a grid");
  if (static_cast<std::size_t>(values_.size()) != grid_->size())
    throw ContractViolation("density size does not match grid");
  if ((values_.array() < 0.0).any() || !values_.allFinite())
    throw ContractViolation("density values must be finite and nonnegative");
  const double mass = values_.dot(grid_->weights());
  if (std::abs(mass - 1.0) > 1e-10) throw ContractViolation("density is not normalized");
}

DensityField DensityField::normalized(GridPtr grid, Eigen::VectorXd values) {
  if (!grid) throw ContractViolation("density needs a grid");
  if (static_cast<std::size_t>(values.size()) != grid->size())
    throw ContractViolation("density size does not match grid");
  const double mass = values.dot(grid->weights());
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ContractViolation("density has no mass");
  values /= mass;
  return DensityField(std::move(grid), std::move(values));
}

DensityField DensityField::from_masses(GridPtr grid, const Eigen::VectorXd& masses) {
  if (!grid) throw ContractViolation("density needs a grid");
  Eigen::VectorXd values = masses.cwiseQuotient(grid->weights());
  return normalized(std::move(grid), std::move(values));
}

DensityField uniform_density(const GridPtr& grid) {
  return DensityField(grid, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid->size()),
                                                      1.0 / grid->total_volume()));
}

}  // namespace mf
