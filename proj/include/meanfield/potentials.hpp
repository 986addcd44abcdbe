#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <json.hpp>

#include "meanfield/domain.hpp"

namespace mf {

enum class PotentialKind {
  zero,
  constant,          // U = c
  bounded_smooth,    // U = amplitude * exp(-|q-q'|^2 / (2 length^2))
  softened_coulomb,  // U = 1 / (|q-q'| + delta)
  amended_coulomb,   // U = 1 / |q-q'|, U(q,q) = u
  mollified_newton,  // U = -(ball * |.|^-1 * ball)(q-q'), radius r
  custom_tabulated,  // node-indexed table on a grid
};

std::string to_string(PotentialKind kind);
PotentialKind parse_potential_kind(const std::string& name);

/// Symmetric pair kernel U(q, q'). Evaluation includes the recorded
/// nonnegativity shift; raw() does not.
class PairPotential {
 public:
  static PairPotential zero();
  static PairPotential constant(double c);
  static PairPotential bounded_smooth(double amplitude, double length);
  static PairPotential softened_coulomb(double delta);
  static PairPotential amended_coulomb(double diagonal);
  /// Uniform balls of the given radius convolved with the Coulomb kernel,
  /// with opposite sign. Closed form in D = 3, tabulated convolution in D = 2.
  /// D = 1 throws PotentialDomainError (|x|^-1 is not locally integrable).
  static PairPotential mollified_newton(double radius, int dimension);
  /// Piecewise-constant kernel on grid cells; need not be symmetric (the
  /// hypothesis check reports asymmetry).
  static PairPotential custom_tabulated(GridPtr grid, Eigen::MatrixXd table);

  PotentialKind kind() const { return kind_; }
  const std::map<std::string, double>& parameters() const { return params_; }
  double nonneg_shift() const { return shift_; }
  PairPotential with_shift(double shift) const;

  double operator()(std::span<const double> a, std::span<const double> b) const { return raw(a, b) + shift_; }
  double raw(std::span<const double> a, std::span<const double> b) const;

  /// Value assigned to U(q, q).
  double diagonal_value() const { return raw_diagonal() + shift_; }

  /// Kernels that are functions of |q - q'| only.
  bool is_radial() const { return kind_ != PotentialKind::custom_tabulated; }
  /// Radial profile U(r) for r > 0 (shift included) and its derivative.
  double radial(double r) const;
  double radial_derivative(double r) const;

  /// Diverges at coincident points; grid diagonals are sub-cell averaged.
  bool singular() const { return kind_ == PotentialKind::amended_coulomb; }
  bool bounded() const { return !singular(); }

  nlohmann::json to_json() const;

 private:
  double raw_diagonal() const;
  double raw_radial(double r) const;

  PotentialKind kind_ = PotentialKind::zero;
  std::map<std::string, double> params_;
  double shift_ = 0.0;
  int dimension_ = 0;  // mollified Newton only
  // mollified Newton in D = 2: profile spline on [0, profile_rmax_]
  std::shared_ptr<const boost::math::interpolators::cardinal_cubic_b_spline<double>> profile_;
  double profile_rmax_ = 0.0;
  // custom tables
  GridPtr table_grid_;
  std::shared_ptr<const Eigen::MatrixXd> table_;
};

/// Mutual Coulomb energy of two uniform unit-mass balls of radius r in R^3
/// whose centres are a distance d apart.
double uniform_ball_coulomb_3d(double d, double r);

/// Dense symmetric kernel matrix U_ij = U(q_i, q_j) on a grid.
class KernelMatrix {
 public:
  KernelMatrix(GridPtr grid, Eigen::MatrixXd entries);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Eigen::MatrixXd& entries() const { return entries_; }
  std::size_t size() const { return static_cast<std::size_t>(entries_.rows()); }

  /// Mean-field potential (U rho)_i = sum_j U_ij rho_j w_j.
  Eigen::VectorXd apply(const Eigen::VectorXd& rho) const;

 private:
  GridPtr grid_;
  Eigen::MatrixXd entries_;
};

/// Singular kernels get their diagonal from a 4-per-axis sub-cell average.
/// Throws PotentialDomainError on a non-finite off-diagonal entry.
KernelMatrix assemble_kernel(const PairPotential& pot, const GridPtr& grid);

enum class Verdict { pass, fail, indeterminate };
std::string to_string(Verdict v);

struct HypothesisReport {
  Verdict symmetry = Verdict::indeterminate;
  Verdict lower_semicontinuity = Verdict::indeterminate;
  Verdict sublevel_regularity = Verdict::indeterminate;
  Verdict local_square_integrability = Verdict::indeterminate;
  Verdict confinement = Verdict::indeterminate;
  Verdict bounded_continuous = Verdict::indeterminate;
  Verdict nonnegative = Verdict::indeterminate;
  /// Kernel matrix is positive semidefinite on zero-mass vectors.
  bool psd_on_zero_mass = false;
  double min_zero_mass_eigenvalue = 0.0;
  /// Successive increments of the local U^2 integral under refinement.
  std::vector<double> square_integral_trend;

  nlohmann::json to_json() const;
};

HypothesisReport check_hypotheses(const PairPotential& pot, const GridPtr& grid);

/// Adds -min_{grid pairs} U so that the kernel is nonnegative on the grid.
/// Identity (shift 0) when already nonnegative.
PairPotential shift_nonnegative(const PairPotential& pot, const GridPtr& grid);

/// Reads "i,j,value" rows (node indices); missing pairs default to the
/// mirrored entry when present and are an error otherwise.
PairPotential load_tabulated_csv(const std::filesystem::path& path, const GridPtr& grid);

}  // namespace mf
