#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "meanfield/domain.hpp"
#include "meanfield/functionals.hpp"
#include "meanfield/potentials.hpp"

namespace mf {

enum class EnsembleMode { microcanonical, canonical };

struct SolverOptions {
  double damping = 0.5;
  double tolerance = 1e-10;            // sup-norm of rho - T(rho)
  double objective_tolerance = 1e-12;  // relative change of the objective
  int max_iterations = 100000;
  int multistart = 8;                  // uniform plus multistart-1 perturbed starts
  double perturbation = 0.5;           // log-amplitude of start perturbations
  int max_halvings = 40;
  std::uint64_t seed = 7;
  /// Skips the ground-state computation when set.
  std::optional<double> ground_energy;
};

struct MeanFieldSolution {
  EnsembleMode mode = EnsembleMode::microcanonical;
  double parameter = 0.0;  // eps (microcanonical) or theta (canonical)
  DensityField rho;
  double theta = 0.0;
  double interaction_energy = 0.0;  // <rho, rho>
  double total_energy = 0.0;        // (D/2) theta + <rho, rho>
  // microcanonical
  double s_K = 0.0, s_I = 0.0, s = 0.0;
  // canonical
  double phi_K = 0.0, phi_I = 0.0, phi = 0.0;
  double objective = 0.0;  // S_{I/eps}(rho) or phi
  double fixed_point_residual = 0.0;
  int iterations = 0;
  int branch = 0;
  int damping_halvings = 0;
  std::vector<double> branch_objectives{};  // NaN for branches that failed

  nlohmann::json to_json() const;
};

/// sup_i |rho_i - T(rho)_i| for the microcanonical map at energy eps.
double microcanonical_residual(const DensityField& rho, double eps, const KernelMatrix& kernel);
/// Same for the canonical map at fixed theta.
double canonical_residual(const DensityField& rho, double theta, const KernelMatrix& kernel);

/// Self-consistent Boltzmann factor at energy eps: damped iteration
/// rho <- (1 - g) rho + g T(rho), theta recomputed each sweep, multistart,
/// branch with the largest S_{I/eps} wins.
MeanFieldSolution solve_microcanonical(double eps, const KernelMatrix& kernel, const SolverOptions& opts = {},
                                       const DensityField* warm_start = nullptr);

/// Fixed-theta counterpart; phi = -F_theta(f_theta) / theta.
MeanFieldSolution solve_canonical(double theta, const KernelMatrix& kernel, const SolverOptions& opts = {},
                                  const DensityField* warm_start = nullptr);

struct AscentOptions {
  int max_iterations = 2000000;
  double tolerance = 1e-13;  // sup-norm of the projected-gradient step
};

struct EntropyMaximum {
  DensityField rho;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double fixed_point_residual = 0.0;
};

/// Projected-gradient ascent of S_{I/eps} over the simplex (no fixed-point
/// map involved).
EntropyMaximum maximize_interaction_entropy(double eps, const KernelMatrix& kernel, const AscentOptions& opts = {});

/// max { R(rho) : <rho, rho> <= eta } over the simplex. The active quadratic
/// constraint is enforced through its multiplier, located by bracketed root
/// finding around projected-gradient inner solves. Throws InfeasibleError for
/// eta below the ground energy.
double auxiliary_interaction_entropy(double eta, const KernelMatrix& kernel, const AscentOptions& opts = {},
                                     std::optional<double> ground_energy = std::nullopt);

struct ScanPoint {
  double eps = 0.0;
  double theta = 0.0, s_K = 0.0, s_I = 0.0, s = 0.0, residual = 0.0;
  bool ok = false;
  std::string error;
  std::optional<DensityField> rho;
};

struct ScanResult {
  std::vector<ScanPoint> points;
  bool monotone = false;
  bool concave = false;
};

/// Solves on an equispaced eps grid. Warm start passes the previous density
/// in as an extra start; per-point failures are recorded and the scan goes on.
ScanResult entropy_scan(double eps_min, double eps_max, int steps, const KernelMatrix& kernel,
                        const SolverOptions& opts = {}, bool warm_start = true);

struct VpReport {
  double eps = 0.0;
  double s = 0.0, s_I = 0.0;
  double sup_total = 0.0, sup_interaction = 0.0;
  double gap_total = 0.0, gap_interaction = 0.0;
  double x_total = 0.0, x_interaction = 0.0;
  int grid_points = 0;
  nlohmann::json to_json() const;
};

/// Compares s and s_I against their sup_x decompositions through the
/// auxiliary entropy, tabulated on grid_points arguments and spline-interpolated.
VpReport verify_vp_decompositions(double eps, const KernelMatrix& kernel, int grid_points = 64,
                                  const SolverOptions& opts = {});

struct LegendreReport {
  double theta = 0.0;
  double phi_fixed_point = 0.0;
  double phi_legendre = 0.0;
  double gap = 0.0;
  double eps_star = 0.0;
  double eps_canonical = 0.0;  // energy of the canonical solution
  double eps_star_quadratic = 0.0;  // vertex of the parabola through the scan maximum
  bool boundary_maximizer = false;  // widen the scan when set
  nlohmann::json to_json() const;
};

/// phi(theta) from the canonical fixed point versus sup_eps(-eps/theta + s(eps)).
/// The scan brackets the maximizer; it is then refined with direct solves
/// using ds/deps = 1/theta_eps.
LegendreReport legendre_check(double theta, const KernelMatrix& kernel, const ScanResult& scan,
                              const SolverOptions& opts = {});

struct IdentityReport {
  double s = 0.0;
  double h_b = 0.0;
  double gap = 0.0;
};

/// |s + H_B(sigma_theta rho)| for a microcanonical solution.
IdentityReport entropy_h_identity_check(const MeanFieldSolution& solution);

}  // namespace mf
