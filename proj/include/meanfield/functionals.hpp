#pragma once

#include <cstdint>
#include <span>

#include "meanfield/domain.hpp"
#include "meanfield/potentials.hpp"

namespace mf {

/// A real number or -infinity, kept as an explicit tag so that -inf never
/// enters floating-point arithmetic.
class ExtendedReal {
 public:
  static ExtendedReal finite(double v) { return ExtendedReal(v, false); }
  static ExtendedReal minus_infinity() { return ExtendedReal(0.0, true); }

  bool is_minus_infinity() const { return neg_inf_; }
  bool is_finite() const { return !neg_inf_; }
  /// Throws ContractViolation on -infinity.
  double value() const;

  friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.neg_inf_ || b.neg_inf_) return minus_infinity();
    return finite(a.v_ + b.v_);
  }
  friend bool operator<(ExtendedReal a, ExtendedReal b) {
    if (a.neg_inf_) return !b.neg_inf_;
    if (b.neg_inf_) return false;
    return a.v_ < b.v_;
  }

 private:
  ExtendedReal(double v, bool neg_inf) : v_(v), neg_inf_(neg_inf) {}
  double v_;
  bool neg_inf_;
};

/// f(p, q) = sigma_theta(p) rho(q); the Maxwellian is carried analytically.
struct PhaseDensity {
  DensityField rho;
  double theta;
};

struct EnergyBudget {
  double total = 0.0;
  double kinetic = 0.0;
  double interaction = 0.0;
};

/// <rho, rho> = (1/2) sum_ij U_ij rho_i rho_j w_i w_j.
double bilinear_form(const DensityField& rho, const KernelMatrix& kernel);
/// Same form on raw cell masses (the probability vector w o rho).
double bilinear_form_masses(const Eigen::VectorXd& masses, const KernelMatrix& kernel);

/// R(rho | lambda) = -sum_i w_i rho_i ln(|Lambda| rho_i), with 0 ln 0 = 0.
double relative_entropy(const DensityField& rho);

/// theta = (2/D)(eps - <rho, rho>); may be nonpositive.
double theta_of_rho(const DensityField& rho, double eps, const KernelMatrix& kernel);

/// (D/2) ln(1 - <rho, rho>/eps), or -infinity when <rho, rho> >= eps.
ExtendedReal quasi_interaction_energy(const DensityField& rho, double eps, const KernelMatrix& kernel);

/// relative_entropy + quasi_interaction_energy.
ExtendedReal interaction_entropy_density(const DensityField& rho, double eps, const KernelMatrix& kernel);

/// (2 pi theta)^(-D/2) exp(-|p|^2 / (2 theta)), D = p.size().
double maxwellian_value(double theta, std::span<const double> p);

/// Boltzmann's H function of sigma_theta rho:
/// int rho ln rho - (D/2) ln(2 pi theta) - D/2 - 1.
double h_function(const PhaseDensity& f);

EnergyBudget energy_of_f(const PhaseDensity& f, const KernelMatrix& kernel);

/// Entropy per particle of the uniform perfect gas,
/// 1 + ln|Lambda| + (D/2) ln(4 pi e eps / D). The leading 1 comes from the
/// Stirling expansion of N! and makes s = -H_B hold at the maximizer.
double perfect_gas_entropy(double eps, const Grid& grid);
/// Same expression without the additive 1, as it is sometimes printed.
double perfect_gas_entropy_without_stirling_constant(double eps, const Grid& grid);

/// Canonical T-potential per particle of the uniform perfect gas,
/// ln(e |Lambda| (2 pi theta)^(D/2)).
double perfect_gas_t_potential(double theta, const Grid& grid);

struct GroundEnergyOptions {
  int random_starts = 8;
  int max_iterations = 200000;
  double tolerance = 1e-13;
  std::uint64_t seed = 20240601;
};

struct GroundEnergy {
  double value = 0.0;
  DensityField minimizer;
  bool converged = false;
  int iterations = 0;
  double projected_gradient_norm = 0.0;
};

/// min <rho, rho> over the probability simplex by projected gradient with
/// Armijo backtracking; uniform start plus random vertex-biased starts.
GroundEnergy continuum_ground_energy(const KernelMatrix& kernel, const GroundEnergyOptions& opts = {});

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace mf
