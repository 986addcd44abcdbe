#include "meanfield/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "meanfield/errors.hpp"
#include "spg.hpp"

namespace mf {

double ExtendedReal::value() const {
  if (neg_inf_) throw ContractViolation("value() called on -infinity");
  return v_;
}

namespace {

void require_same_grid(const DensityField& rho, const KernelMatrix& kernel) {
  if (!rho.grid().same_as(kernel.grid())) throw ContractViolation("density and kernel live on different grids");
}

}  // namespace

double bilinear_form_masses(const Eigen::VectorXd& masses, const KernelMatrix& kernel) {
  return 0.5 * masses.dot(kernel.entries() * masses);
}

double bilinear_form(const DensityField& rho, const KernelMatrix& kernel) {
  require_same_grid(rho, kernel);
  return bilinear_form_masses(rho.masses(), kernel);
}

double relative_entropy(const DensityField& rho) {
  const Grid& g = rho.grid();
  const double vol = g.total_volume();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = rho.values()[static_cast<Eigen::Index>(i)];
    if (r > 0.0) s -= g.weights()[static_cast<Eigen::Index>(i)] * r * std::log(vol * r);
  }
  return s;
}

double theta_of_rho(const DensityField& rho, double eps, const KernelMatrix& kernel) {
  const double d = rho.grid().dimension();
  return (2.0 / d) * (eps - bilinear_form(rho, kernel));
}

ExtendedReal quasi_interaction_energy(const DensityField& rho, double eps, const KernelMatrix& kernel) {
  if (!(eps > 0.0)) throw ContractViolation("quasi-interaction energy needs eps > 0");
  const double b = bilinear_form(rho, kernel);
  if (b >= eps) return ExtendedReal::minus_infinity();
  return ExtendedReal::finite(0.5 * rho.grid().dimension() * std::log1p(-b / eps));
}

ExtendedReal interaction_entropy_density(const DensityField& rho, double eps, const KernelMatrix& kernel) {
  return ExtendedReal::finite(relative_entropy(rho)) + quasi_interaction_energy(rho, eps, kernel);
}

double maxwellian_value(double theta, std::span<const double> p) {
  if (!(theta > 0.0)) throw ContractViolation("Maxwellian needs theta > 0");
  double p2 = 0.0;
  for (double x : p) p2 += x * x;
  const double d = static_cast<double>(p.size());
  return std::pow(2.0 * std::numbers::pi * theta, -0.5 * d) * std::exp(-p2 / (2.0 * theta));
}

double h_function(const PhaseDensity& f) {
  if (!(f.theta > 0.0)) throw ContractViolation("H function needs theta > 0");
  const Grid& g = f.rho.grid();
  const double d = g.dimension();
  // int rho ln rho = -R - ln|Lambda|
  const double rho_log_rho = -relative_entropy(f.rho) - std::log(g.total_volume());
  return rho_log_rho - 0.5 * d * std::log(2.0 * std::numbers::pi * f.theta) - 0.5 * d - 1.0;
}

EnergyBudget energy_of_f(const PhaseDensity& f, const KernelMatrix& kernel) {
  EnergyBudget e;
  e.kinetic = 0.5 * f.rho.grid().dimension() * f.theta;
  e.interaction = bilinear_form(f.rho, kernel);
  e.total = e.kinetic + e.interaction;
  return e;
}

double perfect_gas_entropy_without_stirling_constant(double eps, const Grid& grid) {
  if (!(eps > 0.0)) throw ContractViolation("perfect-gas entropy needs eps > 0");
  const double d = grid.dimension();
  return std::log(grid.total_volume()) + 0.5 * d * std::log(4.0 * std::numbers::pi * std::numbers::e * eps / d);
}

double perfect_gas_entropy(double eps, const Grid& grid) {
  return 1.0 + perfect_gas_entropy_without_stirling_constant(eps, grid);
}

double perfect_gas_t_potential(double theta, const Grid& grid) {
  if (!(theta > 0.0)) throw ContractViolation("T-potential needs theta > 0");
  return 1.0 + std::log(grid.total_volume()) +
         0.5 * grid.dimension() * std::log(2.0 * std::numbers::pi * theta);
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  // sort-based projection (Held, Wolfe, Crowder)
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

namespace {

struct QpRun {
  Eigen::VectorXd p;
  double value;
  bool converged;
  int iterations;
  double pg_norm;
};

QpRun minimize_quadratic_on_simplex(const Eigen::MatrixXd& u, const Eigen::VectorXd& p, const GroundEnergyOptions& opts) {
  const detail::SpgResult r = detail::spg_minimize(
      p, [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(u * x); },
      [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(u * x); }, opts.max_iterations, opts.tolerance);
  return QpRun{r.x, r.value, r.converged, r.iterations, r.pg_norm};
}

}  // namespace

GroundEnergy continuum_ground_energy(const KernelMatrix& kernel, const GroundEnergyOptions& opts) {
  const GridPtr& grid = kernel.grid_ptr();
  const auto n = static_cast<Eigen::Index>(kernel.size());
  const Eigen::MatrixXd& u = kernel.entries();

  std::mt19937_64 rng(opts.seed);
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(grid->weights() / grid->total_volume());
  std::gamma_distribution<double> gamma(0.2, 1.0);  // small shape: mass piles onto few vertices
  for (int s = 0; s < opts.random_starts; ++s) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = gamma(rng) + 1e-300;
    starts.push_back(x / x.sum());
  }
  // vertices with the smallest self-interaction: exact minimizers of concave-ish tables
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  const auto vertices = std::min<std::size_t>(order.size(), 32);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(vertices), order.end(),
                    [&](auto a, auto b) { return u(a, a) < u(b, b); });
  for (std::size_t k = 0; k < vertices; ++k) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1e-3 / static_cast<double>(n));
    x[order[k]] += 1.0 - 1e-3;
    starts.push_back(x / x.sum());
  }

  QpRun best{};
  bool have = false;
  for (auto& s : starts) {
    QpRun r = minimize_quadratic_on_simplex(u, s, opts);
    if (!have || r.value < best.value - 1e-15) {
      best = std::move(r);
      have = true;
    }
  }
  GroundEnergy out{best.value, DensityField::from_masses(grid, best.p), best.converged, best.iterations, best.pg_norm};
  return out;
}

}  // namespace mf
