#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "meanfield/errors.hpp"
#include "meanfield/solvers.hpp"

namespace mf {

ScanResult entropy_scan(double eps_min, double eps_max, int steps, const KernelMatrix& kernel,
                        const SolverOptions& opts, bool warm_start) {
  if (steps < 2 || !(eps_max > eps_min)) throw ContractViolation("scan needs steps >= 2 and eps_max > eps_min");
  SolverOptions o = opts;
  if (!o.ground_energy) o.ground_energy = continuum_ground_energy(kernel).value;

  ScanResult out;
  std::optional<DensityField> prev;
  for (int k = 0; k < steps; ++k) {
    ScanPoint pt;
    pt.eps = eps_min + (eps_max - eps_min) * k / (steps - 1);
    try {
      const MeanFieldSolution sol = solve_microcanonical(pt.eps, kernel, o, warm_start && prev ? &*prev : nullptr);
      pt.theta = sol.theta;
      pt.s_K = sol.s_K;
      pt.s_I = sol.s_I;
      pt.s = sol.s;
      pt.residual = sol.fixed_point_residual;
      pt.ok = true;
      pt.rho = sol.rho;
      prev = sol.rho;
    } catch (const std::exception& e) {
      pt.error = e.what();
      pt.s_K = perfect_gas_entropy(pt.eps, kernel.grid());
    }
    out.points.push_back(std::move(pt));
  }

  std::vector<const ScanPoint*> ok;
  for (const auto& p : out.points)
    if (p.ok) ok.push_back(&p);
  out.monotone = ok.size() == out.points.size();
  out.concave = out.monotone;
  for (std::size_t k = 1; k < ok.size(); ++k)
    if (!(ok[k]->s > ok[k - 1]->s)) out.monotone = false;
  for (std::size_t k = 1; k + 1 < ok.size(); ++k) {
    const double second = ok[k + 1]->s - 2.0 * ok[k]->s + ok[k - 1]->s;
    if (second > 1e-9 * std::max(1.0, std::abs(ok[k]->s))) out.concave = false;
  }
  return out;
}

nlohmann::json VpReport::to_json() const {
  return {{"epsilon", eps},
          {"s", s},
          {"s_I", s_I},
          {"sup_total", sup_total},
          {"sup_interaction", sup_interaction},
          {"gap_total", gap_total},
          {"gap_interaction", gap_interaction},
          {"x_total", x_total},
          {"x_interaction", x_interaction},
          {"grid_points", grid_points}};
}

VpReport verify_vp_decompositions(double eps, const KernelMatrix& kernel, int grid_points, const SolverOptions& opts) {
  if (grid_points < 4) throw ContractViolation("need at least 4 tabulation points");
  const Grid& g = kernel.grid();
  const double half_d = 0.5 * g.dimension();
  SolverOptions o = opts;
  if (!o.ground_energy) o.ground_energy = continuum_ground_energy(kernel).value;
  const double eg = *o.ground_energy;
  const MeanFieldSolution sol = solve_microcanonical(eps, kernel, o);

  VpReport r;
  r.eps = eps;
  r.s = sol.s;
  r.s_I = sol.s_I;
  r.grid_points = grid_points;

  const double b_uniform = bilinear_form(uniform_density(kernel.grid_ptr()), kernel);
  // the auxiliary entropy vanishes for arguments >= b_uniform, so (D/2) ln x
  // increases on [0, x_u] and the supremum sits in [x_u, x_max]
  const double x_u = std::max(0.0, 1.0 - b_uniform / eps);
  const double eta_lo = eg + 1e-9 * std::max(1.0, std::abs(eg));
  const double x_max = 1.0 - eta_lo / eps;

  std::function<double(double)> aux;
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
  const double eta_hi = std::min(eps, b_uniform);
  if (b_uniform > eta_lo && x_max > x_u) {
    const double h = (eta_hi - eta_lo) / (grid_points - 1);
    std::vector<double> table(static_cast<std::size_t>(grid_points));
    for (int k = 0; k < grid_points; ++k)
      table[static_cast<std::size_t>(k)] = auxiliary_interaction_entropy(eta_lo + k * h, kernel, {}, eg);
    spline = boost::math::interpolators::cardinal_cubic_b_spline<double>(table.begin(), table.end(), eta_lo, h);
    aux = [&spline, eta_lo, eta_hi](double eta) {
      if (eta >= eta_hi) return eta_hi < eta ? 0.0 : spline(eta_hi);
      return spline(std::max(eta, eta_lo));
    };
    if (eta_hi < b_uniform) {
      // eps < b_uniform: the table covers [eta_lo, eps] only, which is all x in [0, x_max] needs
      aux = [&spline, eta_lo, eta_hi](double eta) { return spline(std::clamp(eta, eta_lo, eta_hi)); };
    }
  } else {
    aux = [](double) { return 0.0; };
  }

  auto interaction = [&](double x) { return x > 0.0 ? half_d * std::log(x) + aux((1.0 - x) * eps) : -1e300; };
  auto total = [&](double x) {
    return x > 0.0 ? perfect_gas_entropy(x * eps, g) + aux((1.0 - x) * eps) : -1e300;
  };

  auto maximize = [&](const std::function<double(double)>& f, double& best_x) {
    best_x = x_u > 0.0 ? x_u : std::min(1.0, x_max);
    double best = f(best_x);
    if (x_max > x_u) {
      const double lo = std::max(x_u, 1e-12);
      auto res = boost::math::tools::brent_find_minima([&](double x) { return -f(x); }, lo, x_max, 50);
      if (-res.second > best) {
        best = -res.second;
        best_x = res.first;
      }
    }
    return best;
  };
  r.sup_interaction = maximize(interaction, r.x_interaction);
  r.sup_total = maximize(total, r.x_total);
  r.gap_interaction = std::abs(r.s_I - r.sup_interaction);
  r.gap_total = std::abs(r.s - r.sup_total);
  return r;
}

nlohmann::json LegendreReport::to_json() const {
  return {{"theta", theta},
          {"phi_fixed_point", phi_fixed_point},
          {"phi_legendre", phi_legendre},
          {"gap", gap},
          {"eps_star", eps_star},
          {"eps_canonical", eps_canonical},
          {"eps_star_quadratic", eps_star_quadratic},
          {"boundary_maximizer", boundary_maximizer}};
}

LegendreReport legendre_check(double theta, const KernelMatrix& kernel, const ScanResult& scan,
                              const SolverOptions& opts) {
  if (!(theta > 0.0)) throw ContractViolation("Legendre check needs theta > 0");
  std::vector<const ScanPoint*> ok;
  for (const auto& p : scan.points)
    if (p.ok) ok.push_back(&p);
  if (ok.size() < 3) throw ContractViolation("Legendre check needs at least three solved scan points");

  LegendreReport r;
  r.theta = theta;
  const MeanFieldSolution can = solve_canonical(theta, kernel, opts);
  r.phi_fixed_point = can.phi;
  r.eps_canonical = can.total_energy;

  auto objective = [theta](double eps, double s) { return -eps / theta + s; };
  std::size_t k = 0;
  for (std::size_t i = 1; i < ok.size(); ++i)
    if (objective(ok[i]->eps, ok[i]->s) > objective(ok[k]->eps, ok[k]->s)) k = i;
  r.boundary_maximizer = k == 0 || k + 1 == ok.size();
  const std::size_t c = std::clamp<std::size_t>(k, 1, ok.size() - 2);

  {
    const double x0 = ok[c - 1]->eps, x1 = ok[c]->eps, x2 = ok[c + 1]->eps;
    const double y0 = objective(x0, ok[c - 1]->s), y1 = objective(x1, ok[c]->s), y2 = objective(x2, ok[c + 1]->s);
    const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
    const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    r.eps_star_quadratic = den != 0.0 ? x1 - 0.5 * num / den : x1;
  }

  SolverOptions o = opts;
  if (!o.ground_energy) o.ground_energy = continuum_ground_energy(kernel).value;
  const DensityField* warm = ok[k]->rho ? &*ok[k]->rho : nullptr;

  // stationarity of -eps/theta + s(eps): ds/deps = 1/theta_eps, so theta_eps = theta
  double best_eps = ok[k]->eps;
  double best_val = objective(ok[k]->eps, ok[k]->s);
  auto evaluate = [&](double eps) { return solve_microcanonical(eps, kernel, o, warm).theta - theta; };

  const double lo = ok[r.boundary_maximizer ? k : c - 1]->eps;
  const double hi = ok[r.boundary_maximizer ? k : c + 1]->eps;
  bool refined = false;
  if (!r.boundary_maximizer) {
    const double flo = ok[c - 1]->theta - theta, fhi = ok[c + 1]->theta - theta;
    if (flo * fhi < 0.0) {
      std::uintmax_t max_iter = 100;
      auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(1.0, std::abs(a)); };
      try {
        auto root = boost::math::tools::toms748_solve(evaluate, lo, hi, flo, fhi, tol, max_iter);
        const double eps_root = 0.5 * (root.first + root.second);
        const MeanFieldSolution s = solve_microcanonical(eps_root, kernel, o, warm);
        const double v = objective(eps_root, s.s);
        if (v >= best_val) {
          best_val = v;
          best_eps = eps_root;
        }
        refined = true;
      } catch (const std::exception&) {
        refined = false;
      }
    } else if (flo == 0.0 || fhi == 0.0) {
      refined = true;
    }
  }
  if (!refined && r.eps_star_quadratic > lo && r.eps_star_quadratic < hi) {
    try {
      const MeanFieldSolution s = solve_microcanonical(r.eps_star_quadratic, kernel, o, warm);
      const double v = objective(r.eps_star_quadratic, s.s);
      if (v > best_val) {
        best_val = v;
        best_eps = r.eps_star_quadratic;
      }
    } catch (const std::exception&) {
    }
  }
  r.eps_star = best_eps;
  r.phi_legendre = best_val;
  r.gap = std::abs(r.phi_fixed_point - r.phi_legendre);
  return r;
}

}  // namespace mf
