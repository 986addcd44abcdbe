#include "meanfield/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <boost/math/tools/roots.hpp>

#include "meanfield/errors.hpp"
#include "spg.hpp"

namespace mf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double entropy_of_values(const Eigen::VectorXd& rho, const Grid& g) {
  const double vol = g.total_volume();
  double s = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i)
    if (rho[i] > 0.0) s -= g.weights()[i] * rho[i] * std::log(vol * rho[i]);
  return s;
}

double form_of_values(const Eigen::VectorXd& rho, const Eigen::VectorXd& potential, const Grid& g) {
  return 0.5 * rho.cwiseProduct(g.weights()).dot(potential);
}

// exp(-v / theta) normalized against the quadrature weights
Eigen::VectorXd boltzmann(const Eigen::VectorXd& v, double theta, const Grid& g) {
  const double vmin = v.minCoeff();
  Eigen::VectorXd e = (-(v.array() - vmin) / theta).exp().matrix();
  return e / e.dot(g.weights());
}

double micro_theta(double eps, double b, int dim) { return (2.0 / dim) * (eps - b); }

struct Problem {
  std::function<double(double)> theta;                 // from <rho, rho>
  std::function<double(double, double)> objective;     // from (R, <rho, rho>)
  bool variable_theta = false;
};

struct BranchRun {
  Eigen::VectorXd rho;
  bool converged = false;
  double objective = kNaN;
  double residual = kNaN;
  int iterations = 0;
  int halvings = 0;
  std::vector<double> history;
  std::string error;
};

BranchRun iterate(const KernelMatrix& kernel, Eigen::VectorXd rho, const Problem& prob, const SolverOptions& opts) {
  const Grid& g = kernel.grid();
  BranchRun run;
  double gamma = opts.damping;
  double prev_res = std::numeric_limits<double>::infinity();
  double prev_obj = kNaN;
  int theta_halvings = 0;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    run.iterations = it;
    const Eigen::VectorXd v = kernel.apply(rho);
    const double b = form_of_values(rho, v, g);
    const double theta = prob.theta(b);
    if (!(theta > 0.0)) {
      run.error = "temperature left the admissible range";
      break;
    }
    const Eigen::VectorXd t = boltzmann(v, theta, g);
    const double res = (rho - t).cwiseAbs().maxCoeff();
    const double obj = prob.objective(entropy_of_values(rho, g), b);
    run.history.push_back(res);
    run.residual = res;
    run.objective = obj;
    run.rho = rho;
    if (res <= opts.tolerance &&
        (res == 0.0 || std::abs(obj - prev_obj) <= opts.objective_tolerance * std::max(1.0, std::abs(obj)))) {
      run.converged = true;
      return run;
    }
    if (res > prev_res && gamma > 1.0 / 1024.0) {
      gamma *= 0.5;
      ++run.halvings;
    }
    Eigen::VectorXd next = rho + gamma * (t - rho);
    if (prob.variable_theta) {
      double step = gamma;
      while (!(prob.theta(form_of_values(next, kernel.apply(next), g)) > 0.0)) {
        if (++theta_halvings > opts.max_halvings) {
          run.error = "stalled: damping halved " + std::to_string(opts.max_halvings) +
                      " times to keep theta positive";
          return run;
        }
        ++run.halvings;
        step *= 0.5;
        gamma = step;
        next = rho + step * (t - rho);
      }
    }
    rho = std::move(next);
    prev_res = res;
    prev_obj = obj;
  }
  if (run.error.empty()) run.error = "iteration limit reached";
  return run;
}

std::vector<Eigen::VectorXd> start_values(const Grid& g, const SolverOptions& opts, const DensityField* warm) {
  std::vector<Eigen::VectorXd> starts;
  if (warm) starts.push_back(warm->values());
  const Eigen::VectorXd uni = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g.size()), 1.0 / g.total_volume());
  starts.push_back(uni);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  for (int k = 1; k < opts.multistart; ++k) {
    Eigen::VectorXd x(uni.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::exp(opts.perturbation * normal(rng));
    starts.push_back(x / x.dot(g.weights()));
  }
  return starts;
}

struct Selection {
  BranchRun best;
  int index = -1;
  std::vector<double> objectives;
};

Selection select_branch(const KernelMatrix& kernel, const std::vector<Eigen::VectorXd>& starts, const Problem& prob,
                        const SolverOptions& opts) {
  Selection sel;
  BranchRun closest;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    BranchRun r = iterate(kernel, starts[k], prob, opts);
    sel.objectives.push_back(r.converged ? r.objective : kNaN);
    if (r.converged) {
      if (sel.index < 0 || r.objective > sel.best.objective + 1e-9) {
        sel.best = std::move(r);
        sel.index = static_cast<int>(k);
      }
    } else if (closest.history.empty() || r.residual < closest.residual) {
      closest = std::move(r);
    }
  }
  if (sel.index < 0) {
    throw NonConvergenceError("no branch of the fixed-point iteration converged (" + closest.error + ")",
                              closest.history);
  }
  return sel;
}

double ground_energy_of(const KernelMatrix& kernel, const SolverOptions& opts) {
  if (opts.ground_energy) return *opts.ground_energy;
  return continuum_ground_energy(kernel).value;
}

void require_feasible(double eps, double eg) {
  if (!(eps >= eg + 1e-9 * std::max(1.0, std::abs(eg)))) {
    throw InfeasibleError("energy " + std::to_string(eps) + " does not exceed the ground energy " +
                          std::to_string(eg));
  }
}

}  // namespace

double microcanonical_residual(const DensityField& rho, double eps, const KernelMatrix& kernel) {
  const Grid& g = kernel.grid();
  if (!rho.grid().same_as(g)) throw ContractViolation("density and kernel live on different grids");
  const Eigen::VectorXd v = kernel.apply(rho.values());
  const double theta = micro_theta(eps, form_of_values(rho.values(), v, g), g.dimension());
  if (!(theta > 0.0)) throw ContractViolation("fixed-point map undefined: theta <= 0");
  return (rho.values() - boltzmann(v, theta, g)).cwiseAbs().maxCoeff();
}

double canonical_residual(const DensityField& rho, double theta, const KernelMatrix& kernel) {
  const Grid& g = kernel.grid();
  if (!rho.grid().same_as(g)) throw ContractViolation("density and kernel live on different grids");
  if (!(theta > 0.0)) throw ContractViolation("canonical map needs theta > 0");
  const Eigen::VectorXd v = kernel.apply(rho.values());
  return (rho.values() - boltzmann(v, theta, g)).cwiseAbs().maxCoeff();
}

MeanFieldSolution solve_microcanonical(double eps, const KernelMatrix& kernel, const SolverOptions& opts,
                                       const DensityField* warm_start) {
  if (!(eps > 0.0)) throw InfeasibleError("energy must be positive");
  const Grid& g = kernel.grid();
  const int dim = g.dimension();
  const double eg = ground_energy_of(kernel, opts);
  require_feasible(eps, eg);
  if (warm_start && !warm_start->grid().same_as(g)) throw ContractViolation("warm start lives on another grid");

  std::vector<Eigen::VectorXd> starts = start_values(g, opts, warm_start);
  // pull starts with <rho, rho> >= eps towards an admissible anchor
  std::optional<Eigen::VectorXd> anchor;
  auto form = [&](const Eigen::VectorXd& r) { return form_of_values(r, kernel.apply(r), g); };
  for (auto& s : starts) {
    if (form(s) < eps) continue;
    if (!anchor) {
      const Eigen::VectorXd uni = starts[warm_start ? 1 : 0];
      if (form(uni) < eps) {
        anchor = uni;
      } else {
        GroundEnergy ge = continuum_ground_energy(kernel);
        anchor = ge.minimizer.values();
      }
    }
    double t = 0.5;
    Eigen::VectorXd mixed = s;
    for (int k = 0; k < 60; ++k, t = 0.5 * (1.0 + t)) {
      mixed = (1.0 - t) * s + t * *anchor;
      if (form(mixed) < eps) break;
    }
    s = mixed;
  }

  Problem prob;
  prob.variable_theta = true;
  prob.theta = [eps, dim](double b) { return micro_theta(eps, b, dim); };
  prob.objective = [eps, dim](double r, double b) {
    return b < eps ? r + 0.5 * dim * std::log1p(-b / eps) : -std::numeric_limits<double>::infinity();
  };
  Selection sel = select_branch(kernel, starts, prob, opts);

  DensityField rho(kernel.grid_ptr(), sel.best.rho);
  MeanFieldSolution out{.mode = EnsembleMode::microcanonical, .parameter = eps, .rho = rho};
  out.interaction_energy = bilinear_form(rho, kernel);
  out.theta = micro_theta(eps, out.interaction_energy, dim);
  out.total_energy = 0.5 * dim * out.theta + out.interaction_energy;
  out.s_I = sel.best.objective;
  out.s_K = perfect_gas_entropy(eps, g);
  out.s = out.s_K + out.s_I;
  out.objective = out.s_I;
  out.fixed_point_residual = sel.best.residual;
  out.iterations = sel.best.iterations;
  out.branch = sel.index;
  out.damping_halvings = sel.best.halvings;
  out.branch_objectives = sel.objectives;
  return out;
}

MeanFieldSolution solve_canonical(double theta, const KernelMatrix& kernel, const SolverOptions& opts,
                                  const DensityField* warm_start) {
  if (!(theta > 0.0)) throw ContractViolation("canonical solve needs theta > 0");
  const Grid& g = kernel.grid();
  const int dim = g.dimension();
  if (warm_start && !warm_start->grid().same_as(g)) throw ContractViolation("warm start lives on another grid");
  const double phi_k = perfect_gas_t_potential(theta, g);

  Problem prob;
  prob.theta = [theta](double) { return theta; };
  prob.objective = [theta, phi_k](double r, double b) { return phi_k + r - b / theta; };
  Selection sel = select_branch(kernel, start_values(g, opts, warm_start), prob, opts);

  DensityField rho(kernel.grid_ptr(), sel.best.rho);
  MeanFieldSolution out{.mode = EnsembleMode::canonical, .parameter = theta, .rho = rho};
  out.theta = theta;
  out.interaction_energy = bilinear_form(rho, kernel);
  out.total_energy = 0.5 * dim * theta + out.interaction_energy;
  out.phi_K = phi_k;
  out.phi = sel.best.objective;
  out.phi_I = out.phi - phi_k;
  out.objective = out.phi;
  out.fixed_point_residual = sel.best.residual;
  out.iterations = sel.best.iterations;
  out.branch = sel.index;
  out.damping_halvings = sel.best.halvings;
  out.branch_objectives = sel.objectives;
  return out;
}

nlohmann::json MeanFieldSolution::to_json() const {
  nlohmann::json j;
  j["mode"] = mode == EnsembleMode::microcanonical ? "microcanonical" : "canonical";
  j[mode == EnsembleMode::microcanonical ? "epsilon" : "theta_prescribed"] = parameter;
  j["theta"] = theta;
  j["interaction_energy"] = interaction_energy;
  j["total_energy"] = total_energy;
  if (mode == EnsembleMode::microcanonical) {
    j["s_K"] = s_K;
    j["s_I"] = s_I;
    j["s"] = s;
  } else {
    j["phi_K"] = phi_K;
    j["phi_I"] = phi_I;
    j["phi"] = phi;
  }
  j["objective"] = objective;
  j["fixed_point_residual"] = fixed_point_residual;
  j["iterations"] = iterations;
  j["branch"] = branch;
  j["damping_halvings"] = damping_halvings;
  nlohmann::json objs = nlohmann::json::array();
  for (double o : branch_objectives) objs.push_back(std::isnan(o) ? nlohmann::json(nullptr) : nlohmann::json(o));
  j["branch_objectives"] = objs;
  j["rho"] = std::vector<double>(rho.values().data(), rho.values().data() + rho.values().size());
  return j;
}

namespace {

struct Ascent {
  Eigen::VectorXd p;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

Ascent ascend(const Eigen::VectorXd& p, const std::function<double(const Eigen::VectorXd&)>& f,
              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad, const AscentOptions& opts) {
  const detail::SpgResult r = detail::spg_minimize(
      p,
      [&](const Eigen::VectorXd& x) {
        const double v = f(x);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
      },
      [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(-grad(x)); }, opts.max_iterations, opts.tolerance);
  return Ascent{r.x, -r.value, r.iterations, r.converged};
}

double entropy_of_masses(const Eigen::VectorXd& p, const Grid& g) {
  const double vol = g.total_volume();
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s -= p[i] * std::log(vol * p[i] / g.weights()[i]);
  return s;
}

Eigen::VectorXd entropy_gradient(const Eigen::VectorXd& p, const Grid& g) {
  const double vol = g.total_volume();
  Eigen::VectorXd gr(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i)
    gr[i] = -std::log(vol * std::max(p[i], 1e-300) / g.weights()[i]) - 1.0;
  return gr;
}

}  // namespace

EntropyMaximum maximize_interaction_entropy(double eps, const KernelMatrix& kernel, const AscentOptions& opts) {
  if (!(eps > 0.0)) throw InfeasibleError("energy must be positive");
  const Grid& g = kernel.grid();
  const Eigen::MatrixXd& u = kernel.entries();
  const double half_d = 0.5 * g.dimension();
  const GroundEnergy ge = continuum_ground_energy(kernel);
  require_feasible(eps, ge.value);

  const Eigen::VectorXd uni = g.weights() / g.total_volume();
  Eigen::VectorXd p = uni;
  const Eigen::VectorXd pstar = ge.minimizer.masses();
  for (double t = 0.5; bilinear_form_masses(p, kernel) >= eps; t = 0.5 * (1.0 + t)) {
    p = (1.0 - t) * uni + t * pstar;
    if (t > 1.0 - 1e-15) break;
  }

  auto f = [&](const Eigen::VectorXd& x) {
    const double b = 0.5 * x.dot(u * x);
    if (!(b < eps)) return -std::numeric_limits<double>::infinity();
    return entropy_of_masses(x, g) + half_d * std::log1p(-b / eps);
  };
  auto grad = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd ux = u * x;
    const double b = 0.5 * x.dot(ux);
    return Eigen::VectorXd(entropy_gradient(x, g) - (half_d / (eps - b)) * ux);
  };
  Ascent a = ascend(p, f, grad, opts);
  DensityField rho = DensityField::from_masses(kernel.grid_ptr(), a.p);
  EntropyMaximum out{rho, a.value, a.iterations, a.converged, microcanonical_residual(rho, eps, kernel)};
  return out;
}

double auxiliary_interaction_entropy(double eta, const KernelMatrix& kernel, const AscentOptions& opts,
                                     std::optional<double> ground_energy) {
  const Grid& g = kernel.grid();
  const Eigen::MatrixXd& u = kernel.entries();
  const Eigen::VectorXd uni = g.weights() / g.total_volume();
  if (bilinear_form_masses(uni, kernel) <= eta) return 0.0;

  const double eg = ground_energy ? *ground_energy : continuum_ground_energy(kernel).value;
  if (eta < eg) {
    throw InfeasibleError("constraint level " + std::to_string(eta) + " lies below the ground energy " +
                          std::to_string(eg));
  }

  // p_t minimizes <p, p> - t R(p); its form increases with t from the ground
  // energy (t = 0) to the uniform value (t -> infinity). The multiplier of the
  // constraint is 1/t.
  Eigen::VectorXd warm = uni;
  struct Inner {
    double form, entropy;
  };
  auto inner = [&](double t) {
    const detail::SpgResult r = detail::spg_minimize(
        warm, [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(u * x) - t * entropy_of_masses(x, g); },
        [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(u * x - t * entropy_gradient(x, g)); },
        opts.max_iterations, opts.tolerance);
    warm = r.x;
    return Inner{bilinear_form_masses(r.x, kernel), entropy_of_masses(r.x, g)};
  };

  double lo = 0.0, hi = 1.0;
  Inner at_lo = inner(0.0);
  if (at_lo.form >= eta) return at_lo.entropy;  // eta at the ground energy within optimizer resolution
  Inner at_hi = inner(hi);
  while (at_hi.form < eta) {
    lo = hi;
    at_lo = at_hi;
    hi *= 4.0;
    at_hi = inner(hi);
  }
  if (at_hi.form == eta) return at_hi.entropy;

  std::uintmax_t max_iter = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(1e-3, std::abs(a)); };
  double best_t = hi;
  Inner best = at_hi;
  if (std::abs(at_lo.form - eta) < std::abs(best.form - eta)) {
    best = at_lo;
    best_t = lo;
  }
  auto fn = [&](double t) {
    Inner r = inner(t);
    if (std::abs(r.form - eta) < std::abs(best.form - eta)) {
      best = r;
      best_t = t;
    }
    return r.form - eta;
  };
  boost::math::tools::toms748_solve(fn, lo, hi, at_lo.form - eta, at_hi.form - eta, tol, max_iter);
  // first-order correction for the residual constraint violation
  return best_t > 0.0 ? best.entropy + (eta - best.form) / best_t : best.entropy;
}

IdentityReport entropy_h_identity_check(const MeanFieldSolution& solution) {
  if (solution.mode != EnsembleMode::microcanonical) throw ContractViolation("identity check needs a microcanonical solution");
  IdentityReport r;
  r.s = solution.s;
  r.h_b = h_function(PhaseDensity{solution.rho, solution.theta});
  r.gap = std::abs(r.s + r.h_b);
  return r;
}

}  // namespace mf
