#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

#include <Eigen/Core>

#include "meanfield/functionals.hpp"

namespace mf::detail {

struct SpgResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double pg_norm = 0.0;
};

// Subtracting a constant leaves simplex projections of x - a g unchanged;
// centring on the support avoids cancellation for long steps.
inline Eigen::VectorXd centred(const Eigen::VectorXd& x, Eigen::VectorXd g) {
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] > 0.0) {
      sum += g[i];
      ++count;
    }
  if (count > 0) g.array() -= sum / count;
  return g;
}

// Spectral projected gradient on the probability simplex: Barzilai-Borwein
// steps with a nonmonotone Armijo search. f may return +inf outside its domain.
inline SpgResult spg_minimize(Eigen::VectorXd x, const std::function<double(const Eigen::VectorXd&)>& f,
                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad, int max_iterations,
                              double tolerance) {
  constexpr int memory = 10;
  SpgResult r;
  double val = f(x);
  Eigen::VectorXd g = centred(x, grad(x));
  std::deque<double> recent{val};
  double alpha = 1.0;
  {
    const double pg = (project_to_simplex(x - g) - x).cwiseAbs().maxCoeff();
    if (pg > 0.0) alpha = std::clamp(1.0 / pg, 1e-20, 1e12);
  }
  for (int it = 0; it < max_iterations; ++it) {
    r.iterations = it + 1;
    r.pg_norm = (project_to_simplex(x - g) - x).cwiseAbs().maxCoeff();
    if (r.pg_norm <= tolerance) {
      r.converged = true;
      break;
    }
    const Eigen::VectorXd d = project_to_simplex(x - alpha * g) - x;
    const double slope = g.dot(d);
    const double ref = *std::max_element(recent.begin(), recent.end());
    double lambda = 1.0;
    Eigen::VectorXd trial;
    double trial_val = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial = x + lambda * d;
      trial_val = f(trial);
      if (trial_val <= ref + 1e-4 * lambda * slope) {
        accepted = true;
        break;
      }
      // below function resolution, convexity along the segment decides
      if (trial_val <= val + 1e-13 * std::max(1.0, std::abs(val)) && grad(trial).dot(d) <= 0.0) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      r.converged = r.pg_norm <= 1e-9;
      break;
    }
    const Eigen::VectorXd g_new = centred(trial, grad(trial));
    const Eigen::VectorXd s = trial - x;
    const double sy = s.dot(g_new - g);
    if (sy > 0.0) alpha = std::clamp(s.squaredNorm() / sy, 1e-20, 1e12);
    if (s.cwiseAbs().maxCoeff() == 0.0) {
      r.converged = r.pg_norm <= 1e-9;
      break;
    }
    x = trial;
    val = trial_val;
    g = g_new;
    recent.push_back(val);
    if (static_cast<int>(recent.size()) > memory) recent.pop_front();
  }
  r.x = std::move(x);
  r.value = val;
  return r;
}

}  // namespace mf::detail
