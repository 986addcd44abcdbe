#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "meanfield/domain.hpp"
#include "meanfield/errors.hpp"

namespace mf {
namespace {

struct Atoms {
  std::vector<double> coords;  // dimension entries per atom
  std::vector<double> mass;
};

Atoms density_atoms(const DensityField& d) {
  Atoms out;
  const Grid& g = d.grid();
  const Eigen::VectorXd m = d.masses();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (m[static_cast<Eigen::Index>(i)] <= 0.0) continue;
    auto q = g.node(i);
    out.coords.insert(out.coords.end(), q.begin(), q.end());
    out.mass.push_back(m[static_cast<Eigen::Index>(i)]);
  }
  return out;
}

double log_sum_exp(const std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

// Log-domain Sinkhorn; returns the transport cost of the regularized plan.
double sinkhorn_cost(const Atoms& a, const Atoms& b, int dim, double reg) {
  const std::size_t n = a.mass.size(), m = b.mass.size();
  const double sa = std::accumulate(a.mass.begin(), a.mass.end(), 0.0);
  const double sb = std::accumulate(b.mass.begin(), b.mass.end(), 0.0);
  std::vector<double> la(n), lb(m);
  for (std::size_t i = 0; i < n; ++i) la[i] = std::log(a.mass[i] / sa);
  for (std::size_t j = 0; j < m; ++j) lb[j] = std::log(b.mass[j] / sb);

  Eigen::MatrixXd cost(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double d = a.coords[i * dim + k] - b.coords[j * dim + k];
        s += d * d;
      }
      cost(i, j) = std::sqrt(s);
    }

  std::vector<double> f(n, 0.0), g(m, 0.0), buf(std::max(n, m));
  constexpr int kMaxIter = 20000;
  for (int it = 0; it < kMaxIter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      buf.resize(m);
      for (std::size_t j = 0; j < m; ++j) buf[j] = (g[j] - cost(i, j)) / reg + lb[j];
      f[i] = -reg * log_sum_exp(buf);
    }
    for (std::size_t j = 0; j < m; ++j) {
      buf.resize(n);
      for (std::size_t i = 0; i < n; ++i) buf[i] = (f[i] - cost(i, j)) / reg + la[i];
      g[j] = -reg * log_sum_exp(buf);
    }
    // g is exact for the column marginal; check the row marginal
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += std::exp((f[i] + g[j] - cost(i, j)) / reg + la[i] + lb[j]);
      err += std::abs(row - std::exp(la[i]));
    }
    if (err < 1e-10) break;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      total += std::exp((f[i] + g[j] - cost(i, j)) / reg + la[i] + lb[j]) * cost(i, j);
  return total;
}

}  // namespace

double w1_exact_1d(std::span<const double> xa, std::span<const double> ma,
                   std::span<const double> xb, std::span<const double> mb) {
  if (xa.size() != ma.size() || xb.size() != mb.size()) throw ContractViolation("atom/mass size mismatch");
  const double sa = std::accumulate(ma.begin(), ma.end(), 0.0);
  const double sb = std::accumulate(mb.begin(), mb.end(), 0.0);
  if (!(sa > 0.0) || !(sb > 0.0)) throw ContractViolation("measures must carry positive mass");

  // signed events: +mass from a, -mass from b; W1 = integral of |F_a - F_b|
  std::vector<std::pair<double, double>> events;
  events.reserve(xa.size() + xb.size());
  for (std::size_t i = 0; i < xa.size(); ++i) events.emplace_back(xa[i], ma[i] / sa);
  for (std::size_t i = 0; i < xb.size(); ++i) events.emplace_back(xb[i], -mb[i] / sb);
  std::sort(events.begin(), events.end(), [](auto& l, auto& r) { return l.first < r.first; });

  double diff = 0.0, total = 0.0;
  for (std::size_t k = 0; k + 1 < events.size(); ++k) {
    diff += events[k].second;
    total += std::abs(diff) * (events[k + 1].first - events[k].first);
  }
  return total;
}

TransportDistance w1_distance(const DensityField& a, const DensityField& b) {
  if (!a.grid().same_as(b.grid())) throw ContractViolation("w1_distance: densities live on different grids");
  const Grid& g = a.grid();
  if (g.dimension() == 1) {
    std::vector<double> x(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) x[i] = g.node(i)[0];
    const Eigen::VectorXd ma = a.masses(), mb = b.masses();
    return {w1_exact_1d(x, {ma.data(), g.size()}, x, {mb.data(), g.size()}), true, 0.0};
  }
  const double reg = 0.01 * g.diameter();
  return {sinkhorn_cost(density_atoms(a), density_atoms(b), g.dimension(), reg), false, reg};
}

TransportDistance w1_distance(const WeightedSamples& a, const DensityField& b) {
  const Grid& g = b.grid();
  if (a.dimension != g.dimension()) throw ContractViolation("w1_distance: sample dimension mismatch");
  const std::size_t n = a.size();
  if (n == 0) throw ContractViolation("w1_distance: empty sample set");
  std::vector<double> w = a.weights.empty() ? std::vector<double>(n, 1.0) : a.weights;
  if (w.size() != n) throw ContractViolation("w1_distance: weight count mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (!g.bounds().contains({a.coords.data() + i * a.dimension, static_cast<std::size_t>(a.dimension)}))
      throw ContractViolation("w1_distance: sample outside the domain");

  if (g.dimension() == 1) {
    std::vector<double> x(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) x[i] = g.node(i)[0];
    const Eigen::VectorXd mb = b.masses();
    return {w1_exact_1d(a.coords, w, x, {mb.data(), g.size()}), true, 0.0};
  }
  // bin onto the grid, then compare histograms
  Eigen::VectorXd masses = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < n; ++i)
    masses[static_cast<Eigen::Index>(
        g.cell_index({a.coords.data() + i * a.dimension, static_cast<std::size_t>(a.dimension)}))] += w[i];
  return w1_distance(DensityField::from_masses(b.grid_ptr(), masses), b);
}

}  // namespace mf
