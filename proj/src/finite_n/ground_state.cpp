#include <algorithm>
#include <cmath>
#include <random>

#include "meanfield/errors.hpp"
#include "meanfield/finite_n.hpp"

namespace mf {

namespace {

void clamp_into(std::vector<double>& x, const Box& box) {
  const int d = box.dimension();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto a = k % static_cast<std::size_t>(d);
    x[k] = std::clamp(x[k], box.lower[a], box.upper[a]);
  }
}

std::vector<double> gradient(const ParticleConfiguration& c, const PairPotential& pot) {
  const int n = c.size(), d = c.dimension;
  std::vector<double> g(c.positions.size(), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double diff = c.positions[static_cast<std::size_t>(i * d + a)] - c.positions[static_cast<std::size_t>(j * d + a)];
        r2 += diff * diff;
      }
      const double r = std::sqrt(r2);
      if (r == 0.0) continue;
      const double f = pot.radial_derivative(r) / r;
      for (int a = 0; a < d; ++a) {
        const auto ia = static_cast<std::size_t>(i * d + a), ja = static_cast<std::size_t>(j * d + a);
        const double diff = c.positions[ia] - c.positions[ja];
        g[ia] += f * diff;
        g[ja] -= f * diff;
      }
    }
  return g;
}

double descend(ParticleConfiguration& c, const PairPotential& pot, const Box& box, const GroundStateOptions& opts) {
  double val = interaction_hamiltonian(c, pot);
  double t = 1e-3;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const std::vector<double> g = gradient(c, pot);
    std::vector<double> unit = c.positions;
    for (std::size_t k = 0; k < unit.size(); ++k) unit[k] -= g[k];
    clamp_into(unit, box);
    double pg = 0.0;
    for (std::size_t k = 0; k < unit.size(); ++k) pg = std::max(pg, std::abs(unit[k] - c.positions[k]));
    if (pg <= opts.tolerance) break;

    t = std::min(2.0 * t, 1e3);
    ParticleConfiguration trial = c;
    double trial_val = val;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < trial.positions.size(); ++k) trial.positions[k] = c.positions[k] - t * g[k];
      clamp_into(trial.positions, box);
      trial_val = interaction_hamiltonian(trial, pot);
      double decrease = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) decrease += g[k] * (trial.positions[k] - c.positions[k]);
      if (trial_val <= val + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || !(trial_val < val)) break;
    c = std::move(trial);
    val = trial_val;
  }
  return val;
}

double pattern_search(ParticleConfiguration& c, const PairPotential& pot, const Box& box,
                      const GroundStateOptions& opts) {
  double val = interaction_hamiltonian(c, pot);
  double extent = 0.0;
  for (int a = 0; a < box.dimension(); ++a) extent = std::max(extent, box.upper[a] - box.lower[a]);
  double h = 0.25 * extent;
  const int d = c.dimension;
  for (int it = 0; it < opts.max_iterations && h > 1e-9 * extent; ++it) {
    bool improved = false;
    for (std::size_t k = 0; k < c.positions.size(); ++k) {
      const auto a = static_cast<int>(k % static_cast<std::size_t>(d));
      const int i = static_cast<int>(k / static_cast<std::size_t>(d));
      for (double dir : {1.0, -1.0}) {
        std::vector<double> q(c.position(i).begin(), c.position(i).end());
        q[static_cast<std::size_t>(a)] = std::clamp(q[static_cast<std::size_t>(a)] + dir * h, box.lower[a], box.upper[a]);
        const double delta = interaction_delta(c, i, q, pot);
        if (delta < 0.0) {
          c.positions[k] = q[static_cast<std::size_t>(a)];
          val += delta;
          improved = true;
          break;
        }
      }
    }
    if (!improved) h *= 0.5;
  }
  return interaction_hamiltonian(c, pot);
}

}  // namespace

GroundStateRecord ground_state(int N, const PairPotential& pot, const Box& box, const GroundStateOptions& opts) {
  if (N < 2) throw ContractViolation("ground state needs N >= 2");
  if (opts.restarts < 1) throw ContractViolation("need at least one restart");
  const int d = box.dimension();
  std::mt19937_64 rng(opts.seed);
  std::vector<std::uniform_real_distribution<double>> axis;
  for (int a = 0; a < d; ++a) axis.emplace_back(box.lower[a], box.upper[a]);

  GroundStateRecord rec;
  rec.N = N;
  int planned = opts.restarts;
  int last_improvement = -1;
  bool doubled = false;
  for (int r = 0; r < planned; ++r) {
    ParticleConfiguration c;
    c.dimension = d;
    c.positions.resize(static_cast<std::size_t>(N * d));
    for (std::size_t k = 0; k < c.positions.size(); ++k) c.positions[k] = axis[k % static_cast<std::size_t>(d)](rng);
    const double val = pot.is_radial() ? descend(c, pot, box, opts) : pattern_search(c, pot, box, opts);
    if (r == 0 || val < rec.energy) {
      if (r > 0 && val < rec.energy - 1e-12 * std::max(1.0, std::abs(rec.energy))) last_improvement = r;
      rec.energy = val;
      rec.best = std::move(c);
    }
    rec.history.push_back(rec.energy / (static_cast<double>(N) * (N - 1)));
    if (r + 1 == planned && opts.double_on_late_improvement && !doubled && 4 * last_improvement >= 3 * planned) {
      planned *= 2;
      doubled = true;
    }
  }
  rec.restarts_used = planned;
  rec.eps_g = rec.energy / (static_cast<double>(N) * (N - 1));
  rec.eps_tilde = rec.energy / (static_cast<double>(N) * N);
  return rec;
}

nlohmann::json GroundStateRecord::to_json() const {
  return {{"N", N},
          {"energy", energy},
          {"eps_g", eps_g},
          {"eps_tilde", eps_tilde},
          {"restarts_used", restarts_used},
          {"upper_bound", upper_bound},
          {"history", history},
          {"positions", best.positions}};
}

MonotonicityReport monotonicity_report(const std::vector<GroundStateRecord>& records, double eps_g_continuum,
                                       double tolerance) {
  MonotonicityReport rep;
  rep.continuum = eps_g_continuum;
  rep.tolerance = tolerance;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    MonotonicityRow row;
    row.N = r.N;
    row.eps_g = r.eps_g;
    row.eps_tilde = r.eps_tilde;
    const double slack = tolerance * std::max(1.0, std::abs(r.eps_g));
    if (k > 0) {
      const auto& p = records[k - 1];
      if (p.N + 1 != r.N) throw ContractViolation("monotonicity report needs consecutive N");
      const double m = p.N;
      row.pair_increase = r.eps_g >= p.eps_g - slack;
      row.quasi_bound = r.eps_tilde >= m * m / ((m + 1.0) * (m - 1.0)) * p.eps_tilde - slack;
    }
    row.below_continuum = r.eps_g <= eps_g_continuum + slack;
    rep.pass = rep.pass && row.pair_increase && row.quasi_bound && row.below_continuum;
    rep.rows.push_back(row);
  }
  return rep;
}

nlohmann::json MonotonicityReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"N", r.N},
                         {"eps_g", r.eps_g},
                         {"eps_tilde", r.eps_tilde},
                         {"pair_increase", r.pair_increase},
                         {"quasi_bound", r.quasi_bound},
                         {"below_continuum", r.below_continuum}});
  return {{"rows", rows_json}, {"continuum", continuum}, {"tolerance", tolerance}, {"pass", pass}};
}

}  // namespace mf
