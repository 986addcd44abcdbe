#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "meanfield/errors.hpp"
#include "meanfield/finite_n.hpp"
#include "chain.hpp"

namespace mf {

Chain::Chain(const PairPotential& pot, const Box& box, ParticleConfiguration start, double energy, double exponent,
             double limit, std::uint64_t seed)
    : pot_(pot), box_(box), config_(std::move(start)), energy_(energy), exponent_(exponent), limit_(limit),
      rng_(seed) {
  interaction_ = interaction_hamiltonian(config_, pot_);
  if (!(interaction_ < limit_)) throw ContractViolation("chain start lies outside the support of the target");
  proposal_.resize(static_cast<std::size_t>(config_.dimension));
}

double Chain::log_weight(double interaction) const {
  if (exponent_ == 0.0) return 0.0;
  return exponent_ * std::log1p(-interaction / energy_);
}

void Chain::update() {
  const int n = config_.size(), d = config_.dimension;
  const int i = std::uniform_int_distribution<int>(0, n - 1)(rng_);
  const auto qi = config_.position(i);
  ++proposals_;
  if (!lattice_.empty()) {
    std::uniform_int_distribution<std::size_t> site(0, lattice_.size() - 1);
    for (int a = 0; a < d; ++a) proposal_[static_cast<std::size_t>(a)] = lattice_[site(rng_)];
  } else {
    for (int a = 0; a < d; ++a) {
      const double side = box_.upper[a] - box_.lower[a];
      const double x = qi[static_cast<std::size_t>(a)] + step_ * side * unit_(rng_);
      if (x < box_.lower[a] || x > box_.upper[a]) return;  // confinement: reject
      proposal_[static_cast<std::size_t>(a)] = x;
    }
  }
  const double next = interaction_ + interaction_delta(config_, i, proposal_, pot_);
  if (!(next < limit_)) return;
  const double log_alpha = log_weight(next) - log_weight(interaction_);
  if (log_alpha < 0.0 && std::log(uniform_(rng_)) >= log_alpha) return;
  std::copy(proposal_.begin(), proposal_.end(), config_.position(i).begin());
  interaction_ = next;
  ++accepted_;
}

void Chain::sweep() {
  for (int k = 0; k < config_.size(); ++k) update();
}

double Chain::audit() {
  const double exact = interaction_hamiltonian(config_, pot_);
  const double err = std::abs(exact - interaction_) / std::max(1.0, std::abs(exact));
  interaction_ = exact;
  return err;
}

void Chain::adapt(int sweeps) {
  if (!lattice_.empty()) {
    for (int s = 0; s < sweeps; ++s) sweep();
    return;
  }
  constexpr int window = 20;
  for (int s = 0; s < sweeps; s += window) {
    const auto p0 = proposals_, a0 = accepted_;
    for (int k = 0; k < std::min(window, sweeps - s); ++k) sweep();
    const double rate = static_cast<double>(accepted_ - a0) / static_cast<double>(std::max<std::uint64_t>(1, proposals_ - p0));
    if (rate > 0.40) step_ = std::min(1.0, step_ * 1.25);
    if (rate < 0.25) step_ = std::max(1e-8, step_ * 0.8);
  }
  reset_counters();
}

std::uint64_t split_seed(std::uint64_t master, std::uint64_t counter) {
  // splitmix64 on master + counter
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double integrated_autocorrelation(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return 1.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return 1.0;
  double tau = 1.0;
  for (std::size_t lag = 1; lag < n / 2; ++lag) {
    double c = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) c += (x[t] - mean) * (x[t + lag] - mean);
    c /= static_cast<double>(n) * c0;
    tau += 2.0 * c;
    if (static_cast<double>(lag) >= 5.0 * tau) break;  // Sokal window
  }
  return std::max(tau, 1.0);
}

ParticleConfiguration feasible_configuration(int N, double eps, const PairPotential& pot, const Box& box,
                                             std::mt19937_64& rng) {
  const int d = box.dimension();
  const double energy = eps * N * static_cast<double>(N);
  ParticleConfiguration c;
  c.dimension = d;
  c.positions.resize(static_cast<std::size_t>(N * d));
  for (int probe = 0; probe < 10000; ++probe) {
    for (std::size_t k = 0; k < c.positions.size(); ++k) {
      const auto a = k % static_cast<std::size_t>(d);
      c.positions[k] = std::uniform_real_distribution<double>(box.lower[a], box.upper[a])(rng);
    }
    if (interaction_hamiltonian(c, pot) < energy) return c;
  }
  GroundStateOptions gopts;
  gopts.seed = rng();
  GroundStateRecord g = ground_state(N, pot, box, gopts);
  if (g.energy < energy) return g.best;
  throw InfeasibleError("no configuration with I < eps N^2 found (best I / N^2 = " +
                        std::to_string(g.eps_tilde) + ")");
}

std::vector<double> resample_momenta(const ParticleConfiguration& config, double eps, const PairPotential& pot,
                                     std::mt19937_64& rng) {
  const int n = config.size();
  const double energy = eps * n * static_cast<double>(n);
  const double interaction = interaction_hamiltonian(config, pot);
  if (!(interaction < energy)) throw ContractViolation("momentum resampling needs I < eps N^2");
  std::normal_distribution<double> normal;
  std::vector<double> p(config.positions.size());
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : p) {
      x = normal(rng);
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double radius = std::sqrt(2.0 * (energy - interaction) / n);
  const double scale = radius / std::sqrt(norm2);
  for (double& x : p) x *= scale;
  return p;
}

SampleSet sample_with_exponent(int N, double eps, double exponent, const PairPotential& pot, const Box& box,
                               const ChainOptions& opts, const ParticleConfiguration* start) {
  if (N < 2) throw ContractViolation("sampling needs N >= 2");
  if (!(exponent >= 0.0)) throw ContractViolation("exponent must be nonnegative");
  if (opts.samples < 1 || opts.thin < 1 || opts.burn_in < 0) throw ContractViolation("bad chain lengths");
  const double energy = eps * N * static_cast<double>(N);
  std::mt19937_64 rng(opts.seed);

  ParticleConfiguration init;
  if (start) {
    init = *start;
  } else if (!opts.lattice_sites.empty()) {
    const int d = box.dimension();
    init.dimension = d;
    init.positions.resize(static_cast<std::size_t>(N * d));
    std::uniform_int_distribution<std::size_t> site(0, opts.lattice_sites.size() - 1);
    bool found = false;
    for (int probe = 0; probe < 10000 && !found; ++probe) {
      for (double& x : init.positions) x = opts.lattice_sites[site(rng)];
      found = interaction_hamiltonian(init, pot) < energy;
    }
    if (!found) throw InfeasibleError("no lattice configuration with I < eps N^2 found");
  } else {
    init = feasible_configuration(N, eps, pot, box, rng);
  }
  init.momenta.clear();

  Chain chain(pot, box, std::move(init), energy, exponent, energy, rng());
  chain.set_step(opts.initial_step);
  chain.set_lattice(opts.lattice_sites);
  chain.adapt(opts.burn_in);

  SampleSet out;
  out.N = N;
  out.eps = eps;
  out.exponent = exponent;
  out.samples.reserve(static_cast<std::size_t>(opts.samples));
  double max_audit = 0.0;
  int since_audit = 0;
  for (int s = 0; s < opts.samples; ++s) {
    for (int t = 0; t < opts.thin; ++t) {
      chain.sweep();
      if (opts.audit_every > 0 && ++since_audit >= opts.audit_every) {
        max_audit = std::max(max_audit, chain.audit());
        since_audit = 0;
      }
    }
    ParticleConfiguration c = chain.configuration();
    if (opts.momenta) c.momenta = resample_momenta(c, eps, pot, rng);
    out.interaction.push_back(chain.interaction());
    out.samples.push_back(std::move(c));
  }
  max_audit = std::max(max_audit, chain.audit());

  auto& dg = out.diagnostics;
  dg.proposals = chain.proposals();
  dg.acceptance_rate = chain.acceptance_rate();
  dg.step_scale = chain.step();
  dg.autocorrelation_time = integrated_autocorrelation(out.interaction);
  dg.max_audit_error = max_audit;
  dg.stuck = chain.accepted() == 0;
  return out;
}

SampleSet sample_configurations(int N, double eps, const PairPotential& pot, const Box& box,
                                const ChainOptions& opts) {
  const int dn = box.dimension() * N;
  if (dn < 2) throw ContractViolation("exponent DN/2 - 1 is negative for DN < 2");
  return sample_with_exponent(N, eps, 0.5 * dn - 1.0, pot, box, opts);
}

nlohmann::json ChainDiagnostics::to_json() const {
  return {{"acceptance_rate", acceptance_rate},
          {"step_scale", step_scale},
          {"autocorrelation_time", autocorrelation_time},
          {"max_audit_error", max_audit_error},
          {"proposals", proposals},
          {"stuck", stuck}};
}

}  // namespace mf
