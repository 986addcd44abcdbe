#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "meanfield/finite_n.hpp"

namespace mf {

/// Single-site random-walk Metropolis chain for the density
/// (1 - I/energy)^exponent on {I < limit}.
class Chain {
 public:
  Chain(const PairPotential& pot, const Box& box, ParticleConfiguration start, double energy, double exponent,
        double limit, std::uint64_t seed);

  void set_step(double step) { step_ = step; }
  void set_lattice(std::vector<double> sites) { lattice_ = std::move(sites); }
  void set_limit(double limit) { limit_ = limit; }

  void update();
  void sweep();
  /// Burn-in sweeps with step adaptation towards 25-40% acceptance.
  void adapt(int sweeps);
  /// Recomputes I, returns the relative drift of the cached value.
  double audit();

  const ParticleConfiguration& configuration() const { return config_; }
  double interaction() const { return interaction_; }
  double step() const { return step_; }
  std::uint64_t proposals() const { return proposals_; }
  std::uint64_t accepted() const { return accepted_; }
  double acceptance_rate() const {
    return proposals_ ? static_cast<double>(accepted_) / static_cast<double>(proposals_) : 0.0;
  }
  void reset_counters() { proposals_ = accepted_ = 0; }

 private:
  double log_weight(double interaction) const;

  const PairPotential& pot_;
  const Box& box_;
  ParticleConfiguration config_;
  double energy_, exponent_, limit_;
  double interaction_ = 0.0;
  double step_ = 0.1;
  std::vector<double> lattice_;
  std::vector<double> proposal_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{-1.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::uint64_t proposals_ = 0, accepted_ = 0;
};

std::uint64_t split_seed(std::uint64_t master, std::uint64_t counter);
double integrated_autocorrelation(const std::vector<double>& x);

}  // namespace mf
