#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "meanfield/domain.hpp"
#include "meanfield/functionals.hpp"
#include "meanfield/potentials.hpp"

namespace mf {

/// N points in the box, row-major positions; momenta empty unless resampled.
struct ParticleConfiguration {
  int dimension = 1;
  std::vector<double> positions;
  std::vector<double> momenta;

  int size() const { return static_cast<int>(positions.size()) / dimension; }
  std::span<const double> position(int i) const {
    return {positions.data() + static_cast<std::size_t>(i * dimension), static_cast<std::size_t>(dimension)};
  }
  std::span<double> position(int i) {
    return {positions.data() + static_cast<std::size_t>(i * dimension), static_cast<std::size_t>(dimension)};
  }
};

/// I = sum_{i<j} U(q_i, q_j). Returns +infinity when a pair is not finite
/// (coincident points under a singular kernel).
double interaction_hamiltonian(const ParticleConfiguration& config, const PairPotential& pot);

/// Change of I when particle i moves to q.
double interaction_delta(const ParticleConfiguration& config, int i, std::span<const double> q,
                         const PairPotential& pot);

struct EmpiricalMeasures {
  Eigen::VectorXd one_point;  // pooled cell masses, sums to one
  Eigen::MatrixXd two_point;  // symmetric cell-pair frequencies over ordered pairs i != j, sums to one
  std::size_t configurations = 0;
};

/// Pools the one-point histogram and the order-2 U-statistic over configurations.
EmpiricalMeasures empirical_measures(std::span<const ParticleConfiguration> configs, const GridPtr& grid);

/// <Delta, Delta> for the empirical measure of particles [first, last),
/// diagonal terms included.
double empirical_form(const ParticleConfiguration& config, int first, int last, const PairPotential& pot);

struct GroundStateOptions {
  int restarts = 32;
  bool double_on_late_improvement = true;
  int max_iterations = 20000;
  double tolerance = 1e-12;
  std::uint64_t seed = 11;
};

struct GroundStateRecord {
  int N = 0;
  ParticleConfiguration best;
  double energy = 0.0;       // I of the best configuration
  double eps_g = 0.0;        // I / (N (N - 1))
  double eps_tilde = 0.0;    // I / N^2
  int restarts_used = 0;
  std::vector<double> history;  // best-so-far eps_g after each restart
  bool upper_bound = true;      // local search: the true minimum may be lower
  nlohmann::json to_json() const;
};

/// Multistart local minimization of I over the closed box. Gradient descent
/// with backtracking for radial kernels, coordinate pattern search otherwise.
GroundStateRecord ground_state(int N, const PairPotential& pot, const Box& box, const GroundStateOptions& opts = {});

struct MonotonicityRow {
  int N = 0;
  double eps_g = 0.0, eps_tilde = 0.0;
  bool pair_increase = true;   // eps_g(N) >= eps_g(N-1)
  bool quasi_bound = true;     // eps_tilde(N) >= (N-1)^2/(N (N-2)) eps_tilde(N-1)
  bool below_continuum = true;
};

struct MonotonicityReport {
  std::vector<MonotonicityRow> rows;
  double continuum = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  nlohmann::json to_json() const;
};

/// Necessary conditions on a ground-state sequence; a violation means some
/// optimization was insufficient.
MonotonicityReport monotonicity_report(const std::vector<GroundStateRecord>& records, double eps_g_continuum,
                                       double tolerance = 1e-9);

struct ChainOptions {
  int burn_in = 2000;   // sweeps (N single-site updates each)
  int samples = 1000;   // retained configurations
  int thin = 1;         // sweeps between retained configurations
  double initial_step = 0.1;  // proposal half-width as a fraction of each box side
  int audit_every = 500;      // sweeps between recomputations of I
  bool momenta = true;        // attach exactly resampled momenta
  /// Lattice mode: each proposal moves one particle to a uniformly drawn site
  /// of this per-axis lattice (symmetric, no step adaptation).
  std::vector<double> lattice_sites;
  std::uint64_t seed = 1;
};

struct ChainDiagnostics {
  double acceptance_rate = 0.0;  // after burn-in
  double step_scale = 0.0;
  double autocorrelation_time = 0.0;  // of I, in retained samples
  double max_audit_error = 0.0;       // relative
  std::uint64_t proposals = 0;
  bool stuck = false;  // no accepted move after burn-in
  nlohmann::json to_json() const;
};

struct SampleSet {
  int N = 0;
  double eps = 0.0;
  double exponent = 0.0;
  std::vector<ParticleConfiguration> samples;
  std::vector<double> interaction;  // I of each sample
  ChainDiagnostics diagnostics;
};

/// Metropolis sampling of the density proportional to (1 - I/(eps N^2))_+^(DN/2 - 1)
/// on the box^N. Throws InfeasibleError when no configuration with I < eps N^2
/// is found, ContractViolation when DN < 2.
SampleSet sample_configurations(int N, double eps, const PairPotential& pot, const Box& box,
                                const ChainOptions& opts = {});

/// Same chain with an arbitrary exponent k >= 0 (k = 0 samples the uniform
/// measure restricted to I < eps N^2).
SampleSet sample_with_exponent(int N, double eps, double exponent, const PairPotential& pot, const Box& box,
                               const ChainOptions& opts, const ParticleConfiguration* start = nullptr);

/// Finds a configuration with I < eps N^2: uniform probing, then a ground-state run.
ParticleConfiguration feasible_configuration(int N, double eps, const PairPotential& pot, const Box& box,
                                             std::mt19937_64& rng);

/// Momenta R u with u uniform on the unit sphere of R^(DN) and
/// R = sqrt(2 (eps N^2 - I) / N), so that N sum |p|^2 / 2 + I = eps N^2.
std::vector<double> resample_momenta(const ParticleConfiguration& config, double eps, const PairPotential& pot,
                                     std::mt19937_64& rng);

struct TiOptions {
  int ladder_points = 32;
  int geometric_points = 10;
  ChainOptions chain{.burn_in = 500, .samples = 2000, .thin = 1, .initial_step = 0.1, .audit_every = 500,
                     .momenta = false, .lattice_sites = {}, .seed = 1};
  int batches = 10;
  int splitting_walkers = 2000;
  double splitting_fraction = 0.1;
  int splitting_sweeps = 20;  // decorrelation sweeps per level
  int threads = 1;
  std::uint64_t seed = 5;
};

struct LadderRung {
  double k = 0.0;
  double mean = 0.0;   // E_k[ln(1 - I/E)]
  double error = 0.0;  // batch-means standard error
  double acceptance = 0.0;
};

struct EntropyEstimate {
  int N = 0;
  double eps = 0.0;
  double value = 0.0;  // S_I / N
  double error = 0.0;  // one standard error, per particle
  double log_base_probability = 0.0;
  double base_error = 0.0;
  int splitting_levels = 0;
  std::vector<LadderRung> ladder;
  nlohmann::json to_json() const;
};

/// (1/N) ln int (1 - I/(eps N^2))_+^(DN/2 - 1) dlambda^N by thermodynamic
/// integration over the exponent plus multilevel splitting for ln P(I < eps N^2).
EntropyEstimate estimate_interaction_entropy(int N, double eps, const PairPotential& pot, const Box& box,
                                             const TiOptions& opts = {});

/// Exact log structure-function prefactor of the momentum integration
/// (everything except the interaction integral), for N particles in D dimensions.
double kinetic_log_prefactor(int N, int dimension, double eps, double volume);

struct FiniteNEntropy {
  double value = 0.0;  // (S + N ln N) / N
  double error = 0.0;
  double kinetic = 0.0;  // kinetic_log_prefactor / N + ln N
  EntropyEstimate interaction;
  nlohmann::json to_json() const;
};

FiniteNEntropy finite_n_entropy(int N, double eps, const PairPotential& pot, const Box& box,
                                const TiOptions& opts = {});

struct TestFunctionStat {
  std::string name;
  double prediction = 0.0;
  double mean = 0.0;  // over samples of the per-sample average
  double sd = 0.0;    // spread of the per-sample averages
  double band = 0.0;  // 4 sd / sqrt(samples)
  bool within_band = false;
};

struct LlnReport {
  int N = 0;
  std::size_t samples = 0;
  std::vector<TestFunctionStat> stats;
  nlohmann::json to_json() const;
};

/// Per-sample averages of the default test functions (1, q_d, q_d^2,
/// |p|^2/2, indicator of the lower half of each axis) against the
/// mean-field prediction from f.
LlnReport lln_test(const SampleSet& samples, const PhaseDensity& f);

struct JensenReport {
  bool applicable = false;
  int trials = 0;
  int convex_split_violations = 0;
  int jensen_violations = 0;
  int amgm_violations = 0;
  double max_jensen_excess = 0.0;  // largest lhs - rhs seen (<= 0 when satisfied)
  nlohmann::json to_json() const;
};

/// Pointwise checks on uniform random configurations split as (n, N - n).
/// Not applicable unless the kernel is positive semidefinite on zero-mass vectors.
JensenReport jensen_superadditivity_check(int N, int n, double eps, const PairPotential& pot, const GridPtr& grid,
                                          int trials, std::uint64_t seed);

}  // namespace mf
