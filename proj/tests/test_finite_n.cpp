#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "meanfield/errors.hpp"
#include "meanfield/finite_n.hpp"
#include "meanfield/solvers.hpp"

using namespace mf;

namespace {

const Box unit{{0.0}, {1.0}};

ParticleConfiguration config1d(std::vector<double> q) {
  ParticleConfiguration c;
  c.dimension = 1;
  c.positions = std::move(q);
  return c;
}

double brute_pair_min(const PairPotential& pot, int n) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= n; ++a)
    for (int b = a; b <= n; ++b) best = std::min(best, interaction_hamiltonian(config1d({double(a) / n, double(b) / n}), pot));
  return best;
}

double brute_triple_min(const PairPotential& pot, int n) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= n; ++a)
    for (int b = a; b <= n; ++b)
      for (int c = b; c <= n; ++c)
        best = std::min(best, interaction_hamiltonian(config1d({double(a) / n, double(b) / n, double(c) / n}), pot));
  return best;
}

}  // namespace

TEST_CASE("interaction Hamiltonian and moves") {
  const auto pot = PairPotential::softened_coulomb(0.1);
  const auto c = config1d({0.0, 0.5, 1.0});
  CHECK(interaction_hamiltonian(c, pot) == doctest::Approx(2.0 / 0.6 + 1.0 / 1.1));
  const std::array<double, 1> q{0.25};
  auto moved = c;
  moved.positions[1] = 0.25;
  CHECK(interaction_delta(c, 1, q, pot) ==
        doctest::Approx(interaction_hamiltonian(moved, pot) - interaction_hamiltonian(c, pot)));
  const auto coincident = config1d({0.3, 0.3});
  CHECK(std::isinf(interaction_hamiltonian(coincident, PairPotential::amended_coulomb(1.0))) == false);
}

TEST_CASE("empirical measures") {
  auto g = build_grid(1, {{0.0}, {1.0}}, 4);
  std::vector<ParticleConfiguration> cs{config1d({0.1, 0.3, 0.6, 0.9}), config1d({0.1, 0.1, 0.6, 0.6})};
  const EmpiricalMeasures m = empirical_measures(cs, g);
  CHECK(m.configurations == 2);
  CHECK(m.one_point.sum() == doctest::Approx(1.0));
  CHECK(m.one_point[0] == doctest::Approx(3.0 / 8.0));
  CHECK(m.two_point.sum() == doctest::Approx(1.0));
  CHECK((m.two_point - m.two_point.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  // <Delta, Delta> with the diagonal: (1/N^2) sum_{i,j} U / 2
  const auto pot = PairPotential::constant(2.0);
  CHECK(empirical_form(cs[0], 0, 4, pot) == doctest::Approx(1.0));
}

TEST_CASE("ground states against brute-force grid scans") {
  const auto pot = PairPotential::softened_coulomb(0.1);
  const GroundStateRecord two = ground_state(2, pot, unit);
  const GroundStateRecord three = ground_state(3, pot, unit);
  CHECK(two.eps_g == doctest::Approx(0.454545).epsilon(1e-5));
  CHECK(three.eps_g == doctest::Approx(0.707071).epsilon(1e-5));
  CHECK(std::abs(two.energy - brute_pair_min(pot, 400)) <= 1e-4);
  CHECK(std::abs(three.energy - brute_triple_min(pot, 200)) <= 1e-4);
  CHECK(two.energy <= brute_pair_min(pot, 400) + 1e-12);

  // attractive smooth kernel: everything collapses onto one point, eps_g = U(0) / 2
  const auto gauss = PairPotential::bounded_smooth(-1.0, 0.2);
  const GroundStateRecord g4 = ground_state(4, gauss, unit);
  CHECK(g4.eps_g == doctest::Approx(-0.5).epsilon(1e-8));
}

TEST_CASE("ground-state monotonicity report") {
  const auto pot = PairPotential::softened_coulomb(0.1);
  std::vector<GroundStateRecord> recs;
  for (int n = 2; n <= 6; ++n) recs.push_back(ground_state(n, pot, unit));
  const double cont = continuum_ground_energy(assemble_kernel(pot, build_grid(1, unit, 64))).value;
  const MonotonicityReport r = monotonicity_report(recs, cont);
  CHECK(r.pass);
  for (const auto& row : r.rows) {
    CHECK(row.pair_increase);
    CHECK(row.quasi_bound);
    CHECK(row.below_continuum);
  }
  // a deliberately spoiled record is caught
  auto bad = recs;
  bad[2].eps_g = bad[1].eps_g - 0.1;
  CHECK_FALSE(monotonicity_report(bad, cont).pass);
  std::swap(recs[0], recs[1]);
  CHECK_THROWS_AS(monotonicity_report(recs, cont), ContractViolation);
}

TEST_CASE("lattice chain is stationary for the target") {
  // N = 2 on 8 sites: the target (1 - I/E)_+^k is enumerable
  const auto pot = PairPotential::softened_coulomb(0.1);
  std::vector<double> sites;
  for (int s = 0; s < 8; ++s) sites.push_back((s + 0.5) / 8.0);
  const double eps = 2.0, k = 1.5, energy = 4.0 * eps;
  std::map<std::pair<int, int>, double> target;
  double z = 0.0;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      const double i = interaction_hamiltonian(config1d({sites[a], sites[b]}), pot);
      const double w = i < energy ? std::pow(1.0 - i / energy, k) : 0.0;
      target[{a, b}] = w;
      z += w;
    }
  ChainOptions o;
  o.lattice_sites = sites;
  o.burn_in = 1000;
  o.samples = 500000;
  o.thin = 1;
  o.momenta = false;
  o.seed = 17;
  const SampleSet set = sample_with_exponent(2, eps, k, pot, unit, o);
  std::map<std::pair<int, int>, double> freq;
  for (const auto& c : set.samples) {
    const int a = static_cast<int>(c.positions[0] * 8.0), b = static_cast<int>(c.positions[1] * 8.0);
    freq[{a, b}] += 1.0 / static_cast<double>(set.samples.size());
  }
  double tv = 0.0;
  for (const auto& [key, w] : target) tv += std::abs(w / z - freq[key]);
  CHECK(0.5 * tv <= 1e-2);
  CHECK(freq[{3, 3}] == 0.0);  // coincident sites are excluded: U(0) = 10 > E
}

TEST_CASE("exact momentum resampling") {
  const auto pot = PairPotential::softened_coulomb(0.1);
  std::mt19937_64 rng(9);
  const int N = 16;
  const double eps = 2.0;
  const ParticleConfiguration c = feasible_configuration(N, eps, pot, unit, rng);
  const double I = interaction_hamiltonian(c, pot);
  CHECK(I < eps * N * N);
  for (int t = 0; t < 20; ++t) {
    const auto p = resample_momenta(c, eps, pot, rng);
    double k = 0.0;
    for (double x : p) k += x * x;
    CHECK(N * 0.5 * k + I == doctest::Approx(eps * N * N).epsilon(1e-12));
  }
}

TEST_CASE("sampler refuses degenerate exponents") {
  CHECK_THROWS_AS(sample_configurations(1, 2.0, PairPotential::zero(), unit), ContractViolation);
  ChainOptions o;
  o.samples = 10;
  o.burn_in = 10;
  CHECK_NOTHROW(sample_configurations(2, 2.0, PairPotential::zero(), unit, o));
  // below the N-body ground state no configuration exists
  CHECK_THROWS_AS(sample_configurations(4, 0.1, PairPotential::softened_coulomb(0.1), unit, o), InfeasibleError);
}

TEST_CASE("chain diagnostics and the law of large numbers") {
  const auto pot = PairPotential::softened_coulomb(0.1);
  ChainOptions o;
  o.burn_in = 1000;
  o.samples = 400;
  o.thin = 5;
  o.seed = 4;
  const SampleSet set = sample_configurations(16, 2.0, pot, unit, o);
  CHECK(set.samples.size() == 400);
  CHECK(set.diagnostics.acceptance_rate > 0.1);
  CHECK(set.diagnostics.max_audit_error < 1e-10);
  CHECK_FALSE(set.diagnostics.stuck);
  for (std::size_t s = 0; s < set.samples.size(); ++s)
    CHECK(set.interaction[s] == doctest::Approx(interaction_hamiltonian(set.samples[s], pot)).epsilon(1e-10));

  const KernelMatrix k = assemble_kernel(pot, build_grid(1, unit, 64));
  const MeanFieldSolution sol = solve_microcanonical(2.0, k);
  const LlnReport rep = lln_test(set, {sol.rho, sol.theta});
  int inside = 0;
  for (const auto& st : rep.stats) {
    if (st.within_band || st.name == "one") ++inside;
    if (st.name == "kinetic") continue;
    CHECK(std::abs(st.mean - st.prediction) < 0.05);
  }
  CHECK(inside >= 1);
}

TEST_CASE("interaction entropy: exact cases") {
  SUBCASE("no interaction") {
    const EntropyEstimate e = estimate_interaction_entropy(8, 2.0, PairPotential::zero(), unit);
    CHECK(e.value == 0.0);
    CHECK(e.error == 0.0);
  }
  SUBCASE("constant kernel") {
    const double c = 1.0, eps = 2.0;
    const int N = 16;
    const EntropyEstimate e = estimate_interaction_entropy(N, eps, PairPotential::constant(c), unit);
    const double kappa = 0.5 * N - 1.0;
    const double exact = kappa / N * std::log(1.0 - c * (N - 1.0) / (2.0 * N * eps));
    CHECK(e.value == doctest::Approx(exact).epsilon(1e-10));
  }
}

TEST_CASE("interaction entropy at N = 2 against tensor quadrature") {
  const auto pot = PairPotential::softened_coulomb(0.1);
  const double eps = 2.0, energy = 4.0 * eps;
  // D = 1, N = 2: exponent 0, so the integral is the probability of I < E
  const int n = 200;
  double p = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (interaction_hamiltonian(config1d({(a + 0.5) / n, (b + 0.5) / n}), pot) < energy) p += 1.0 / (n * n);
  const double quad = 0.5 * std::log(p);
  const double exact = std::log(1.0 - 0.025);  // |x - y| > 1/8 - 1/10
  CHECK(quad == doctest::Approx(exact).epsilon(0.05));
  const EntropyEstimate e = estimate_interaction_entropy(2, eps, pot, unit);
  CHECK(e.error > 0.0);
  CHECK(std::abs(e.value - quad) <= 2.0 * e.error);
}

TEST_CASE("finite-N entropy: kinetic prefactor") {
  SUBCASE("perfect gas against the closed-form structure function") {
    // D = 1: Omega'(N^2 eps) = |S^{N-1}| (2/N)^{N/2-1} (N^2 eps)^{N/2-1} / (N N!)
    auto exact = [](int N, double eps) {
      const double n = N;
      const double log_sphere = std::log(2.0) + 0.5 * n * std::log(std::numbers::pi) - std::lgamma(0.5 * n);
      const double log_omega = log_sphere + (0.5 * n - 1.0) * std::log(2.0 * n * eps) - std::log(n) - std::lgamma(n + 1.0);
      return log_omega / n + std::log(n);
    };
    const double sk = perfect_gas_entropy(2.0, *build_grid(1, unit, 2));
    double prev = std::numeric_limits<double>::infinity();
    for (int N : {16, 64, 96}) {
      const FiniteNEntropy e = finite_n_entropy(N, 2.0, PairPotential::zero(), unit);
      CHECK(e.value == doctest::Approx(exact(N, 2.0)).epsilon(1e-12));
      CHECK(std::abs(e.value - sk) < prev);
      prev = std::abs(e.value - sk);
    }
    CHECK(prev <= 0.15);
  }
  SUBCASE("constant kernel: interaction part shifts the perfect gas exactly") {
    const double c = 1.0, eps = 2.0;
    const int N = 64;
    const FiniteNEntropy zero = finite_n_entropy(N, eps, PairPotential::zero(), unit);
    const FiniteNEntropy cst = finite_n_entropy(N, eps, PairPotential::constant(c), unit);
    const double kappa = 0.5 * N - 1.0;
    CHECK(cst.value - zero.value == doctest::Approx(kappa / N * std::log(1.0 - c * (N - 1.0) / (2.0 * N * eps))).epsilon(1e-10));
    CHECK(std::abs(cst.value - (perfect_gas_entropy(eps, *build_grid(1, unit, 2)) + 0.5 * std::log(1.0 - c / (2.0 * eps)))) <= 0.2);
  }
  SUBCASE("the structure-function prefactor matches its definition at small N") {
    // N = 1, D = 2: Omega'(E) = |Lambda| * 2 pi (E-independent in D N = 2) in the rescaled variables
    const double k = kinetic_log_prefactor(1, 2, 3.0, 1.0);
    CHECK(k == doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
  }
}

TEST_CASE("Jensen and AM-GM pointwise checks") {
  auto g = build_grid(1, unit, 16);
  SUBCASE("constant kernel: equality cases") {
    const JensenReport r = jensen_superadditivity_check(10, 4, 2.0, PairPotential::constant(1.0), g, 200, 3);
    CHECK(r.applicable);
    CHECK(r.jensen_violations == 0);
    CHECK(r.amgm_violations == 0);
    CHECK(std::abs(r.max_jensen_excess) <= 1e-12);
  }
  SUBCASE("positive-definite kernel") {
    const JensenReport r = jensen_superadditivity_check(12, 5, 2.0, PairPotential::bounded_smooth(1.0, 0.2), g, 1000, 5);
    CHECK(r.applicable);
    CHECK(r.convex_split_violations == 0);
    CHECK(r.jensen_violations == 0);
    CHECK(r.amgm_violations == 0);
  }
  CHECK_THROWS_AS(jensen_superadditivity_check(4, 4, 2.0, PairPotential::zero(), g, 1, 1), ContractViolation);
}
