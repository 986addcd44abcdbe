#include <doctest.h>

#include <cmath>
#include <limits>

#include "meanfield/errors.hpp"
#include "meanfield/solvers.hpp"

using namespace mf;

namespace {

GridPtr line(int cells) { return build_grid(1, {{0.0}, {1.0}}, cells); }

}  // namespace

TEST_CASE("perfect gas") {
  auto g = build_grid(3, {{0, 0, 0}, {1, 1, 1}}, 4);
  const KernelMatrix k = assemble_kernel(PairPotential::zero(), g);
  const MeanFieldSolution s = solve_microcanonical(1.5, k);
  CHECK((s.rho.values().array() - 1.0).abs().maxCoeff() <= 1e-10);
  CHECK(s.theta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(s.s_I) <= 1e-10);
  CHECK(s.s == doctest::Approx(perfect_gas_entropy(1.5, *g)).epsilon(1e-12));
  CHECK(microcanonical_residual(s.rho, 1.5, k) <= 1e-12);

  const MeanFieldSolution c = solve_canonical(0.7, k);
  CHECK(c.phi == doctest::Approx(perfect_gas_t_potential(0.7, *g)).epsilon(1e-12));
  CHECK(c.total_energy == doctest::Approx(1.5 * 0.7).epsilon(1e-12));
}

TEST_CASE("constant kernel closed forms") {
  for (int d : {1, 2}) {
    const double c = 0.6, eps = 1.1;
    Box box{std::vector<double>(static_cast<std::size_t>(d), 0.0), std::vector<double>(static_cast<std::size_t>(d), 2.0)};
    auto g = build_grid(d, box, 5);
    const KernelMatrix k = assemble_kernel(PairPotential::constant(c), g);
    const MeanFieldSolution s = solve_microcanonical(eps, k);
    CHECK((s.rho.values().array() - 1.0 / g->total_volume()).abs().maxCoeff() <= 1e-10);
    CHECK(s.theta == doctest::Approx((2.0 / d) * (eps - c / 2.0)).epsilon(1e-10));
    CHECK(s.s_I == doctest::Approx(0.5 * d * std::log(1.0 - c / (2.0 * eps))).epsilon(1e-10));

    const double theta = 0.9;
    const MeanFieldSolution can = solve_canonical(theta, k);
    CHECK(can.phi == doctest::Approx(perfect_gas_t_potential(theta, *g) - c / (2.0 * theta)).epsilon(1e-10));
  }
}

TEST_CASE("softened Coulomb: fixed point versus direct ascent") {
  const KernelMatrix k = assemble_kernel(PairPotential::softened_coulomb(0.1), line(16));
  const MeanFieldSolution s = solve_microcanonical(2.0, k);
  const EntropyMaximum m = maximize_interaction_entropy(2.0, k);
  CHECK(m.converged);
  CHECK(std::abs(s.s_I - m.value) <= 1e-6);
  CHECK(s.fixed_point_residual <= 1e-9);
  const IdentityReport id = entropy_h_identity_check(s);
  CHECK(id.gap <= 1e-6);
  // the density is symmetric about the midpoint of the interval
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(s.rho.values()[i] == doctest::Approx(s.rho.values()[15 - i]).epsilon(1e-7));
}

TEST_CASE("entropy maximum against a brute-force simplex scan") {
  auto g = line(3);
  const KernelMatrix k = assemble_kernel(PairPotential::softened_coulomb(0.1), g);
  const double eps = 2.5;
  const int n = 1500;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 1; a < n; ++a)
    for (int b = 1; a + b < n; ++b) {
      Eigen::VectorXd m(3);
      m << double(a) / n, double(b) / n, double(n - a - b) / n;
      const auto v = interaction_entropy_density(DensityField::from_masses(g, m), eps, k);
      if (v.is_finite()) best = std::max(best, v.value());
    }
  const MeanFieldSolution s = solve_microcanonical(eps, k);
  CHECK(s.s_I >= best - 1e-12);
  CHECK(s.s_I <= best + 1e-5);
}

TEST_CASE("auxiliary entropy against the two-cell closed form") {
  // two equal cells: with m the first mass, <rho, rho> = (2 m^2 - m + 1) / 2 and R is maximal at
  // m = 1/2, so the constrained maximum sits at the admissible root nearest 1/2
  auto g = line(2);
  Eigen::MatrixXd t(2, 2);
  t << 2.0, 0.5, 0.5, 1.0;
  const KernelMatrix k(g, t);
  const double eg = continuum_ground_energy(k).value;
  CHECK(eg == doctest::Approx(7.0 / 16.0).epsilon(1e-12));
  auto R = [](double m) { return -(m * std::log(2.0 * m) + (1.0 - m) * std::log(2.0 * (1.0 - m))); };
  for (double eta : {eg + 1e-4, eg + 1e-2, 0.47, 0.49}) {
    // 2 m^2 - m + 1 - 2 eta = 0
    const double disc = 1.0 - 8.0 * (1.0 - 2.0 * eta);
    const double m = (1.0 + std::sqrt(disc)) / 4.0;
    CHECK(auxiliary_interaction_entropy(eta, k) == doctest::Approx(R(m)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(auxiliary_interaction_entropy(eg - 1e-3, k), InfeasibleError);
  // from the uniform value on the constraint is slack
  CHECK(auxiliary_interaction_entropy(0.5, k) == doctest::Approx(0.0).scale(1.0));
  CHECK(auxiliary_interaction_entropy(10.0, k) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("energies below the ground state are infeasible") {
  const KernelMatrix k = assemble_kernel(PairPotential::softened_coulomb(0.1), line(16));
  const double eg = continuum_ground_energy(k).value;
  CHECK_THROWS_AS(solve_microcanonical(eg * 0.99, k), InfeasibleError);
  CHECK_THROWS_AS(maximize_interaction_entropy(eg * 0.99, k), InfeasibleError);
  CHECK_THROWS_AS(solve_canonical(-1.0, k), ContractViolation);
}

TEST_CASE("iteration budget exhaustion is reported") {
  const KernelMatrix k = assemble_kernel(PairPotential::softened_coulomb(0.1), line(16));
  SolverOptions o;
  o.max_iterations = 2;
  o.multistart = 1;
  try {
    solve_microcanonical(2.0, k, o);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK_FALSE(e.residual_history().empty());
  }
}

TEST_CASE("entropy scan") {
  const KernelMatrix k = assemble_kernel(PairPotential::softened_coulomb(0.1), line(16));
  const ScanResult scan = entropy_scan(1.7, 4.0, 24, k);
  REQUIRE(scan.points.size() == 24);
  CHECK(scan.monotone);
  CHECK(scan.concave);
  for (const auto& p : scan.points) {
    CHECK(p.ok);
    CHECK(p.theta > 0.0);
    CHECK(p.s_I <= 0.0);
  }
  // theta is the inverse slope of s
  for (std::size_t i = 1; i + 1 < scan.points.size(); ++i) {
    if (scan.points[i].eps < 2.0) continue;
    const double slope = (scan.points[i + 1].s - scan.points[i - 1].s) / (scan.points[i + 1].eps - scan.points[i - 1].eps);
    CHECK(1.0 / slope == doctest::Approx(scan.points[i].theta).epsilon(1e-2));
  }
}

TEST_CASE("variational decompositions") {
  SUBCASE("perfect gas") {
    const KernelMatrix k = assemble_kernel(PairPotential::zero(), line(8));
    const VpReport r = verify_vp_decompositions(1.3, k);
    CHECK(r.gap_total <= 1e-6);
    CHECK(r.gap_interaction <= 1e-6);
  }
  SUBCASE("constant kernel") {
    const KernelMatrix k = assemble_kernel(PairPotential::constant(0.8), line(8));
    const VpReport r = verify_vp_decompositions(1.3, k);
    CHECK(r.gap_total <= 1e-6);
    CHECK(r.gap_interaction <= 1e-6);
  }
  SUBCASE("softened Coulomb") {
    const KernelMatrix k = assemble_kernel(PairPotential::softened_coulomb(0.1), line(16));
    const VpReport r = verify_vp_decompositions(2.0, k, 64);
    CHECK(r.gap_total <= 1e-4);
    CHECK(r.gap_interaction <= 1e-4);
  }
}

TEST_CASE("Legendre duality") {
  SUBCASE("constant kernel maximizer") {
    const double c = 0.8, theta = 1.0;
    const KernelMatrix k = assemble_kernel(PairPotential::constant(c), line(8));
    const ScanResult scan = entropy_scan(0.5, 2.5, 41, k);
    const LegendreReport r = legendre_check(theta, k, scan);
    CHECK_FALSE(r.boundary_maximizer);
    CHECK(r.eps_star == doctest::Approx(0.5 * theta + c / 2.0).epsilon(1e-8));
    CHECK(r.gap <= 1e-8);
  }
  SUBCASE("softened Coulomb") {
    const KernelMatrix k = assemble_kernel(PairPotential::softened_coulomb(0.1), line(16));
    const ScanResult scan = entropy_scan(1.62, 4.0, 64, k);
    for (double theta : {0.5, 1.0, 2.0}) {
      const LegendreReport r = legendre_check(theta, k, scan);
      CHECK(r.gap <= 1e-4);
      CHECK(r.eps_star == doctest::Approx(r.eps_canonical).epsilon(1e-6));
    }
  }
}

TEST_CASE("solution serialization") {
  const KernelMatrix k = assemble_kernel(PairPotential::constant(0.5), line(4));
  const auto j = solve_microcanonical(1.0, k).to_json();
  CHECK(j.contains("rho"));
  CHECK(j.contains("theta"));
  CHECK(j.at("rho").size() == 4);
}
