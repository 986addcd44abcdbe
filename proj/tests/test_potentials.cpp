#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "meanfield/errors.hpp"
#include "meanfield/potentials.hpp"

using namespace mf;

namespace {

std::array<double, 1> at(double x) { return {x}; }

// mean of |x - y + d e|^-1 over two balls, each sampled on a cubic lattice;
// the second lattice is offset by half a cell so no pair coincides
double ball_ball_quadrature(double d, double r, int n) {
  auto lattice = [&](double off) {
    std::vector<std::array<double, 3>> pts;
    const double h = 2.0 * r / n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double x = -r + (i + off) * h, y = -r + (j + off) * h, z = -r + (k + off) * h;
          if (x * x + y * y + z * z <= r * r) pts.push_back({x, y, z});
        }
    return pts;
  };
  const auto pa = lattice(0.5), pb = lattice(0.0);
  double s = 0.0;
  for (const auto& a : pa)
    for (const auto& b : pb) {
      const double dx = a[0] - b[0] + d, dy = a[1] - b[1], dz = a[2] - b[2];
      s += 1.0 / std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  return s / (static_cast<double>(pa.size()) * static_cast<double>(pb.size()));
}

double disc_disc_quadrature(double d, double r, int n) {
  auto lattice = [&](double off) {
    std::vector<std::array<double, 2>> pts;
    const double h = 2.0 * r / n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double x = -r + (i + off) * h, y = -r + (j + off) * h;
        if (x * x + y * y <= r * r) pts.push_back({x, y});
      }
    return pts;
  };
  const auto pa = lattice(0.5), pb = lattice(0.0);
  double s = 0.0;
  for (const auto& a : pa)
    for (const auto& b : pb) s += 1.0 / std::hypot(a[0] - b[0] + d, a[1] - b[1]);
  return s / (static_cast<double>(pa.size()) * static_cast<double>(pb.size()));
}

}  // namespace

TEST_CASE("radial profiles") {
  const auto z = PairPotential::zero();
  const auto c = PairPotential::constant(0.7);
  const auto s = PairPotential::softened_coulomb(0.1);
  const auto g = PairPotential::bounded_smooth(2.0, 0.5);
  CHECK(z(at(0.1), at(0.7)) == 0.0);
  CHECK(c(at(0.1), at(0.7)) == doctest::Approx(0.7));
  CHECK(s(at(0.1), at(0.6)) == doctest::Approx(1.0 / 0.6));
  CHECK(s.diagonal_value() == doctest::Approx(10.0));
  CHECK(g(at(0.0), at(0.5)) == doctest::Approx(2.0 * std::exp(-0.5)));
  CHECK(s.radial_derivative(0.4) == doctest::Approx(-1.0 / 0.25));
}

TEST_CASE("amended Coulomb uses the stated diagonal") {
  const auto a = PairPotential::amended_coulomb(3.0);
  CHECK(a.singular());
  CHECK(a(at(0.2), at(0.2)) == doctest::Approx(3.0));
  CHECK(a(at(0.2), at(0.7)) == doctest::Approx(2.0));
}

TEST_CASE("mollified Newton") {
  CHECK_THROWS_AS(PairPotential::mollified_newton(0.1, 1), PotentialDomainError);
  const auto m3 = PairPotential::mollified_newton(0.1, 3);
  // outside overlap the two balls interact as point charges
  CHECK(m3.radial(0.5) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(m3.radial(0.2) == doctest::Approx(-5.0).epsilon(1e-12));
  // self energy of a uniform ball is 6 / (5 r)
  CHECK(m3.radial(0.0) == doctest::Approx(-12.0).epsilon(1e-12));
  for (double d : {0.05, 0.12}) CHECK(-m3.radial(d) == doctest::Approx(ball_ball_quadrature(d, 0.1, 12)).epsilon(0.02));
  CHECK(std::isfinite(m3.diagonal_value()));

  const auto m2 = PairPotential::mollified_newton(0.1, 2);
  CHECK(m2.radial(1.0) == doctest::Approx(-(1.0 + 0.01 / 4.0)).epsilon(1e-4));
  CHECK(std::isfinite(m2.radial(0.0)));
  CHECK(m2.radial(0.0) < m2.radial(0.1));
  for (double d : {0.0, 0.07, 0.15, 0.3})
    CHECK(-m2.radial(d) == doctest::Approx(disc_disc_quadrature(d, 0.1, 60)).epsilon(0.01));
}

TEST_CASE("kernel assembly") {
  auto grid = build_grid(1, {{0.0}, {1.0}}, 4);
  const KernelMatrix k = assemble_kernel(PairPotential::softened_coulomb(0.1), grid);
  REQUIRE(k.size() == 4);
  CHECK(k.entries()(0, 0) == doctest::Approx(10.0));
  CHECK(k.entries()(0, 1) == doctest::Approx(1.0 / 0.35));
  CHECK((k.entries() - k.entries().transpose()).cwiseAbs().maxCoeff() == 0.0);

  // amended Coulomb: diagonal entries are sub-cell averages, finite and larger than neighbours
  const KernelMatrix a = assemble_kernel(PairPotential::amended_coulomb(1.0), build_grid(2, {{0, 0}, {1, 1}}, 4));
  CHECK(std::isfinite(a.entries()(0, 0)));
  CHECK(a.entries()(0, 0) > a.entries()(0, 1));
}

TEST_CASE("hypothesis checks") {
  auto grid = build_grid(1, {{0.0}, {1.0}}, 16);
  const HypothesisReport s = check_hypotheses(PairPotential::softened_coulomb(0.1), grid);
  CHECK(s.symmetry == Verdict::pass);
  CHECK(s.bounded_continuous == Verdict::pass);
  CHECK(s.nonnegative == Verdict::pass);

  const HypothesisReport c = check_hypotheses(PairPotential::constant(1.0), grid);
  CHECK(c.psd_on_zero_mass);

  // a Gaussian kernel is positive definite
  const HypothesisReport g = check_hypotheses(PairPotential::bounded_smooth(1.0, 0.2), grid);
  CHECK(g.psd_on_zero_mass);

  const HypothesisReport a = check_hypotheses(PairPotential::amended_coulomb(1.0), grid);
  CHECK(a.bounded_continuous == Verdict::fail);
}

TEST_CASE("nonnegative shift") {
  auto grid = build_grid(1, {{0.0}, {1.0}}, 8);
  const auto g = PairPotential::bounded_smooth(-1.0, 0.3);
  const auto shifted = shift_nonnegative(g, grid);
  CHECK(shifted.nonneg_shift() >= 1.0 - 1e-12);
  CHECK(assemble_kernel(shifted, grid).entries().minCoeff() >= -1e-12);
}

TEST_CASE("tabulated kernel from CSV") {
  auto grid = build_grid(1, {{0.0}, {1.0}}, 3);
  const auto path = std::filesystem::temp_directory_path() / "mf_kernel_table.csv";
  {
    std::ofstream out(path);
    out << "i,j,value\n0,0,1\n0,1,0.5\n0,2,0.25\n1,1,1\n1,2,0.5\n2,2,1\n";
  }
  const auto p = load_tabulated_csv(path, grid);
  const KernelMatrix k = assemble_kernel(p, grid);
  CHECK(k.entries()(2, 0) == doctest::Approx(0.25));
  CHECK(k.entries()(1, 2) == doctest::Approx(0.5));
  {
    std::ofstream out(path);
    out << "0,0,1\n0,1,0.5\n";
  }
  CHECK_THROWS_AS(load_tabulated_csv(path, grid), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("potential kind names round-trip") {
  for (auto k : {PotentialKind::zero, PotentialKind::constant, PotentialKind::bounded_smooth,
                 PotentialKind::softened_coulomb, PotentialKind::amended_coulomb, PotentialKind::mollified_newton,
                 PotentialKind::custom_tabulated})
    CHECK(parse_potential_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_potential_kind("yukawa"), ConfigError);
}
