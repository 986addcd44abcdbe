#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "meanfield/domain.hpp"
#include "meanfield/errors.hpp"

using namespace mf;

namespace {

// W1 = int_0^1 |F_a^{-1}(u) - F_b^{-1}(u)| du on a fine u grid
double quantile_w1(const std::vector<double>& xa, const std::vector<double>& ma, const std::vector<double>& xb,
                   const std::vector<double>& mb, int n = 200000) {
  auto quantile = [](const std::vector<double>& x, const std::vector<double>& m, double u) {
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    double total = 0.0;
    for (double v : m) total += v;
    double c = 0.0;
    for (auto i : idx) {
      c += m[i] / total;
      if (u <= c) return x[i];
    }
    return x[idx.back()];
  };
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = (k + 0.5) / n;
    s += std::abs(quantile(xa, ma, u) - quantile(xb, mb, u));
  }
  return s / n;
}

}  // namespace

TEST_CASE("midpoint grid in one dimension") {
  auto g = build_grid(1, {{0.0}, {1.0}}, 4);
  REQUIRE(g->size() == 4);
  const double expect[] = {0.125, 0.375, 0.625, 0.875};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(g->node(i)[0] == doctest::Approx(expect[i]).epsilon(1e-15));
    CHECK(g->weights()[static_cast<Eigen::Index>(i)] == doctest::Approx(0.25));
  }
  CHECK(g->total_volume() == doctest::Approx(1.0));
}

TEST_CASE("two-dimensional grid and volume additivity") {
  auto g = build_grid(2, {{0.0, 0.0}, {1.0, 1.0}}, 2);
  CHECK(g->size() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(g->weights()[i] == doctest::Approx(0.25));
  auto h = build_grid(1, {{0.0}, {2.0}}, 8);
  CHECK(h->weights().sum() == doctest::Approx(2.0).epsilon(1e-12));
  auto c = build_grid(3, {{0, 0, 0}, {1, 2, 3}}, 3);
  CHECK(c->size() == 27);
  CHECK(c->weights().sum() == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("grid construction rejects bad input") {
  CHECK_THROWS_AS(build_grid(4, {{0, 0, 0, 0}, {1, 1, 1, 1}}, 2), ConfigError);
  CHECK_THROWS_AS(build_grid(1, {{0.0}, {1.0}}, 1), ConfigError);
  CHECK_THROWS_AS(build_grid(1, {{1.0}, {1.0}}, 4), ConfigError);
  CHECK_THROWS_AS(build_grid(2, {{0.0}, {1.0}}, 4), ConfigError);
}

TEST_CASE("uniform density") {
  auto g = build_grid(1, {{0.0}, {2.0}}, 5);
  const DensityField u = uniform_density(g);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(u.values()[i] == doctest::Approx(0.5));
  CHECK(u.masses().sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("density invariants are enforced") {
  auto g = build_grid(1, {{0.0}, {1.0}}, 4);
  Eigen::VectorXd v(4);
  v << 1.0, -0.5, 1.5, 2.0;
  CHECK_THROWS(DensityField(g, v));
  v << 1.0, 1.0, 1.0, 2.0;
  CHECK_THROWS(DensityField(g, v));
  const DensityField n = DensityField::normalized(g, v);
  CHECK(n.masses().sum() == doctest::Approx(1.0));
}

TEST_CASE("w1 distance against a quantile oracle") {
  auto g = build_grid(1, {{0.0}, {1.0}}, 10);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd a(10), b(10);
    for (Eigen::Index i = 0; i < 10; ++i) {
      a[i] = U(rng);
      b[i] = U(rng);
    }
    const DensityField da = DensityField::normalized(g, a), db = DensityField::normalized(g, b);
    std::vector<double> x, ma, mb;
    for (std::size_t i = 0; i < 10; ++i) {
      x.push_back(g->node(i)[0]);
      ma.push_back(da.masses()[static_cast<Eigen::Index>(i)]);
      mb.push_back(db.masses()[static_cast<Eigen::Index>(i)]);
    }
    const TransportDistance w = w1_distance(da, db);
    CHECK(w.exact);
    CHECK(w.value == doctest::Approx(quantile_w1(x, ma, x, mb)).epsilon(1e-4));
  }
}

TEST_CASE("w1 distance basics") {
  auto g = build_grid(1, {{0.0}, {1.0}}, 8);
  const DensityField u = uniform_density(g);
  CHECK(w1_distance(u, u).value == doctest::Approx(0.0));

  // all mass on the first cell versus all on the last: distance is the node gap
  Eigen::VectorXd a = Eigen::VectorXd::Zero(8), b = Eigen::VectorXd::Zero(8);
  a[0] = 1.0;
  b[7] = 1.0;
  const double d = w1_distance(DensityField::from_masses(g, a), DensityField::from_masses(g, b)).value;
  CHECK(d == doctest::Approx(0.875).epsilon(1e-12));

  auto other = build_grid(1, {{0.0}, {1.0}}, 4);
  CHECK_THROWS_AS(w1_distance(u, uniform_density(other)), ContractViolation);
}

TEST_CASE("w1 of samples against a density") {
  auto g = build_grid(1, {{0.0}, {1.0}}, 4);
  WeightedSamples s;
  s.dimension = 1;
  s.coords = {0.125, 0.375, 0.625, 0.875};
  CHECK(w1_distance(s, uniform_density(g)).value == doctest::Approx(0.0).epsilon(1e-14));
  s.coords = {0.1, 0.1, 0.1, 0.1};
  // uniform atoms at cell centres versus a point mass at 0.1
  const double expect = (0.025 + 0.275 + 0.525 + 0.775) / 4.0;
  CHECK(w1_distance(s, uniform_density(g)).value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("entropic transport in two dimensions reports its regularization") {
  auto g = build_grid(2, {{0.0, 0.0}, {1.0, 1.0}}, 4);
  const DensityField u = uniform_density(g);
  const TransportDistance w = w1_distance(u, u);
  CHECK_FALSE(w.exact);
  CHECK(w.regularization > 0.0);
  CHECK(w.value >= -1e-12);
  CHECK(w.value < 0.1);
}
