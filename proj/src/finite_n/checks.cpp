#include <cmath>
#include <random>

#include "meanfield/errors.hpp"
#include "meanfield/finite_n.hpp"

namespace mf {

namespace {

struct TestFunction {
  std::string name;
  std::function<double(std::span<const double>, std::span<const double>)> value;  // (q, p)
  double prediction;
  bool needs_momenta = false;
};

}  // namespace

LlnReport lln_test(const SampleSet& samples, const PhaseDensity& f) {
  const Grid& g = f.rho.grid();
  const int d = g.dimension();
  const Eigen::VectorXd m = f.rho.masses();
  auto expect = [&](const std::function<double(std::span<const double>)>& h) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += m[static_cast<Eigen::Index>(i)] * h(g.node(i));
    return s;
  };

  std::vector<TestFunction> fns;
  fns.push_back({"one", [](auto, auto) { return 1.0; }, 1.0});
  for (int a = 0; a < d; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const std::string axis = std::to_string(a + 1);
    fns.push_back({"q" + axis, [ua](auto q, auto) { return q[ua]; }, expect([ua](auto q) { return q[ua]; })});
    fns.push_back({"q" + axis + "^2", [ua](auto q, auto) { return q[ua] * q[ua]; },
                   expect([ua](auto q) { return q[ua] * q[ua]; })});
    const double mid = 0.5 * (g.bounds().lower[ua] + g.bounds().upper[ua]);
    fns.push_back({"lower_half_" + axis, [ua, mid](auto q, auto) { return q[ua] < mid ? 1.0 : 0.0; },
                   expect([ua, mid](auto q) { return q[ua] < mid ? 1.0 : 0.0; })});
  }
  fns.push_back({"kinetic",
                 [](auto, auto p) {
                   double s = 0.0;
                   for (double x : p) s += x * x;
                   return 0.5 * s;
                 },
                 0.5 * d * f.theta, true});

  LlnReport rep;
  rep.N = samples.N;
  rep.samples = samples.samples.size();
  const bool have_p = !samples.samples.empty() && !samples.samples.front().momenta.empty();
  for (const auto& fn : fns) {
    if (fn.needs_momenta && !have_p) continue;
    std::vector<double> avgs;
    for (const auto& c : samples.samples) {
      const int n = c.size();
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        std::span<const double> p;
        if (have_p)
          p = {c.momenta.data() + static_cast<std::size_t>(i * d), static_cast<std::size_t>(d)};
        s += fn.value(c.position(i), p);
      }
      avgs.push_back(s / n);
    }
    TestFunctionStat st;
    st.name = fn.name;
    st.prediction = fn.prediction;
    const double k = static_cast<double>(avgs.size());
    for (double v : avgs) st.mean += v;
    st.mean /= k;
    double var = 0.0;
    for (double v : avgs) var += (v - st.mean) * (v - st.mean);
    st.sd = avgs.size() > 1 ? std::sqrt(var / (k - 1.0)) : 0.0;
    st.band = 4.0 * st.sd / std::sqrt(k);
    st.within_band = std::abs(st.mean - st.prediction) <= st.band + 1e-12 * std::max(1.0, std::abs(st.prediction));
    rep.stats.push_back(st);
  }
  return rep;
}

nlohmann::json LlnReport::to_json() const {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& st : stats)
    s.push_back({{"name", st.name},
                 {"prediction", st.prediction},
                 {"mean", st.mean},
                 {"sd", st.sd},
                 {"band", st.band},
                 {"within_band", st.within_band}});
  return {{"N", N}, {"samples", samples}, {"functions", s}};
}

JensenReport jensen_superadditivity_check(int N, int n, double eps, const PairPotential& pot, const GridPtr& grid,
                                          int trials, std::uint64_t seed) {
  if (!(1 <= n && n < N)) throw ContractViolation("need 1 <= n < N");
  if (!(eps > 0.0)) throw ContractViolation("need eps > 0");
  JensenReport rep;
  rep.trials = trials;
  rep.applicable = check_hypotheses(pot, grid).psd_on_zero_mass;
  rep.max_jensen_excess = -std::numeric_limits<double>::infinity();

  const Box& box = grid->bounds();
  const int d = box.dimension();
  const double alpha = static_cast<double>(n) / N;
  std::mt19937_64 rng(seed);
  ParticleConfiguration c;
  c.dimension = d;
  c.positions.resize(static_cast<std::size_t>(N * d));
  const auto cells = static_cast<Eigen::Index>(grid->size());
  for (int t = 0; t < trials; ++t) {
    for (std::size_t k = 0; k < c.positions.size(); ++k) {
      const auto a = k % static_cast<std::size_t>(d);
      c.positions[k] = std::uniform_real_distribution<double>(box.lower[a], box.upper[a])(rng);
    }
    // convex split of the one-point empirical measure
    Eigen::VectorXd all = Eigen::VectorXd::Zero(cells), first = all, rest = all;
    for (int i = 0; i < N; ++i) {
      const auto cell = static_cast<Eigen::Index>(grid->cell_index(c.position(i)));
      all[cell] += 1.0 / N;
      (i < n ? first[cell] += 1.0 / n : rest[cell] += 1.0 / (N - n));
    }
    if ((all - alpha * first - (1.0 - alpha) * rest).cwiseAbs().maxCoeff() > 1e-12) ++rep.convex_split_violations;
    if (!rep.applicable) continue;

    const double whole = empirical_form(c, 0, N, pot);
    const double a = empirical_form(c, 0, n, pot);
    const double b = empirical_form(c, n, N, pot);
    const double scale = 1e-12 * std::max(1.0, std::abs(a) + std::abs(b));
    const double excess = whole - (alpha * a + (1.0 - alpha) * b);
    rep.max_jensen_excess = std::max(rep.max_jensen_excess, excess);
    if (excess > scale) ++rep.jensen_violations;

    const double lhs = std::max(0.0, 1.0 - whole / eps);
    const double rhs = std::pow(std::max(0.0, 1.0 - a / eps), alpha) * std::pow(std::max(0.0, 1.0 - b / eps), 1.0 - alpha);
    if (lhs < rhs - 1e-12) ++rep.amgm_violations;
  }
  if (!rep.applicable || trials == 0) rep.max_jensen_excess = 0.0;
  return rep;
}

nlohmann::json JensenReport::to_json() const {
  return {{"applicable", applicable},
          {"trials", trials},
          {"convex_split_violations", convex_split_violations},
          {"jensen_violations", jensen_violations},
          {"amgm_violations", amgm_violations},
          {"max_jensen_excess", max_jensen_excess}};
}

}  // namespace mf
