#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "meanfield/errors.hpp"
#include "meanfield/finite_n.hpp"
#include "chain.hpp"

namespace mf {

namespace {

std::vector<double> exponent_ladder(double kappa, int points, int geometric) {
  std::vector<double> k{0.0};
  if (kappa <= 0.0 || points < 2) return k;
  if (points < 4) {
    for (int j = 1; j < points; ++j) k.push_back(kappa * j / (points - 1));
    return k;
  }
  geometric = std::clamp(geometric, 0, points - 3);
  const double split = 0.1 * kappa;
  for (int j = 0; j < geometric; ++j) {
    const double f = geometric == 1 ? 0.0 : static_cast<double>(j) / (geometric - 1);
    k.push_back(split * std::pow(1e-2, 1.0 - f));
  }
  if (geometric > 0) k.back() = split;
  const int linear = points - 1 - geometric;
  const double from = geometric > 0 ? split : 0.0;
  for (int j = 1; j <= linear; ++j) k.push_back(from + (kappa - from) * j / linear);
  return k;
}

// Weights of composite Simpson's rule on an irregular grid (odd interval
// counts close with the three-point end correction).
std::vector<double> simpson_weights(const std::vector<double>& x) {
  const std::size_t n = x.size() - 1;  // intervals
  std::vector<double> w(x.size(), 0.0);
  if (n == 0) return w;
  if (n == 1) {
    w[0] = w[1] = 0.5 * (x[1] - x[0]);
    return w;
  }
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = x[i + 1] - x[i];
  for (std::size_t i = 0; i + 1 < n; i += 2) {
    const double h0 = h[i], h1 = h[i + 1], s = (h0 + h1) / 6.0;
    w[i] += s * (2.0 - h1 / h0);
    w[i + 1] += s * (h0 + h1) * (h0 + h1) / (h0 * h1);
    w[i + 2] += s * (2.0 - h0 / h1);
  }
  if (n % 2 == 1) {
    const double h0 = h[n - 2], h1 = h[n - 1];
    w[n] += (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
    w[n - 1] += (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
    w[n - 2] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
  }
  return w;
}

struct Base {
  double log_p = 0.0, variance = 0.0;
  int levels = 0;
};

// ln P(I < E) under the uniform product measure by fixed-effort multilevel
// splitting with p0-quantile levels.
Base splitting(int N, double energy, const PairPotential& pot, const Box& box, const TiOptions& opts) {
  const int d = box.dimension();
  const int m = opts.splitting_walkers;
  const double p0 = opts.splitting_fraction;
  std::mt19937_64 rng(split_seed(opts.seed, 1u << 20));
  std::vector<ParticleConfiguration> walkers(static_cast<std::size_t>(m));
  std::vector<double> level(static_cast<std::size_t>(m));
  for (int w = 0; w < m; ++w) {
    auto& c = walkers[static_cast<std::size_t>(w)];
    c.dimension = d;
    c.positions.resize(static_cast<std::size_t>(N * d));
    for (std::size_t k = 0; k < c.positions.size(); ++k) {
      const auto a = k % static_cast<std::size_t>(d);
      c.positions[k] = std::uniform_real_distribution<double>(box.lower[a], box.upper[a])(rng);
    }
    level[static_cast<std::size_t>(w)] = interaction_hamiltonian(c, pot);
  }

  Base base;
  double step = opts.chain.initial_step;
  double previous = std::numeric_limits<double>::infinity();
  for (int lev = 0; lev < 400; ++lev) {
    const auto feasible = std::count_if(level.begin(), level.end(), [&](double v) { return v < energy; });
    const double frac = static_cast<double>(feasible) / m;
    if (frac >= p0) {
      base.log_p += std::log(frac);
      base.variance += (1.0 - frac) / (frac * m);
      return base;
    }
    std::vector<double> sorted = level;
    const auto q = static_cast<std::size_t>(std::ceil(p0 * m)) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q), sorted.end());
    const double threshold = sorted[q];
    if (!(threshold < previous)) throw InfeasibleError("multilevel splitting stalled: no configuration with I < eps N^2");
    previous = threshold;
    std::vector<std::size_t> survivors;
    for (std::size_t w = 0; w < level.size(); ++w)
      if (level[w] <= threshold) survivors.push_back(w);
    const double ratio = static_cast<double>(survivors.size()) / m;
    base.log_p += std::log(ratio);
    base.variance += (1.0 - ratio) / (ratio * m);
    ++base.levels;

    std::vector<ParticleConfiguration> next(static_cast<std::size_t>(m));
    std::uniform_int_distribution<std::size_t> pick(0, survivors.size() - 1);
    const double limit = std::nextafter(threshold, std::numeric_limits<double>::infinity());
    std::uint64_t proposals = 0, accepted = 0;
    for (int w = 0; w < m; ++w) {
      Chain chain(pot, box, walkers[survivors[pick(rng)]], energy, 0.0, limit, rng());
      chain.set_step(step);
      for (int s = 0; s < opts.splitting_sweeps; ++s) chain.sweep();
      proposals += chain.proposals();
      accepted += chain.accepted();
      next[static_cast<std::size_t>(w)] = chain.configuration();
      level[static_cast<std::size_t>(w)] = chain.interaction();
    }
    walkers = std::move(next);
    const double rate = proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
    if (rate > 0.40) step = std::min(1.0, step * 1.5);
    if (rate < 0.25) step = std::max(1e-8, step * 0.6);
  }
  throw NonConvergenceError("multilevel splitting exceeded its level budget", {});
}

LadderRung run_rung(double energy, double k, const PairPotential& pot, const Box& box, const TiOptions& opts,
                    const ParticleConfiguration& start, std::uint64_t seed) {
  Chain chain(pot, box, start, energy, k, energy, seed);
  chain.set_step(opts.chain.initial_step);
  chain.adapt(opts.chain.burn_in);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(opts.chain.samples));
  int since_audit = 0;
  for (int s = 0; s < opts.chain.samples; ++s) {
    for (int t = 0; t < opts.chain.thin; ++t) {
      chain.sweep();
      if (opts.chain.audit_every > 0 && ++since_audit >= opts.chain.audit_every) {
        chain.audit();
        since_audit = 0;
      }
    }
    values.push_back(std::log1p(-chain.interaction() / energy));
  }
  LadderRung r;
  r.k = k;
  r.acceptance = chain.acceptance_rate();
  const int b = std::max(2, std::min(opts.batches, static_cast<int>(values.size())));
  const std::size_t per = values.size() / static_cast<std::size_t>(b);
  std::vector<double> means(static_cast<std::size_t>(b), 0.0);
  double total = 0.0;
  for (double v : values) total += v;
  r.mean = total / static_cast<double>(values.size());
  for (int j = 0; j < b; ++j) {
    double s = 0.0;
    for (std::size_t t = 0; t < per; ++t) s += values[static_cast<std::size_t>(j) * per + t];
    means[static_cast<std::size_t>(j)] = s / static_cast<double>(per);
  }
  double bm = 0.0;
  for (double v : means) bm += v;
  bm /= b;
  double var = 0.0;
  for (double v : means) var += (v - bm) * (v - bm);
  var /= (b - 1);
  r.error = std::sqrt(var / b);
  return r;
}

}  // namespace

EntropyEstimate estimate_interaction_entropy(int N, double eps, const PairPotential& pot, const Box& box,
                                             const TiOptions& opts) {
  const int dn = box.dimension() * N;
  if (N < 2 || dn < 2) throw ContractViolation("interaction entropy needs N >= 2 and DN >= 2");
  if (opts.chain.samples < 2) throw ContractViolation("need at least two samples per rung");
  const double kappa = 0.5 * dn - 1.0;
  const double energy = eps * N * static_cast<double>(N);

  EntropyEstimate est;
  est.N = N;
  est.eps = eps;
  const Base base = splitting(N, energy, pot, box, opts);
  est.log_base_probability = base.log_p;
  est.base_error = std::sqrt(base.variance);
  est.splitting_levels = base.levels;

  std::mt19937_64 rng(split_seed(opts.seed, 0));
  const ParticleConfiguration start = feasible_configuration(N, eps, pot, box, rng);
  const std::vector<double> ks = exponent_ladder(kappa, opts.ladder_points, opts.geometric_points);
  est.ladder.resize(ks.size());

  const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(ks.size())));
  auto work = [&](int t) {
    for (std::size_t j = static_cast<std::size_t>(t); j < ks.size(); j += static_cast<std::size_t>(threads))
      est.ladder[j] = run_rung(energy, ks[j], pot, box, opts, start, split_seed(opts.seed, j + 1));
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }

  const std::vector<double> w = simpson_weights(ks);
  double integral = 0.0, variance = base.variance;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    integral += w[j] * est.ladder[j].mean;
    variance += w[j] * w[j] * est.ladder[j].error * est.ladder[j].error;
  }
  est.value = (base.log_p + integral) / N;
  est.error = std::sqrt(variance) / N;
  return est;
}

nlohmann::json EntropyEstimate::to_json() const {
  nlohmann::json rungs = nlohmann::json::array();
  for (const auto& r : ladder)
    rungs.push_back({{"k", r.k}, {"mean", r.mean}, {"error", r.error}, {"acceptance", r.acceptance}});
  return {{"N", N},
          {"epsilon", eps},
          {"value", value},
          {"error", error},
          {"log_base_probability", log_base_probability},
          {"base_error", base_error},
          {"splitting_levels", splitting_levels},
          {"ladder", rungs}};
}

double kinetic_log_prefactor(int N, int dimension, double eps, double volume) {
  const double n = static_cast<double>(N) * dimension;
  const double nn = N;
  const double sphere = std::log(2.0) + 0.5 * n * std::log(std::numbers::pi) - std::lgamma(0.5 * n);
  return -std::lgamma(nn + 1.0) + sphere + (0.5 * n - 1.0) * std::log(2.0 / nn) - std::log(nn) +
         nn * std::log(volume) + (0.5 * n - 1.0) * std::log(nn * nn * eps);
}

FiniteNEntropy finite_n_entropy(int N, double eps, const PairPotential& pot, const Box& box, const TiOptions& opts) {
  FiniteNEntropy out;
  out.interaction = estimate_interaction_entropy(N, eps, pot, box, opts);
  out.kinetic = kinetic_log_prefactor(N, box.dimension(), eps, box.volume()) / N + std::log(static_cast<double>(N));
  out.value = out.kinetic + out.interaction.value;
  out.error = out.interaction.error;
  return out;
}

nlohmann::json FiniteNEntropy::to_json() const {
  return {{"value", value}, {"error", error}, {"kinetic", kinetic}, {"interaction", interaction.to_json()}};
}

}  // namespace mf
