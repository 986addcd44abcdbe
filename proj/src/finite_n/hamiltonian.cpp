#include <cmath>
#include <limits>

#include "meanfield/errors.hpp"
#include "meanfield/finite_n.hpp"

namespace mf {

double interaction_hamiltonian(const ParticleConfiguration& config, const PairPotential& pot) {
  const int n = config.size();
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double u = pot(config.position(i), config.position(j));
      if (!std::isfinite(u)) return std::numeric_limits<double>::infinity();
      sum += u;
    }
  return sum;
}

double interaction_delta(const ParticleConfiguration& config, int i, std::span<const double> q,
                         const PairPotential& pot) {
  const int n = config.size();
  const auto qi = config.position(i);
  double delta = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const auto qj = config.position(j);
    delta += pot(q, qj) - pot(qi, qj);
  }
  return delta;
}

double empirical_form(const ParticleConfiguration& config, int first, int last, const PairPotential& pot) {
  if (!(0 <= first && first < last && last <= config.size())) throw ContractViolation("bad particle range");
  const double m = last - first;
  double sum = 0.0;
  for (int i = first; i < last; ++i) {
    sum += pot(config.position(i), config.position(i));
    for (int j = i + 1; j < last; ++j) sum += 2.0 * pot(config.position(i), config.position(j));
  }
  return 0.5 * sum / (m * m);
}

EmpiricalMeasures empirical_measures(std::span<const ParticleConfiguration> configs, const GridPtr& grid) {
  const auto cells = static_cast<Eigen::Index>(grid->size());
  EmpiricalMeasures em;
  em.one_point = Eigen::VectorXd::Zero(cells);
  em.two_point = Eigen::MatrixXd::Zero(cells, cells);
  std::vector<std::size_t> idx;
  for (const auto& c : configs) {
    if (c.dimension != grid->dimension()) throw ContractViolation("configuration dimension differs from grid");
    const int n = c.size();
    idx.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      if (!grid->bounds().contains(c.position(i))) throw ContractViolation("particle outside the domain");
      idx[static_cast<std::size_t>(i)] = grid->cell_index(c.position(i));
      em.one_point[static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j)
          em.two_point(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]),
                       static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)])) += 1.0;
    ++em.configurations;
  }
  if (em.one_point.sum() > 0.0) em.one_point /= em.one_point.sum();
  if (em.two_point.sum() > 0.0) em.two_point /= em.two_point.sum();
  return em;
}

}  // namespace mf
