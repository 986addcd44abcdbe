#include "meanfield/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/ellint_1.hpp>

#include "meanfield/errors.hpp"

namespace mf {
namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// Overlap area of two discs of radius r at centre distance s.
double lens_area(double s, double r) {
  if (s >= 2.0 * r) return 0.0;
  return 2.0 * r * r * std::acos(s / (2.0 * r)) - 0.5 * s * std::sqrt(4.0 * r * r - s * s);
}

// Mutual |x|^-1 energy of two uniform unit-mass discs in R^2. The difference
// of the two positions has the radial density lens(rho) / (pi r^2)^2; the
// angular integral of 1/|d e1 - z| is 4 K(k) / (d + rho), k = 2 sqrt(d rho) / (d + rho).
double uniform_disc_inverse_distance_2d(double d, double r) {
  const double norm = std::numbers::pi * r * r;
  const double top = 2.0 * r;
  auto f = [&](double rho) {
    if (rho <= 0.0) return 0.0;
    double ring;
    if (d == 0.0) {
      ring = 2.0 * std::numbers::pi / rho;
    } else {
      const double k = 2.0 * std::sqrt(d * rho) / (d + rho);
      ring = k < 1.0 ? 4.0 * boost::math::ellint_1(k) / (d + rho) : 0.0;
    }
    return lens_area(rho, r) * rho * ring;
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  double total = 0.0;
  if (d > 0.0 && d < top) {
    total = ts.integrate(f, 0.0, d) + ts.integrate(f, d, top);
  } else {
    total = ts.integrate(f, 0.0, top);
  }
  return total / (norm * norm);
}

constexpr int kNewtonProfilePoints = 513;

}  // namespace

double uniform_ball_coulomb_3d(double d, double r) {
  if (d >= 2.0 * r) return 1.0 / d;
  const double x = d / r;
  return (6.0 / 5.0 - 0.5 * x * x + (3.0 / 16.0) * x * x * x - (1.0 / 160.0) * std::pow(x, 5)) / r;
}

std::string to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::zero: return "zero";
    case PotentialKind::constant: return "constant";
    case PotentialKind::bounded_smooth: return "bounded-smooth";
    case PotentialKind::softened_coulomb: return "softened-coulomb";
    case PotentialKind::amended_coulomb: return "amended-coulomb";
    case PotentialKind::mollified_newton: return "mollified-newton";
    case PotentialKind::custom_tabulated: return "custom-tabulated";
  }
  return "unknown";
}

PotentialKind parse_potential_kind(const std::string& name) {
  for (auto k : {PotentialKind::zero, PotentialKind::constant, PotentialKind::bounded_smooth,
                 PotentialKind::softened_coulomb, PotentialKind::amended_coulomb,
                 PotentialKind::mollified_newton, PotentialKind::custom_tabulated})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown potential kind '" + name + "'");
}

PairPotential PairPotential::zero() { return {}; }

PairPotential PairPotential::constant(double c) {
  if (!std::isfinite(c)) throw ConfigError("constant potential must be finite");
  PairPotential p;
  p.kind_ = PotentialKind::constant;
  p.params_["c"] = c;
  return p;
}

PairPotential PairPotential::bounded_smooth(double amplitude, double length) {
  if (!std::isfinite(amplitude) || !(length > 0.0)) throw ConfigError("bounded-smooth needs finite amplitude and length > 0");
  PairPotential p;
  p.kind_ = PotentialKind::bounded_smooth;
  p.params_["amplitude"] = amplitude;
  p.params_["length"] = length;
  return p;
}

PairPotential PairPotential::softened_coulomb(double delta) {
  if (!(delta > 0.0)) throw ConfigError("softened-coulomb needs delta > 0");
  PairPotential p;
  p.kind_ = PotentialKind::softened_coulomb;
  p.params_["delta"] = delta;
  return p;
}

PairPotential PairPotential::amended_coulomb(double diagonal) {
  if (!std::isfinite(diagonal)) throw ConfigError("amended-coulomb diagonal must be finite");
  PairPotential p;
  p.kind_ = PotentialKind::amended_coulomb;
  p.params_["u"] = diagonal;
  return p;
}

PairPotential PairPotential::mollified_newton(double radius, int dimension) {
  if (!(radius > 0.0)) throw ConfigError("mollified-newton needs radius > 0");
  if (dimension == 1)
    throw PotentialDomainError("mollified-newton is undefined in D = 1: |x|^-1 is not locally integrable");
  if (dimension != 2 && dimension != 3) throw ConfigError("mollified-newton needs D = 2 or 3");
  PairPotential p;
  p.kind_ = PotentialKind::mollified_newton;
  p.params_["r"] = radius;
  p.dimension_ = dimension;
  if (dimension == 2) {
    // covers every pair in a box of diameter up to 8 radii beyond the ball support;
    // larger separations fall back to the far-field expansion below
    p.profile_rmax_ = 16.0 * radius;
    std::vector<double> table(kNewtonProfilePoints);
    const double h = p.profile_rmax_ / (kNewtonProfilePoints - 1);
    for (int i = 0; i < kNewtonProfilePoints; ++i) table[i] = uniform_disc_inverse_distance_2d(i * h, radius);
    p.profile_ = std::make_shared<const boost::math::interpolators::cardinal_cubic_b_spline<double>>(
        table.begin(), table.end(), 0.0, h);
  }
  return p;
}

PairPotential PairPotential::custom_tabulated(GridPtr grid, Eigen::MatrixXd table) {
  if (!grid) throw ContractViolation("custom table needs a grid");
  if (static_cast<std::size_t>(table.rows()) != grid->size() || table.rows() != table.cols())
    throw ConfigError("custom table must be square with one row per grid node");
  PairPotential p;
  p.kind_ = PotentialKind::custom_tabulated;
  p.table_grid_ = std::move(grid);
  p.table_ = std::make_shared<const Eigen::MatrixXd>(std::move(table));
  return p;
}

PairPotential PairPotential::with_shift(double shift) const {
  PairPotential p = *this;
  p.shift_ = shift;
  return p;
}

double PairPotential::raw_radial(double r) const {
  switch (kind_) {
    case PotentialKind::zero: return 0.0;
    case PotentialKind::constant: return params_.at("c");
    case PotentialKind::bounded_smooth: {
      const double l = params_.at("length");
      return params_.at("amplitude") * std::exp(-r * r / (2.0 * l * l));
    }
    case PotentialKind::softened_coulomb: return 1.0 / (r + params_.at("delta"));
    case PotentialKind::amended_coulomb: return r > 0.0 ? 1.0 / r : params_.at("u");
    case PotentialKind::mollified_newton: {
      const double rad = params_.at("r");
      if (dimension_ == 3) return -uniform_ball_coulomb_3d(r, rad);
      if (r >= profile_rmax_) {
        // far field of two uniform discs: 1/d + r^2/(4 d^3) + O(d^-5)
        return -(1.0 / r + rad * rad / (4.0 * r * r * r));
      }
      return -(*profile_)(r);
    }
    case PotentialKind::custom_tabulated: break;
  }
  throw ContractViolation("radial profile requested for a non-radial kernel");
}

double PairPotential::radial(double r) const { return raw_radial(r) + shift_; }

double PairPotential::radial_derivative(double r) const {
  switch (kind_) {
    case PotentialKind::zero:
    case PotentialKind::constant: return 0.0;
    case PotentialKind::bounded_smooth: {
      const double l = params_.at("length");
      return -r / (l * l) * raw_radial(r);
    }
    case PotentialKind::softened_coulomb: {
      const double s = r + params_.at("delta");
      return -1.0 / (s * s);
    }
    case PotentialKind::amended_coulomb: return r > 0.0 ? -1.0 / (r * r) : 0.0;
    case PotentialKind::mollified_newton: {
      const double rad = params_.at("r");
      if (dimension_ == 3) {
        if (r >= 2.0 * rad) return 1.0 / (r * r);
        const double x = r / rad;
        return -(-x + (9.0 / 16.0) * x * x - (1.0 / 32.0) * std::pow(x, 4)) / (rad * rad);
      }
      // centred difference on the interpolated profile
      const double h = 1e-6 * std::max(rad, r);
      const double lo = std::max(0.0, r - h);
      return (raw_radial(r + h) - raw_radial(lo)) / (r + h - lo);
    }
    case PotentialKind::custom_tabulated: break;
  }
  throw ContractViolation("radial derivative requested for a non-radial kernel");
}

double PairPotential::raw(std::span<const double> a, std::span<const double> b) const {
  if (kind_ == PotentialKind::custom_tabulated) {
    const auto i = static_cast<Eigen::Index>(table_grid_->cell_index(a));
    const auto j = static_cast<Eigen::Index>(table_grid_->cell_index(b));
    return (*table_)(i, j);
  }
  return raw_radial(distance(a, b));
}

double PairPotential::raw_diagonal() const {
  if (kind_ == PotentialKind::custom_tabulated) return table_->diagonal().maxCoeff();
  return raw_radial(0.0);
}

nlohmann::json PairPotential::to_json() const {
  nlohmann::json j = {{"kind", to_string(kind_)}, {"parameters", params_}, {"nonneg_shift", shift_}};
  if (kind_ == PotentialKind::mollified_newton) j["dimension"] = dimension_;
  if (is_radial()) j["diagonal_convention"] = diagonal_value();
  return j;
}

KernelMatrix::KernelMatrix(GridPtr grid, Eigen::MatrixXd entries)
    : grid_(std::move(grid)), entries_(std::move(entries)) {
  if (!grid_ || static_cast<std::size_t>(entries_.rows()) != grid_->size() || entries_.rows() != entries_.cols())
    throw ContractViolation("kernel matrix does not match its grid");
}

Eigen::VectorXd KernelMatrix::apply(const Eigen::VectorXd& rho) const {
  return entries_ * rho.cwiseProduct(grid_->weights());
}

namespace {

// Average of U over distinct pairs of 4^D sub-cell midpoints of one cell.
double subcell_self_average(const PairPotential& pot, const Grid& grid, std::size_t cell) {
  const int d = grid.dimension();
  constexpr int kSub = 4;
  int count = 1;
  for (int a = 0; a < d; ++a) count *= kSub;
  std::vector<double> pts(static_cast<std::size_t>(count * d));
  auto centre = grid.node(cell);
  for (int p = 0; p < count; ++p) {
    int rem = p;
    for (int a = 0; a < d; ++a) {
      const int k = rem % kSub;
      rem /= kSub;
      const double h = grid.cell_width(a);
      pts[p * d + a] = centre[a] - 0.5 * h + (k + 0.5) * h / kSub;
    }
  }
  double sum = 0.0;
  for (int p = 0; p < count; ++p)
    for (int q = 0; q < count; ++q)
      if (p != q) sum += pot({&pts[p * d], static_cast<std::size_t>(d)}, {&pts[q * d], static_cast<std::size_t>(d)});
  return sum / (static_cast<double>(count) * (count - 1));
}

}  // namespace

KernelMatrix assemble_kernel(const PairPotential& pot, const GridPtr& grid) {
  const std::size_t n = grid->size();
  Eigen::MatrixXd u(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = pot(grid->node(i), grid->node(j));
      if (!std::isfinite(v))
        throw PotentialDomainError("non-finite kernel entry at nodes (" + std::to_string(i) + ", " +
                                   std::to_string(j) + ")");
      u(i, j) = v;
    }
    u(i, i) = pot.singular() ? subcell_self_average(pot, *grid, i) : pot(grid->node(i), grid->node(i));
  }
  return KernelMatrix(grid, std::move(u));
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

nlohmann::json HypothesisReport::to_json() const {
  return {{"symmetry", to_string(symmetry)},
          {"lower_semicontinuity", to_string(lower_semicontinuity)},
          {"sublevel_regularity", to_string(sublevel_regularity)},
          {"local_square_integrability", to_string(local_square_integrability)},
          {"confinement", to_string(confinement)},
          {"bounded_continuous", to_string(bounded_continuous)},
          {"nonnegative", to_string(nonnegative)},
          {"psd_on_zero_mass", psd_on_zero_mass},
          {"min_zero_mass_eigenvalue", min_zero_mass_eigenvalue},
          {"square_integral_trend", square_integral_trend}};
}

namespace {

// Midpoint-rule integral of U(q, .)^2 over the ball of radius one cell around
// q, at m sub-points per axis of the enclosing cube.
double local_square_integral(const PairPotential& pot, const Grid& grid, std::span<const double> q, int m) {
  const int d = grid.dimension();
  double h = grid.cell_width(0);
  for (int a = 1; a < d; ++a) h = std::min(h, grid.cell_width(a));
  const double step = 2.0 * h / m;
  double vol = 1.0;
  for (int a = 0; a < d; ++a) vol *= step;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(m);
  std::vector<double> x(static_cast<std::size_t>(d));
  double sum = 0.0;
  for (std::size_t p = 0; p < total; ++p) {
    std::size_t rem = p;
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const auto k = rem % static_cast<std::size_t>(m);
      rem /= static_cast<std::size_t>(m);
      const double off = -h + (static_cast<double>(k) + 0.5) * step;
      x[a] = q[a] + off;
      r2 += off * off;
    }
    if (r2 > h * h) continue;
    const double v = pot.raw(q, x);
    sum += v * v * vol;
  }
  return sum;
}

}  // namespace

HypothesisReport check_hypotheses(const PairPotential& pot, const GridPtr& grid) {
  HypothesisReport rep;
  const KernelMatrix k = assemble_kernel(pot, grid);
  const Eigen::MatrixXd& u = k.entries();
  const auto n = u.rows();

  rep.symmetry = (u - u.transpose()).cwiseAbs().maxCoeff() == 0.0 ? Verdict::pass : Verdict::fail;
  rep.nonnegative = u.minCoeff() >= 0.0 ? Verdict::pass : Verdict::fail;
  rep.confinement = Verdict::pass;  // positions are always confined to the box by rejection

  switch (pot.kind()) {
    case PotentialKind::zero:
    case PotentialKind::constant:
    case PotentialKind::bounded_smooth:
    case PotentialKind::softened_coulomb:
    case PotentialKind::mollified_newton:
      rep.lower_semicontinuity = rep.sublevel_regularity = rep.bounded_continuous = Verdict::pass;
      break;
    case PotentialKind::amended_coulomb:
      rep.lower_semicontinuity = rep.sublevel_regularity = Verdict::pass;
      rep.bounded_continuous = Verdict::fail;
      break;
    case PotentialKind::custom_tabulated:
      break;  // no analytic knowledge of a table
  }

  // local U^2 integral under refinement; geometric decay of the increments
  // means the integral converges
  std::size_t centre = grid->size() / 2;
  std::vector<double> vals;
  const int max_m = grid->dimension() == 3 ? 32 : 64;
  for (int m = 8; m <= max_m; m *= 2) vals.push_back(local_square_integral(pot, *grid, grid->node(centre), m));
  for (std::size_t i = 1; i < vals.size(); ++i) rep.square_integral_trend.push_back(std::abs(vals[i] - vals[i - 1]));
  const auto& inc = rep.square_integral_trend;
  const double scale = 1.0 + std::abs(vals.back());
  if (inc.back() <= 1e-10 * scale || inc.back() <= 0.75 * inc[inc.size() - 2])
    rep.local_square_integrability = Verdict::pass;
  else
    rep.local_square_integrability = Verdict::fail;

  // positive semidefiniteness on {sum of masses = 0}
  if (n >= 2) {
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ones);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd basis = q.rightCols(n - 1);
    Eigen::MatrixXd sym = 0.5 * (u + u.transpose());
    Eigen::MatrixXd reduced = basis.transpose() * sym * basis;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced, Eigen::EigenvaluesOnly);
    rep.min_zero_mass_eigenvalue = es.eigenvalues().minCoeff();
    const double tol = 1e-10 * std::max(1.0, u.cwiseAbs().maxCoeff());
    rep.psd_on_zero_mass = rep.min_zero_mass_eigenvalue >= -tol;
  }
  return rep;
}

PairPotential shift_nonnegative(const PairPotential& pot, const GridPtr& grid) {
  const KernelMatrix k = assemble_kernel(pot, grid);
  const double lo = k.entries().minCoeff();
  if (!std::isfinite(lo)) throw PotentialDomainError("kernel is unbounded below on the grid");
  if (lo >= 0.0) return pot;
  return pot.with_shift(pot.nonneg_shift() - lo);
}

PairPotential load_tabulated_csv(const std::filesystem::path& path, const GridPtr& grid) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open kernel table " + path.string());
  const auto n = static_cast<Eigen::Index>(grid->size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long i = -1, j = -1;
    double v = 0.0;
    if (!(ss >> i >> j >> v))
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected i,j,value");
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": node index out of range");
    t(i, j) = v;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::isnan(t(i, j))) {
        if (std::isnan(t(j, i)))
          throw ConfigError(path.string() + ": missing entry for pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
        t(i, j) = t(j, i);
      }
  return PairPotential::custom_tabulated(grid, std::move(t));
}

}  // namespace mf
