#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>

#include "meanfield/config.hpp"
#include "meanfield/errors.hpp"

namespace mf {
namespace {

using nlohmann::json;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::string& hash, const std::string& header) : out_(path) {
    if (!out_) throw ConfigError(path.string() + ":0: cannot write output file");
    out_ << "# config_sha256=" << hash << "\n" << header << "\n";
  }
  template <class... T>
  void row(const T&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << "\n";
  }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  std::ofstream out_;
};

std::string coord_header(int d, const std::string& prefix) {
  std::string h;
  for (int a = 0; a < d; ++a) h += (a ? "," : "") + prefix + std::to_string(a);
  return h;
}

std::string coords(std::span<const double> q) {
  std::string s;
  for (std::size_t a = 0; a < q.size(); ++a) s += (a ? "," : "") + fmt(q[a]);
  return s;
}

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Job {
  JobConfig cfg;
  std::string hash;
  GridPtr grid;
  PairPotential pot;
  std::optional<KernelMatrix> kernel_;
  std::optional<double> eps_g_;

  const KernelMatrix& kernel() {
    if (!kernel_) kernel_ = assemble_kernel(pot, grid);
    return *kernel_;
  }
  double ground_energy() {
    if (!eps_g_) eps_g_ = continuum_ground_energy(kernel()).value;
    return *eps_g_;
  }
  SolverOptions solver() {
    SolverOptions o = cfg.solver;
    o.ground_energy = ground_energy();
    return o;
  }
  std::filesystem::path out(const std::string& name) const { return cfg.output_dir / name; }
  json metadata() const {
    return {{"config_sha256", hash}, {"config_path", cfg.path.string()}, {"seed", cfg.seed},
            {"version", kVersion},   {"mode", cfg.mode},                 {"timestamp", timestamp()}};
  }
};

PairPotential make_potential(const JobConfig& cfg, const GridPtr& grid) {
  const auto& p = cfg.potential_params;
  switch (parse_potential_kind(cfg.potential_kind)) {
    case PotentialKind::zero: return PairPotential::zero();
    case PotentialKind::constant: return PairPotential::constant(p.at("c"));
    case PotentialKind::bounded_smooth: return PairPotential::bounded_smooth(p.at("amplitude"), p.at("length"));
    case PotentialKind::softened_coulomb: return PairPotential::softened_coulomb(p.at("delta"));
    case PotentialKind::amended_coulomb: return PairPotential::amended_coulomb(p.at("diagonal"));
    case PotentialKind::mollified_newton: return PairPotential::mollified_newton(p.at("radius"), cfg.dimension);
    case PotentialKind::custom_tabulated: {
      std::filesystem::path t = cfg.table_path;
      if (t.is_relative()) t = cfg.path.parent_path() / t;
      return load_tabulated_csv(t, grid);
    }
  }
  throw ConfigError("unsupported potential kind");
}

Job prepare(const std::filesystem::path& config_path, const RunOverrides& ov) {
  Job job;
  job.cfg = load_config(config_path);
  JobConfig& c = job.cfg;
  if (ov.seed) c.seed = *ov.seed;
  if (ov.threads) c.ti.threads = std::max(1, *ov.threads);
  if (ov.output_dir) c.output_dir = *ov.output_dir;
  c.solver.seed = c.seed;
  c.chain.seed = c.seed;
  c.ti.seed = c.seed;
  c.ti.chain.seed = c.seed + 1;
  c.ground.seed = c.seed;
  job.hash = sha256_hex(c.source);
  job.grid = build_grid(c.dimension, c.bounds, c.cells);
  job.pot = make_potential(c, job.grid);
  std::filesystem::create_directories(c.output_dir);
  return job;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string() + ":0: cannot write output file");
  out << j.dump(2) << "\n";
}

void write_density(Job& job, const DensityField& rho, const std::string& name) {
  const int d = job.grid->dimension();
  Csv csv(job.out(name), job.hash, coord_header(d, "x") + ",rho");
  for (std::size_t i = 0; i < rho.size(); ++i)
    csv.row(coords(job.grid->node(i)), rho.values()[static_cast<Eigen::Index>(i)]);
}

void write_scan(Job& job, const ScanResult& scan) {
  Csv csv(job.out("scan.csv"), job.hash, "epsilon,theta,s_K,s_I,s,residual,monotone_ok");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> prev;
  for (const auto& p : scan.points) {
    const bool mono = p.ok && (!prev || p.s > *prev);
    if (p.ok) prev = p.s;
    csv.row(p.eps, p.ok ? p.theta : nan, p.s_K, p.ok ? p.s_I : nan, p.ok ? p.s : nan, p.ok ? p.residual : nan, mono);
  }
}

json scan_json(const ScanResult& scan) {
  json pts = json::array();
  for (const auto& p : scan.points) {
    json j{{"epsilon", p.eps}, {"ok", p.ok}};
    if (p.ok) {
      j["theta"] = p.theta;
      j["s_K"] = p.s_K;
      j["s_I"] = p.s_I;
      j["s"] = p.s;
      j["residual"] = p.residual;
    } else {
      j["error"] = p.error;
    }
    pts.push_back(j);
  }
  return {{"points", pts}, {"monotone", scan.monotone}, {"concave", scan.concave}};
}

std::vector<double> legendre_thetas(const JobConfig& c) {
  std::vector<double> t = c.thetas;
  if (t.empty() && c.theta) t.push_back(*c.theta);
  return t;
}

json mode_solve_mc(Job& job) {
  const MeanFieldSolution sol = solve_microcanonical(*job.cfg.eps, job.kernel(), job.solver());
  write_density(job, sol.rho, "density.csv");
  json j = sol.to_json();
  j["eps_g"] = job.ground_energy();
  return j;
}

json mode_solve_can(Job& job) {
  const MeanFieldSolution sol = solve_canonical(*job.cfg.theta, job.kernel(), job.cfg.solver);
  write_density(job, sol.rho, "density.csv");
  return sol.to_json();
}

json mode_scan(Job& job) {
  const ScanResult scan = entropy_scan(*job.cfg.eps_min, *job.cfg.eps_max, job.cfg.steps, job.kernel(), job.solver());
  write_scan(job, scan);
  return scan_json(scan);
}

json mode_legendre(Job& job) {
  const SolverOptions o = job.solver();
  const ScanResult scan = entropy_scan(*job.cfg.eps_min, *job.cfg.eps_max, job.cfg.steps, job.kernel(), o);
  write_scan(job, scan);
  Csv csv(job.out("legendre.csv"), job.hash,
          "theta,phi_fixed_point,phi_legendre,gap,eps_star,eps_canonical,boundary_maximizer");
  json reports = json::array();
  for (double theta : legendre_thetas(job.cfg)) {
    const LegendreReport r = legendre_check(theta, job.kernel(), scan, o);
    csv.row(r.theta, r.phi_fixed_point, r.phi_legendre, r.gap, r.eps_star, r.eps_canonical, r.boundary_maximizer);
    reports.push_back(r.to_json());
  }
  return {{"legendre", reports}, {"scan", scan_json(scan)}};
}

std::vector<GroundStateRecord> ground_chain(Job& job, int n_min, int n_max) {
  std::vector<GroundStateRecord> recs;
  for (int n = n_min; n <= n_max; ++n) recs.push_back(ground_state(n, job.pot, job.cfg.bounds, job.cfg.ground));
  return recs;
}

json mode_ground_state(Job& job) {
  const auto recs = ground_chain(job, job.cfg.n_min, *job.cfg.n_max);
  const MonotonicityReport rep = monotonicity_report(recs, job.ground_energy());
  const int d = job.cfg.dimension;
  Csv table(job.out("ground_state.csv"), job.hash,
            "N,eps_g,eps_tilde,restarts_used,pair_increase,quasi_bound,below_continuum");
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& row = rep.rows[k];
    table.row(recs[k].N, recs[k].eps_g, recs[k].eps_tilde, recs[k].restarts_used, row.pair_increase, row.quasi_bound,
              row.below_continuum);
  }
  Csv conf(job.out("ground_configurations.csv"), job.hash, "N,particle," + coord_header(d, "q"));
  json records = json::array();
  for (const auto& r : recs) {
    for (int i = 0; i < r.best.size(); ++i) conf.row(r.N, i, coords(r.best.position(i)));
    records.push_back(r.to_json());
  }
  return {{"records", records}, {"monotonicity", rep.to_json()}};
}

json mode_sample(Job& job) {
  const JobConfig& c = job.cfg;
  const SampleSet set = sample_configurations(*c.N, *c.eps, job.pot, c.bounds, c.chain);
  const int d = c.dimension;
  std::string header = "sample,particle," + coord_header(d, "q");
  if (c.chain.momenta) header += "," + coord_header(d, "p");
  Csv stream(job.out("samples.csv"), job.hash, header);
  Csv inter(job.out("interaction.csv"), job.hash, "sample,I");
  for (std::size_t s = 0; s < set.samples.size(); ++s) {
    const auto& conf = set.samples[s];
    for (int i = 0; i < conf.size(); ++i) {
      std::string line = coords(conf.position(i));
      if (!conf.momenta.empty())
        line += "," + coords({conf.momenta.data() + static_cast<std::size_t>(i * d), static_cast<std::size_t>(d)});
      stream.row(s, i, line);
    }
    inter.row(s, set.interaction[s]);
  }
  json j{{"N", set.N}, {"epsilon", set.eps}, {"exponent", set.exponent}, {"samples", set.samples.size()},
         {"diagnostics", set.diagnostics.to_json()}};

  // mean-field comparison on the job grid
  const MeanFieldSolution sol = solve_microcanonical(*c.eps, job.kernel(), job.solver());
  const EmpiricalMeasures em = empirical_measures(set.samples, job.grid);
  const DensityField hist = DensityField::from_masses(job.grid, em.one_point);
  Csv h(job.out("histogram.csv"), job.hash, coord_header(d, "x") + ",empirical,mean_field");
  for (std::size_t i = 0; i < job.grid->size(); ++i)
    h.row(coords(job.grid->node(i)), hist.values()[static_cast<Eigen::Index>(i)],
          sol.rho.values()[static_cast<Eigen::Index>(i)]);
  const TransportDistance w = w1_distance(hist, sol.rho);
  j["w1_to_mean_field"] = {{"value", w.value}, {"exact", w.exact}, {"regularization", w.regularization}};
  j["mean_field_theta"] = sol.theta;
  j["lln"] = lln_test(set, {sol.rho, sol.theta}).to_json();
  return j;
}

json mode_entropy_n(Job& job) {
  const JobConfig& c = job.cfg;
  std::vector<int> Ns = c.Ns;
  if (Ns.empty()) Ns.push_back(*c.N);
  Csv csv(job.out("entropy_n.csv"), job.hash, "N,s_I,s_I_error,s,s_error");
  json rows = json::array();
  for (int n : Ns) {
    const FiniteNEntropy e = finite_n_entropy(n, *c.eps, job.pot, c.bounds, c.ti);
    csv.row(n, e.interaction.value, e.interaction.error, e.value, e.error);
    rows.push_back(e.to_json());
  }
  json j{{"estimates", rows}};
  try {
    const MeanFieldSolution sol = solve_microcanonical(*c.eps, job.kernel(), job.solver());
    j["continuum"] = {{"s_I", sol.s_I}, {"s", sol.s}, {"cells_per_axis", c.cells}};
  } catch (const std::exception& e) {
    j["continuum"] = {{"error", e.what()}};
  }
  return j;
}

json check(bool pass, double gap, double tol) { return {{"pass", pass}, {"gap", gap}, {"tolerance", tol}}; }

json run_verify(Job& job, bool& all_pass) {
  const JobConfig& c = job.cfg;
  const double eps = *c.eps;
  const SolverOptions o = job.solver();
  json checks;
  auto add = [&](const std::string& name, json j) {
    all_pass = all_pass && j.value("pass", false);
    checks[name] = std::move(j);
  };

  const MeanFieldSolution sol = solve_microcanonical(eps, job.kernel(), o);
  {
    const IdentityReport r = entropy_h_identity_check(sol);
    json j = check(r.gap <= 1e-6, r.gap, 1e-6);
    j["s"] = r.s;
    j["h_b"] = r.h_b;
    add("entropy_h_identity", j);
  }
  {
    const VpReport r = verify_vp_decompositions(eps, job.kernel(), c.vp_points, o);
    const double gap = std::max(r.gap_total, r.gap_interaction);
    json j = check(gap <= 1e-4, gap, 1e-4);
    j["report"] = r.to_json();
    add("vp_decompositions", j);
  }
  {
    std::vector<double> thetas = legendre_thetas(c);
    if (thetas.empty()) thetas.push_back(sol.theta);
    const double eg = job.ground_energy();
    const double lo = c.eps_min.value_or(std::max(0.5 * eps, eg + 0.1 * (eps - eg)));
    const double hi = c.eps_max.value_or(2.0 * eps);
    const ScanResult scan = entropy_scan(lo, hi, c.steps, job.kernel(), o);
    add("scan_monotone", {{"pass", scan.monotone}, {"concave", scan.concave}});
    double worst = 0.0;
    json reports = json::array();
    for (double t : thetas) {
      const LegendreReport r = legendre_check(t, job.kernel(), scan, o);
      worst = std::max(worst, r.gap);
      reports.push_back(r.to_json());
    }
    json j = check(worst <= 1e-4, worst, 1e-4);
    j["reports"] = reports;
    add("legendre", j);
  }
  if (c.n_max) {
    const auto recs = ground_chain(job, c.n_min, *c.n_max);
    const MonotonicityReport r = monotonicity_report(recs, job.ground_energy());
    add("ground_state_monotonicity", {{"pass", r.pass}, {"report", r.to_json()}});
  }
  {
    const int n = c.N.value_or(8);
    const int split = c.split > 0 ? c.split : n / 2;
    const JensenReport r = jensen_superadditivity_check(n, split, eps, job.pot, job.grid, c.trials, c.seed);
    const bool ok = r.amgm_violations == 0 && (!r.applicable || (r.jensen_violations == 0 && r.convex_split_violations == 0));
    json j{{"pass", ok}, {"report", r.to_json()}};
    add("jensen_superadditivity", j);
  }
  return checks;
}

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    std::cerr << "config error: " << x.what() << "\n";
    return 1;
  } catch (const ContractViolation& x) {
    std::cerr << "invalid input: " << x.what() << "\n";
    return 1;
  } catch (const InfeasibleError& x) {
    std::cerr << "infeasible: " << x.what() << "\n";
    return 2;
  } catch (const PotentialDomainError& x) {
    std::cerr << "infeasible: " << x.what() << "\n";
    return 2;
  } catch (const NonConvergenceError& x) {
    std::cerr << "no convergence: " << x.what() << "\n";
    return 3;
  } catch (const std::exception& x) {
    std::cerr << "error: " << x.what() << "\n";
    return 1;
  }
}

}  // namespace

int run_job(const std::filesystem::path& config_path, const RunOverrides& overrides) {
  try {
    Job job = prepare(config_path, overrides);
    const std::string& m = job.cfg.mode;
    if (m == "verify") return verify_job(config_path, overrides);
    json results;
    if (m == "solve-mc") results = mode_solve_mc(job);
    else if (m == "solve-can") results = mode_solve_can(job);
    else if (m == "scan") results = mode_scan(job);
    else if (m == "legendre") results = mode_legendre(job);
    else if (m == "ground-state") results = mode_ground_state(job);
    else if (m == "sample") results = mode_sample(job);
    else if (m == "entropy-n") results = mode_entropy_n(job);
    json doc{{"metadata", job.metadata()},
             {"grid", job.grid->to_json()},
             {"potential", job.pot.to_json()},
             {"results", results}};
    write_json(job.out("results.json"), doc);
    return 0;
  } catch (...) {
    return exit_code_for(std::current_exception());
  }
}

int verify_job(const std::filesystem::path& config_path, const RunOverrides& overrides) {
  try {
    Job job = prepare(config_path, overrides);
    if (!job.cfg.eps) throw ConfigError(config_path.string() + ":1: verify needs params.eps");
    bool all = true;
    const json checks = run_verify(job, all);
    json doc{{"metadata", job.metadata()},
             {"grid", job.grid->to_json()},
             {"potential", job.pot.to_json()},
             {"hypotheses", check_hypotheses(job.pot, job.grid).to_json()},
             {"checks", checks},
             {"pass", all}};
    write_json(job.out("verify.json"), doc);
    for (const auto& [name, j] : checks.items())
      std::cout << (j.value("pass", false) ? "PASS " : "FAIL ") << name << "\n";
    return all ? 0 : 4;
  } catch (...) {
    return exit_code_for(std::current_exception());
  }
}

}  // namespace mf
