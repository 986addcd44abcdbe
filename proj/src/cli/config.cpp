#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include <openssl/evp.h>

#include "meanfield/config.hpp"
#include "meanfield/errors.hpp"

namespace mf {
namespace {

using Value = std::variant<double, std::string, bool, std::vector<double>>;

struct Entry {
  Value value;
  int line = 0;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// strips a trailing comment that is not inside a string
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

class Parser {
 public:
  explicit Parser(std::filesystem::path path) : path_(std::move(path)) {}

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(path_.string() + ":" + std::to_string(line) + ": " + msg);
  }

  double number(const std::string& text, int line) const {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail(line, "expected a number, got '" + text + "'");
    return v;
  }

  Value value(const std::string& raw, int line) const {
    if (raw.empty()) fail(line, "missing value");
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') fail(line, "unterminated string");
      return raw.substr(1, raw.size() - 2);
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '[') {
      if (raw.back() != ']') fail(line, "unterminated list");
      std::vector<double> out;
      std::stringstream ss(raw.substr(1, raw.size() - 2));
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(number(item, line));
      }
      return out;
    }
    return number(raw, line);
  }

  std::map<std::string, Entry> parse(const std::string& text, int& mode_line) {
    std::map<std::string, Entry> entries;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const std::string s = trim(strip_comment(raw));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') fail(line, "malformed section header");
        section = trim(s.substr(1, s.size() - 2));
        static const std::array<std::string, 5> known{"domain", "potential", "params", "solver", "mc"};
        if (std::find(known.begin(), known.end(), section) == known.end()) fail(line, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) fail(line, "expected key = value");
      const std::string key = trim(s.substr(0, eq));
      if (key.empty()) fail(line, "empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (entries.count(full)) fail(line, "duplicate key '" + full + "'");
      entries[full] = {value(trim(s.substr(eq + 1)), line)};
      entries[full].line = line;
      if (full == "mode") mode_line = line;
    }
    return entries;
  }

 private:
  std::filesystem::path path_;
};

const std::vector<std::string>& allowed_keys() {
  static const std::vector<std::string> keys{
      "mode", "seed", "output",
      "domain.dimension", "domain.lower", "domain.upper", "domain.cells",
      "potential.kind", "potential.c", "potential.amplitude", "potential.length", "potential.delta",
      "potential.diagonal", "potential.radius", "potential.table",
      "params.eps", "params.theta", "params.eps_min", "params.eps_max", "params.steps", "params.thetas",
      "params.N", "params.Ns", "params.n_min", "params.n_max", "params.vp_points", "params.split", "params.trials",
      "solver.damping", "solver.tolerance", "solver.objective_tolerance", "solver.max_iterations",
      "solver.multistart", "solver.perturbation", "solver.max_halvings",
      "mc.burn_in", "mc.samples", "mc.thin", "mc.step", "mc.audit_every", "mc.momenta",
      "mc.ladder_points", "mc.geometric_points", "mc.ti_burn_in", "mc.ti_samples", "mc.batches",
      "mc.walkers", "mc.splitting_fraction", "mc.splitting_sweeps", "mc.threads",
      "mc.restarts", "mc.ground_iterations"};
  return keys;
}

}  // namespace

JobConfig parse_config(const std::string& text, const std::filesystem::path& path) {
  Parser p(path);
  int mode_line = 1;
  const auto entries = p.parse(text, mode_line);
  const auto& allowed = allowed_keys();
  for (const auto& [k, e] : entries)
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) p.fail(e.line, "unknown key '" + k + "'");

  auto find = [&](const std::string& k) -> const Entry* {
    auto it = entries.find(k);
    return it == entries.end() ? nullptr : &it->second;
  };
  auto num = [&](const std::string& k) -> std::optional<double> {
    const Entry* e = find(k);
    if (!e) return std::nullopt;
    if (!std::holds_alternative<double>(e->value)) p.fail(e->line, "'" + k + "' must be a number");
    return std::get<double>(e->value);
  };
  auto integer = [&](const std::string& k, int lo) -> std::optional<int> {
    auto v = num(k);
    if (!v) return std::nullopt;
    const int line = find(k)->line;
    if (*v != static_cast<double>(static_cast<long long>(*v))) p.fail(line, "'" + k + "' must be an integer");
    if (*v < lo) p.fail(line, "'" + k + "' must be >= " + std::to_string(lo));
    return static_cast<int>(*v);
  };
  auto positive = [&](const std::string& k) -> std::optional<double> {
    auto v = num(k);
    if (v && !(*v > 0.0)) p.fail(find(k)->line, "'" + k + "' must be positive");
    return v;
  };
  auto str = [&](const std::string& k) -> std::optional<std::string> {
    const Entry* e = find(k);
    if (!e) return std::nullopt;
    if (!std::holds_alternative<std::string>(e->value)) p.fail(e->line, "'" + k + "' must be a quoted string");
    return std::get<std::string>(e->value);
  };
  auto list = [&](const std::string& k) -> std::optional<std::vector<double>> {
    const Entry* e = find(k);
    if (!e) return std::nullopt;
    if (std::holds_alternative<double>(e->value)) return std::vector<double>{std::get<double>(e->value)};
    if (!std::holds_alternative<std::vector<double>>(e->value)) p.fail(e->line, "'" + k + "' must be a list");
    return std::get<std::vector<double>>(e->value);
  };
  auto boolean = [&](const std::string& k) -> std::optional<bool> {
    const Entry* e = find(k);
    if (!e) return std::nullopt;
    if (!std::holds_alternative<bool>(e->value)) p.fail(e->line, "'" + k + "' must be true or false");
    return std::get<bool>(e->value);
  };

  JobConfig c;
  c.source = text;
  c.path = path;

  const auto mode = str("mode");
  if (!mode) p.fail(1, "missing 'mode'");
  static const std::array<std::string, 8> modes{"solve-mc", "solve-can", "scan",      "legendre",
                                                "ground-state", "sample", "entropy-n", "verify"};
  if (std::find(modes.begin(), modes.end(), *mode) == modes.end()) p.fail(mode_line, "unknown mode '" + *mode + "'");
  c.mode = *mode;
  if (auto s = integer("seed", 0)) c.seed = static_cast<std::uint64_t>(*s);
  if (auto o = str("output")) c.output_dir = *o;

  if (auto d = integer("domain.dimension", 1)) {
    if (*d > 3) p.fail(find("domain.dimension")->line, "dimension must be 1, 2 or 3");
    c.dimension = *d;
  }
  if (auto n = integer("domain.cells", 2)) c.cells = *n;
  const auto lower = list("domain.lower").value_or(std::vector<double>(static_cast<std::size_t>(c.dimension), 0.0));
  const auto upper = list("domain.upper").value_or(std::vector<double>(static_cast<std::size_t>(c.dimension), 1.0));
  const int dline = find("domain.upper") ? find("domain.upper")->line : (find("domain.lower") ? find("domain.lower")->line : 1);
  if (static_cast<int>(lower.size()) != c.dimension || static_cast<int>(upper.size()) != c.dimension)
    p.fail(dline, "domain bounds need one entry per dimension");
  for (std::size_t a = 0; a < lower.size(); ++a)
    if (!(upper[a] > lower[a])) p.fail(dline, "domain upper bound must exceed lower bound on every axis");
  c.bounds = {lower, upper};

  if (auto k = str("potential.kind")) {
    try {
      (void)parse_potential_kind(*k);
    } catch (const std::exception&) {
      p.fail(find("potential.kind")->line, "unknown potential kind '" + *k + "'");
    }
    c.potential_kind = *k;
  }
  for (const char* name : {"c", "amplitude", "length", "delta", "diagonal", "radius"})
    if (auto v = num(std::string("potential.") + name)) c.potential_params[name] = *v;
  if (auto t = str("potential.table")) c.table_path = *t;
  {
    const int kline = find("potential.kind") ? find("potential.kind")->line : mode_line;
    auto need = [&](const char* name) {
      if (!c.potential_params.count(name))
        p.fail(kline, "potential '" + c.potential_kind + "' needs '" + std::string(name) + "'");
    };
    const PotentialKind kind = parse_potential_kind(c.potential_kind);
    if (kind == PotentialKind::constant) need("c");
    if (kind == PotentialKind::bounded_smooth) {
      need("amplitude");
      need("length");
    }
    if (kind == PotentialKind::softened_coulomb) need("delta");
    if (kind == PotentialKind::amended_coulomb) need("diagonal");
    if (kind == PotentialKind::mollified_newton) need("radius");
    if (kind == PotentialKind::custom_tabulated && c.table_path.empty())
      p.fail(kline, "potential 'custom-tabulated' needs 'table'");
  }

  c.eps = positive("params.eps");
  c.theta = positive("params.theta");
  c.eps_min = num("params.eps_min");
  c.eps_max = num("params.eps_max");
  if (auto s = integer("params.steps", 2)) c.steps = *s;
  if (auto t = list("params.thetas")) {
    for (double x : *t)
      if (!(x > 0.0)) p.fail(find("params.thetas")->line, "'params.thetas' entries must be positive");
    c.thetas = *t;
  }
  c.N = integer("params.N", 2);
  if (auto ns = list("params.Ns")) {
    for (double x : *ns) {
      if (x < 2 || x != static_cast<double>(static_cast<int>(x)))
        p.fail(find("params.Ns")->line, "'params.Ns' entries must be integers >= 2");
      c.Ns.push_back(static_cast<int>(x));
    }
  }
  if (auto v = integer("params.n_min", 2)) c.n_min = *v;
  c.n_max = integer("params.n_max", 2);
  if (auto v = integer("params.vp_points", 4)) c.vp_points = *v;
  if (auto v = integer("params.split", 0)) c.split = *v;
  if (auto v = integer("params.trials", 1)) c.trials = *v;

  if (auto v = positive("solver.damping")) {
    if (*v > 1.0) p.fail(find("solver.damping")->line, "'solver.damping' must lie in (0, 1]");
    c.solver.damping = *v;
  }
  if (auto v = positive("solver.tolerance")) c.solver.tolerance = *v;
  if (auto v = positive("solver.objective_tolerance")) c.solver.objective_tolerance = *v;
  if (auto v = integer("solver.max_iterations", 1)) c.solver.max_iterations = *v;
  if (auto v = integer("solver.multistart", 1)) c.solver.multistart = *v;
  if (auto v = num("solver.perturbation")) c.solver.perturbation = *v;
  if (auto v = integer("solver.max_halvings", 0)) c.solver.max_halvings = *v;

  if (auto v = integer("mc.burn_in", 0)) c.chain.burn_in = *v;
  if (auto v = integer("mc.samples", 1)) c.chain.samples = *v;
  if (auto v = integer("mc.thin", 1)) c.chain.thin = *v;
  if (auto v = positive("mc.step")) c.chain.initial_step = *v;
  if (auto v = integer("mc.audit_every", 1)) c.chain.audit_every = *v;
  if (auto v = boolean("mc.momenta")) c.chain.momenta = *v;
  if (auto v = integer("mc.ladder_points", 3)) c.ti.ladder_points = *v;
  if (auto v = integer("mc.geometric_points", 0)) c.ti.geometric_points = *v;
  if (auto v = integer("mc.ti_burn_in", 0)) c.ti.chain.burn_in = *v;
  if (auto v = integer("mc.ti_samples", 2)) c.ti.chain.samples = *v;
  if (auto v = integer("mc.batches", 2)) c.ti.batches = *v;
  if (auto v = integer("mc.walkers", 10)) c.ti.splitting_walkers = *v;
  if (auto v = positive("mc.splitting_fraction")) {
    if (*v >= 1.0) p.fail(find("mc.splitting_fraction")->line, "'mc.splitting_fraction' must lie in (0, 1)");
    c.ti.splitting_fraction = *v;
  }
  if (auto v = integer("mc.splitting_sweeps", 1)) c.ti.splitting_sweeps = *v;
  if (auto v = integer("mc.threads", 1)) c.ti.threads = *v;
  if (auto v = integer("mc.restarts", 1)) c.ground.restarts = *v;
  if (auto v = integer("mc.ground_iterations", 1)) c.ground.max_iterations = *v;

  auto require = [&](bool ok, const std::string& what) {
    if (!ok) p.fail(mode_line, "mode '" + c.mode + "' needs " + what);
  };
  if (c.mode == "solve-mc") require(c.eps.has_value(), "params.eps");
  if (c.mode == "solve-can") require(c.theta.has_value(), "params.theta");
  if (c.mode == "scan" || c.mode == "legendre") {
    require(c.eps_min && c.eps_max, "params.eps_min and params.eps_max");
    require(*c.eps_max > *c.eps_min, "params.eps_max > params.eps_min");
  }
  if (c.mode == "legendre") require(c.theta || !c.thetas.empty(), "params.theta or params.thetas");
  if (c.mode == "ground-state") {
    require(c.n_max.has_value(), "params.n_max");
    require(*c.n_max >= c.n_min, "params.n_max >= params.n_min");
  }
  if (c.mode == "sample") require(c.N && c.eps, "params.N and params.eps");
  if (c.mode == "entropy-n") require(c.eps && (c.N || !c.Ns.empty()), "params.eps and params.N or params.Ns");
  if (c.mode == "verify") require(c.eps.has_value(), "params.eps");
  return c;
}

JobConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ":0: cannot read config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

}  // namespace mf
