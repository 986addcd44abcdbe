#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "meanfield/domain.hpp"
#include "meanfield/finite_n.hpp"
#include "meanfield/solvers.hpp"

namespace mf {

inline constexpr const char* kVersion = "0.1.0";

struct JobConfig {
  std::string mode;  // solve-mc | solve-can | scan | legendre | ground-state | sample | entropy-n | verify
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";

  // [domain]
  int dimension = 1;
  Box bounds;
  int cells = 16;

  // [potential]
  std::string potential_kind = "zero";
  std::map<std::string, double> potential_params;
  std::filesystem::path table_path;

  // [params]
  std::optional<double> eps, theta, eps_min, eps_max;
  int steps = 32;
  std::vector<double> thetas;
  std::optional<int> N;
  std::vector<int> Ns;
  int n_min = 2;
  std::optional<int> n_max;
  int vp_points = 64;
  int split = 0;  // Jensen split size, 0 means N / 2
  int trials = 1000;

  SolverOptions solver;
  ChainOptions chain;
  TiOptions ti;
  GroundStateOptions ground;

  std::string source;  // raw text, hashed into every artifact
  std::filesystem::path path;
};

/// Parses the flat-section key = value format. Errors are ConfigError with
/// a "path:line: message" prefix.
JobConfig parse_config(const std::string& text, const std::filesystem::path& path = "<config>");
JobConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(const std::string& data);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::filesystem::path> output_dir;
};

/// Exit codes: 0 success, 1 configuration error, 2 infeasible input, 3 non-convergence.
int run_job(const std::filesystem::path& config_path, const RunOverrides& overrides = {});
int verify_job(const std::filesystem::path& config_path, const RunOverrides& overrides = {});

}  // namespace mf
