#include <CLI11.hpp>

#include "meanfield/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mean-field microcanonical thermodynamics toolkit"};
  app.set_version_flag("--version", std::string(mf::kVersion));
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "job configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "overrides the configured seed");
    sub->add_option("--threads", threads, "worker threads for ladder chains")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (overrides the configured one)");
  };
  CLI::App* run = app.add_subcommand("run", "execute the configured job");
  CLI::App* verify = app.add_subcommand("verify", "run all cross-checks and write verify.json");
  add_common(run);
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  mf::RunOverrides ov;
  ov.seed = seed;
  ov.threads = threads;
  if (out) ov.output_dir = *out;
  return run->parsed() ? mf::run_job(config, ov) : mf::verify_job(config, ov);
}
