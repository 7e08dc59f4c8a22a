#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <thread>

#include "freqdef/harness.hpp"

namespace {

int default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct CommonOpts {
  std::string config;
  std::string out_override;
  std::uint64_t seed_override = 0;
  int jobs = default_jobs();
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config, "Experiment config JSON")
      ->required();
  cmd->add_option("--jobs", opts.jobs, "Worker threads")
      ->capture_default_str();
  cmd->add_option("--out", opts.out_override,
                  "Override the configured output directory");
  opts.seed_opt =
      cmd->add_option("--seed", opts.seed_override, "Override the root seed");
}

freqdef::ExperimentConfig resolve(const CommonOpts& opts) {
  freqdef::ExperimentConfig cfg = freqdef::load_config(opts.config);
  if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
  if (opts.seed_opt->count() > 0) cfg.seed = opts.seed_override;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial perturbations, Wiener defenses and spectra for a "
               "small segmentation network"};
  app.require_subcommand(1);

  std::string gen_out = "bench";
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand(
      "gen-data", "Write a synthetic dataset, network and default config");
  gen->add_option("--out", gen_out, "Benchmark directory")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "Root seed")->capture_default_str();

  CommonOpts attack_opts, fit_opts, eval_opts, spectra_opts;
  CLI::App* attack = app.add_subcommand(
      "attack", "Generate one perturbation per image and attack");
  add_common(attack, attack_opts);
  CLI::App* fit = app.add_subcommand(
      "fit-filter", "Fit per-attack Wiener filters on the train split");
  add_common(fit, fit_opts);
  CLI::App* eval = app.add_subcommand(
      "evaluate", "Write the full attack x defense metric grid");
  add_common(eval, eval_opts);
  CLI::App* spectra = app.add_subcommand(
      "spectra", "Average perturbation spectra and harmonic peak scores");
  add_common(spectra, spectra_opts);
  bool sweep_modes = false;
  spectra->add_flag("--sweep-modes", sweep_modes,
                    "Regenerate attacks under every interpolation mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      freqdef::cmd_gen_data(gen_out, gen_seed);
    } else if (attack->parsed()) {
      freqdef::cmd_attack(resolve(attack_opts), attack_opts.jobs);
    } else if (fit->parsed()) {
      freqdef::cmd_fit_filter(resolve(fit_opts), fit_opts.jobs);
    } else if (eval->parsed()) {
      freqdef::cmd_evaluate(resolve(eval_opts), eval_opts.jobs);
    } else if (spectra->parsed()) {
      freqdef::cmd_spectra(resolve(spectra_opts), spectra_opts.jobs,
                           sweep_modes);
    }
  } catch (const freqdef::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
