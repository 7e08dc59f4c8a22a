#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "freqdef/attacks.hpp"
#include "freqdef/wiener.hpp"

namespace freqdef {

struct ExperimentConfig {
  std::string train_dir;
  std::string val_dir;
  std::string net_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<AttackSpec> attacks;
  std::vector<DefenseSpec> defenses;
};

// Structural parse; every violation surfaces as ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& config);

// Parse plus environment checks: dataset dirs and net file must exist and the
// two splits must be different directories.
ExperimentConfig load_config(const std::string& path);

// Binds a defense description to a runnable denoiser. Wiener specs load
// their filter file here; jpeg2000 is a declared but unimplemented slot.
Denoiser make_denoiser(const DefenseSpec& spec);

// Runs fn(0..count-1) across up to jobs threads; any worker exception is
// rethrown after the pool drains. jobs <= 1 runs inline.
void parallel_for(Index count, int jobs,
                  const std::function<void(Index)>& fn);

// Writes the self-contained desk benchmark: train/ and val/ scenes, the
// network description, and a config wired to the standard attack and defense
// sets, all derived from one root seed.
void cmd_gen_data(const std::string& out_dir, std::uint64_t seed);

// One perturbation file and attacked image per (split, image, attack).
void cmd_attack(const ExperimentConfig& config, int jobs);

// Per-attack Wiener filters fitted on the train split only, plus their
// combination.
void cmd_fit_filter(const ExperimentConfig& config, int jobs);

// Full metric grid: every (split, image, attack or none, defense or none)
// row with mse, ssim, miou against ground truth, and miou against the
// prediction on the untouched image.
void cmd_evaluate(const ExperimentConfig& config, int jobs);

// Averaged perturbation spectra as images plus a peak-score table. With
// sweep_modes the attacks are regenerated under each interpolation mode.
void cmd_spectra(const ExperimentConfig& config, int jobs, bool sweep_modes);

}  // namespace freqdef
