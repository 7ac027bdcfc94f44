#pragma once

// Run configuration. Values come from three layers, highest precedence first:
// command-line flags, a flat `key = value` config file, built-in defaults.
// Keys are the long flag names without the leading dashes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "brm/baseline_losses.hpp"
#include "brm/data.hpp"
#include "brm/encoder.hpp"
#include "brm/objective.hpp"

namespace brm {

using KeyValues = std::map<std::string, std::string>;

struct SyntheticSpec {
  int classes = 10;
  int per_class = 100;
  std::size_t dim = 16;
  double sigma = 0.05;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::string data;  // dataset file; empty selects the synthetic benchmark
  SyntheticSpec synthetic;

  std::vector<std::size_t> layers = {16, 32, 16};
  Activation activation = Activation::Relu;
  InitScheme init = InitScheme::He;

  LossKind loss = LossKind::Brm;
  int bins = 75;
  MarginConfig margins;
  double ce_weight = 1.0;

  BatchSpec batch;
  AdamConfig adam;
  std::uint32_t max_epochs = 300;
  std::uint32_t patience = 20;
  double val_fraction = 0.2;
  std::uint32_t steps_per_epoch = 0;  // 0: ceil(n_train / batch_size)

  double crop = 0.875;
  AugmentConfig augment;

  std::string out = "run";
  std::string resume;

  /// Range and consistency checks; throws InvalidConfig.
  void validate() const;

  /// Every setting except output locations, as key/value text.
  KeyValues effective() const;
};

/// Keys accepted by apply_settings, with one-line help.
const std::vector<std::pair<std::string, std::string>>& run_config_keys();

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are kept and
/// rejected later by apply_settings.
KeyValues parse_config_text(const std::string& text);
KeyValues load_config_file(const std::filesystem::path& path);

/// Applies settings onto `cfg`; throws InvalidConfig for unknown keys or bad values.
void apply_settings(RunConfig& cfg, const KeyValues& values);

std::vector<std::size_t> parse_size_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

}  // namespace brm
