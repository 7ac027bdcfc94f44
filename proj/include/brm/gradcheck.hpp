#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brm/brm_loss.hpp"
#include "brm/encoder.hpp"

namespace brm {

/// Finite-difference check of the full pipeline
/// inputs -> encoder -> distances -> histograms -> risk,
/// against the analytic gradients for both the inputs and the parameters.
///
/// A coordinate is excluded when perturbing it by +h or -h changes the
/// piecewise-linear regime of the pipeline: the histogram cell of any pair
/// distance (including landing on a node), the clamp status of any distance,
/// or the sign pattern of any ReLU pre-activation. Inside one regime the
/// pipeline is smooth and central differences are accurate to O(h^2).
///
/// Relative error per coordinate is |a - n| / max(|a|, |n|, abs_floor).
struct GradcheckConfig {
  std::uint64_t first_seed = 0;
  std::uint32_t seeds = 100;
  std::size_t batch = 16;
  std::vector<std::size_t> layers = {8, 16, 8};
  Activation activation = Activation::Relu;
  int classes = 4;
  int bins = 15;
  double step = 1e-5;
  double tolerance = 1e-4;
  double abs_floor = 1e-6;
  double required_pass_fraction = 0.95;
  BackwardFault fault = BackwardFault::None;
};

struct SeedCheck {
  std::uint64_t seed = 0;
  double max_rel_inputs = 0.0;
  double max_rel_params = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<SeedCheck> seeds;
  std::size_t passed = 0;
  double max_rel_inputs = 0.0;
  double max_rel_params = 0.0;
  bool ok = false;
};

SeedCheck gradcheck_seed(const GradcheckConfig& cfg, std::uint64_t seed);
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

}  // namespace brm
