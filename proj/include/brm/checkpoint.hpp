#pragma once

// Binary checkpoint, all fields little-endian:
//
//   char[4]  magic "BRME"
//   u32      format version (1)
//   u32      activation (0 relu, 1 tanh)
//   u32      L, then L x u32 layer sizes
//   f64[]    parameters, per layer: W (row-major, in x out) then b
//   f64 x5   adam base_lr, beta1, beta2, epsilon, gamma
//   u32      adam decay_every
//   u64      adam step
//   f64[]    adam first moments, then second moments (same layout as parameters)
//   u32      epoch counter (epochs completed)
//   f64      best validation metric
//   u32      best epoch
//   u32      epochs since the best epoch
//   u32      head classes C (0 = no head); when C > 0:
//              f64[] W (D x C) then b (C), u64 head adam step,
//              f64[] head first moments, then second moments

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "brm/encoder.hpp"

namespace brm {

struct Checkpoint {
  EncoderParams params;
  AdamConfig adam_config;
  AdamState adam;
  std::uint32_t epoch = 0;
  double best_metric = -1.0;
  std::uint32_t best_epoch = 0;
  std::uint32_t stale_epochs = 0;

  std::optional<LinearHead> head;
  AdamState head_adam;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace brm
