#pragma once

#include <optional>
#include <string_view>

#include "brm/baseline_losses.hpp"
#include "brm/brm_loss.hpp"
#include "brm/encoder.hpp"
#include "brm/pair_stats.hpp"

namespace brm {

enum class LossKind { Brm, BrmCe, Contrastive, Triplet, Lifted };

LossKind parse_loss(std::string_view name);
std::string_view to_string(LossKind kind) noexcept;

struct LossSpec {
  LossKind kind = LossKind::Brm;
  int bins = 75;
  MarginConfig margins;
  double ce_weight = 1.0;
  int num_classes = 0;

  bool uses_head() const noexcept { return kind == LossKind::BrmCe; }
};

struct LossOutput {
  double value = 0.0;
  Matrix grad_embeddings;
  std::optional<LinearHead> grad_head;
};

/// Any of the five training objectives on one batch of unit-norm embeddings.
/// `head` is required for BrmCe and ignored otherwise.
LossOutput compute_loss(const LossSpec& spec, const EmbeddingBatch& batch, const LinearHead* head);

/// True for errors that mean "this batch cannot be scored, draw another".
bool is_degenerate_batch_error(const std::exception& e) noexcept;

}  // namespace brm
