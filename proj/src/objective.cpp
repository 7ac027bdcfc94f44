#include "brm/objective.hpp"

#include <string>

#include "brm/error.hpp"
#include "brm/linalg.hpp"

namespace brm {

LossKind parse_loss(std::string_view name) {
  if (name == "brm") return LossKind::Brm;
  if (name == "brm+ce") return LossKind::BrmCe;
  if (name == "contrastive") return LossKind::Contrastive;
  if (name == "triplet") return LossKind::Triplet;
  if (name == "lifted") return LossKind::Lifted;
  throw Error(ErrorKind::InvalidConfig, "unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::Brm: return "brm";
    case LossKind::BrmCe: return "brm+ce";
    case LossKind::Contrastive: return "contrastive";
    case LossKind::Triplet: return "triplet";
    case LossKind::Lifted: return "lifted";
  }
  return "unknown";
}

LossOutput compute_loss(const LossSpec& spec, const EmbeddingBatch& batch, const LinearHead* head) {
  LossOutput out;
  switch (spec.kind) {
    case LossKind::Brm: {
      RiskValue rv = brm_backward(batch, enumerate_pairs(batch.labels), spec.bins);
      out.value = rv.risk;
      out.grad_embeddings = std::move(rv.grad_embeddings);
      return out;
    }
    case LossKind::BrmCe: {
      if (head == nullptr) throw Error(ErrorKind::InvalidConfig, "brm+ce needs a classifier head");
      const Matrix logits = head->logits(batch.embeddings);
      CombinedLoss cl = combined_loss(batch, enumerate_pairs(batch.labels), spec.bins, logits,
                                      batch.labels, {spec.ce_weight, spec.num_classes});
      HeadGrads hg = head_backward(*head, batch.embeddings, cl.grad_logits);
      out.value = cl.total;
      out.grad_embeddings = std::move(cl.grad_embeddings);
      for (std::size_t k = 0; k < out.grad_embeddings.size(); ++k) {
        out.grad_embeddings.flat()[k] += hg.embeddings.flat()[k];
      }
      out.grad_head = std::move(hg.head);
      return out;
    }
    case LossKind::Contrastive:
    case LossKind::Triplet:
    case LossKind::Lifted: {
      const DistanceMatrix dist = distance_matrix(batch);
      DistanceLoss dl;
      if (spec.kind == LossKind::Contrastive) {
        dl = contrastive_loss(dist, enumerate_pairs(batch.labels), spec.margins.contrastive);
      } else if (spec.kind == LossKind::Triplet) {
        dl = triplet_loss_hard(dist, batch.labels, spec.margins.triplet);
      } else {
        dl = lifted_loss(dist, enumerate_pairs(batch.labels), spec.margins.lifted);
      }
      out.value = dl.value;
      out.grad_embeddings = distance_vjp(batch, dist, dl.grad);
      return out;
    }
  }
  throw Error(ErrorKind::InvalidConfig, "unhandled loss kind");
}

bool is_degenerate_batch_error(const std::exception& e) noexcept {
  const auto* err = dynamic_cast<const Error*>(&e);
  if (err == nullptr) return false;
  switch (err->kind()) {
    case ErrorKind::EmptyPairSet:
    case ErrorKind::NoValidTriplet:
    case ErrorKind::NoNegativePartner:
    case ErrorKind::BatchTooSmall:
      return true;
    default:
      return false;
  }
}

}  // namespace brm
