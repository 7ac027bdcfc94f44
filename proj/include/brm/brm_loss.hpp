#pragma once

#include <span>

#include "brm/matrix.hpp"
#include "brm/pair_stats.hpp"

namespace brm {

/// Risk of a batch together with its gradient with respect to the (already
/// normalised) embeddings. The caller applies the normalisation VJP.
struct RiskValue {
  double risk = 0.0;
  Matrix grad_embeddings;
  PairHistograms histograms;
};

struct CombinedLossConfig {
  double ce_weight = 1.0;
  int num_classes = 0;
};

struct CombinedLoss {
  double total = 0.0;
  double risk = 0.0;
  double cross_entropy = 0.0;
  Matrix grad_embeddings;
  Matrix grad_logits;
};

/// Probability that a negative pair is no farther apart than a positive pair:
/// sum_r h_pos[r] * cum_neg[r].
double brm_risk(const PairHistograms& h);

/// Same quantity as a double sum over bin pairs (j <= i); O(R^2).
double brm_risk_naive(const PairHistograms& h);

/// Forward and backward pass of the risk for one batch. Throws EmptyPairSet if
/// either pair set is empty.
RiskValue brm_backward(const EmbeddingBatch& batch, const PairSets& pairs, int bins);

/// Deliberate corruptions of the backward pass, used to confirm that the
/// gradient checker notices a wrong gradient.
enum class BackwardFault { None, FlipNegativeHistogramGrad };

RiskValue brm_backward(const EmbeddingBatch& batch, const PairSets& pairs, int bins,
                       BackwardFault fault);

struct CrossEntropy {
  double value = 0.0;
  Matrix grad_logits;
};

/// Mean softmax cross-entropy over the rows of `logits`.
CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

/// risk + ce_weight * mean cross-entropy, with gradients for the embedding and
/// classifier-head paths.
CombinedLoss combined_loss(const EmbeddingBatch& batch, const PairSets& pairs, int bins,
                           const Matrix& logits, std::span<const int> labels,
                           const CombinedLossConfig& cfg);

}  // namespace brm
