#pragma once

#include <span>

#include "brm/matrix.hpp"
#include "brm/pair_stats.hpp"

namespace brm {

struct MarginConfig {
  double contrastive = 0.5;
  double triplet = 0.2;
  double lifted = 1.0;

  void validate() const;
};

/// Loss value and its gradient over distances. grad is n x n and symmetric;
/// grad(i, j) is the derivative with respect to the unordered pair's distance,
/// ready for distance_vjp().
struct DistanceLoss {
  double value = 0.0;
  Matrix grad;
};

/// Squared-hinge contrastive loss on delta = (1 + d) / 2:
/// mean over positives of delta^2 plus mean over negatives of max(0, m - delta)^2.
DistanceLoss contrastive_loss(const DistanceMatrix& dist, const PairSets& pairs, double margin);

/// Batch-hard triplet loss. Every ordered anchor-positive pair is matched with
/// the anchor's closest negative (lowest index on ties).
DistanceLoss triplet_loss_hard(const DistanceMatrix& dist, std::span<const int> labels,
                               double margin);

/// Lifted-structured loss with a max-shifted log-sum-exp over each positive
/// pair's negative partners.
DistanceLoss lifted_loss(const DistanceMatrix& dist, const PairSets& pairs, double margin);

}  // namespace brm
