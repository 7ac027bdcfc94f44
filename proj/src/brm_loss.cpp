#include "brm/brm_loss.hpp"

#include <algorithm>
#include <cmath>

#include "brm/error.hpp"

namespace brm {

namespace {

void check_histograms(const PairHistograms& h) {
  const auto bins = static_cast<std::size_t>(h.bins);
  if (h.h_pos.size() != bins || h.h_neg.size() != bins || h.cum_neg.size() != bins) {
    throw Error(ErrorKind::DimensionMismatch, "histogram lengths do not match bin count");
  }
}

// Writes per-pair gradients into the symmetric distance-gradient matrix.
void scatter(Matrix& grad_dist, std::span<const IndexPair> pairs, std::span<const double> g) {
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    grad_dist(pairs[k].i, pairs[k].j) += g[k];
    grad_dist(pairs[k].j, pairs[k].i) += g[k];
  }
}

}  // namespace

double brm_risk(const PairHistograms& h) {
  check_histograms(h);
  double risk = 0.0;
  for (int r = 0; r < h.bins; ++r) risk += h.h_pos[r] * h.cum_neg[r];
  return risk;
}

double brm_risk_naive(const PairHistograms& h) {
  check_histograms(h);
  double risk = 0.0;
  for (int i = 0; i < h.bins; ++i)
    for (int j = 0; j <= i; ++j) risk += h.h_pos[i] * h.h_neg[j];
  return risk;
}

RiskValue brm_backward(const EmbeddingBatch& batch, const PairSets& pairs, int bins) {
  return brm_backward(batch, pairs, bins, BackwardFault::None);
}

RiskValue brm_backward(const EmbeddingBatch& batch, const PairSets& pairs, int bins,
                       BackwardFault fault) {
  const DistanceMatrix dist = distance_matrix(batch);
  RiskValue out;
  out.histograms = build_histograms(dist, pairs, bins);
  const PairHistograms& h = out.histograms;
  out.risk = brm_risk(h);

  // dR/dh_pos[r] = cum_neg[r];  dR/dh_neg[q] = sum_{r >= q} h_pos[r].
  const Vector& grad_pos_bins = h.cum_neg;
  Vector grad_neg_bins(h.h_pos.size());
  double tail = 0.0;
  for (int q = bins - 1; q >= 0; --q) {
    tail += h.h_pos[q];
    grad_neg_bins[q] = tail;
  }
  if (fault == BackwardFault::FlipNegativeHistogramGrad) {
    for (double& g : grad_neg_bins) g = -g;
  }

  const Vector pos_d = gather(dist, pairs.positives);
  const Vector neg_d = gather(dist, pairs.negatives);
  Matrix grad_dist(batch.size(), batch.size());
  scatter(grad_dist, pairs.positives, soft_histogram_vjp(pos_d, bins, grad_pos_bins));
  scatter(grad_dist, pairs.negatives, soft_histogram_vjp(neg_d, bins, grad_neg_bins));
  out.grad_embeddings = distance_vjp(batch, dist, grad_dist);
  return out;
}

CrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size()) {
    throw Error(ErrorKind::DimensionMismatch, "logits rows must match label count");
  }
  if (logits.rows() == 0) throw Error(ErrorKind::BatchTooSmall, "no rows");
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  CrossEntropy ce;
  ce.grad_logits = Matrix(n, c);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw Error(ErrorKind::LabelOutOfRange, "label outside logits width");
    }
    const auto row = logits.row(i);
    const double shift = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - shift);
    const double log_z = std::log(z) + shift;
    ce.value += (log_z - row[y]) * inv_n;
    for (std::size_t k = 0; k < c; ++k) {
      const double p = std::exp(row[k] - log_z);
      ce.grad_logits(i, k) = (p - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0)) * inv_n;
    }
  }
  return ce;
}

CombinedLoss combined_loss(const EmbeddingBatch& batch, const PairSets& pairs, int bins,
                           const Matrix& logits, std::span<const int> labels,
                           const CombinedLossConfig& cfg) {
  if (!(cfg.ce_weight >= 0.0)) throw Error(ErrorKind::InvalidConfig, "ce_weight must be >= 0");
  if (logits.rows() != batch.size()) {
    throw Error(ErrorKind::DimensionMismatch, "logits rows must align with the batch");
  }
  if (cfg.num_classes > 0 && logits.cols() != static_cast<std::size_t>(cfg.num_classes)) {
    throw Error(ErrorKind::DimensionMismatch, "logits width must equal num_classes");
  }
  RiskValue rv = brm_backward(batch, pairs, bins);
  CombinedLoss out;
  out.risk = rv.risk;
  out.grad_embeddings = std::move(rv.grad_embeddings);
  if (cfg.ce_weight == 0.0) {
    out.total = out.risk;
    out.grad_logits = Matrix(logits.rows(), logits.cols());
    return out;
  }
  CrossEntropy ce = softmax_cross_entropy(logits, labels);
  out.cross_entropy = ce.value;
  out.total = out.risk + cfg.ce_weight * ce.value;
  out.grad_logits = std::move(ce.grad_logits);
  for (double& g : out.grad_logits.flat()) g *= cfg.ce_weight;
  return out;
}

}  // namespace brm
