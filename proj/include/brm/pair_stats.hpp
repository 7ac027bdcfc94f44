#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brm/matrix.hpp"

namespace brm {

/// n unit-norm embeddings (rows) with their class labels.
struct EmbeddingBatch {
  Matrix embeddings;
  std::vector<int> labels;

  std::size_t size() const noexcept { return embeddings.rows(); }
  std::size_t dim() const noexcept { return embeddings.cols(); }
};

struct IndexPair {
  std::uint32_t i;
  std::uint32_t j;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Unordered pairs (i < j) split by label equality. Self-pairs are never included.
struct PairSets {
  std::vector<IndexPair> positives;
  std::vector<IndexPair> negatives;
};

/// Symmetric n x n matrix of negative cosine similarities, clamped to [-1, 1].
struct DistanceMatrix {
  Matrix values;

  std::size_t size() const noexcept { return values.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values(i, j); }
};

/// Evenly spaced histogram nodes t_r = -1 + r * delta, r = 0 .. bins-1, spanning [-1, 1].
struct BinGrid {
  int bins;
  double delta;

  explicit BinGrid(int bins);
  double node(int r) const noexcept { return -1.0 + r * delta; }
};

struct PairHistograms {
  int bins = 0;
  Vector h_pos;
  Vector h_neg;
  Vector cum_neg;
};

PairSets enumerate_pairs(std::span<const int> labels);

DistanceMatrix distance_matrix(const EmbeddingBatch& batch);

/// Distances of the listed pairs, in list order.
Vector gather(const DistanceMatrix& dist, std::span<const IndexPair> pairs);

/// Triangular-kernel soft histogram normalised to unit mass.
Vector soft_histogram(std::span<const double> distances, int bins);

/// d(loss)/d(distance) for each distance given d(loss)/d(bin) in `upstream`.
/// The derivative is taken as 0 for a distance sitting exactly on a node.
Vector soft_histogram_vjp(std::span<const double> distances, int bins,
                          std::span<const double> upstream);

Vector cumulative(std::span<const double> h);

/// H+ and H- (with the running sum of H-) for a batch's pair sets.
PairHistograms build_histograms(const DistanceMatrix& dist, const PairSets& pairs, int bins);

/// Cell [t_r, t_{r+1}] holding each distance and the fractional offset inside it.
/// frac == 0 (or 1 in the last cell) means the distance sits on a node.
struct BinLocation {
  std::vector<std::int32_t> lower;
  std::vector<double> frac;
};
BinLocation locate_bins(std::span<const double> distances, int bins);

/// Pulls d(loss)/d(distance) back onto the embeddings. grad_dist is symmetric and
/// holds, at (i, j), the derivative with respect to the unordered pair's distance;
/// since d_ij = -x_i . x_j, row i receives -sum_j grad_dist(i, j) x_j. Pairs whose
/// distance sits on the clamp boundary (|d| >= 1) contribute nothing.
Matrix distance_vjp(const EmbeddingBatch& batch, const DistanceMatrix& dist,
                    const Matrix& grad_dist);

}  // namespace brm
