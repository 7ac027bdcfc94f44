#include "brm/pair_stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brm/error.hpp"
#include "brm/linalg.hpp"
#include "brm/simd/kernels.hpp"

namespace brm {

namespace {

constexpr double kUnitNormTolerance = 1e-6;

void require_bins(int bins) {
  if (bins < 2) throw Error(ErrorKind::InvalidConfig, "histogram needs at least 2 bins");
}

void require_distances(std::span<const double> distances) {
  if (distances.empty()) throw Error(ErrorKind::EmptyPairSet, "no distances to histogram");
}

}  // namespace

BinGrid::BinGrid(int bins) : bins(bins), delta(0.0) {
  require_bins(bins);
  delta = 2.0 / static_cast<double>(bins - 1);
}

PairSets enumerate_pairs(std::span<const int> labels) {
  if (labels.size() < 2) throw Error(ErrorKind::BatchTooSmall, "need at least two samples");
  PairSets sets;
  const auto n = static_cast<std::uint32_t>(labels.size());
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      (labels[i] == labels[j] ? sets.positives : sets.negatives).push_back({i, j});
    }
  }
  return sets;
}

DistanceMatrix distance_matrix(const EmbeddingBatch& batch) {
  const auto& x = batch.embeddings;
  const auto& k = simd::active();
  const std::size_t n = x.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = std::sqrt(k.sum_squares(x.row(i).data(), x.cols()));
    if (std::abs(norm - 1.0) > kUnitNormTolerance) {
      throw Error(ErrorKind::NotNormalized, "row " + std::to_string(i) + " has norm " +
                                                std::to_string(norm));
    }
  }
  DistanceMatrix dist{Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    dist.values(i, i) = -1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::clamp(-k.dot(x.row(i).data(), x.row(j).data(), x.cols()), -1.0, 1.0);
      dist.values(i, j) = d;
      dist.values(j, i) = d;
    }
  }
  return dist;
}

Vector gather(const DistanceMatrix& dist, std::span<const IndexPair> pairs) {
  Vector out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(dist(p.i, p.j));
  return out;
}

BinLocation locate_bins(std::span<const double> distances, int bins) {
  const BinGrid grid(bins);
  BinLocation loc;
  loc.lower.resize(distances.size());
  loc.frac.resize(distances.size());
  simd::active().bin_positions(distances.data(), distances.size(), 1.0 / grid.delta, bins,
                               loc.lower.data(), loc.frac.data());
  return loc;
}

Vector soft_histogram(std::span<const double> distances, int bins) {
  require_distances(distances);
  const BinLocation loc = locate_bins(distances, bins);
  Vector h(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t k = 0; k < distances.size(); ++k) {
    h[loc.lower[k]] += 1.0 - loc.frac[k];
    h[loc.lower[k] + 1] += loc.frac[k];
  }
  const double inv_count = 1.0 / static_cast<double>(distances.size());
  for (double& v : h) v *= inv_count;
  return h;
}

Vector soft_histogram_vjp(std::span<const double> distances, int bins,
                          std::span<const double> upstream) {
  require_distances(distances);
  if (upstream.size() != static_cast<std::size_t>(bins)) {
    throw Error(ErrorKind::DimensionMismatch, "upstream length must equal bin count");
  }
  const BinGrid grid(bins);
  const BinLocation loc = locate_bins(distances, bins);
  const double slope = 1.0 / (grid.delta * static_cast<double>(distances.size()));
  Vector grad(distances.size(), 0.0);
  for (std::size_t k = 0; k < distances.size(); ++k) {
    // On a node (frac 0) or on the last node (frac 1) the kernel has a kink.
    if (loc.frac[k] == 0.0 || loc.frac[k] == 1.0) continue;
    grad[k] = (upstream[loc.lower[k] + 1] - upstream[loc.lower[k]]) * slope;
  }
  return grad;
}

Vector cumulative(std::span<const double> h) {
  Vector out(h.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < h.size(); ++r) {
    acc += h[r];
    out[r] = acc;
  }
  return out;
}

PairHistograms build_histograms(const DistanceMatrix& dist, const PairSets& pairs, int bins) {
  if (pairs.positives.empty()) throw Error(ErrorKind::EmptyPairSet, "no positive pairs");
  if (pairs.negatives.empty()) throw Error(ErrorKind::EmptyPairSet, "no negative pairs");
  PairHistograms h;
  h.bins = bins;
  h.h_pos = soft_histogram(gather(dist, pairs.positives), bins);
  h.h_neg = soft_histogram(gather(dist, pairs.negatives), bins);
  h.cum_neg = cumulative(h.h_neg);
  return h;
}

Matrix distance_vjp(const EmbeddingBatch& batch, const DistanceMatrix& dist,
                    const Matrix& grad_dist) {
  const std::size_t n = batch.size();
  if (dist.size() != n || grad_dist.rows() != n || grad_dist.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "distance gradient does not match batch size");
  }
  Matrix weights(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || std::abs(dist(i, j)) >= 1.0) continue;
      weights(i, j) = -grad_dist(i, j);
    }
  }
  return matmul(weights, batch.embeddings);
}

}  // namespace brm
