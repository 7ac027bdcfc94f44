#include "brm/baseline_losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "brm/error.hpp"

namespace brm {

namespace {

void add_symmetric(Matrix& g, std::size_t i, std::size_t j, double v) {
  g(i, j) += v;
  g(j, i) += v;
}

}  // namespace

void MarginConfig::validate() const {
  if (!(contrastive > 0.0 && contrastive <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "contrastive margin must lie in (0, 1]");
  }
  if (!(triplet > 0.0)) throw Error(ErrorKind::InvalidConfig, "triplet margin must be > 0");
  if (!(lifted > 0.0)) throw Error(ErrorKind::InvalidConfig, "lifted margin must be > 0");
}

DistanceLoss contrastive_loss(const DistanceMatrix& dist, const PairSets& pairs, double margin) {
  if (pairs.positives.empty() && pairs.negatives.empty()) {
    throw Error(ErrorKind::EmptyPairSet, "contrastive loss needs at least one pair");
  }
  DistanceLoss out{0.0, Matrix(dist.size(), dist.size())};
  if (!pairs.positives.empty()) {
    const double w = 1.0 / static_cast<double>(pairs.positives.size());
    for (const auto& p : pairs.positives) {
      const double delta = 0.5 * (1.0 + dist(p.i, p.j));
      out.value += w * delta * delta;
      add_symmetric(out.grad, p.i, p.j, w * delta);  // d(delta^2)/dd = delta
    }
  }
  if (!pairs.negatives.empty()) {
    const double w = 1.0 / static_cast<double>(pairs.negatives.size());
    for (const auto& p : pairs.negatives) {
      const double gap = margin - 0.5 * (1.0 + dist(p.i, p.j));
      if (gap <= 0.0) continue;
      out.value += w * gap * gap;
      add_symmetric(out.grad, p.i, p.j, -w * gap);
    }
  }
  return out;
}

DistanceLoss triplet_loss_hard(const DistanceMatrix& dist, std::span<const int> labels,
                               double margin) {
  const std::size_t n = dist.size();
  if (labels.size() != n) throw Error(ErrorKind::DimensionMismatch, "labels vs distance matrix");

  struct Triplet {
    std::size_t a, p, neg;
    double hinge;
  };
  std::vector<Triplet> triplets;
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t hardest = n;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (labels[k] != labels[a] && dist(a, k) < best) {
        best = dist(a, k);
        hardest = k;
      }
    }
    if (hardest == n) continue;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      triplets.push_back({a, p, hardest, dist(a, p) - best + margin});
    }
  }
  if (triplets.empty()) {
    throw Error(ErrorKind::NoValidTriplet, "no anchor has both a positive and a negative");
  }

  DistanceLoss out{0.0, Matrix(n, n)};
  const double w = 1.0 / static_cast<double>(triplets.size());
  for (const auto& t : triplets) {
    if (t.hinge <= 0.0) continue;
    out.value += w * t.hinge;
    add_symmetric(out.grad, t.a, t.p, w);
    add_symmetric(out.grad, t.a, t.neg, -w);
  }
  return out;
}

DistanceLoss lifted_loss(const DistanceMatrix& dist, const PairSets& pairs, double margin) {
  if (pairs.positives.empty()) throw Error(ErrorKind::EmptyPairSet, "lifted loss needs positives");
  const std::size_t n = dist.size();

  // Negative partners of each sample.
  std::vector<std::vector<std::uint32_t>> partners(n);
  for (const auto& p : pairs.negatives) {
    partners[p.i].push_back(p.j);
    partners[p.j].push_back(p.i);
  }

  DistanceLoss out{0.0, Matrix(n, n)};
  const double scale = 1.0 / static_cast<double>(pairs.positives.size());
  std::vector<double> exponents;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> terms;
  for (const auto& pos : pairs.positives) {
    exponents.clear();
    terms.clear();
    for (std::uint32_t endpoint : {pos.i, pos.j}) {
      for (std::uint32_t k : partners[endpoint]) {
        exponents.push_back(margin - dist(endpoint, k));
        terms.emplace_back(endpoint, k);
      }
    }
    if (exponents.empty()) {
      throw Error(ErrorKind::NoNegativePartner, "positive pair has no negative partner");
    }
    const double shift = *std::max_element(exponents.begin(), exponents.end());
    double z = 0.0;
    for (double e : exponents) z += std::exp(e - shift);
    const double j_value = shift + std::log(z) + dist(pos.i, pos.j);
    if (j_value <= 0.0) continue;

    out.value += 0.5 * scale * j_value * j_value;
    const double upstream = scale * j_value;
    add_symmetric(out.grad, pos.i, pos.j, upstream);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const double softmax = std::exp(exponents[t] - shift) / z;
      add_symmetric(out.grad, terms[t].first, terms[t].second, -upstream * softmax);
    }
  }
  return out;
}

}  // namespace brm
