#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "brm/matrix.hpp"
#include "brm/pair_stats.hpp"

namespace brm {

/// Majority label among the k nearest training rows (negative cosine distance).
/// Distance ties go to the lower training index, vote ties to the smaller label.
std::vector<int> knn_classify(const EmbeddingBatch& train, const EmbeddingBatch& test, std::size_t k);

/// Fraction of rows whose label ranks among the k highest scores; equal scores
/// rank the lower class index first.
double topk_accuracy(const Matrix& scores, std::span<const int> labels, std::size_t k);

/// Fraction of samples with a same-class neighbour among their K nearest
/// (self excluded). K is capped at n - 1.
double recall_at_k(const EmbeddingBatch& batch, std::size_t k);

double accuracy(std::span<const int> predicted, std::span<const int> labels);

struct LinearClassifierConfig {
  std::size_t epochs = 100;
  double reg = 1e-4;       // lambda_c
  double max_step = 0.1;   // cap on the weight step size
  std::uint64_t seed = 0;
};

/// One-vs-rest linear classifier, scores = x W + b.
struct LinearClassifier {
  Matrix weights;  // D x C
  Vector bias;     // C

  Matrix scores(const Matrix& features) const;
  std::vector<int> predict(const Matrix& features) const;
  /// Mean over samples and classes of max(0, 1 - y_ic * score_ic), y in {-1, +1}.
  double hinge_loss(const Matrix& features, std::span<const int> labels) const;
};

/// Stochastic subgradient descent on the L2-regularised one-vs-rest hinge
/// objective. Samples are visited in a seeded shuffled order each epoch; at
/// step t the weights move with eta_t = min(max_step, 1 / (reg * (t + 1))) and
/// shrink by (1 - eta_t * reg); the unregularised bias moves with
/// max_step / sqrt(1 + epoch).
LinearClassifier linear_classifier_train(const Matrix& features, std::span<const int> labels,
                                         int num_classes, const LinearClassifierConfig& cfg = {});

struct EvalReport {
  double top1 = 0.0;
  double top3 = 0.0;
  double top5 = 0.0;
  double knn_top1 = 0.0;
  std::map<std::size_t, double> recall_at;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]

  std::string to_json() const;
};

/// Classification report for `scores` (n x C) plus retrieval metrics for the
/// embedded test split and a 1-NN accuracy against the training split.
EvalReport make_report(const Matrix& scores, std::span<const int> labels, int num_classes,
                       const EmbeddingBatch& train, const EmbeddingBatch& test,
                       std::span<const std::size_t> recall_ks = std::span<const std::size_t>());

}  // namespace brm
