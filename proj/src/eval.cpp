#include "brm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "brm/error.hpp"
#include "brm/linalg.hpp"
#include "brm/rng.hpp"
#include "brm/simd/kernels.hpp"

namespace brm {

namespace {

struct Neighbour {
  double dist;
  std::size_t index;
  bool operator<(const Neighbour& o) const noexcept {
    return dist < o.dist || (dist == o.dist && index < o.index);
  }
};

// The k nearest rows of `pool` to `query`, excluding `skip` (pass pool.rows() for none).
std::vector<Neighbour> nearest(const Matrix& pool, std::span<const double> query, std::size_t k,
                               std::size_t skip) {
  const auto& kern = simd::active();
  std::vector<Neighbour> all;
  all.reserve(pool.rows());
  for (std::size_t j = 0; j < pool.rows(); ++j) {
    if (j == skip) continue;
    all.push_back({-kern.dot(query.data(), pool.row(j).data(), query.size()), j});
  }
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  all.resize(k);
  return all;
}

void check_dims(const EmbeddingBatch& a, const EmbeddingBatch& b) {
  if (a.dim() != b.dim()) throw Error(ErrorKind::DimensionMismatch, "embedding widths differ");
  if (a.labels.size() != a.size() || b.labels.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch, "label count does not match embeddings");
  }
}

}  // namespace

std::vector<int> knn_classify(const EmbeddingBatch& train, const EmbeddingBatch& test, std::size_t k) {
  if (train.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "k-NN needs training rows");
  if (k < 1 || k > train.size()) throw Error(ErrorKind::InvalidConfig, "k must lie in [1, n_train]");
  check_dims(train, test);
  const int max_label = *std::max_element(train.labels.begin(), train.labels.end());
  std::vector<int> predictions;
  predictions.reserve(test.size());
  std::vector<std::size_t> votes(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& nb : nearest(train.embeddings, test.embeddings.row(i), k, train.size())) {
      ++votes[static_cast<std::size_t>(train.labels[nb.index])];
    }
    // max_element returns the first maximum, i.e. the smallest label.
    predictions.push_back(static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin()));
  }
  return predictions;
}

double topk_accuracy(const Matrix& scores, std::span<const int> labels, std::size_t k) {
  if (scores.rows() != labels.size()) {
    throw Error(ErrorKind::DimensionMismatch, "score rows must match label count");
  }
  if (k < 1 || k > scores.cols()) throw Error(ErrorKind::DimensionMismatch, "k must lie in [1, C]");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || y >= scores.cols()) throw Error(ErrorKind::LabelOutOfRange, "label vs C");
    const auto row = scores.row(i);
    std::size_t rank = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] > row[y] || (row[c] == row[y] && c < y)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double recall_at_k(const EmbeddingBatch& batch, std::size_t k) {
  if (batch.size() < 2) throw Error(ErrorKind::BatchTooSmall, "recall@K needs at least 2 samples");
  if (k < 1) throw Error(ErrorKind::InvalidConfig, "K must be >= 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (const auto& nb : nearest(batch.embeddings, batch.embeddings.row(i), k, i)) {
      if (batch.labels[nb.index] == batch.labels[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw Error(ErrorKind::DimensionMismatch, "prediction count");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Matrix LinearClassifier::scores(const Matrix& features) const {
  if (features.cols() != weights.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "feature width does not match classifier");
  }
  Matrix s = matmul(features, weights);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t c = 0; c < s.cols(); ++c) s(i, c) += bias[c];
  return s;
}

std::vector<int> LinearClassifier::predict(const Matrix& features) const {
  const Matrix s = scores(features);
  std::vector<int> out;
  out.reserve(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const auto row = s.row(i);
    out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

double LinearClassifier::hinge_loss(const Matrix& features, std::span<const int> labels) const {
  const Matrix s = scores(features);
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t c = 0; c < s.cols(); ++c) {
      const double y = static_cast<std::size_t>(labels[i]) == c ? 1.0 : -1.0;
      total += std::max(0.0, 1.0 - y * s(i, c));
    }
  return total / static_cast<double>(s.rows() * s.cols());
}

LinearClassifier linear_classifier_train(const Matrix& features, std::span<const int> labels,
                                         int num_classes, const LinearClassifierConfig& cfg) {
  if (features.rows() != labels.size()) throw Error(ErrorKind::DimensionMismatch, "labels vs features");
  if (features.rows() == 0) throw Error(ErrorKind::EmptyTrainSet, "no training samples");
  if (!all_finite(features.flat())) throw Error(ErrorKind::InvalidConfig, "non-finite features");
  if (!(cfg.reg > 0.0) || !(cfg.max_step > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "regularisation and step must be positive");
  }
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw Error(ErrorKind::LabelOutOfRange, "label outside [0, C)");
  const bool single = std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels[0]; });
  if (num_classes < 2 || single) throw Error(ErrorKind::SingleClass, "need at least two classes");

  const std::size_t d = features.cols();
  const auto c_count = static_cast<std::size_t>(num_classes);
  LinearClassifier model{Matrix(d, c_count), Vector(c_count, 0.0)};
  // Class-major copy of the weights keeps each one-vs-rest problem contiguous.
  Matrix w(c_count, d);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), 0);
  const auto& kern = simd::active();
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    const double bias_step = cfg.max_step / std::sqrt(1.0 + static_cast<double>(epoch));
    for (std::size_t i : order) {
      const double eta = std::min(cfg.max_step, 1.0 / (cfg.reg * static_cast<double>(t + 1)));
      const double shrink = 1.0 - eta * cfg.reg;
      const double* x = features.row(i).data();
      for (std::size_t c = 0; c < c_count; ++c) {
        const double y = static_cast<std::size_t>(labels[i]) == c ? 1.0 : -1.0;
        double* wc = w.row(c).data();
        const double margin = y * (kern.dot(wc, x, d) + model.bias[c]);
        kern.scale(shrink, wc, d);
        if (margin < 1.0) {
          kern.axpy(eta * y, x, wc, d);
          model.bias[c] += bias_step * y;
        }
      }
      ++t;
    }
  }
  model.weights = transpose(w);
  return model;
}

EvalReport make_report(const Matrix& scores, std::span<const int> labels, int num_classes,
                       const EmbeddingBatch& train, const EmbeddingBatch& test,
                       std::span<const std::size_t> recall_ks) {
  if (scores.cols() != static_cast<std::size_t>(num_classes)) {
    throw Error(ErrorKind::DimensionMismatch, "score width must equal class count");
  }
  EvalReport r;
  const std::size_t c = static_cast<std::size_t>(num_classes);
  r.confusion.assign(c, std::vector<std::uint64_t>(c, 0));
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    ++r.confusion[static_cast<std::size_t>(labels[i])][pred];
  }
  std::uint64_t trace = 0;
  r.per_class_accuracy.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    const std::uint64_t row_total = std::accumulate(r.confusion[k].begin(), r.confusion[k].end(), std::uint64_t{0});
    trace += r.confusion[k][k];
    if (row_total > 0) r.per_class_accuracy[k] = static_cast<double>(r.confusion[k][k]) / static_cast<double>(row_total);
  }
  r.top1 = labels.empty() ? 0.0 : static_cast<double>(trace) / static_cast<double>(labels.size());
  r.top3 = topk_accuracy(scores, labels, std::min<std::size_t>(3, c));
  r.top5 = topk_accuracy(scores, labels, std::min<std::size_t>(5, c));
  if (train.size() > 0 && test.size() > 0) {
    r.knn_top1 = accuracy(knn_classify(train, test, 1), test.labels);
  }
  static constexpr std::size_t kDefaultKs[] = {1, 2, 4, 8};
  const std::span<const std::size_t> ks = recall_ks.empty() ? std::span<const std::size_t>(kDefaultKs) : recall_ks;
  if (test.size() >= 2) {
    for (std::size_t k : ks) r.recall_at[k] = recall_at_k(test, k);
  }
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["top1"] = top1;
  j["top3"] = top3;
  j["top5"] = top5;
  j["knn_top1"] = knn_top1;
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  for (const auto& [k, v] : recall_at) recall[std::to_string(k)] = v;
  j["recall_at"] = recall;
  j["per_class_accuracy"] = per_class_accuracy;
  j["confusion"] = confusion;
  return j.dump();
}

}  // namespace brm
