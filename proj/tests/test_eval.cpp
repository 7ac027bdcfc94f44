#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "brm/error.hpp"
#include "brm/eval.hpp"
#include "brm/linalg.hpp"
#include "oracles.hpp"

using namespace brm;

namespace {

EmbeddingBatch random_batch(Rng& rng, std::size_t n, std::size_t d, int classes) {
  EmbeddingBatch b{oracle::unit_rows(oracle::random_matrix(rng, n, d)), {}};
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.below(classes)));
  return b;
}

std::vector<int> knn_oracle(const EmbeddingBatch& train, const EmbeddingBatch& test, std::size_t k) {
  std::vector<int> out;
  for (std::size_t q = 0; q < test.size(); ++q) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < train.size(); ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < train.dim(); ++c) s += train.embeddings(i, c) * test.embeddings(q, c);
      d.emplace_back(-s, i);
    }
    std::sort(d.begin(), d.end());
    std::map<int, int> votes;
    for (std::size_t t = 0; t < k; ++t) ++votes[train.labels[d[t].second]];
    int best = -1, best_votes = -1;
    for (auto [label, v] : votes)
      if (v > best_votes) {
        best = label;
        best_votes = v;
      }
    out.push_back(best);
  }
  return out;
}

double recall_oracle(const EmbeddingBatch& b, std::size_t k) {
  int hits = 0;
  for (std::size_t q = 0; q < b.size(); ++q) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (i == q) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < b.dim(); ++c) s += b.embeddings(i, c) * b.embeddings(q, c);
      d.emplace_back(-s, i);
    }
    std::sort(d.begin(), d.end());
    bool hit = false;
    for (std::size_t t = 0; t < std::min(k, d.size()); ++t) hit = hit || b.labels[d[t].second] == b.labels[q];
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(b.size());
}

// Gaussian blobs around well separated centres, C classes in dimension d.
void blobs(Rng& rng, int classes, std::size_t per_class, std::size_t d, double sigma, Matrix& x,
           std::vector<int>& y) {
  const Matrix centres = oracle::random_matrix(rng, classes, d);
  x = Matrix(classes * per_class, d);
  y.clear();
  std::size_t row = 0;
  for (int c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      for (std::size_t j = 0; j < d; ++j) x(row, j) = 3.0 * centres(c, j) + sigma * rng.normal();
      y.push_back(c);
    }
}

}  // namespace

TEST_CASE("knn examples") {
  EmbeddingBatch train{Matrix(3, 2, {1, 0, 0, 1, -1, 0}), {4, 5, 6}};
  EmbeddingBatch test{Matrix(1, 2, {0, 1}), {0}};
  CHECK(knn_classify(train, test, 1) == std::vector<int>{5});

  Rng rng(61);
  const EmbeddingBatch tr = random_batch(rng, 15, 4, 3);
  const EmbeddingBatch te = random_batch(rng, 6, 4, 3);
  std::map<int, int> counts;
  for (int l : tr.labels) ++counts[l];
  int majority = -1, best = -1;
  for (auto [l, c] : counts)
    if (c > best) {
      majority = l;
      best = c;
    }
  for (int p : knn_classify(tr, te, 15)) CHECK(p == majority);

  CHECK_THROWS_AS(knn_classify(EmbeddingBatch{Matrix(0, 4), {}}, te, 1), Error);
}

TEST_CASE("knn matches the full-sort oracle and is rotation invariant") {
  Rng rng(62);
  for (int t = 0; t < 20; ++t) {
    const EmbeddingBatch tr = random_batch(rng, 30, 5, 4);
    const EmbeddingBatch te = random_batch(rng, 10, 5, 4);
    for (std::size_t k : {1u, 3u, 5u}) CHECK(knn_classify(tr, te, k) == knn_oracle(tr, te, k));
  }
  // rotate both sets by a random orthogonal map (Householder reflection)
  const EmbeddingBatch tr = random_batch(rng, 30, 5, 4);
  const EmbeddingBatch te = random_batch(rng, 10, 5, 4);
  const Vector v = l2_normalize(oracle::random_matrix(rng, 1, 5).row(0));
  Matrix h = Matrix::identity(5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) h(i, j) -= 2 * v[i] * v[j];
  const EmbeddingBatch rtr{matmul(tr.embeddings, h), tr.labels};
  const EmbeddingBatch rte{matmul(te.embeddings, h), te.labels};
  CHECK(knn_classify(tr, te, 3) == knn_classify(rtr, rte, 3));
}

TEST_CASE("topk accuracy") {
  const Matrix one_hot(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const std::vector<int> labels{0, 1, 2};
  CHECK(topk_accuracy(one_hot, labels, 1) == 1.0);
  Rng rng(63);
  const Matrix s = oracle::random_matrix(rng, 40, 6);
  std::vector<int> l(40);
  for (int& x : l) x = static_cast<int>(rng.below(6));
  CHECK(topk_accuracy(s, l, 6) == 1.0);
  for (std::size_t k = 1; k <= 6; ++k) {
    int hits = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      std::vector<std::pair<double, int>> row;
      for (int c = 0; c < 6; ++c) row.emplace_back(-s(i, c), c);
      std::sort(row.begin(), row.end());
      for (std::size_t t = 0; t < k; ++t) hits += row[t].second == l[i];
    }
    CHECK(topk_accuracy(s, l, k) == static_cast<double>(hits) / 40.0);
  }
  CHECK_THROWS_AS(topk_accuracy(s, std::vector<int>(3, 0), 1), Error);
  // ties go to the lower class index
  CHECK(topk_accuracy(Matrix(1, 3, {1, 1, 1}), std::vector<int>{0}, 1) == 1.0);
  CHECK(topk_accuracy(Matrix(1, 3, {1, 1, 1}), std::vector<int>{1}, 1) == 0.0);
}

TEST_CASE("recall at K") {
  EmbeddingBatch two{Matrix(2, 2, {1, 0, 0, 1}), {3, 3}};
  CHECK(recall_at_k(two, 1) == 1.0);
  EmbeddingBatch singles{Matrix(3, 2, {1, 0, 0, 1, -1, 0}), {0, 1, 2}};
  CHECK(recall_at_k(singles, 2) == 0.0);
  CHECK_THROWS_AS(recall_at_k(EmbeddingBatch{Matrix(1, 2, {1, 0}), {0}}, 1), Error);

  Rng rng(64);
  for (int t = 0; t < 10; ++t) {
    const EmbeddingBatch b = random_batch(rng, 25, 4, 5);
    double prev = 0.0;
    for (std::size_t k : {1u, 2u, 4u, 8u}) {
      const double r = recall_at_k(b, k);
      CHECK(r == recall_oracle(b, k));
      CHECK(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("linear classifier: separable 1D") {
  const Matrix x(6, 1, {-3, -2, -1.5, 1.5, 2, 3});
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const LinearClassifier clf = linear_classifier_train(x, y, 2, {200, 1e-4, 0.1, 1});
  CHECK(accuracy(clf.predict(x), y) == 1.0);
  CHECK(clf.hinge_loss(x, y) <= 1e-3);

  CHECK_THROWS_AS(linear_classifier_train(x, std::vector<int>(6, 1), 2), Error);
}

TEST_CASE("linear classifier: heavy regularisation") {
  Rng rng(65);
  Matrix x;
  std::vector<int> y;
  blobs(rng, 3, 20, 4, 0.3, x, y);
  y[0] = 0;  // keep class sizes unequal so the majority is unique
  for (std::size_t i = 20; i < 30; ++i) y[i] = 0;
  const LinearClassifier clf = linear_classifier_train(x, y, 3, {100, 1e3, 0.1, 2});
  double wmax = 0.0;
  for (double w : clf.weights.flat()) wmax = std::max(wmax, std::abs(w));
  CHECK(wmax < 1e-2);
  const double acc = accuracy(clf.predict(x), y);
  CHECK(acc <= 30.0 / 60.0 + 1e-12);
}

TEST_CASE("linear classifier: held-out blobs") {
  Rng rng(66);
  Matrix xtr, xte;
  std::vector<int> ytr, yte;
  Rng shared(99);
  // same centres for both splits
  const Matrix centres = oracle::random_matrix(shared, 4, 6);
  auto draw = [&](Matrix& x, std::vector<int>& y) {
    x = Matrix(200, 6);
    y.clear();
    for (std::size_t i = 0; i < 200; ++i) {
      const int c = static_cast<int>(i % 4);
      for (std::size_t j = 0; j < 6; ++j) x(i, j) = 3.0 * centres(c, j) + 0.1 * rng.normal();
      y.push_back(c);
    }
  };
  draw(xtr, ytr);
  draw(xte, yte);
  const LinearClassifier clf = linear_classifier_train(xtr, ytr, 4, {100, 1e-4, 0.1, 3});
  CHECK(accuracy(clf.predict(xte), yte) >= 0.99);
  // deterministic given the seed
  const LinearClassifier again = linear_classifier_train(xtr, ytr, 4, {100, 1e-4, 0.1, 3});
  CHECK(again.weights == clf.weights);
}

TEST_CASE("report invariants and JSON") {
  Rng rng(67);
  const Matrix s = oracle::random_matrix(rng, 30, 4);
  std::vector<int> l(30);
  for (int& x : l) x = static_cast<int>(rng.below(4));
  const EmbeddingBatch tr = random_batch(rng, 20, 3, 4);
  EmbeddingBatch te = random_batch(rng, 30, 3, 4);
  te.labels = l;
  const EvalReport r = make_report(s, l, 4, tr, te);
  std::uint64_t trace = 0, total = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    trace += r.confusion[c][c];
    std::uint64_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    CHECK(row == static_cast<std::uint64_t>(std::count(l.begin(), l.end(), static_cast<int>(c))));
    total += row;
  }
  CHECK(static_cast<double>(trace) / total == r.top1);
  CHECK(r.top1 == topk_accuracy(s, l, 1));
  CHECK(r.top1 <= r.top3);
  CHECK(r.top3 <= r.top5);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j.contains("top1"));
  CHECK(j.contains("recall_at"));
  CHECK(j.contains("confusion"));
  CHECK(j["confusion"].size() == 4);
}
