// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Tolerances are fixed here; see the README for what each line measures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "brm/brm_loss.hpp"
#include "brm/cli.hpp"
#include "brm/gradcheck.hpp"
#include "brm/linalg.hpp"
#include "brm/objective.hpp"
#include "brm/pair_stats.hpp"
#include "brm/rng.hpp"
#include "brm/train.hpp"

namespace fs = std::filesystem;
using namespace brm;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// The fixed-seed synthetic benchmark: C=10, 100/class, D_in=16, sigma=0.05,
// encoder [16,32,16], R=75.
RunConfig benchmark(std::uint32_t epochs) {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.synthetic = {10, 100, 16, 0.05};
  cfg.layers = {16, 32, 16};
  cfg.bins = 75;
  cfg.max_epochs = epochs;
  return cfg;
}

Vector random_simplex(Rng& rng, int n) {
  Vector v(n);
  double s = 0.0;
  for (double& x : v) s += (x = -std::log(1.0 - rng.uniform()));
  for (double& x : v) x /= s;
  return v;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int bins = 2 + static_cast<int>(rng.below(149));
    PairHistograms h;
    h.bins = bins;
    h.h_pos = random_simplex(rng, bins);
    h.h_neg = random_simplex(rng, bins);
    h.cum_neg = cumulative(h.h_neg);
    worst = std::max(worst, std::abs(brm_risk(h) - brm_risk_naive(h)));
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-12 && secs < 1.0,
         fmt("risk vs double sum on 1000 histograms, max |diff| %.3g (<= 1e-12), %.3f s (< 1 s)", worst, secs));
}

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckConfig gc;  // 100 seeds, n=16, D=8, R=15, h=1e-5, tol 1e-4
  const GradcheckReport r = run_gradcheck(gc);
  const double secs = seconds_since(t0);
  std::size_t excluded = 0, checked = 0;
  for (const auto& s : r.seeds) {
    excluded += s.excluded;
    checked += s.checked;
  }
  report(2, r.passed >= 95 && secs < 30.0,
         fmt("%zu/100 seeds within 1e-4 (need 95); max rel err inputs %.3g params %.3g; "
             "%zu coords checked, %zu excluded; %.2f s (< 30 s)",
             r.passed, r.max_rel_inputs, r.max_rel_params, checked, excluded, secs));
}

void criterion3() {
  Rng rng(3);
  double unity = 0.0;
  for (int t = 0; t < 100000; ++t) {
    const double d = rng.uniform(-1.0, 1.0);
    const int bins = 2 + static_cast<int>(rng.below(149));
    const Vector w = soft_histogram(std::span<const double>(&d, 1), bins);
    double s = 0.0;
    for (double x : w) s += x;
    unity = std::max(unity, std::abs(s - 1.0));
  }
  double mass = 0.0, last = 0.0;
  bool monotone = true, nonneg = true;
  for (int t = 0; t < 200; ++t) {
    EmbeddingBatch b;
    Matrix x(32, 8);
    for (double& v : x.flat()) v = rng.normal();
    for (std::size_t i = 0; i < 32; ++i) {
      const Vector u = l2_normalize(x.row(i));
      std::copy(u.begin(), u.end(), x.row(i).begin());
      b.labels.push_back(static_cast<int>(i % 4));
    }
    b.embeddings = x;
    const PairHistograms h = build_histograms(distance_matrix(b), enumerate_pairs(b.labels),
                                              2 + static_cast<int>(rng.below(149)));
    double sp = 0.0, sn = 0.0;
    for (int r = 0; r < h.bins; ++r) {
      sp += h.h_pos[r];
      sn += h.h_neg[r];
      nonneg = nonneg && h.h_pos[r] >= 0.0 && h.h_neg[r] >= 0.0;
      if (r > 0) monotone = monotone && h.cum_neg[r] >= h.cum_neg[r - 1];
    }
    mass = std::max({mass, std::abs(sp - 1.0), std::abs(sn - 1.0)});
    last = std::max(last, std::abs(h.cum_neg.back() - 1.0));
  }
  report(3, unity <= 1e-12 && mass <= 1e-12 && last <= 1e-12 && monotone && nonneg,
         fmt("partition of unity over 1e5 distances max err %.3g; histogram mass err %.3g; "
             "cum_neg final err %.3g, non-decreasing %s",
             unity, mass, last, monotone ? "yes" : "no"));
}

void criterion4() {
  // two antipodal clusters per pair of classes: positives at -1, negatives at +1
  Matrix sep(20, 4);
  std::vector<int> sep_labels;
  for (std::size_t i = 0; i < 20; ++i) {
    sep(i, 0) = i < 10 ? 1.0 : -1.0;
    sep_labels.push_back(i < 10 ? 0 : 1);
  }
  const EmbeddingBatch separated{sep, sep_labels};
  const double r_sep = brm_backward(separated, enumerate_pairs(sep_labels), 75).risk;

  Matrix same(20, 4);
  const Vector v = l2_normalize(Vector{0.3, -0.2, 0.9, 0.1});
  std::vector<int> labels;
  for (std::size_t i = 0; i < 20; ++i) {
    std::copy(v.begin(), v.end(), same.row(i).begin());
    labels.push_back(static_cast<int>(i % 3));
  }
  const EmbeddingBatch collapsed{same, labels};
  const double r_col = brm_backward(collapsed, enumerate_pairs(labels), 75).risk;
  report(4, r_sep <= 1e-9 && std::abs(r_col - 1.0) <= 1e-12,
         fmt("separated batch risk %.3g (<= 1e-9); collapsed batch risk 1 %+.3g (within 1e-12)", r_sep,
             r_col - 1.0));
}

void criterion5() {
  const RunConfig cfg = benchmark(200);
  const auto t0 = std::chrono::steady_clock::now();
  const Corpus corpus = load_corpus(cfg);
  const TrainResult r = train(cfg, corpus);
  const double secs = seconds_since(t0);
  const Split split = train_val_split(cfg, corpus);
  const double initial = evaluate_loss(cfg, corpus, initial_state(cfg, corpus), split.train);
  const double final_risk = evaluate_loss(cfg, corpus, r.final_state, split.train);
  const EpochMetrics& last = r.history.back();
  const bool ok = last.val_recall_at_1 >= 0.95 && last.val_knn_top1 >= 0.95 &&
                  final_risk <= 0.1 * initial && secs < 120.0;
  report(5, ok,
         fmt("%zu epochs%s; held-out recall@1 %.4f, 1-NN top-1 %.4f (>= 0.95); "
             "train-set risk %.3g -> %.3g (<= 0.1x); %.2f s (< 120 s)",
             r.history.size(), r.early_stopped ? " (early stop)" : "", last.val_recall_at_1,
             last.val_knn_top1, initial, final_risk, secs));
}

void criterion6() {
  double lo = 1.0, hi = 0.0;
  std::string rows;
  for (int bins : {25, 75, 150}) {
    RunConfig cfg = benchmark(200);
    cfg.bins = bins;
    const TrainResult r = train(cfg, load_corpus(cfg));
    const double recall = r.history.back().val_recall_at_1;
    lo = std::min(lo, recall);
    hi = std::max(hi, recall);
    rows += fmt(" R=%d:%.4f", bins, recall);
  }
  report(6, hi - lo <= 0.05, fmt("held-out recall@1%s; spread %.4f (<= 0.05)", rows.c_str(), hi - lo));
}

void criterion7() {
  bool ok = true;
  std::string rows;
  for (LossKind k : {LossKind::Contrastive, LossKind::Triplet, LossKind::Lifted}) {
    RunConfig cfg = benchmark(300);
    cfg.loss = k;
    const TrainResult r = train(cfg, load_corpus(cfg));
    const double recall = r.history.back().val_recall_at_1;
    ok = ok && recall >= 0.90;
    rows += fmt("%s recall@1 %.4f; ", std::string(to_string(k)).c_str(), recall);
  }
  RunConfig cfg = benchmark(300);
  cfg.loss = LossKind::BrmCe;
  cfg.ce_weight = 1.0;
  const Corpus corpus = load_corpus(cfg);
  const TrainResult r = train(cfg, corpus);
  const Split split = train_val_split(cfg, corpus);
  const double before = evaluate_loss(cfg, corpus, initial_state(cfg, corpus), split.train);
  const double after = evaluate_loss(cfg, corpus, r.final_state, split.train);
  const double head = r.history.back().val_head_top1.value_or(0.0);
  ok = ok && after < before && head >= 0.95;
  rows += fmt("brm+ce loss %.3g -> %.3g, head top-1 %.4f", before, after, head);
  report(7, ok, rows + " (baselines >= 0.90, head >= 0.95)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criterion8() {
  const fs::path root = fs::temp_directory_path() / "brm_acceptance_determinism";
  fs::remove_all(root);
  int codes = 0;
  for (const char* name : {"a", "b"}) {
    std::ostringstream out, err;
    codes += cli::run({"train", "--seed", "7", "--max-epochs", "200", "--out", (root / name).string()}, out, err);
  }
  bool same = codes == 0;
  std::string sizes;
  for (const char* f : {"metrics.jsonl", "best.ckpt", "final.ckpt"}) {
    const std::string a = slurp(root / "a" / f), b = slurp(root / "b" / f);
    same = same && !a.empty() && a == b;
    sizes += fmt(" %s %zu B", f, a.size());
  }
  fs::remove_all(root);
  report(8, same, "two seed-7 runs byte-identical:" + sizes);
}

// Finite differences through the normalisation so every perturbation stays on
// the sphere. A coordinate counts as sitting on a hinge or kink when the one-
// sided slopes disagree; those are excluded.
struct FdResult {
  double worst = 0.0;
  std::size_t checked = 0, excluded = 0;
};

FdResult fd_check(const LossSpec& spec, const Matrix& raw, const std::vector<int>& labels,
                  LinearHead* head) {
  auto normalise = [](Matrix m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const Vector u = l2_normalize(m.row(i));
      std::copy(u.begin(), u.end(), m.row(i).begin());
    }
    return m;
  };
  auto value = [&](const Matrix& r) { return compute_loss(spec, {normalise(r), labels}, head).value; };
  const LossOutput lo = compute_loss(spec, {normalise(raw), labels}, head);

  FdResult res;
  const double h = 1e-6;
  auto one = [&](double analytic, double f0, double up, double down) {
    const double fwd = (up - f0) / h, bwd = (f0 - down) / h;
    if (std::abs(fwd - bwd) > 1e-3 * std::max({std::abs(fwd), std::abs(bwd), 1e-3})) {
      ++res.excluded;
      return;
    }
    ++res.checked;
    const double numeric = (up - down) / (2 * h);
    res.worst = std::max(res.worst, std::abs(analytic - numeric) /
                                        std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
  };
  const double f0 = value(raw);
  Matrix p = raw;
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const Vector g = l2_normalize_vjp(raw.row(i), lo.grad_embeddings.row(i));
    for (std::size_t c = 0; c < raw.cols(); ++c) {
      const double saved = p(i, c);
      p(i, c) = saved + h;
      const double up = value(p);
      p(i, c) = saved - h;
      const double down = value(p);
      p(i, c) = saved;
      one(g[c], f0, up, down);
    }
  }
  if (head != nullptr) {
    auto blocks = param_blocks(*head);
    const auto grads = param_blocks(std::as_const(*lo.grad_head));
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (std::size_t k = 0; k < blocks[b].size(); ++k) {
        const double saved = blocks[b][k];
        blocks[b][k] = saved + h;
        const double up = value(raw);
        blocks[b][k] = saved - h;
        const double down = value(raw);
        blocks[b][k] = saved;
        one(grads[b][k], f0, up, down);
      }
  }
  return res;
}

void criterion9() {
  const LossKind kinds[] = {LossKind::Brm, LossKind::BrmCe, LossKind::Contrastive, LossKind::Triplet,
                            LossKind::Lifted};
  bool ok = true;
  std::string detail;
  for (LossKind k : kinds) {
    LossSpec spec;
    spec.kind = k;
    spec.bins = 15;
    spec.num_classes = 2;

    // perfect arrangement: classes antipodal, each class collapsed to a point.
    // The lifted objective sums exp(m - d) over every negative partner, so with
    // m = 1 it only reaches zero when each positive pair has at most e partners:
    // two positives and one negative.
    const std::size_t n = k == LossKind::Lifted ? 3 : 8;
    Matrix e(n, 3);
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = k == LossKind::Lifted ? (i < 2 ? 0 : 1) : static_cast<int>(i % 2);
      e(i, 0) = c == 0 ? 1.0 : -1.0;
      labels.push_back(c);
    }
    LinearHead head = LinearHead::zeros(3, 2);
    head.weights(0, 0) = 25.0;
    head.weights(0, 1) = -25.0;
    const double zero = compute_loss(spec, {e, labels}, k == LossKind::BrmCe ? &head : nullptr).value;

    // gradient check on random batches
    FdResult fd;
    Rng rng(900 + static_cast<int>(k));
    for (int t = 0; t < 5; ++t) {
      Matrix raw(12, 5);
      for (double& v : raw.flat()) v = rng.normal();
      std::vector<int> l(12);
      for (std::size_t i = 0; i < 12; ++i) l[i] = static_cast<int>(i % 3);
      LossSpec s = spec;
      s.num_classes = 3;
      LinearHead h{Matrix(5, 3), Vector(3)};
      for (double& v : h.weights.flat()) v = rng.normal();
      for (double& v : h.bias) v = rng.normal();
      const FdResult one = fd_check(s, raw, l, k == LossKind::BrmCe ? &h : nullptr);
      fd.worst = std::max(fd.worst, one.worst);
      fd.checked += one.checked;
      fd.excluded += one.excluded;
    }
    ok = ok && std::abs(zero) <= 1e-9 && fd.worst <= 1e-5 && fd.checked > 0;
    detail += fmt("%s zero %.2g fd %.2g (%zu/%zu); ", std::string(to_string(k)).c_str(), zero, fd.worst,
                  fd.checked, fd.checked + fd.excluded);
  }
  report(9, ok, detail + "(|zero| <= 1e-9, fd rel err <= 1e-5)");
}

}  // namespace

int main() {
  const std::function<void()> criteria[] = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                            criterion6, criterion7, criterion8, criterion9};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("FAIL criterion: unexpected exception: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
