#include "brm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "brm/error.hpp"
#include "brm/pair_stats.hpp"

namespace brm {

namespace {

struct Problem {
  EncoderParams params;
  Matrix inputs;
  std::vector<int> labels;
  PairSets pairs;
  int bins;
};

// Value of the pipeline plus a fingerprint of its piecewise regime.
struct Evaluation {
  double risk;
  std::vector<std::int64_t> regime;
};

Evaluation evaluate(const Problem& p) {
  const ForwardResult fwd = forward(p.params, p.inputs);
  Evaluation ev{};
  if (p.params.activation == Activation::Relu) {
    for (std::size_t l = 0; l + 1 < fwd.cache.preacts.size(); ++l)
      for (double z : fwd.cache.preacts[l].flat()) ev.regime.push_back(z > 0.0 ? 1 : 0);
  }
  const DistanceMatrix dist = distance_matrix({fwd.embeddings, p.labels});
  std::vector<double> all;
  for (std::size_t i = 0; i < dist.size(); ++i)
    for (std::size_t j = i + 1; j < dist.size(); ++j) all.push_back(dist(i, j));
  const BinLocation loc = locate_bins(all, p.bins);
  for (std::size_t k = 0; k < all.size(); ++k) {
    ev.regime.push_back(loc.lower[k]);
    ev.regime.push_back(loc.frac[k] == 0.0 || loc.frac[k] == 1.0 ? 1 : 0);
    ev.regime.push_back(std::abs(all[k]) >= 1.0 ? 1 : 0);
  }
  ev.risk = brm_risk(build_histograms(dist, p.pairs, p.bins));
  return ev;
}

Problem make_problem(const GradcheckConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Problem p;
  p.bins = cfg.bins;
  p.params = init_params(rng, cfg.layers, InitScheme::He, cfg.activation);
  // Non-zero biases so the bias gradients are exercised away from symmetric points.
  for (auto& b : p.params.biases)
    for (double& v : b) v = 0.1 * rng.normal();
  p.inputs = Matrix(cfg.batch, cfg.layers.front());
  for (double& v : p.inputs.flat()) v = rng.normal();
  do {
    p.labels.clear();
    for (std::size_t i = 0; i < cfg.batch; ++i)
      p.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.classes))));
    p.pairs = enumerate_pairs(p.labels);
  } while (p.pairs.positives.empty() || p.pairs.negatives.empty());
  return p;
}

// Central differences over one block of values, folding into `max_rel`.
void check_block(Problem& p, std::span<double> values, std::span<const double> analytic,
                 const std::vector<std::int64_t>& base_regime, const GradcheckConfig& cfg,
                 SeedCheck& out, double& max_rel) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double saved = values[k];
    values[k] = saved + cfg.step;
    const Evaluation plus = evaluate(p);
    values[k] = saved - cfg.step;
    const Evaluation minus = evaluate(p);
    values[k] = saved;
    if (plus.regime != base_regime || minus.regime != base_regime) {
      ++out.excluded;
      continue;
    }
    const double numeric = (plus.risk - minus.risk) / (2.0 * cfg.step);
    const double a = analytic[k];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), cfg.abs_floor});
    max_rel = std::max(max_rel, rel);
    ++out.checked;
  }
}

}  // namespace

SeedCheck gradcheck_seed(const GradcheckConfig& cfg, std::uint64_t seed) {
  if (cfg.batch < 2 || cfg.classes < 2 || cfg.layers.empty()) {
    throw Error(ErrorKind::InvalidConfig, "gradcheck needs batch >= 2, classes >= 2 and layers");
  }
  if (!(cfg.step > 0.0) || !(cfg.tolerance > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "step and tolerance must be positive");
  }
  Problem p = make_problem(cfg, seed);
  const Evaluation base = evaluate(p);

  const ForwardResult fwd = forward(p.params, p.inputs);
  const RiskValue rv = brm_backward({fwd.embeddings, p.labels}, p.pairs, p.bins, cfg.fault);
  const EncoderGrads grads = backward(p.params, fwd.cache, rv.grad_embeddings);

  SeedCheck out;
  out.seed = seed;
  check_block(p, p.inputs.flat(), grads.inputs.flat(), base.regime, cfg, out, out.max_rel_inputs);
  auto blocks = param_blocks(p.params);
  const auto grad_blocks = param_blocks(grads.params);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    check_block(p, blocks[b], grad_blocks[b], base.regime, cfg, out, out.max_rel_params);
  }
  out.passed = out.checked > 0 && out.max_rel_inputs <= cfg.tolerance &&
               out.max_rel_params <= cfg.tolerance;
  return out;
}

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  GradcheckReport report;
  for (std::uint32_t s = 0; s < cfg.seeds; ++s) {
    SeedCheck sc = gradcheck_seed(cfg, cfg.first_seed + s);
    report.passed += sc.passed ? 1 : 0;
    report.max_rel_inputs = std::max(report.max_rel_inputs, sc.max_rel_inputs);
    report.max_rel_params = std::max(report.max_rel_params, sc.max_rel_params);
    report.seeds.push_back(sc);
  }
  const double needed = std::ceil(cfg.required_pass_fraction * static_cast<double>(cfg.seeds) - 1e-9);
  report.ok = cfg.seeds > 0 && static_cast<double>(report.passed) >= needed;
  return report;
}

}  // namespace brm
