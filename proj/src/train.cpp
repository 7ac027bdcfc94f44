#include "brm/train.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "brm/error.hpp"
#include "brm/eval.hpp"

namespace brm {

namespace {

// Stream ids for Rng::derive; epochs use their own index, so these sit far above
// any epoch count.
constexpr std::uint64_t kSplitStream = 1'000'001;
constexpr std::uint64_t kInitStream = 1'000'002;
constexpr int kMaxResamples = 10;

Matrix batch_inputs(const RunConfig& cfg, const Corpus& corpus, std::span<const std::size_t> rows,
                    Rng& rng) {
  const std::size_t dim = corpus.features.dim();
  Matrix x(rows.size(), dim);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (corpus.raster && cfg.augment.enabled) {
      const auto& r = *corpus.raster;
      const auto img = augment(r.image(rows[k]), r.side, r.side, cfg.augment, rng);
      raster_features(img, r.side, cfg.crop, x.row(k));
    } else {
      const auto src = corpus.features.vectors.row(rows[k]);
      std::copy(src.begin(), src.end(), x.row(k).begin());
    }
  }
  return x;
}

std::vector<int> labels_of(const FeatureDataset& ds, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(ds.labels[r]);
  return out;
}

}  // namespace

std::string EpochMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["loss"] = loss;
  j["lr"] = lr;
  j["val_recall_at_1"] = val_recall_at_1;
  j["val_knn_top1"] = val_knn_top1;
  if (val_head_top1) j["val_head_top1"] = *val_head_top1;
  return j.dump();
}

Corpus load_corpus(const RunConfig& cfg) {
  Corpus c;
  if (cfg.data.empty()) {
    Rng rng(cfg.seed);
    c.features = gen_synthetic(rng, cfg.synthetic.classes, cfg.synthetic.per_class,
                               cfg.synthetic.dim, cfg.synthetic.sigma);
  } else if (is_raster_file(cfg.data)) {
    c.raster = load_raster(cfg.data);
    c.features = raster_to_features(*c.raster, cfg.crop);
  } else {
    c.features = load_features_csv(cfg.data);
  }
  return c;
}

LossSpec loss_spec(const RunConfig& cfg, int num_classes) {
  LossSpec spec;
  spec.kind = cfg.loss;
  spec.bins = cfg.bins;
  spec.margins = cfg.margins;
  spec.ce_weight = cfg.ce_weight;
  spec.num_classes = num_classes;
  return spec;
}

Split train_val_split(const RunConfig& cfg, const Corpus& corpus) {
  Rng rng = Rng::derive(cfg.seed, kSplitStream);
  return stratified_split(corpus.features.labels, corpus.features.num_classes, cfg.val_fraction, rng);
}

Checkpoint initial_state(const RunConfig& cfg, const Corpus& corpus) {
  if (cfg.layers.front() != corpus.features.dim()) {
    throw Error(ErrorKind::InvalidConfig,
                "encoder input size " + std::to_string(cfg.layers.front()) +
                    " does not match data dimension " + std::to_string(corpus.features.dim()));
  }
  Rng rng = Rng::derive(cfg.seed, kInitStream);
  Checkpoint c;
  c.params = init_params(rng, cfg.layers, cfg.init, cfg.activation);
  c.adam_config = cfg.adam;
  c.adam = AdamState::for_blocks(param_blocks(std::as_const(c.params)));
  if (cfg.loss == LossKind::BrmCe) {
    c.head = LinearHead::zeros(c.params.output_dim(),
                               static_cast<std::size_t>(corpus.features.num_classes));
    c.head_adam = AdamState::for_blocks(param_blocks(std::as_const(*c.head)));
  }
  return c;
}

EmbeddingBatch embed_rows(const EncoderParams& params, const FeatureDataset& features,
                          std::span<const std::size_t> rows) {
  Matrix x(rows.size(), features.dim());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto src = features.vectors.row(rows[k]);
    std::copy(src.begin(), src.end(), x.row(k).begin());
  }
  return {embed(params, x), labels_of(features, rows)};
}

double evaluate_loss(const RunConfig& cfg, const Corpus& corpus, const Checkpoint& state,
                     std::span<const std::size_t> rows) {
  const EmbeddingBatch batch = embed_rows(state.params, corpus.features, rows);
  const LinearHead* head = state.head ? &*state.head : nullptr;
  return compute_loss(loss_spec(cfg, corpus.features.num_classes), batch, head).value;
}

TrainResult train(const RunConfig& cfg, const Corpus& corpus, std::optional<Checkpoint> resume_from,
                  const EpochObserver& observer) {
  cfg.validate();
  const FeatureDataset& data = corpus.features;
  const Split split = train_val_split(cfg, corpus);
  if (split.train.empty()) throw Error(ErrorKind::EmptyTrainSet, "training split is empty");
  if (split.val.size() < 2) throw Error(ErrorKind::BatchTooSmall, "validation split needs 2 samples");
  const ClassIndex index(data.labels, split.train, data.num_classes);
  const LossSpec spec = loss_spec(cfg, data.num_classes);

  Checkpoint state = resume_from ? std::move(*resume_from) : initial_state(cfg, corpus);
  if (state.params.input_dim() != data.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "checkpoint input size does not match data");
  }
  if (spec.uses_head() && !state.head) {
    throw Error(ErrorKind::InvalidConfig, "checkpoint has no classifier head for brm+ce");
  }
  state.adam_config = cfg.adam;

  const std::size_t steps =
      cfg.steps_per_epoch > 0
          ? cfg.steps_per_epoch
          : std::max<std::size_t>(1, (split.train.size() + cfg.batch.batch_size - 1) / cfg.batch.batch_size);

  TrainResult result;
  result.best_state = state;
  const std::vector<int> val_labels = labels_of(data, split.val);

  for (std::uint32_t epoch = state.epoch; epoch < cfg.max_epochs; ++epoch) {
    if (state.epoch > 0 && state.stale_epochs >= cfg.patience && cfg.patience > 0) {
      result.early_stopped = true;
      break;
    }
    Rng rng = Rng::derive(cfg.seed, epoch);
    const double lr = scheduled_lr(cfg.adam, epoch);
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      std::optional<LossOutput> out;
      ForwardResult fwd;
      for (int attempt = 0; attempt <= kMaxResamples && !out; ++attempt) {
        const auto rows = sample_batch(index, rng, cfg.batch);
        fwd = forward(state.params, batch_inputs(cfg, corpus, rows, rng));
        const EmbeddingBatch batch{fwd.embeddings, labels_of(data, rows)};
        try {
          out = compute_loss(spec, batch, state.head ? &*state.head : nullptr);
        } catch (const std::exception& e) {
          if (!is_degenerate_batch_error(e)) throw;
        }
      }
      if (!out) {
        throw Error(ErrorKind::DegenerateBatch,
                    "no usable batch after " + std::to_string(kMaxResamples) + " resamples");
      }
      loss_sum += out->value;
      EncoderGrads grads = backward(state.params, fwd.cache, out->grad_embeddings);
      adam_step(param_blocks(state.params), param_blocks(std::as_const(grads.params)), state.adam,
                cfg.adam, lr);
      if (out->grad_head) {
        adam_step(param_blocks(*state.head), param_blocks(std::as_const(*out->grad_head)),
                  state.head_adam, cfg.adam, lr);
      }
    }

    EpochMetrics m;
    m.epoch = epoch + 1;
    m.loss = loss_sum / static_cast<double>(steps);
    m.lr = lr;
    const EmbeddingBatch train_emb = embed_rows(state.params, data, split.train);
    const EmbeddingBatch val_emb = embed_rows(state.params, data, split.val);
    m.val_recall_at_1 = recall_at_k(val_emb, 1);
    m.val_knn_top1 = accuracy(knn_classify(train_emb, val_emb, 1), val_labels);
    if (state.head) {
      m.val_head_top1 = topk_accuracy(state.head->logits(val_emb.embeddings), val_labels, 1);
    }

    state.epoch = epoch + 1;
    const bool improved = m.val_recall_at_1 > state.best_metric;
    if (improved) {
      state.best_metric = m.val_recall_at_1;
      state.best_epoch = state.epoch;
      state.stale_epochs = 0;
    } else {
      ++state.stale_epochs;
    }
    if (improved) result.best_state = state;
    result.history.push_back(m);
    if (observer) observer(m, state, improved);
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace brm
