#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "brm/checkpoint.hpp"
#include "brm/config.hpp"
#include "brm/data.hpp"
#include "brm/objective.hpp"

namespace brm {

/// Training data in encoder-ready form. For raster data `features` holds the
/// un-augmented centre crops and `raster` the source images for augmentation.
struct Corpus {
  FeatureDataset features;
  std::optional<RasterDataset> raster;
};

/// The dataset named by the config, or the seeded synthetic benchmark.
Corpus load_corpus(const RunConfig& cfg);

struct EpochMetrics {
  std::uint32_t epoch = 0;  // 1-based count of completed epochs
  double loss = 0.0;        // mean batch loss over the epoch
  double lr = 0.0;
  double val_recall_at_1 = 0.0;
  double val_knn_top1 = 0.0;
  std::optional<double> val_head_top1;  // brm+ce only

  std::string to_json() const;
};

struct TrainResult {
  Checkpoint final_state;
  Checkpoint best_state;
  std::vector<EpochMetrics> history;
  bool early_stopped = false;
};

/// Called after every epoch with the state at the end of that epoch.
using EpochObserver = std::function<void(const EpochMetrics&, const Checkpoint&, bool improved)>;

LossSpec loss_spec(const RunConfig& cfg, int num_classes);

/// Deterministic train/validation split for the config's seed.
Split train_val_split(const RunConfig& cfg, const Corpus& corpus);

/// Freshly initialised encoder (and head, for brm+ce) with zero optimiser state.
Checkpoint initial_state(const RunConfig& cfg, const Corpus& corpus);

/// Runs epochs until max_epochs or the early-stop patience is exhausted.
/// Epoch e draws all of its randomness from Rng::derive(seed, e), so resuming
/// from a checkpoint replays the same batches as an uninterrupted run.
TrainResult train(const RunConfig& cfg, const Corpus& corpus,
                  std::optional<Checkpoint> resume_from = std::nullopt,
                  const EpochObserver& observer = {});

/// Full-batch loss of `state` on the given rows.
double evaluate_loss(const RunConfig& cfg, const Corpus& corpus, const Checkpoint& state,
                     std::span<const std::size_t> rows);

/// Embeds the given rows (un-augmented).
EmbeddingBatch embed_rows(const EncoderParams& params, const FeatureDataset& features,
                          std::span<const std::size_t> rows);

}  // namespace brm
