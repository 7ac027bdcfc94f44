#include "brm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "brm/checkpoint.hpp"
#include "brm/config.hpp"
#include "brm/data.hpp"
#include "brm/eval.hpp"
#include "brm/gradcheck.hpp"
#include "brm/train.hpp"

namespace brm::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidConfig:
      return kBadConfig;
    case ErrorKind::Io:
    case ErrorKind::BadMagic:
    case ErrorKind::TruncatedFile:
    case ErrorKind::LabelOutOfRange:
    case ErrorKind::NotSquare:
      return kIoError;
    case ErrorKind::EmptyPairSet:
    case ErrorKind::NoValidTriplet:
    case ErrorKind::NoNegativePartner:
    case ErrorKind::InsufficientClassSamples:
    case ErrorKind::DegenerateBatch:
    case ErrorKind::BatchTooSmall:
    case ErrorKind::SingleClass:
    case ErrorKind::EmptyTrainSet:
    case ErrorKind::DegenerateNorm:
    case ErrorKind::NotNormalized:
      return kDegenerateData;
    case ErrorKind::DimensionMismatch:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::CacheMismatch:
      return kDimensionMismatch;
  }
  return kBadConfig;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

// Run-config flags shared by train, eval and the sweeps. Only flags given on
// the command line end up in the map, so they override the config file.
struct RunFlags {
  std::map<std::string, std::string> storage;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void attach(CLI::App* app, const std::vector<std::string>& skip = {}) {
    app->add_option("--config", config_path, "flat key = value config file");
    for (const auto& [key, help] : run_config_keys()) {
      if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
      options[key] = app->add_option("--" + key, storage[key], help);
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    KeyValues merged;
    if (!config_path.empty()) merged = load_config_file(config_path);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) merged[key] = storage.at(key);
    apply_settings(cfg, merged);
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f << text;
}

std::string config_header(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.effective()) c[k] = v;
  j["config"] = c;
  return j.dump();
}

// One training run with its files under cfg.out: metrics.jsonl, best.ckpt, final.ckpt.
TrainResult train_to_dir(const RunConfig& cfg) {
  cfg.validate();
  const Corpus corpus = load_corpus(cfg);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  std::optional<Checkpoint> resume;
  if (!cfg.resume.empty()) resume = load_checkpoint(cfg.resume);

  const fs::path metrics_path = dir / "metrics.jsonl";
  std::ofstream metrics;
  if (resume) {
    metrics.open(metrics_path, std::ios::binary | std::ios::app);
  } else {
    metrics.open(metrics_path, std::ios::binary | std::ios::trunc);
    if (metrics) metrics << config_header(cfg) << '\n';
  }
  if (!metrics) throw Error(ErrorKind::Io, "cannot write '" + metrics_path.string() + "'");

  TrainResult result = train(cfg, corpus, std::move(resume),
                             [&](const EpochMetrics& m, const Checkpoint& state, bool improved) {
                               metrics << m.to_json() << '\n';
                               metrics.flush();
                               if (improved) save_checkpoint(dir / "best.ckpt", state);
                             });
  save_checkpoint(dir / "final.ckpt", result.final_state);
  return result;
}

double best_recall(const TrainResult& r) {
  double best = 0.0;
  for (const auto& m : r.history) best = std::max(best, m.val_recall_at_1);
  return r.history.empty() ? std::max(0.0, r.final_state.best_metric) : best;
}

int cmd_gen_data(int classes, int per_class, std::size_t dim, double sigma, std::uint64_t seed,
                 const std::string& out_path, std::string format, std::size_t side,
                 std::ostream& out) {
  if (out_path.empty()) throw Error(ErrorKind::InvalidConfig, "--out is required");
  if (format.empty()) format = fs::path(out_path).extension() == ".skb" ? "skb" : "csv";
  Rng rng(seed);
  if (format == "csv") {
    const FeatureDataset ds = gen_synthetic(rng, classes, per_class, dim, sigma);
    save_features_csv(out_path, ds);
    out << "wrote " << ds.size() << " samples (" << ds.num_classes << " classes, dim " << ds.dim()
        << ") to " << out_path << '\n';
  } else if (format == "skb") {
    const RasterDataset ds = gen_synthetic_raster(rng, classes, per_class, side);
    save_raster(out_path, ds);
    out << "wrote " << ds.size() << " rasters (" << ds.num_classes << " classes, " << side << "x"
        << side << ") to " << out_path << '\n';
  } else {
    throw Error(ErrorKind::InvalidConfig, "--format must be csv or skb");
  }
  return kOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const TrainResult r = train_to_dir(cfg);
  const auto& last = r.history.empty() ? EpochMetrics{} : r.history.back();
  out << "trained " << r.history.size() << " epochs (total " << r.final_state.epoch << ")"
      << (r.early_stopped ? ", early stop" : "") << "; final loss " << fmt(last.loss)
      << ", val recall@1 " << fmt(last.val_recall_at_1) << ", best " << fmt(r.final_state.best_metric)
      << " at epoch " << r.final_state.best_epoch << '\n';
  return kOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path, const std::string& split_name,
             const LinearClassifierConfig& lc, const std::string& report_path, std::ostream& out) {
  if (checkpoint_path.empty()) throw Error(ErrorKind::InvalidConfig, "--checkpoint is required");
  if (split_name != "val" && split_name != "train" && split_name != "all") {
    throw Error(ErrorKind::InvalidConfig, "--split must be val, train or all");
  }
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Corpus corpus = load_corpus(cfg);
  if (ckpt.params.input_dim() != corpus.features.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                "checkpoint expects inputs of width " + std::to_string(ckpt.params.input_dim()) +
                    ", data has " + std::to_string(corpus.features.dim()));
  }
  const Split split = train_val_split(cfg, corpus);
  std::vector<std::size_t> all(corpus.features.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto& eval_rows = split_name == "val" ? split.val : split_name == "train" ? split.train : all;

  const EmbeddingBatch train_emb = embed_rows(ckpt.params, corpus.features, split.train);
  const EmbeddingBatch test_emb = embed_rows(ckpt.params, corpus.features, eval_rows);
  const LinearClassifier clf =
      linear_classifier_train(train_emb.embeddings, train_emb.labels, corpus.features.num_classes, lc);
  const EvalReport report = make_report(clf.scores(test_emb.embeddings), test_emb.labels,
                                        corpus.features.num_classes, train_emb, test_emb);
  const std::string json = report.to_json();
  if (!report_path.empty()) write_text(report_path, json + "\n");
  out << json << '\n';
  return kOk;
}

int cmd_gradcheck(const GradcheckConfig& gc, std::ostream& out) {
  const GradcheckReport r = run_gradcheck(gc);
  out << "gradcheck: " << r.passed << "/" << gc.seeds << " seeds within tolerance " << gc.tolerance
      << " (need " << fmt(gc.required_pass_fraction * 100.0) << "%)\n";
  out << "  max relative error, inputs: " << std::scientific << std::setprecision(3)
      << r.max_rel_inputs << '\n';
  out << "  max relative error, params: " << r.max_rel_params << std::defaultfloat << '\n';
  std::size_t checked = 0;
  std::size_t excluded = 0;
  for (const auto& s : r.seeds) {
    checked += s.checked;
    excluded += s.excluded;
    if (!s.passed) {
      out << "  seed " << s.seed << " failed: inputs " << s.max_rel_inputs << ", params "
          << s.max_rel_params << '\n';
    }
  }
  out << "  coordinates checked " << checked << ", excluded near kinks " << excluded << '\n';
  out << (r.ok ? "PASS" : "FAIL") << '\n';
  return r.ok ? kOk : kCheckFailed;
}

int cmd_sweep_bins(RunConfig base, const std::string& bins_text, std::ostream& out) {
  const std::vector<int> bins = parse_int_list(bins_text);
  for (int b : bins)
    if (b < 2) throw Error(ErrorKind::InvalidConfig, "every bin count must be >= 2");
  base.validate();
  std::string csv = "R,val_recall_at_1,final_loss\n";
  const fs::path root(base.out);
  for (int b : bins) {
    RunConfig cfg = base;
    cfg.bins = b;
    cfg.out = (root / ("R" + std::to_string(b))).string();
    const TrainResult r = train_to_dir(cfg);
    const double final_loss = r.history.empty() ? 0.0 : r.history.back().loss;
    csv += std::to_string(b) + "," + nlohmann::json(best_recall(r)).dump() + "," +
           nlohmann::json(final_loss).dump() + "\n";
  }
  write_text(root / "sweep_bins.csv", csv);
  out << csv;
  return kOk;
}

int cmd_compare_losses(RunConfig base, const std::string& losses_text, std::ostream& out) {
  std::vector<LossKind> losses;
  std::stringstream ss(losses_text);
  std::string item;
  while (std::getline(ss, item, ',')) losses.push_back(parse_loss(item));
  if (losses.empty()) throw Error(ErrorKind::InvalidConfig, "--losses is empty");
  base.validate();
  std::string csv = "loss,val_recall_at_1,epochs_to_converge\n";
  const fs::path root(base.out);
  for (LossKind kind : losses) {
    RunConfig cfg = base;
    cfg.loss = kind;
    std::string name(to_string(kind));
    std::replace(name.begin(), name.end(), '+', '_');
    cfg.out = (root / name).string();
    const TrainResult r = train_to_dir(cfg);
    csv += std::string(to_string(kind)) + "," + nlohmann::json(best_recall(r)).dump() + "," +
           std::to_string(r.final_state.best_epoch) + "\n";
  }
  write_text(root / "compare_losses.csv", csv);
  out << csv;
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metric learning with a Bayesian-risk embedding loss", "brm"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset (CSV or SKB1)");
  int gen_classes = 10;
  int gen_per_class = 100;
  std::size_t gen_dim = 16;
  double gen_sigma = 0.05;
  std::uint64_t gen_seed = 7;
  std::string gen_out;
  std::string gen_format;
  std::size_t gen_side = 28;
  gen->add_option("--classes", gen_classes, "number of classes");
  gen->add_option("--per-class", gen_per_class, "samples per class");
  gen->add_option("--dim", gen_dim, "feature dimension (csv)");
  gen->add_option("--sigma", gen_sigma, "per-coordinate noise (csv)");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--out", gen_out, "output file");
  gen->add_option("--format", gen_format, "csv | skb (default from extension)");
  gen->add_option("--side", gen_side, "raster side length (skb)");

  // train
  auto* train_cmd = app.add_subcommand("train", "train an encoder");
  RunFlags train_flags;
  train_flags.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  RunFlags eval_flags;
  eval_flags.attach(eval_cmd);
  std::string eval_ckpt;
  std::string eval_split = "val";
  std::string eval_report;
  LinearClassifierConfig lc;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file");
  eval_cmd->add_option("--split", eval_split, "val | train | all");
  eval_cmd->add_option("--report", eval_report, "also write the JSON report here");
  eval_cmd->add_option("--classifier-epochs", lc.epochs, "linear classifier epochs");
  eval_cmd->add_option("--reg", lc.reg, "linear classifier L2 weight");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the risk gradients");
  GradcheckConfig gc;
  std::string gc_layers = "8,16,8";
  std::string gc_activation = "relu";
  std::string gc_fault = "none";
  grad_cmd->add_option("--seeds", gc.seeds, "number of random configurations");
  grad_cmd->add_option("--seed", gc.first_seed, "first seed");
  grad_cmd->add_option("--batch", gc.batch, "samples per configuration");
  grad_cmd->add_option("--layers", gc_layers, "encoder layer sizes");
  grad_cmd->add_option("--activation", gc_activation, "relu | tanh");
  grad_cmd->add_option("--classes", gc.classes, "label alphabet size");
  grad_cmd->add_option("--bins", gc.bins, "histogram bins");
  grad_cmd->add_option("--step", gc.step, "finite-difference step h");
  grad_cmd->add_option("--tolerance", gc.tolerance, "relative error tolerance");
  grad_cmd->add_option("--pass-fraction", gc.required_pass_fraction, "fraction of seeds that must pass");
  grad_cmd->add_option("--inject-fault", gc_fault, "none | neg-hist-sign (checker self-test)");
  std::string gc_out;
  grad_cmd->add_option("--out", gc_out, "unused; accepted for flag uniformity");

  // sweeps
  auto* sweep_cmd = app.add_subcommand("sweep-bins", "train once per bin count");
  RunFlags sweep_flags;
  sweep_flags.attach(sweep_cmd, {"bins"});
  std::string sweep_bins = "25,75,150";
  sweep_cmd->add_option("--bins", sweep_bins, "comma-separated bin counts");

  auto* cmp_cmd = app.add_subcommand("compare-losses", "train once per loss");
  RunFlags cmp_flags;
  cmp_flags.attach(cmp_cmd, {"loss"});
  std::string cmp_losses = "brm,brm+ce,contrastive,triplet,lifted";
  cmp_cmd->add_option("--losses", cmp_losses, "comma-separated losses");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadConfig;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_data(gen_classes, gen_per_class, gen_dim, gen_sigma, gen_seed, gen_out,
                          gen_format, gen_side, out);
    }
    if (train_cmd->parsed()) return cmd_train(train_flags.resolve(), out);
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_flags.resolve(), eval_ckpt, eval_split, lc, eval_report, out);
    }
    if (grad_cmd->parsed()) {
      gc.layers = parse_size_list(gc_layers);
      gc.activation = parse_activation(gc_activation);
      if (gc_fault == "none") gc.fault = BackwardFault::None;
      else if (gc_fault == "neg-hist-sign") gc.fault = BackwardFault::FlipNegativeHistogramGrad;
      else throw Error(ErrorKind::InvalidConfig, "unknown fault '" + gc_fault + "'");
      return cmd_gradcheck(gc, out);
    }
    if (sweep_cmd->parsed()) return cmd_sweep_bins(sweep_flags.resolve(), sweep_bins, out);
    if (cmp_cmd->parsed()) return cmd_compare_losses(cmp_flags.resolve(), cmp_losses, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kBadConfig;
}

}  // namespace brm::cli
