#include "brm/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "brm/binary_io.hpp"
#include "brm/error.hpp"

namespace brm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorKind::InvalidConfig, "bad value '" + value + "' for '" + key + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end) bad_value(key, value);
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, value);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  bad_value(key, value);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    out.push_back(parse_number<std::size_t>("list", item));
  }
  if (out.empty()) bad_value("list", text);
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>("list", trim(item)));
  if (out.empty()) bad_value("list", text);
  return out;
}

const std::vector<std::pair<std::string, std::string>>& run_config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"seed", "master seed"},
      {"data", "dataset file (CSV or SKB1); empty = synthetic benchmark"},
      {"classes", "synthetic: number of classes"},
      {"per-class", "synthetic: samples per class"},
      {"dim", "synthetic: input dimension"},
      {"sigma", "synthetic: per-coordinate noise"},
      {"layers", "encoder layer sizes, input first (e.g. 16,32,16)"},
      {"activation", "relu | tanh"},
      {"init", "he | xavier"},
      {"loss", "brm | brm+ce | contrastive | triplet | lifted"},
      {"bins", "histogram bins R"},
      {"contrastive-margin", "contrastive margin"},
      {"triplet-margin", "triplet margin"},
      {"lifted-margin", "lifted-structured margin"},
      {"ce-weight", "cross-entropy weight for brm+ce"},
      {"batch-size", "batch size (= P * Q)"},
      {"classes-per-batch", "P: classes per batch"},
      {"samples-per-class", "Q: samples per class"},
      {"lr", "base learning rate"},
      {"gamma", "learning-rate decay factor"},
      {"decay-every", "epochs between learning-rate decays"},
      {"max-epochs", "epoch ceiling"},
      {"patience", "early-stop patience in epochs"},
      {"val-fraction", "held-out fraction"},
      {"steps-per-epoch", "batches per epoch (0 = n_train / batch)"},
      {"crop", "raster centre-crop fraction"},
      {"augment", "raster augmentation on/off"},
      {"rotation", "max rotation in degrees"},
      {"hflip", "horizontal flip probability"},
      {"translate", "max translation as a fraction of the side"},
      {"shear", "max shear in degrees"},
      {"jitter", "pixel jitter amplitude"},
      {"out", "output directory"},
      {"resume", "checkpoint to resume from"},
  };
  return keys;
}

KeyValues parse_config_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidConfig, "config line " + std::to_string(line_no) + " has no '='");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    kv[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return kv;
}

KeyValues load_config_file(const std::filesystem::path& path) {
  return parse_config_text(io::read_file(path.string()));
}

void apply_settings(RunConfig& cfg, const KeyValues& values) {
  bool batch_given = false;
  for (const auto& [key, v] : values) {
    if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "data") cfg.data = v;
    else if (key == "classes") cfg.synthetic.classes = parse_number<int>(key, v);
    else if (key == "per-class") cfg.synthetic.per_class = parse_number<int>(key, v);
    else if (key == "dim") cfg.synthetic.dim = parse_number<std::size_t>(key, v);
    else if (key == "sigma") cfg.synthetic.sigma = parse_number<double>(key, v);
    else if (key == "layers") cfg.layers = parse_size_list(v);
    else if (key == "activation") cfg.activation = parse_activation(v);
    else if (key == "init") {
      if (v == "he") cfg.init = InitScheme::He;
      else if (v == "xavier") cfg.init = InitScheme::Xavier;
      else bad_value(key, v);
    }
    else if (key == "loss") cfg.loss = parse_loss(v);
    else if (key == "bins") cfg.bins = parse_number<int>(key, v);
    else if (key == "contrastive-margin") cfg.margins.contrastive = parse_number<double>(key, v);
    else if (key == "triplet-margin") cfg.margins.triplet = parse_number<double>(key, v);
    else if (key == "lifted-margin") cfg.margins.lifted = parse_number<double>(key, v);
    else if (key == "ce-weight") cfg.ce_weight = parse_number<double>(key, v);
    else if (key == "batch-size") {
      cfg.batch.batch_size = parse_number<std::size_t>(key, v);
      batch_given = true;
    }
    else if (key == "classes-per-batch") cfg.batch.classes_per_batch = parse_number<std::size_t>(key, v);
    else if (key == "samples-per-class") cfg.batch.samples_per_class = parse_number<std::size_t>(key, v);
    else if (key == "lr") cfg.adam.base_lr = parse_number<double>(key, v);
    else if (key == "gamma") cfg.adam.gamma = parse_number<double>(key, v);
    else if (key == "decay-every") cfg.adam.decay_every = parse_number<std::uint32_t>(key, v);
    else if (key == "max-epochs") cfg.max_epochs = parse_number<std::uint32_t>(key, v);
    else if (key == "patience") cfg.patience = parse_number<std::uint32_t>(key, v);
    else if (key == "val-fraction") cfg.val_fraction = parse_number<double>(key, v);
    else if (key == "steps-per-epoch") cfg.steps_per_epoch = parse_number<std::uint32_t>(key, v);
    else if (key == "crop") cfg.crop = parse_number<double>(key, v);
    else if (key == "augment") cfg.augment.enabled = parse_bool(key, v);
    else if (key == "rotation") cfg.augment.rotation_max_deg = parse_number<double>(key, v);
    else if (key == "hflip") cfg.augment.hflip_prob = parse_number<double>(key, v);
    else if (key == "translate") cfg.augment.translate_fraction = parse_number<double>(key, v);
    else if (key == "shear") cfg.augment.shear_deg = parse_number<double>(key, v);
    else if (key == "jitter") cfg.augment.jitter_amplitude = parse_number<int>(key, v);
    else if (key == "out") cfg.out = v;
    else if (key == "resume") cfg.resume = v;
    else throw Error(ErrorKind::InvalidConfig, "unknown setting '" + key + "'");
  }
  if (!batch_given) cfg.batch.batch_size = cfg.batch.classes_per_batch * cfg.batch.samples_per_class;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (data.empty()) {
    if (synthetic.classes < 2) fail("synthetic benchmark needs at least 2 classes");
    if (synthetic.per_class < 2) fail("synthetic benchmark needs at least 2 samples per class");
    if (synthetic.dim < 1) fail("synthetic dimension must be positive");
    if (!(synthetic.sigma >= 0.0)) fail("sigma must be >= 0");
  } else if (!std::filesystem::exists(data)) {
    throw Error(ErrorKind::Io, "dataset '" + data + "' does not exist");
  }
  if (layers.empty() || layers.back() < 2) fail("encoder output dimension must be >= 2");
  for (std::size_t s : layers)
    if (s == 0) fail("layer sizes must be positive");
  if (bins < 2) fail("bins must be >= 2");
  margins.validate();
  if (!(ce_weight >= 0.0)) fail("ce-weight must be >= 0");
  batch.validate();
  if (!(adam.base_lr > 0.0)) fail("lr must be > 0");
  if (!(adam.gamma > 0.0 && adam.gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (adam.decay_every == 0) fail("decay-every must be >= 1");
  if (max_epochs == 0) fail("max-epochs must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("val-fraction must lie in (0, 1)");
  if (!(crop > 0.0 && crop <= 1.0)) fail("crop must lie in (0, 1]");
  augment.validate();
  if (!resume.empty() && !std::filesystem::exists(resume)) {
    throw Error(ErrorKind::Io, "checkpoint '" + resume + "' does not exist");
  }
}

KeyValues RunConfig::effective() const {
  KeyValues kv;
  kv["seed"] = std::to_string(seed);
  kv["data"] = data;
  if (data.empty()) {
    kv["classes"] = std::to_string(synthetic.classes);
    kv["per-class"] = std::to_string(synthetic.per_class);
    kv["dim"] = std::to_string(synthetic.dim);
    kv["sigma"] = format_double(synthetic.sigma);
  }
  kv["layers"] = join(layers);
  kv["activation"] = std::string(to_string(activation));
  kv["init"] = init == InitScheme::He ? "he" : "xavier";
  kv["loss"] = std::string(to_string(loss));
  kv["bins"] = std::to_string(bins);
  kv["contrastive-margin"] = format_double(margins.contrastive);
  kv["triplet-margin"] = format_double(margins.triplet);
  kv["lifted-margin"] = format_double(margins.lifted);
  kv["ce-weight"] = format_double(ce_weight);
  kv["batch-size"] = std::to_string(batch.batch_size);
  kv["classes-per-batch"] = std::to_string(batch.classes_per_batch);
  kv["samples-per-class"] = std::to_string(batch.samples_per_class);
  kv["lr"] = format_double(adam.base_lr);
  kv["gamma"] = format_double(adam.gamma);
  kv["decay-every"] = std::to_string(adam.decay_every);
  kv["max-epochs"] = std::to_string(max_epochs);
  kv["patience"] = std::to_string(patience);
  kv["val-fraction"] = format_double(val_fraction);
  kv["steps-per-epoch"] = std::to_string(steps_per_epoch);
  kv["crop"] = format_double(crop);
  kv["augment"] = augment.enabled ? "on" : "off";
  kv["rotation"] = format_double(augment.rotation_max_deg);
  kv["hflip"] = format_double(augment.hflip_prob);
  kv["translate"] = format_double(augment.translate_fraction);
  kv["shear"] = format_double(augment.shear_deg);
  kv["jitter"] = std::to_string(augment.jitter_amplitude);
  return kv;
}

}  // namespace brm
