#include "brm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "brm/binary_io.hpp"
#include "brm/error.hpp"
#include "brm/linalg.hpp"

namespace brm {

namespace {

constexpr std::string_view kRasterMagic = "SKB1";

void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

void draw_line(std::vector<std::uint8_t>& img, std::size_t side, double x0, double y0, double x1,
               double y1) {
  const double length = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * length)));
  const auto limit = static_cast<double>(side - 1);
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const double x = std::clamp(std::round(x0 + t * (x1 - x0)), 0.0, limit);
    const double y = std::clamp(std::round(y0 + t * (y1 - y0)), 0.0, limit);
    img[static_cast<std::size_t>(y) * side + static_cast<std::size_t>(x)] = 0;
  }
}

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

}  // namespace

FeatureDataset gen_synthetic(Rng& rng, int classes, int per_class, std::size_t dim, double sigma) {
  require(classes >= 2, ErrorKind::InvalidConfig, "need at least 2 classes");
  require(per_class >= 2, ErrorKind::InvalidConfig, "need at least 2 samples per class");
  require(dim >= 1, ErrorKind::InvalidConfig, "dimension must be positive");
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::InvalidConfig, "sigma must be >= 0");

  std::vector<Vector> means;
  for (int c = 0; c < classes; ++c) {
    Vector g(dim);
    do {
      for (double& x : g) x = rng.normal();
    } while (l2_norm(g) <= kNormEpsilon);
    means.push_back(l2_normalize(g));
  }

  FeatureDataset ds;
  ds.num_classes = classes;
  ds.vectors = Matrix(static_cast<std::size_t>(classes * per_class), dim);
  std::size_t row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class; ++k, ++row) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double noise = rng.normal();
        ds.vectors(row, d) = means[c][d] + sigma * noise;
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

RasterDataset gen_synthetic_raster(Rng& rng, int classes, int per_class, std::size_t side,
                                   double wobble) {
  require(classes >= 2 && classes <= 256, ErrorKind::InvalidConfig, "classes must be in [2, 256]");
  require(per_class >= 2, ErrorKind::InvalidConfig, "need at least 2 samples per class");
  require(side >= 4, ErrorKind::InvalidConfig, "raster side must be >= 4");

  constexpr int kStrokes = 3;
  const double lo = 0.15 * static_cast<double>(side - 1);
  const double hi = 0.85 * static_cast<double>(side - 1);
  std::vector<std::array<double, 4 * kStrokes>> prototypes(static_cast<std::size_t>(classes));
  for (auto& p : prototypes)
    for (double& v : p) v = rng.uniform(lo, hi);

  RasterDataset ds;
  ds.side = side;
  ds.num_classes = classes;
  ds.pixels.reserve(static_cast<std::size_t>(classes * per_class) * side * side);
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      std::vector<std::uint8_t> img(side * side, 255);
      const auto& p = prototypes[static_cast<std::size_t>(c)];
      for (int s = 0; s < kStrokes; ++s) {
        double e[4];
        for (int q = 0; q < 4; ++q) e[q] = p[4 * s + q] + rng.uniform(-wobble, wobble);
        draw_line(img, side, e[0], e[1], e[2], e[3]);
      }
      ds.pixels.insert(ds.pixels.end(), img.begin(), img.end());
      ds.labels.push_back(c);
    }
  }
  return ds;
}

std::string encode_features_csv(const FeatureDataset& ds) {
  std::string out = "label";
  for (std::size_t d = 0; d < ds.dim(); ++d) out += ",f" + std::to_string(d);
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += std::to_string(ds.labels[i]);
    for (double v : ds.vectors.row(i)) {
      out += ',';
      out += format_real(v);
    }
    out += '\n';
  }
  return out;
}

FeatureDataset decode_features_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::TruncatedFile, "empty feature file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line.rfind("label", 0) == 0, ErrorKind::BadMagic, "feature file header must start with 'label'");
  const auto dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  require(dim >= 1, ErrorKind::BadMagic, "feature header lists no columns");
  std::string expected = "label";
  for (std::size_t d = 0; d < dim; ++d) expected += ",f" + std::to_string(d);
  require(line == expected, ErrorKind::BadMagic, "unexpected feature header '" + line + "'");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    int label = 0;
    auto res = std::from_chars(p, end, label);
    require(res.ec == std::errc{}, ErrorKind::InvalidConfig,
            "line " + std::to_string(line_no) + ": bad label");
    require(label >= 0, ErrorKind::LabelOutOfRange, "line " + std::to_string(line_no) + ": negative label");
    p = res.ptr;
    for (std::size_t d = 0; d < dim; ++d) {
      require(p < end && *p == ',', ErrorKind::TruncatedFile,
              "line " + std::to_string(line_no) + ": too few columns");
      ++p;
      double v = 0.0;
      auto r = std::from_chars(p, end, v);
      require(r.ec == std::errc{} && std::isfinite(v), ErrorKind::InvalidConfig,
              "line " + std::to_string(line_no) + ": bad value");
      values.push_back(v);
      p = r.ptr;
    }
    require(p == end, ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": trailing data");
    labels.push_back(label);
  }
  require(!labels.empty(), ErrorKind::TruncatedFile, "feature file has no samples");
  FeatureDataset ds;
  ds.num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  ds.vectors = Matrix(labels.size(), dim, std::move(values));
  ds.labels = std::move(labels);
  return ds;
}

std::string encode_raster(const RasterDataset& ds) {
  require(ds.num_classes >= 1 && ds.num_classes <= 256, ErrorKind::InvalidConfig,
          "raster format stores at most 256 classes");
  require(ds.pixels.size() == ds.size() * ds.side * ds.side, ErrorKind::ShapeMismatch,
          "pixel buffer does not match n * side * side");
  io::Writer w;
  w.bytes(kRasterMagic);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.side));
  w.u32(static_cast<std::uint32_t>(ds.side));
  w.u32(static_cast<std::uint32_t>(ds.num_classes));
  w.bytes({reinterpret_cast<const char*>(ds.pixels.data()), ds.pixels.size()});
  for (int label : ds.labels) {
    require(label >= 0 && label < ds.num_classes, ErrorKind::LabelOutOfRange, "label out of range");
    w.u8(static_cast<std::uint8_t>(label));
  }
  return w.take();
}

RasterDataset decode_raster(const std::string& bytes) {
  io::Reader r(bytes);
  require(bytes.size() >= 4 && r.bytes(4) == kRasterMagic, ErrorKind::BadMagic, "not an SKB1 file");
  const std::uint32_t n = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  const std::uint32_t c = r.u32();
  require(n >= 1, ErrorKind::InvalidConfig, "raster file holds no images");
  require(h == w, ErrorKind::NotSquare, "raster images must be square");
  require(h >= 1, ErrorKind::InvalidConfig, "raster side must be positive");
  require(c >= 1 && c <= 256, ErrorKind::InvalidConfig, "class count must be in [1, 256]");
  const std::uint64_t pixel_bytes = std::uint64_t{n} * h * w;
  require(r.remaining() >= pixel_bytes + n, ErrorKind::TruncatedFile, "raster file is truncated");

  RasterDataset ds;
  ds.side = h;
  ds.num_classes = static_cast<int>(c);
  const auto raw = r.bytes(pixel_bytes);
  ds.pixels.assign(raw.begin(), raw.end());
  ds.labels.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const int label = r.u8();
    require(label < ds.num_classes, ErrorKind::LabelOutOfRange,
            "label " + std::to_string(label) + " >= class count " + std::to_string(c));
    ds.labels.push_back(label);
  }
  require(r.remaining() == 0, ErrorKind::InvalidConfig, "trailing bytes after raster data");
  return ds;
}

void save_features_csv(const std::filesystem::path& path, const FeatureDataset& ds) {
  io::write_file(path.string(), encode_features_csv(ds));
}

FeatureDataset load_features_csv(const std::filesystem::path& path) {
  return decode_features_csv(io::read_file(path.string()));
}

void save_raster(const std::filesystem::path& path, const RasterDataset& ds) {
  io::write_file(path.string(), encode_raster(ds));
}

RasterDataset load_raster(const std::filesystem::path& path) {
  return decode_raster(io::read_file(path.string()));
}

bool is_raster_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string_view(magic, 4) == kRasterMagic;
}

std::size_t crop_side(std::size_t side, double crop_fraction) {
  require(crop_fraction > 0.0 && crop_fraction <= 1.0, ErrorKind::InvalidConfig,
          "crop fraction must lie in (0, 1]");
  const auto c = static_cast<std::size_t>(std::lround(crop_fraction * static_cast<double>(side)));
  return std::clamp<std::size_t>(c, 1, side);
}

void raster_features(std::span<const std::uint8_t> image, std::size_t side, double crop_fraction,
                     std::span<double> out) {
  const std::size_t c = crop_side(side, crop_fraction);
  require(out.size() == c * c, ErrorKind::DimensionMismatch, "feature buffer size");
  const std::size_t off = (side - c) / 2;
  for (std::size_t y = 0; y < c; ++y)
    for (std::size_t x = 0; x < c; ++x)
      out[y * c + x] = static_cast<double>(image[(y + off) * side + (x + off)]) / 255.0;
}

FeatureDataset raster_to_features(const RasterDataset& ds, double crop_fraction) {
  const std::size_t c = crop_side(ds.side, crop_fraction);
  FeatureDataset out;
  out.num_classes = ds.num_classes;
  out.labels = ds.labels;
  out.vectors = Matrix(ds.size(), c * c);
  for (std::size_t i = 0; i < ds.size(); ++i)
    raster_features(ds.image(i), ds.side, crop_fraction, out.vectors.row(i));
  return out;
}

void AugmentConfig::validate() const {
  require(rotation_max_deg >= 0.0 && rotation_max_deg <= 180.0, ErrorKind::InvalidConfig,
          "rotation_max_deg must lie in [0, 180]");
  require(hflip_prob >= 0.0 && hflip_prob <= 1.0, ErrorKind::InvalidConfig,
          "hflip_prob must lie in [0, 1]");
  require(translate_fraction >= 0.0 && translate_fraction <= 0.5, ErrorKind::InvalidConfig,
          "translate fraction must lie in [0, 0.5]");
  require(shear_deg >= 0.0 && shear_deg < 90.0, ErrorKind::InvalidConfig,
          "shear must lie in [0, 90)");
  require(jitter_amplitude >= 0 && jitter_amplitude <= 255, ErrorKind::InvalidConfig,
          "jitter amplitude must lie in [0, 255]");
}

std::vector<std::uint8_t> augment(std::span<const std::uint8_t> image, std::size_t height,
                                  std::size_t width, const AugmentConfig& cfg, Rng& rng) {
  require(height == width, ErrorKind::NotSquare, "augment expects a square raster");
  require(image.size() == height * width, ErrorKind::ShapeMismatch, "image buffer size");
  cfg.validate();
  std::vector<std::uint8_t> out(image.begin(), image.end());
  if (!cfg.enabled) return out;

  const std::size_t side = width;
  const double max_shift = cfg.translate_fraction * static_cast<double>(side);
  const double tx = rng.uniform(-max_shift, max_shift);
  const double ty = rng.uniform(-max_shift, max_shift);
  const double shear = std::tan(rng.uniform(-cfg.shear_deg, cfg.shear_deg) * std::numbers::pi / 180.0);
  const double angle = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg) * std::numbers::pi / 180.0;
  const bool flip = rng.bernoulli(cfg.hflip_prob);

  // Forward map about the centre: p' = R (S p + t); resample through its inverse.
  // S = [[1, shear], [0, 1]], R = rotation by `angle`.
  const double cos_a = std::cos(angle);
  const double sin_a = std::sin(angle);
  const double centre = 0.5 * static_cast<double>(side - 1);
  const auto limit = static_cast<double>(side) - 0.5;
  std::vector<std::uint8_t> warped(side * side, 255);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double dx = static_cast<double>(x) - centre;
      const double dy = static_cast<double>(y) - centre;
      // undo rotation
      const double ux = cos_a * dx + sin_a * dy - tx;
      const double uy = -sin_a * dx + cos_a * dy - ty;
      // undo shear
      const double sx = ux - shear * uy + centre;
      const double sy = uy + centre;
      if (sx < -0.5 || sy < -0.5 || sx >= limit || sy >= limit) continue;
      const auto ix = static_cast<std::size_t>(std::floor(sx + 0.5));
      const auto iy = static_cast<std::size_t>(std::floor(sy + 0.5));
      warped[y * side + x] = image[iy * side + ix];
    }
  }
  out = std::move(warped);

  if (flip) {
    for (std::size_t y = 0; y < side; ++y) std::reverse(out.begin() + y * side, out.begin() + (y + 1) * side);
  }
  if (cfg.jitter_amplitude > 0) {
    const auto span = static_cast<std::uint64_t>(2 * cfg.jitter_amplitude + 1);
    for (auto& px : out) {
      const int noise = static_cast<int>(rng.below(span)) - cfg.jitter_amplitude;
      px = static_cast<std::uint8_t>(std::clamp(static_cast<int>(px) + noise, 0, 255));
    }
  }
  return out;
}

ClassIndex::ClassIndex(std::span<const int> labels, int num_classes)
    : members(static_cast<std::size_t>(std::max(num_classes, 0))) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes, ErrorKind::LabelOutOfRange, "label out of range");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
}

ClassIndex::ClassIndex(std::span<const int> labels, std::span<const std::size_t> subset,
                       int num_classes)
    : members(static_cast<std::size_t>(std::max(num_classes, 0))) {
  for (std::size_t i : subset) {
    require(i < labels.size(), ErrorKind::DimensionMismatch, "subset index out of range");
    require(labels[i] >= 0 && labels[i] < num_classes, ErrorKind::LabelOutOfRange, "label out of range");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
}

void BatchSpec::validate() const {
  require(classes_per_batch >= 1 && samples_per_class >= 1, ErrorKind::InvalidConfig,
          "P and Q must be positive");
  require(classes_per_batch * samples_per_class == batch_size, ErrorKind::InvalidConfig,
          "batch size must equal P * Q");
}

std::vector<std::size_t> sample_batch(const ClassIndex& index, Rng& rng, const BatchSpec& spec) {
  spec.validate();
  if (spec.needs_negatives && spec.classes_per_batch < 2) {
    throw Error(ErrorKind::InsufficientClassSamples, "negatives require at least 2 classes per batch");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < index.members.size(); ++c)
    if (index.members[c].size() >= spec.samples_per_class) eligible.push_back(c);
  if (eligible.size() < spec.classes_per_batch) {
    throw Error(ErrorKind::InsufficientClassSamples,
                std::to_string(eligible.size()) + " classes have >= " +
                    std::to_string(spec.samples_per_class) + " samples, need " +
                    std::to_string(spec.classes_per_batch));
  }
  // Partial Fisher-Yates: the first P entries become a uniform P-subset.
  for (std::size_t k = 0; k < spec.classes_per_batch; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(eligible.size() - k));
    std::swap(eligible[k], eligible[j]);
  }
  std::vector<std::size_t> batch;
  batch.reserve(spec.batch_size);
  for (std::size_t k = 0; k < spec.classes_per_batch; ++k) {
    std::vector<std::size_t> pool = index.members[eligible[k]];
    for (std::size_t q = 0; q < spec.samples_per_class; ++q) {
      const std::size_t j = q + static_cast<std::size_t>(rng.below(pool.size() - q));
      std::swap(pool[q], pool[j]);
      batch.push_back(pool[q]);
    }
  }
  return batch;
}

Split stratified_split(std::span<const int> labels, int num_classes, double val_fraction, Rng& rng) {
  require(val_fraction >= 0.0 && val_fraction < 1.0, ErrorKind::InvalidConfig,
          "validation fraction must lie in [0, 1)");
  ClassIndex index(labels, num_classes);
  Split split;
  for (auto members : index.members) {
    rng.shuffle(members);
    const std::size_t m = members.size();
    auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(m)));
    if (val_fraction > 0.0 && m >= 2) n_val = std::clamp<std::size_t>(n_val, 1, m - 1);
    if (m < 2) n_val = 0;
    split.val.insert(split.val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

FeatureDataset subset(const FeatureDataset& ds, std::span<const std::size_t> indices) {
  FeatureDataset out;
  out.num_classes = ds.num_classes;
  out.vectors = Matrix(indices.size(), ds.dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] < ds.size(), ErrorKind::DimensionMismatch, "subset index out of range");
    std::copy_n(ds.vectors.row(indices[k]).begin(), ds.dim(), out.vectors.row(k).begin());
    out.labels.push_back(ds.labels[indices[k]]);
  }
  return out;
}

}  // namespace brm
