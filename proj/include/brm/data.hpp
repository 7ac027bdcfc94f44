#pragma once

// Datasets and the two on-disk formats.
//
// Feature file (CSV, UTF-8): header "label,f0,...,f{D-1}", then one row per
// sample: integer label followed by D reals in shortest round-trip form.
//
// Raster file (SKB1): magic "SKB1", little-endian u32 n, h, w, C, then n*h*w
// pixel bytes (row-major, 255 = background), then n label bytes. C <= 256.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "brm/matrix.hpp"
#include "brm/rng.hpp"

namespace brm {

struct FeatureDataset {
  Matrix vectors;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
};

struct RasterDataset {
  std::size_t side = 0;
  std::vector<std::uint8_t> pixels;  // n * side * side
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::string> class_names;  // optional, not stored in SKB1

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * side * side, side * side};
  }
};

/// Class means uniform on the unit sphere in R^dim; each sample is its mean plus
/// N(0, sigma^2) noise per coordinate. Samples are grouped by class.
FeatureDataset gen_synthetic(Rng& rng, int classes, int per_class, std::size_t dim, double sigma);

/// Sketch-like rasters: every class is a few random strokes; samples perturb
/// the stroke endpoints by up to `wobble` pixels.
RasterDataset gen_synthetic_raster(Rng& rng, int classes, int per_class, std::size_t side,
                                   double wobble = 1.5);

std::string encode_features_csv(const FeatureDataset& ds);
FeatureDataset decode_features_csv(const std::string& text);
std::string encode_raster(const RasterDataset& ds);
RasterDataset decode_raster(const std::string& bytes);

void save_features_csv(const std::filesystem::path& path, const FeatureDataset& ds);
FeatureDataset load_features_csv(const std::filesystem::path& path);
void save_raster(const std::filesystem::path& path, const RasterDataset& ds);
RasterDataset load_raster(const std::filesystem::path& path);

/// True when the file starts with the SKB1 magic.
bool is_raster_file(const std::filesystem::path& path);

/// Side length of the centre crop: round(crop_fraction * side), at least 1.
std::size_t crop_side(std::size_t side, double crop_fraction);

/// Centre crop of one image, flattened and scaled to [0, 1].
void raster_features(std::span<const std::uint8_t> image, std::size_t side, double crop_fraction,
                     std::span<double> out);

FeatureDataset raster_to_features(const RasterDataset& ds, double crop_fraction);

struct AugmentConfig {
  bool enabled = true;
  double rotation_max_deg = 10.0;
  double hflip_prob = 0.5;
  double translate_fraction = 0.05;
  double shear_deg = 5.0;
  int jitter_amplitude = 8;

  void validate() const;
};

/// Random affine (translate + shear), random rotation, horizontal flip and
/// per-pixel jitter, in that order, with nearest-neighbour resampling.
/// Pixels mapped from outside the frame become background (255).
std::vector<std::uint8_t> augment(std::span<const std::uint8_t> image, std::size_t height,
                                  std::size_t width, const AugmentConfig& cfg, Rng& rng);

/// Sample indices grouped by class.
struct ClassIndex {
  std::vector<std::vector<std::size_t>> members;

  ClassIndex(std::span<const int> labels, int num_classes);
  ClassIndex(std::span<const int> labels, std::span<const std::size_t> subset, int num_classes);
};

struct BatchSpec {
  std::size_t batch_size = 64;
  std::size_t classes_per_batch = 8;   // P
  std::size_t samples_per_class = 8;   // Q
  bool needs_negatives = true;

  void validate() const;
};

/// P distinct classes chosen uniformly among those with at least Q samples,
/// then Q samples from each without replacement. Indices grouped by class.
std::vector<std::size_t> sample_batch(const ClassIndex& index, Rng& rng, const BatchSpec& spec);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Per-class shuffled split; each class with >= 2 samples keeps at least one
/// sample on each side.
Split stratified_split(std::span<const int> labels, int num_classes, double val_fraction, Rng& rng);

FeatureDataset subset(const FeatureDataset& ds, std::span<const std::size_t> indices);

}  // namespace brm
