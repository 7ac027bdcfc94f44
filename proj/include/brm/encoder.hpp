#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "brm/matrix.hpp"
#include "brm/rng.hpp"

namespace brm {

enum class Activation : std::uint32_t { Relu = 0, Tanh = 1 };
enum class InitScheme { He, Xavier };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a) noexcept;

/// Feedforward embedding network. Layer l maps rows by x W_l + b_l with
/// W_l of shape sizes[l] x sizes[l+1]; every layer but the last is followed by
/// the activation, and the output rows are L2-normalised. A single-entry size
/// list is the identity map followed by normalisation.
struct EncoderParams {
  std::vector<std::size_t> sizes;
  Activation activation = Activation::Relu;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  std::size_t input_dim() const noexcept { return sizes.front(); }
  std::size_t output_dim() const noexcept { return sizes.back(); }
  std::size_t layers() const noexcept { return weights.size(); }

  /// Zero-valued parameters of the same shape.
  EncoderParams zeros_like() const;
};

/// Mutable views of every parameter block in the fixed order W0, b0, W1, b1, ...
std::vector<std::span<double>> param_blocks(EncoderParams& p);
std::vector<std::span<const double>> param_blocks(const EncoderParams& p);
std::size_t param_count(const EncoderParams& p);

EncoderParams init_params(Rng& rng, std::span<const std::size_t> sizes,
                          InitScheme scheme = InitScheme::He,
                          Activation activation = Activation::Relu);

struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> preacts;      // affine output of each layer
  Matrix raw_output;                // last affine output (before normalisation)
};

struct ForwardResult {
  Matrix embeddings;
  ForwardCache cache;
};

ForwardResult forward(const EncoderParams& params, const Matrix& inputs);

/// Embeddings only.
Matrix embed(const EncoderParams& params, const Matrix& inputs);

struct EncoderGrads {
  EncoderParams params;  // same shapes as the network
  Matrix inputs;         // d(loss)/d(inputs)
};

EncoderGrads backward(const EncoderParams& params, const ForwardCache& cache,
                      const Matrix& grad_embeddings);

/// Linear classifier head on embeddings (logits = x W + b), trained jointly when
/// cross-entropy is part of the objective.
struct LinearHead {
  Matrix weights;  // D x C
  Vector bias;     // C

  static LinearHead zeros(std::size_t dim, std::size_t classes);
  std::size_t classes() const noexcept { return bias.size(); }
  Matrix logits(const Matrix& embeddings) const;
};

std::vector<std::span<double>> param_blocks(LinearHead& h);
std::vector<std::span<const double>> param_blocks(const LinearHead& h);

struct HeadGrads {
  LinearHead head;
  Matrix embeddings;
};

HeadGrads head_backward(const LinearHead& head, const Matrix& embeddings,
                        const Matrix& grad_logits);

std::vector<std::span<const double>> as_const(const std::vector<std::span<double>>& blocks);

struct AdamConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double gamma = 0.5;        // step-decay factor
  std::uint32_t decay_every = 50;  // epochs between decays
};

/// lr(epoch) = base * gamma^floor(epoch / decay_every)
double scheduled_lr(const AdamConfig& cfg, std::uint32_t epoch);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Vector> m;
  std::vector<Vector> v;

  /// Zero moments shaped like `blocks`.
  static AdamState for_blocks(std::span<const std::span<const double>> blocks);
};

/// One bias-corrected Adam update of every block with learning rate `lr`.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const AdamConfig& cfg, double lr);

}  // namespace brm
