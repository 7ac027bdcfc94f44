#include "brm/encoder.hpp"

#include <cmath>
#include <string>

#include "brm/error.hpp"
#include "brm/linalg.hpp"
#include "brm/simd/kernels.hpp"

namespace brm {

namespace {

double activate(Activation a, double z) {
  return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the pre-activation; ReLU takes 0 at the kink.
double activate_grad(Activation a, double z) {
  if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

void add_bias(Matrix& m, const Vector& b) {
  const auto& k = simd::active();
  for (std::size_t i = 0; i < m.rows(); ++i) k.axpy(1.0, b.data(), m.row(i).data(), b.size());
}

Vector column_sums(const Matrix& m) {
  Vector out(m.cols(), 0.0);
  const auto& k = simd::active();
  for (std::size_t i = 0; i < m.rows(); ++i) k.axpy(1.0, m.row(i).data(), out.data(), out.size());
  return out;
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw Error(ErrorKind::InvalidConfig, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) noexcept {
  return a == Activation::Relu ? "relu" : "tanh";
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z;
  z.sizes = sizes;
  z.activation = activation;
  for (const auto& w : weights) z.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : biases) z.biases.emplace_back(b.size(), 0.0);
  return z;
}

std::vector<std::span<double>> param_blocks(EncoderParams& p) {
  std::vector<std::span<double>> blocks;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    blocks.push_back(p.weights[l].flat());
    blocks.push_back(p.biases[l]);
  }
  return blocks;
}

std::vector<std::span<const double>> param_blocks(const EncoderParams& p) {
  std::vector<std::span<const double>> blocks;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    blocks.push_back(p.weights[l].flat());
    blocks.push_back(p.biases[l]);
  }
  return blocks;
}

std::size_t param_count(const EncoderParams& p) {
  std::size_t total = 0;
  for (const auto& b : param_blocks(p)) total += b.size();
  return total;
}

std::vector<std::span<const double>> as_const(const std::vector<std::span<double>>& blocks) {
  return {blocks.begin(), blocks.end()};
}

EncoderParams init_params(Rng& rng, std::span<const std::size_t> sizes, InitScheme scheme,
                          Activation activation) {
  if (sizes.empty()) throw Error(ErrorKind::InvalidConfig, "layer size list is empty");
  for (std::size_t s : sizes) {
    if (s == 0) throw Error(ErrorKind::InvalidConfig, "layer sizes must be positive");
  }
  if (sizes.back() < 2) throw Error(ErrorKind::InvalidConfig, "embedding dimension must be >= 2");

  EncoderParams p;
  p.sizes.assign(sizes.begin(), sizes.end());
  p.activation = activation;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double fan_in = static_cast<double>(sizes[l]);
    const double fan_out = static_cast<double>(sizes[l + 1]);
    const double stddev =
        scheme == InitScheme::He ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out));
    Matrix w(sizes[l], sizes[l + 1]);
    for (double& x : w.flat()) x = stddev * rng.normal();
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(sizes[l + 1], 0.0);
  }
  return p;
}

ForwardResult forward(const EncoderParams& params, const Matrix& inputs) {
  if (inputs.cols() != params.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "input width " + std::to_string(inputs.cols()) +
                                                  " != encoder input " +
                                                  std::to_string(params.input_dim()));
  }
  ForwardResult out;
  Matrix x = inputs;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    out.cache.inputs.push_back(x);
    Matrix z = matmul(x, params.weights[l]);
    add_bias(z, params.biases[l]);
    out.cache.preacts.push_back(z);
    if (l + 1 < params.layers()) {
      for (double& v : z.flat()) v = activate(params.activation, v);
    }
    x = std::move(z);
  }
  out.cache.raw_output = x;
  out.embeddings = Matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vector unit = l2_normalize(x.row(i));
    std::copy(unit.begin(), unit.end(), out.embeddings.row(i).begin());
  }
  return out;
}

Matrix embed(const EncoderParams& params, const Matrix& inputs) {
  return forward(params, inputs).embeddings;
}

EncoderGrads backward(const EncoderParams& params, const ForwardCache& cache,
                      const Matrix& grad_embeddings) {
  if (cache.inputs.size() != params.layers() || cache.preacts.size() != params.layers() ||
      !grad_embeddings.same_shape(cache.raw_output)) {
    throw Error(ErrorKind::CacheMismatch, "cache does not belong to this network / gradient");
  }
  for (std::size_t l = 0; l < params.layers(); ++l) {
    if (cache.inputs[l].cols() != params.weights[l].rows() ||
        cache.preacts[l].cols() != params.weights[l].cols()) {
      throw Error(ErrorKind::CacheMismatch, "cached activations have the wrong width");
    }
  }

  Matrix grad(grad_embeddings.rows(), grad_embeddings.cols());
  for (std::size_t i = 0; i < grad.rows(); ++i) {
    const Vector g = l2_normalize_vjp(cache.raw_output.row(i), grad_embeddings.row(i));
    std::copy(g.begin(), g.end(), grad.row(i).begin());
  }

  EncoderGrads out{params.zeros_like(), {}};
  for (std::size_t l = params.layers(); l-- > 0;) {
    if (l + 1 < params.layers()) {
      const Matrix& z = cache.preacts[l];
      auto g = grad.flat();
      auto zf = z.flat();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= activate_grad(params.activation, zf[k]);
    }
    out.params.weights[l] = matmul_at_b(cache.inputs[l], grad);
    out.params.biases[l] = column_sums(grad);
    grad = matmul_a_bt(grad, params.weights[l]);
  }
  out.inputs = std::move(grad);
  return out;
}

LinearHead LinearHead::zeros(std::size_t dim, std::size_t classes) {
  return {Matrix(dim, classes), Vector(classes, 0.0)};
}

Matrix LinearHead::logits(const Matrix& embeddings) const {
  Matrix z = matmul(embeddings, weights);
  add_bias(z, bias);
  return z;
}

std::vector<std::span<double>> param_blocks(LinearHead& h) { return {h.weights.flat(), h.bias}; }

std::vector<std::span<const double>> param_blocks(const LinearHead& h) {
  return {h.weights.flat(), h.bias};
}

HeadGrads head_backward(const LinearHead& head, const Matrix& embeddings,
                        const Matrix& grad_logits) {
  if (grad_logits.rows() != embeddings.rows() || grad_logits.cols() != head.classes()) {
    throw Error(ErrorKind::DimensionMismatch, "logit gradient shape");
  }
  HeadGrads g;
  g.head.weights = matmul_at_b(embeddings, grad_logits);
  g.head.bias = column_sums(grad_logits);
  g.embeddings = matmul_a_bt(grad_logits, head.weights);
  return g;
}

double scheduled_lr(const AdamConfig& cfg, std::uint32_t epoch) {
  const std::uint32_t k = cfg.decay_every == 0 ? 1 : cfg.decay_every;
  return cfg.base_lr * std::pow(cfg.gamma, static_cast<double>(epoch / k));
}

AdamState AdamState::for_blocks(std::span<const std::span<const double>> blocks) {
  AdamState s;
  for (const auto& b : blocks) {
    s.m.emplace_back(b.size(), 0.0);
    s.v.emplace_back(b.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const AdamConfig& cfg, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw Error(ErrorKind::ShapeMismatch, "adam: block count mismatch");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.m[b].size() ||
        params[b].size() != state.v[b].size()) {
      throw Error(ErrorKind::ShapeMismatch, "adam: block " + std::to_string(b) + " size mismatch");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace brm
