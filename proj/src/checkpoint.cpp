#include "brm/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "brm/binary_io.hpp"

namespace brm {

namespace io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace io

namespace {

constexpr std::string_view kMagic = "BRME";
constexpr std::uint32_t kMaxLayerWidth = 1u << 20;

void write_blocks(io::Writer& w, const std::vector<std::span<const double>>& blocks) {
  for (const auto& b : blocks) w.f64s(b);
}

void write_moments(io::Writer& w, const AdamState& s) {
  for (const auto& m : s.m) w.f64s(m);
  for (const auto& v : s.v) w.f64s(v);
}

void read_blocks(io::Reader& r, const std::vector<std::span<double>>& blocks) {
  for (const auto& b : blocks) r.f64s(b);
}

AdamState read_moments(io::Reader& r, std::uint64_t step,
                       const std::vector<std::span<const double>>& shape) {
  AdamState s = AdamState::for_blocks(shape);
  s.step = step;
  for (auto& m : s.m) r.f64s(m);
  for (auto& v : s.v) r.f64s(v);
  return s;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  io::Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.params.activation));
  w.u32(static_cast<std::uint32_t>(c.params.sizes.size()));
  for (std::size_t s : c.params.sizes) w.u32(static_cast<std::uint32_t>(s));
  write_blocks(w, param_blocks(c.params));

  w.f64(c.adam_config.base_lr);
  w.f64(c.adam_config.beta1);
  w.f64(c.adam_config.beta2);
  w.f64(c.adam_config.epsilon);
  w.f64(c.adam_config.gamma);
  w.u32(c.adam_config.decay_every);
  w.u64(c.adam.step);
  write_moments(w, c.adam);

  w.u32(c.epoch);
  w.f64(c.best_metric);
  w.u32(c.best_epoch);
  w.u32(c.stale_epochs);

  if (c.head) {
    w.u32(static_cast<std::uint32_t>(c.head->classes()));
    write_blocks(w, param_blocks(*c.head));
    w.u64(c.head_adam.step);
    write_moments(w, c.head_adam);
  } else {
    w.u32(0);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  io::Reader r(bytes);
  if (r.bytes(4) != kMagic) throw Error(ErrorKind::BadMagic, "not a BRME checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::InvalidConfig, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const std::uint32_t act = r.u32();
  if (act > 1) throw Error(ErrorKind::InvalidConfig, "unknown activation code");
  c.params.activation = static_cast<Activation>(act);
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 64) throw Error(ErrorKind::InvalidConfig, "bad layer count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t s = r.u32();
    if (s == 0 || s > kMaxLayerWidth) throw Error(ErrorKind::InvalidConfig, "bad layer size");
    c.params.sizes.push_back(s);
  }
  for (std::size_t l = 0; l + 1 < c.params.sizes.size(); ++l) {
    c.params.weights.emplace_back(c.params.sizes[l], c.params.sizes[l + 1]);
    c.params.biases.emplace_back(c.params.sizes[l + 1], 0.0);
  }
  read_blocks(r, param_blocks(c.params));

  c.adam_config.base_lr = r.f64();
  c.adam_config.beta1 = r.f64();
  c.adam_config.beta2 = r.f64();
  c.adam_config.epsilon = r.f64();
  c.adam_config.gamma = r.f64();
  c.adam_config.decay_every = r.u32();
  const std::uint64_t step = r.u64();
  c.adam = read_moments(r, step, param_blocks(std::as_const(c.params)));

  c.epoch = r.u32();
  c.best_metric = r.f64();
  c.best_epoch = r.u32();
  c.stale_epochs = r.u32();

  const std::uint32_t classes = r.u32();
  if (classes > 0) {
    if (classes > kMaxLayerWidth) throw Error(ErrorKind::InvalidConfig, "bad head width");
    LinearHead head = LinearHead::zeros(c.params.output_dim(), classes);
    read_blocks(r, param_blocks(head));
    const std::uint64_t head_step = r.u64();
    c.head_adam = read_moments(r, head_step, param_blocks(std::as_const(head)));
    c.head = std::move(head);
  }
  if (r.remaining() != 0) throw Error(ErrorKind::InvalidConfig, "trailing bytes after checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file(path.string(), encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path.string()));
}

}  // namespace brm
