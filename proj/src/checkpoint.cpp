#include "pedcast/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace pedcast::models {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace {

constexpr char kMagic[4] = {'P', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint: " + path);
  return v;
}

void write_config(std::ostream& out, const ModelConfig& cfg) {
  write_raw<std::uint32_t>(out, cfg.kind == ModelKind::TF_ed ? 0 : 1);
  for (std::size_t v : {cfg.embed_dim, cfg.num_layers, cfg.num_heads, cfg.ff_dim,
                        cfg.observe_len, cfg.predict_len})
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(v));
}

ModelConfig read_config(std::istream& in, const std::string& path) {
  ModelConfig cfg;
  cfg.kind = read_raw<std::uint32_t>(in, path) == 0 ? ModelKind::TF_ed
                                                    : ModelKind::LSTM_ed;
  cfg.embed_dim = read_raw<std::uint32_t>(in, path);
  cfg.num_layers = read_raw<std::uint32_t>(in, path);
  cfg.num_heads = read_raw<std::uint32_t>(in, path);
  cfg.ff_dim = read_raw<std::uint32_t>(in, path);
  cfg.observe_len = read_raw<std::uint32_t>(in, path);
  cfg.predict_len = read_raw<std::uint32_t>(in, path);
  return cfg;
}

bool same_config(const ModelConfig& a, const ModelConfig& b) {
  return a.kind == b.kind && a.embed_dim == b.embed_dim &&
         a.num_layers == b.num_layers && a.num_heads == b.num_heads &&
         a.ff_dim == b.ff_dim && a.observe_len == b.observe_len &&
         a.predict_len == b.predict_len;
}

std::ifstream open_and_check(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("bad magic in checkpoint: " + path);
  const auto version = read_raw<std::uint32_t>(in, path);
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version) + " in " + path);
  return in;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ad::ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_raw<std::uint32_t>(out, kVersion);
  write_config(out, cfg);
  write_raw<std::uint64_t>(out, params.names().size());
  for (const auto& name : params.names()) {
    const ad::TensorPtr& t = params.get(name);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(t->shape.size()));
    for (std::size_t d : t->shape) write_raw<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t->value.data()),
              static_cast<std::streamsize>(t->value.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("write error on checkpoint: " + path);
}

ModelConfig read_checkpoint_config(const std::string& path) {
  auto in = open_and_check(path);
  return read_config(in, path);
}

void load_checkpoint(const std::string& path, const ModelConfig& cfg,
                     ad::ParameterSet& params) {
  auto in = open_and_check(path);
  const ModelConfig stored = read_config(in, path);
  if (!same_config(stored, cfg))
    throw CheckpointError("checkpoint config in " + path +
                          " does not match the requesting model");
  const auto count = read_raw<std::uint64_t>(in, path);
  if (count != params.names().size())
    throw CheckpointError("checkpoint entry count mismatch in " + path);
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto name_len = read_raw<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointError("truncated checkpoint: " + path);
    const auto rank = read_raw<std::uint32_t>(in, path);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = read_raw<std::uint64_t>(in, path);
    if (!params.contains(name))
      throw CheckpointError("checkpoint entry '" + name + "' unknown to model");
    ad::TensorPtr t = params.get(name);
    if (t->shape != shape)
      throw CheckpointError("checkpoint entry '" + name + "' shape mismatch");
    in.read(reinterpret_cast<char*>(t->value.data()),
            static_cast<std::streamsize>(t->value.size() * sizeof(double)));
    if (!in) throw CheckpointError("truncated checkpoint: " + path);
  }
}

std::pair<ModelConfig, ad::ParameterSet> load_checkpoint(const std::string& path) {
  const ModelConfig cfg = read_checkpoint_config(path);
  ad::ParameterSet params = init_params(cfg, 0);
  load_checkpoint(path, cfg, params);
  return {cfg, std::move(params)};
}

}  // namespace pedcast::models
