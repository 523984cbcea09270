#include "retouch/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace retouch {

namespace {

constexpr char kMagic[4] = {'I', 'R', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& f, std::uint64_t v) {
  put_u32(f, static_cast<std::uint32_t>(v));
  put_u32(f, static_cast<std::uint32_t>(v >> 32));
}

void put_f64(std::ostream& f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(f, bits);
}

void put_f32_array(std::ostream& f, const float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    put_u32(f, bits);
  }
}

std::uint32_t get_u32(std::istream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& f) {
  std::uint64_t lo = get_u32(f);
  std::uint64_t hi = get_u32(f);
  return lo | (hi << 32);
}

double get_f64(std::istream& f) {
  std::uint64_t bits = get_u64(f);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void get_f32_array(std::istream& f, float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = get_u32(f);
    std::memcpy(&data[i], &bits, 4);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model, const net::Adam<float>* adam) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  f.write(kMagic, 4);
  put_u32(f, kVersion);
  const ModelConfig& c = model.cfg;
  put_u32(f, static_cast<std::uint32_t>(c.latent_dim));
  put_u32(f, static_cast<std::uint32_t>(c.grid));
  put_u32(f, static_cast<std::uint32_t>(c.embed_hidden));
  put_u32(f, static_cast<std::uint32_t>(c.branch_dim));
  put_u32(f, static_cast<std::uint32_t>(c.dec_hidden));
  put_u32(f, static_cast<std::uint32_t>(c.dec_blocks.size()));
  for (int d : c.dec_blocks) put_u32(f, static_cast<std::uint32_t>(d));

  auto params = model.named_params();
  put_u32(f, static_cast<std::uint32_t>(params.size()));
  for (auto& [name, t] : params) {
    put_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<std::uint32_t>(t->rows));
    put_u32(f, static_cast<std::uint32_t>(t->cols));
    put_f32_array(f, t->data(), t->size());
  }

  f.put(adam ? 1 : 0);
  if (adam) {
    if (adam->m.size() != params.size())
      throw ConfigError("save_checkpoint: optimizer state does not match parameter list");
    put_u64(f, static_cast<std::uint64_t>(adam->t));
    put_f64(f, adam->lr);
    put_f64(f, adam->beta1);
    put_f64(f, adam->beta2);
    put_f64(f, adam->eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_f32_array(f, adam->m[i].data(), adam->m[i].size());
      put_f32_array(f, adam->v[i].data(), adam->v[i].size());
    }
  }
  if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("load_checkpoint: " + path + " is not a checkpoint file");
  std::uint32_t version = get_u32(f);
  if (version != kVersion)
    throw IoError("load_checkpoint: unsupported format version " + std::to_string(version));
  ModelConfig c;
  c.latent_dim = static_cast<int>(get_u32(f));
  c.grid = static_cast<int>(get_u32(f));
  c.embed_hidden = static_cast<int>(get_u32(f));
  c.branch_dim = static_cast<int>(get_u32(f));
  c.dec_hidden = static_cast<int>(get_u32(f));
  std::uint32_t n_blocks = get_u32(f);
  if (!f || n_blocks > 64) throw IoError("load_checkpoint: corrupt architecture descriptor");
  c.dec_blocks.clear();
  for (std::uint32_t i = 0; i < n_blocks; ++i) c.dec_blocks.push_back(static_cast<int>(get_u32(f)));
  c.validate();

  CheckpointData out;
  out.model = Model<float>(c);
  auto params = out.model.named_params();
  std::uint32_t n_tensors = get_u32(f);
  if (n_tensors != params.size())
    throw IoError("load_checkpoint: tensor count " + std::to_string(n_tensors) +
                  " does not match architecture (" + std::to_string(params.size()) + ")");
  for (auto& [name, t] : params) {
    std::uint32_t name_len = get_u32(f);
    if (!f || name_len > 256) throw IoError("load_checkpoint: corrupt tensor name");
    std::string got(name_len, '\0');
    f.read(got.data(), name_len);
    if (got != name)
      throw IoError("load_checkpoint: expected tensor '" + name + "', found '" + got + "'");
    std::uint32_t rows = get_u32(f), cols = get_u32(f);
    if (static_cast<int>(rows) != t->rows || static_cast<int>(cols) != t->cols)
      throw IoError("load_checkpoint: shape mismatch for tensor '" + name + "'");
    get_f32_array(f, t->data(), t->size());
  }

  int has_adam = f.get();
  if (has_adam == 1) {
    out.has_adam = true;
    out.adam.attach(params);
    out.adam.t = static_cast<long long>(get_u64(f));
    out.adam.lr = get_f64(f);
    out.adam.beta1 = get_f64(f);
    out.adam.beta2 = get_f64(f);
    out.adam.eps = get_f64(f);
    for (std::size_t i = 0; i < params.size(); ++i) {
      get_f32_array(f, out.adam.m[i].data(), out.adam.m[i].size());
      get_f32_array(f, out.adam.v[i].data(), out.adam.v[i].size());
    }
  }
  if (!f) throw IoError("load_checkpoint: truncated file " + path);
  return out;
}

std::uint64_t model_fingerprint(Model<float>& model) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto& [name, t] : model.named_params())
    h = fnv1a64(t->data(), t->size() * sizeof(float), h);
  return h;
}

}  // namespace retouch
