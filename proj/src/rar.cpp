#include "retouch/rar.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

#include "retouch/checkpoint.hpp"
#include "retouch/colorlab.hpp"
#include "retouch/decoder.hpp"
#include "retouch/encoder.hpp"

namespace retouch {

using nlohmann::json;

namespace {
constexpr int kLibraryVersion = 1;
constexpr double kLowSimilarity = 0.2;

std::vector<float> feature_f32(const ImageRGB& img, Exec exec) {
  const ColorToneFeature f = color_tone_feature(img, exec);
  std::vector<float> out(ColorToneFeature::kDim);
  for (int i = 0; i < ColorToneFeature::kDim; ++i) out[i] = static_cast<float>(f.v[i]);
  return out;
}
}  // namespace

ReferenceLibrary build_library(const std::vector<ManifestEntry>& pairs, Model<float>& model,
                               Exec exec) {
  ReferenceLibrary lib;
  lib.latent_dim = model.cfg.latent_dim;
  lib.fingerprint = model_fingerprint(model);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    LibraryEntry e;
    e.id = static_cast<int>(i);
    e.input_path = pairs[i].input_path;
    e.target_path = pairs[i].target_path;
    ImageRGB x, y;
    try {
      x = load_image(e.input_path);
      y = load_image(e.target_path);
    } catch (const std::exception& ex) {
      throw IoError("build_library: entry " + std::to_string(e.id) + ": " + ex.what());
    }
    e.z = encode(model, x, y, exec);
    e.c = feature_f32(x, exec);
    lib.entries.push_back(std::move(e));
  }
  return lib;
}

void save_library(const std::string& path, const ReferenceLibrary& lib) {
  json entries = json::array();
  for (const auto& e : lib.entries)
    entries.push_back(json{{"id", e.id}, {"input_path", e.input_path},
                           {"target_path", e.target_path}});
  json header{{"version", kLibraryVersion},
              {"latent_dim", lib.latent_dim},
              {"fingerprint", to_hex(lib.fingerprint)},
              {"entries", entries}};
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_library: cannot open " + path);
  f << header.dump() << "\n";
  for (const auto& e : lib.entries) {
    f.write(reinterpret_cast<const char*>(e.z.data()),
            static_cast<std::streamsize>(e.z.size() * sizeof(float)));
    f.write(reinterpret_cast<const char*>(e.c.data()),
            static_cast<std::streamsize>(e.c.size() * sizeof(float)));
  }
  if (!f) throw IoError("save_library: write failed for " + path);
}

ReferenceLibrary load_library(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_library: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError("load_library: missing header in " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw IoError("load_library: bad header in " + path + ": " + e.what());
  }
  if (header.value("version", 0) != kLibraryVersion)
    throw IoError("load_library: unsupported version in " + path);
  ReferenceLibrary lib;
  lib.latent_dim = header.at("latent_dim").get<int>();
  if (lib.latent_dim < 1) throw IoError("load_library: bad latent dim in " + path);
  lib.fingerprint = std::stoull(header.at("fingerprint").get<std::string>(), nullptr, 16);
  for (const auto& je : header.at("entries")) {
    LibraryEntry e;
    e.id = je.at("id").get<int>();
    e.input_path = je.at("input_path").get<std::string>();
    e.target_path = je.at("target_path").get<std::string>();
    e.z.resize(lib.latent_dim);
    e.c.resize(ColorToneFeature::kDim);
    f.read(reinterpret_cast<char*>(e.z.data()),
           static_cast<std::streamsize>(e.z.size() * sizeof(float)));
    f.read(reinterpret_cast<char*>(e.c.data()),
           static_cast<std::streamsize>(e.c.size() * sizeof(float)));
    if (!f) throw IoError("load_library: truncated binary section in " + path);
    lib.entries.push_back(std::move(e));
  }
  return lib;
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ConfigError("cosine_similarity: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) throw ConfigError("cosine_similarity: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Neighbor> retrieve_topk(const ReferenceLibrary& lib, const std::vector<float>& c_q,
                                    int k) {
  if (lib.entries.empty()) throw ConfigError("retrieve: empty reference library");
  if (k < 1) throw ConfigError("retrieve: k must be >= 1");
  std::vector<Neighbor> all;
  all.reserve(lib.entries.size());
  for (std::size_t i = 0; i < lib.entries.size(); ++i)
    all.push_back({static_cast<int>(i), lib.entries[i].id,
                   cosine_similarity(c_q, lib.entries[i].c)});
  std::sort(all.begin(), all.end(), [](const Neighbor& x, const Neighbor& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return x.id < y.id;
  });
  all.resize(std::min<std::size_t>(k, all.size()));
  return all;
}

std::vector<double> softmax_weights(const std::vector<double>& sims, double tau) {
  if (sims.empty()) throw ConfigError("softmax: empty similarity list");
  if (tau <= 0) throw ConfigError("softmax: tau must be positive");
  const double mx = *std::max_element(sims.begin(), sims.end());
  std::vector<double> w(sims.size());
  double total = 0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    w[i] = std::exp((sims[i] - mx) / tau);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<float> aggregate_latents(const ReferenceLibrary& lib,
                                     const std::vector<Neighbor>& neighbors,
                                     const std::vector<double>& weights) {
  if (neighbors.empty() || neighbors.size() != weights.size())
    throw ConfigError("aggregate_latents: neighbor/weight size mismatch");
  std::vector<double> acc(lib.latent_dim, 0.0);
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const std::vector<float>& z = lib.entries.at(neighbors[i].index).z;
    for (int d = 0; d < lib.latent_dim; ++d) acc[d] += weights[i] * z[d];
  }
  std::vector<float> out(lib.latent_dim);
  for (int d = 0; d < lib.latent_dim; ++d) out[d] = static_cast<float>(acc[d]);
  return out;
}

std::vector<float> aggregate_uniform(const ReferenceLibrary& lib) {
  if (lib.entries.empty()) throw ConfigError("aggregate_uniform: empty reference library");
  std::vector<double> acc(lib.latent_dim, 0.0);
  for (const auto& e : lib.entries)
    for (int d = 0; d < lib.latent_dim; ++d) acc[d] += e.z[d];
  std::vector<float> out(lib.latent_dim);
  for (int d = 0; d < lib.latent_dim; ++d)
    out[d] = static_cast<float>(acc[d] / static_cast<double>(lib.entries.size()));
  return out;
}

RetouchResult retouch_query(const ImageRGB& x_q, const ReferenceLibrary& lib,
                            const RarConfig& cfg, Model<float>& model, Exec exec) {
  cfg.validate();
  if (lib.entries.empty()) throw ConfigError("retouch: empty reference library");
  if (lib.latent_dim != model.cfg.latent_dim)
    throw ConfigError("retouch: library latent dim " + std::to_string(lib.latent_dim) +
                      " does not match model (" + std::to_string(model.cfg.latent_dim) + ")");
  const std::uint64_t fp = model_fingerprint(model);
  if (fp != lib.fingerprint)
    throw ConfigError("retouch: library was built by a different model (fingerprint " +
                      to_hex(lib.fingerprint) + ", model " + to_hex(fp) +
                      "); rebuild the library with this checkpoint");
  RetouchResult res;
  const std::vector<float> c_q = feature_f32(x_q, exec);
  res.neighbors = retrieve_topk(lib, c_q, cfg.top_k);
  std::vector<double> sims(res.neighbors.size());
  for (std::size_t i = 0; i < sims.size(); ++i) sims[i] = res.neighbors[i].similarity;
  res.weights = softmax_weights(sims, cfg.tau);
  res.low_similarity = sims[0] < kLowSimilarity;
  const std::vector<float> z_q = aggregate_latents(lib, res.neighbors, res.weights);
  res.image = decode_image(model, x_q, z_q, exec);
  return res;
}

ImageRGB style_transfer(const ImageRGB& content, const ImageRGB& style, Model<float>& model,
                        Exec exec) {
  const std::vector<float> z = encode(model, content, style, exec);
  return decode_image(model, content, z, exec);
}

}  // namespace retouch
