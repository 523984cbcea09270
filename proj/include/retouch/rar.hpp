#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retouch/image.hpp"
#include "retouch/model.hpp"
#include "retouch/parallel.hpp"
#include "retouch/trainer.hpp"

namespace retouch {

/// One stored reference: the (input, target) pair's style latent z and the
/// 272-D color-tone content embedding of the input, both kept in f32 to match
/// the on-disk layout exactly (round trips are bit-exact).
struct LibraryEntry {
  int id = 0;
  std::string input_path, target_path;
  std::vector<float> z;
  std::vector<float> c;
};

struct ReferenceLibrary {
  int latent_dim = 0;
  std::uint64_t fingerprint = 0;  // model that produced the latents
  std::vector<LibraryEntry> entries;
};

struct RarConfig {
  int top_k = 3;
  double tau = 0.1;

  void validate() const {
    if (top_k < 1) throw ConfigError("rar: top-k must be >= 1");
    if (tau <= 0) throw ConfigError("rar: tau must be positive");
  }
};

/// Encodes every pair into a latent and pairs it with the input's content
/// embedding.
ReferenceLibrary build_library(const std::vector<ManifestEntry>& pairs, Model<float>& model,
                               Exec exec = Exec::Serial);

/// Library file: one line of JSON {version, latent_dim, fingerprint,
/// entries:[{id, input_path, target_path}]} followed by a binary section of
/// f32 little-endian values, per entry its latent then its embedding.
void save_library(const std::string& path, const ReferenceLibrary& lib);
ReferenceLibrary load_library(const std::string& path);

/// Cosine similarity, computed in double; throws on a zero vector.
double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

struct Neighbor {
  int index = 0;  // position in library entries
  int id = 0;
  double similarity = 0;
};

/// Top-K by descending similarity; ties broken by ascending entry id.
/// Returns min(K, |library|) neighbors.
std::vector<Neighbor> retrieve_topk(const ReferenceLibrary& lib, const std::vector<float>& c_q,
                                    int k);

/// Temperature softmax with max-subtraction: w_i = exp(s_i/tau) / sum_j.
std::vector<double> softmax_weights(const std::vector<double>& sims, double tau);

/// z_q = sum_i w_i z_i, accumulated in double.
std::vector<float> aggregate_latents(const ReferenceLibrary& lib,
                                     const std::vector<Neighbor>& neighbors,
                                     const std::vector<double>& weights);

/// Unweighted mean of every latent in the library (the "use all references
/// uniformly" baseline).
std::vector<float> aggregate_uniform(const ReferenceLibrary& lib);

struct RetouchResult {
  ImageRGB image;
  std::vector<Neighbor> neighbors;
  std::vector<double> weights;
  bool low_similarity = false;  // best retrieved similarity below 0.2
};

/// Full retrieval-augmented retouch: embed the query, retrieve, aggregate,
/// decode. Refuses to run if the library was built by a different model.
RetouchResult retouch_query(const ImageRGB& x_q, const ReferenceLibrary& lib,
                            const RarConfig& cfg, Model<float>& model,
                            Exec exec = Exec::Serial);

/// Unpaired photorealistic style transfer: the (content, style) images form a
/// pseudo reference pair with the content image re-used as the input, so
/// z = encode(content, style) and the output is decode(content, z). Output
/// dimensions always follow the content image.
ImageRGB style_transfer(const ImageRGB& content, const ImageRGB& style, Model<float>& model,
                        Exec exec = Exec::Serial);

}  // namespace retouch
