#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "retouch/checkpoint.hpp"
#include "retouch/common.hpp"
#include "retouch/decoder.hpp"
#include "retouch/encoder.hpp"
#include "retouch/image.hpp"
#include "retouch/model.hpp"
#include "retouch/presetlab.hpp"
#include "retouch/rar.hpp"
#include "retouch/trainer.hpp"

using namespace retouch;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.latent_dim = 8;
  c.grid = 8;
  c.embed_hidden = 8;
  c.branch_dim = 16;
  c.dec_hidden = 16;
  c.dec_blocks = {16, 3};
  return c;
}

fs::path work_dir() {
  const fs::path d = fs::temp_directory_path() / "retouch_rar_test";
  fs::create_directories(d);
  return d;
}

// Renders n reference pairs to disk and builds their manifest entries.
std::vector<ManifestEntry> make_pairs(int n, std::uint64_t seed) {
  const fs::path dir = work_dir();
  Rng rng(seed);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < n; ++i) {
    const ImageRGB x = synth_image(24, 24, mix_seed(seed, i));
    const SyntheticPreset p = SyntheticPreset::random_preset(i + 1, rng);
    const ImageRGB y = apply_preset(x, p);
    const std::string xp = (dir / ("x" + std::to_string(i) + ".png")).string();
    const std::string yp = (dir / ("y" + std::to_string(i) + ".png")).string();
    save_png(xp, x);
    save_png(yp, y);
    entries.push_back({xp, yp, i + 1, -1});
  }
  return entries;
}

// A library whose content embeddings are hand-set; latents are one-hot so
// aggregation results can be computed by inspection.
ReferenceLibrary toy_library(const std::vector<std::vector<float>>& cs, int latent_dim) {
  ReferenceLibrary lib;
  lib.latent_dim = latent_dim;
  lib.fingerprint = 0xabcdef;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    LibraryEntry e;
    e.id = static_cast<int>(i);
    e.z.assign(latent_dim, 0.0f);
    e.z[i % latent_dim] = 1.0f;
    e.c = cs[i];
    lib.entries.push_back(e);
  }
  return lib;
}

}  // namespace

TEST_CASE("cosine similarity oracles") {
  const std::vector<float> ex{1, 0, 0}, ey{0, 1, 0};
  CHECK(cosine_similarity(ex, ey) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_similarity(ex, ex) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<float> diag{1, 1, 0};
  CHECK(cosine_similarity(ex, diag) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-7));
  // Scale invariance.
  const std::vector<float> scaled{5, 5, 0};
  CHECK(cosine_similarity(ex, scaled) ==
        doctest::Approx(cosine_similarity(ex, diag)).epsilon(1e-7));
  const std::vector<float> neg{-1, 0, 0};
  CHECK(cosine_similarity(ex, neg) == doctest::Approx(-1.0).epsilon(1e-12));

  CHECK_THROWS_AS(cosine_similarity(ex, std::vector<float>{0, 0, 0}), ConfigError);
  CHECK_THROWS_AS(cosine_similarity(ex, std::vector<float>{1, 0}), ConfigError);
}

TEST_CASE("softmax weights: oracles and invariants") {
  // Hand-checked two-entry case at tau = 0.1: logits (9, 5) after division.
  const std::vector<double> sims{0.9, 0.5};
  const std::vector<double> w = softmax_weights(sims, 0.1);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(0.98201379).epsilon(1e-7));
  CHECK(w[1] == doctest::Approx(0.01798621).epsilon(1e-7));

  // Sum to one, order-preserving, shift-invariant.
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(1 + rng.below(8));
    for (auto& v : s) v = rng.uniform(-1.0, 1.0);
    const std::vector<double> ww = softmax_weights(s, 0.1);
    CHECK(std::accumulate(ww.begin(), ww.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : ww) CHECK(v > 0.0);
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
      if (s[i] > s[i + 1]) CHECK(ww[i] > ww[i + 1]);
    std::vector<double> shifted = s;
    for (auto& v : shifted) v += 3.7;
    const std::vector<double> ws = softmax_weights(shifted, 0.1);
    for (std::size_t i = 0; i < ww.size(); ++i)
      CHECK(ws[i] == doctest::Approx(ww[i]).epsilon(1e-9));
  }

  // Temperature limits: huge tau flattens, tiny tau selects the max.
  const std::vector<double> wide = softmax_weights({0.9, 0.1, 0.5}, 1e6);
  for (double v : wide) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-5));
  const std::vector<double> sharp = softmax_weights({0.9, 0.1, 0.5}, 1e-3);
  CHECK(sharp[0] == doctest::Approx(1.0).epsilon(1e-9));

  // Max-subtraction keeps extreme logits finite.
  const std::vector<double> extreme = softmax_weights({400.0, -400.0}, 0.1);
  CHECK(std::isfinite(extreme[0]));
  CHECK(extreme[0] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(softmax_weights({}, 0.1), ConfigError);
  CHECK_THROWS_AS(softmax_weights({0.5}, 0.0), ConfigError);
}

TEST_CASE("top-k retrieval ranks by similarity with id tie-break") {
  // Query embedding e0; entries at hand-set angles give sims 0.9, 0.2, 0.9,
  // 0.5, 0.1 (entries 0 and 2 tie; ascending id breaks it).
  auto dir = [](double s) {
    // Unit vector at cosine s from e0 in the x-y plane.
    return std::vector<float>{static_cast<float>(s), static_cast<float>(std::sqrt(1 - s * s)),
                              0.0f};
  };
  ReferenceLibrary lib = toy_library({dir(0.9), dir(0.2), dir(0.9), dir(0.5), dir(0.1)}, 4);
  const std::vector<float> query{1, 0, 0};

  const std::vector<Neighbor> top3 = retrieve_topk(lib, query, 3);
  REQUIRE(top3.size() == 3);
  CHECK(top3[0].id == 0);
  CHECK(top3[1].id == 2);
  CHECK(top3[2].id == 3);
  CHECK(top3[0].similarity == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(top3[2].similarity == doctest::Approx(0.5).epsilon(1e-6));

  // k beyond the library size returns everything, still sorted.
  const std::vector<Neighbor> all = retrieve_topk(lib, query, 99);
  REQUIRE(all.size() == 5);
  CHECK(all[4].id == 4);
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    CHECK(all[i].similarity >= all[i + 1].similarity);

  CHECK_THROWS_AS(retrieve_topk(lib, query, 0), ConfigError);
  CHECK_THROWS_AS(retrieve_topk(ReferenceLibrary{}, query, 3), ConfigError);
}

TEST_CASE("latent aggregation is the weighted sum of retrieved latents") {
  ReferenceLibrary lib = toy_library({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 4);
  // One-hot latents: entry i has z = e_{i mod 4}.
  std::vector<Neighbor> nb{{0, 0, 0.9}, {2, 2, 0.5}};
  const std::vector<double> w{0.75, 0.25};
  const std::vector<float> z = aggregate_latents(lib, nb, w);
  REQUIRE(z.size() == 4);
  CHECK(z[0] == doctest::Approx(0.75).epsilon(1e-7));
  CHECK(z[1] == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(z[2] == doctest::Approx(0.25).epsilon(1e-7));
  CHECK(z[3] == doctest::Approx(0.0).epsilon(1e-7));

  CHECK_THROWS_AS(aggregate_latents(lib, nb, std::vector<double>{0.5}), ConfigError);

  const std::vector<float> zu = aggregate_uniform(lib);
  REQUIRE(zu.size() == 4);
  CHECK(zu[0] == doctest::Approx(1.0 / 3).epsilon(1e-7));
  CHECK(zu[1] == doctest::Approx(1.0 / 3).epsilon(1e-7));
  CHECK(zu[2] == doctest::Approx(1.0 / 3).epsilon(1e-7));
  CHECK(zu[3] == doctest::Approx(0.0).epsilon(1e-7));
  CHECK_THROWS_AS(aggregate_uniform(ReferenceLibrary{}), ConfigError);
}

TEST_CASE("library build, save, and load round trip bit-exactly") {
  Model<float> model(tiny_config());
  model.init(3);
  const std::vector<ManifestEntry> pairs = make_pairs(4, 11);
  ReferenceLibrary lib = build_library(pairs, model);
  REQUIRE(lib.entries.size() == 4);
  CHECK(lib.latent_dim == tiny_config().latent_dim);
  CHECK(lib.fingerprint == model_fingerprint(model));
  for (const auto& e : lib.entries) {
    CHECK(static_cast<int>(e.z.size()) == lib.latent_dim);
    CHECK(static_cast<int>(e.c.size()) == 272);
    // Embeddings are L1-normalized histograms: two unit-sum parts.
    double total = 0;
    for (float v : e.c) total += v;
    CHECK(total == doctest::Approx(2.0).epsilon(1e-4));
  }
  // The stored latent equals encoding the pair directly.
  const ImageRGB x0 = load_image(pairs[0].input_path);
  const ImageRGB y0 = load_image(pairs[0].target_path);
  const std::vector<float> z0 = encode(model, x0, y0);
  for (int d = 0; d < lib.latent_dim; ++d) CHECK(lib.entries[0].z[d] == z0[d]);

  const std::string path = (work_dir() / "lib.rrl").string();
  save_library(path, lib);
  const ReferenceLibrary back = load_library(path);
  CHECK(back.latent_dim == lib.latent_dim);
  CHECK(back.fingerprint == lib.fingerprint);
  REQUIRE(back.entries.size() == lib.entries.size());
  for (std::size_t i = 0; i < lib.entries.size(); ++i) {
    CHECK(back.entries[i].id == lib.entries[i].id);
    CHECK(back.entries[i].input_path == lib.entries[i].input_path);
    CHECK(back.entries[i].target_path == lib.entries[i].target_path);
    for (std::size_t d = 0; d < lib.entries[i].z.size(); ++d)
      CHECK(back.entries[i].z[d] == lib.entries[i].z[d]);
    for (std::size_t d = 0; d < lib.entries[i].c.size(); ++d)
      CHECK(back.entries[i].c[d] == lib.entries[i].c[d]);
  }
  CHECK_THROWS_AS(load_library("/nonexistent.rrl"), IoError);
}

TEST_CASE("retouch query: retrieval weighting, guards, and diagnostics") {
  Model<float> model(tiny_config());
  model.init(5);
  const std::vector<ManifestEntry> pairs = make_pairs(5, 23);
  ReferenceLibrary lib = build_library(pairs, model);
  RarConfig cfg;  // defaults: top_k = 3, tau = 0.1

  // Query with pair 0's own stored input so its embedding matches exactly.
  const ImageRGB query = load_image(pairs[0].input_path);
  const RetouchResult res = retouch_query(query, lib, cfg, model);
  REQUIRE(res.neighbors.size() == 3);
  REQUIRE(res.weights.size() == 3);
  CHECK(res.image.width == query.width);
  CHECK(res.image.height == query.height);
  // The query is pair 0's own input, so entry 0 must win with sim ~ 1.
  CHECK(res.neighbors[0].id == 0);
  CHECK(res.neighbors[0].similarity == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(!res.low_similarity);
  CHECK(std::accumulate(res.weights.begin(), res.weights.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-9));
  for (float v : res.image.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }

  // The aggregate latent fed to the decoder matches recomputing it by hand.
  std::vector<double> sims;
  for (const auto& n : res.neighbors) sims.push_back(n.similarity);
  const std::vector<double> w = softmax_weights(sims, cfg.tau);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(res.weights[i] == doctest::Approx(w[i]).epsilon(1e-12));
  const std::vector<float> z = aggregate_latents(lib, res.neighbors, res.weights);
  const ImageRGB direct = decode_image(model, query, z);
  for (std::size_t i = 0; i < direct.data.size(); ++i) CHECK(res.image.data[i] == direct.data[i]);

  // A library from a different model is refused.
  ReferenceLibrary other = lib;
  other.fingerprint ^= 1;
  CHECK_THROWS_AS(retouch_query(query, other, cfg, model), ConfigError);
  CHECK_THROWS_AS(retouch_query(query, ReferenceLibrary{}, cfg, model), ConfigError);

  // Hand-edited embeddings concentrated in extreme-chroma bins that natural
  // images never populate trip the low-similarity flag.
  ReferenceLibrary weird = lib;
  for (auto& e : weird.entries) {
    std::fill(e.c.begin(), e.c.end(), 0.0f);
    e.c[16 + e.id * 16 + 15] = 1.0f;  // ab bins at b >= 112: out of sRGB reach
  }
  const RetouchResult odd = retouch_query(query, weird, cfg, model);
  CHECK(odd.neighbors[0].similarity < 0.2);
  CHECK(odd.low_similarity);
}

TEST_CASE("duplicate references split the softmax weight evenly") {
  Model<float> model(tiny_config());
  model.init(9);
  std::vector<ManifestEntry> pairs = make_pairs(2, 31);
  pairs.push_back(pairs[0]);  // exact duplicate of the first reference
  ReferenceLibrary lib = build_library(pairs, model);
  RarConfig cfg;
  cfg.top_k = 2;
  const ImageRGB query = load_image(pairs[0].input_path);
  const RetouchResult res = retouch_query(query, lib, cfg, model);
  // Entries 0 and 2 are identical, similarity 1 each: equal weights.
  CHECK(res.neighbors[0].id == 0);
  CHECK(res.neighbors[1].id == 2);
  CHECK(res.weights[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.weights[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("style transfer follows the content geometry") {
  Model<float> model(tiny_config());
  model.init(13);
  const ImageRGB content = synth_image(33, 21, 41);
  const ImageRGB style = synth_image(48, 48, 42);  // different size on purpose
  const ImageRGB out = style_transfer(content, style, model);
  CHECK(out.width == 33);
  CHECK(out.height == 21);
  for (float v : out.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  // Equivalent to encoding the (content, style) pseudo-pair and decoding.
  const std::vector<float> z = encode(model, content, style);
  const ImageRGB direct = decode_image(model, content, z);
  for (std::size_t i = 0; i < out.data.size(); ++i) CHECK(out.data[i] == direct.data[i]);
}
