#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "retouch/checkpoint.hpp"
#include "retouch/common.hpp"
#include "retouch/model.hpp"

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

fs::path temp_file(const char* name) {
  const fs::path d = fs::temp_directory_path() / "retouch_ckpt_test";
  fs::create_directories(d);
  return d / name;
}

bool same_params(Model<float>& a, Model<float>& b) {
  auto pa = a.named_params(), pb = b.named_params();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i].second->v != pb[i].second->v) return false;
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

}  // namespace

TEST_CASE("checkpoint round trip restores every tensor exactly") {
  Model<float> m(tiny_config());
  m.init(41);
  const fs::path p = temp_file("plain.ckpt");
  save_checkpoint(p.string(), m);
  CheckpointData back = load_checkpoint(p.string());
  CHECK(back.model.cfg == m.cfg);
  CHECK(same_params(back.model, m));
  CHECK(!back.has_adam);
}

TEST_CASE("checkpoint preserves optimizer state") {
  Model<float> m(tiny_config());
  m.init(42);
  net::Adam<float> opt;
  opt.lr = 0.004;
  opt.beta1 = 0.85;
  opt.t = 123;
  auto params = m.named_params();
  opt.attach(params);
  Rng rng(7);
  for (auto& slot : opt.m)
    for (auto& v : slot) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& slot : opt.v)
    for (auto& v : slot) v = static_cast<float>(rng.uniform(0, 1));

  const fs::path p = temp_file("adam.ckpt");
  save_checkpoint(p.string(), m, &opt);
  CheckpointData back = load_checkpoint(p.string());
  REQUIRE(back.has_adam);
  CHECK(back.adam.t == 123);
  CHECK(back.adam.lr == doctest::Approx(0.004));
  CHECK(back.adam.beta1 == doctest::Approx(0.85));
  REQUIRE(back.adam.m.size() == opt.m.size());
  for (std::size_t i = 0; i < opt.m.size(); ++i) {
    CHECK(back.adam.m[i] == opt.m[i]);
    CHECK(back.adam.v[i] == opt.v[i]);
  }
}

TEST_CASE("saving twice yields byte-identical files") {
  Model<float> m(tiny_config());
  m.init(43);
  const fs::path p1 = temp_file("rep1.ckpt"), p2 = temp_file("rep2.ckpt");
  save_checkpoint(p1.string(), m);
  save_checkpoint(p2.string(), m);
  CHECK(slurp(p1) == slurp(p2));

  // save -> load -> save is also byte-stable
  CheckpointData back = load_checkpoint(p1.string());
  const fs::path p3 = temp_file("rep3.ckpt");
  save_checkpoint(p3.string(), back.model);
  CHECK(slurp(p1) == slurp(p3));
}

TEST_CASE("fingerprint tracks parameter content") {
  Model<float> a(tiny_config()), b(tiny_config());
  a.init(44);
  b.init(44);
  CHECK(model_fingerprint(a) == model_fingerprint(b));

  b.dec_W[0].v[5] += 1e-4f;
  CHECK(model_fingerprint(a) != model_fingerprint(b));

  // survives the file round trip
  const fs::path p = temp_file("fp.ckpt");
  save_checkpoint(p.string(), a);
  CheckpointData back = load_checkpoint(p.string());
  CHECK(model_fingerprint(back.model) == model_fingerprint(a));
}

TEST_CASE("corrupt files are rejected with diagnostics") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), IoError);

  const fs::path bad_magic = temp_file("bad_magic.ckpt");
  std::ofstream(bad_magic, std::ios::binary) << "NOPE furthermore garbage";
  CHECK_THROWS_AS(load_checkpoint(bad_magic.string()), IoError);

  // Truncate a valid checkpoint mid-tensor.
  Model<float> m(tiny_config());
  m.init(45);
  const fs::path good = temp_file("good.ckpt");
  save_checkpoint(good.string(), m);
  const std::string bytes = slurp(good);
  const fs::path trunc = temp_file("trunc.ckpt");
  std::ofstream(trunc, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(trunc.string()), IoError);
}
