#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  const fs::path d = fs::temp_directory_path() / "retouch_cli_test";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

struct CmdResult {
  int code = -1;
  std::string out, err;
};

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path outp = work_dir() / ("stdout_" + std::to_string(counter) + ".txt");
  const fs::path errp = work_dir() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(RETOUCH_CLI_PATH) + " " + args + " > " + outp.string() +
                          " 2> " + errp.string();
  const int raw = std::system(cmd.c_str());
  CmdResult r;
  if (raw != -1 && WIFEXITED(raw)) r.code = WEXITSTATUS(raw);
  r.out = slurp(outp);
  r.err = slurp(errp);
  return r;
}

const std::string kTinyArch =
    "--latent 8 --grid 8 --embed-hidden 8 --branch-dim 16 --dec-hidden 16 --dec-blocks 16,3";

// Shared fixture state: a small dataset and a briefly trained model, built
// once because subprocess round trips dominate this binary's runtime.
struct Pipeline {
  fs::path dir = work_dir() / "pipeline";
  std::string dataset = (dir / "ds").string();
  std::string ckpt = (dir / "model.ckpt").string();
  std::string csv = (dir / "loss.csv").string();
  std::string library = (dir / "refs.rrl").string();
  bool ok = false;

  Pipeline() {
    fs::remove_all(dir);
    fs::create_directories(dir);
    if (run_cli("make-dataset --out " + dataset +
                " --images 10 --presets 3 --size 32 --holdout 1 --seed 3")
            .code != 0)
      return;
    if (run_cli("train --manifest " + dataset + "/train_manifest.jsonl --out " + ckpt +
                " --steps 30 --batch 2 --crop 16 --lr 3e-3 --seed 5 --loss-csv " + csv + " " +
                kTinyArch)
            .code != 0)
      return;
    ok = true;
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("help and usage contract") {
  const CmdResult top = run_cli("--help");
  CHECK(top.code == 0);
  for (const char* sub : {"make-dataset", "train", "build-library", "select-refs", "retouch",
                          "style-transfer", "eval", "grad-check"})
    CHECK(top.out.find(sub) != std::string::npos);

  // Subcommand help documents the defaults.
  const CmdResult rt = run_cli("retouch --help");
  CHECK(rt.code == 0);
  CHECK(rt.out.find("--top-k") != std::string::npos);
  CHECK(rt.out.find("3") != std::string::npos);
  CHECK(rt.out.find("0.1") != std::string::npos);
  const CmdResult tr = run_cli("train --help");
  CHECK(tr.code == 0);
  CHECK(tr.out.find("--batch") != std::string::npos);
  CHECK(tr.out.find("8") != std::string::npos);

  const CmdResult ver = run_cli("--version");
  CHECK(ver.code == 0);
  CHECK(ver.out.find("retouch 1.0") != std::string::npos);

  // Usage failures exit 2 with a diagnostic.
  CHECK(run_cli("frobnicate").code == 2);
  CHECK(run_cli("").code == 2);  // a subcommand is required
  CHECK(run_cli("train --no-such-flag 1").code == 2);
  CHECK(run_cli("retouch").code == 2);  // missing required options
  const CmdResult bad = run_cli("train");
  CHECK(bad.code == 2);
  CHECK(!bad.err.empty());
}

TEST_CASE("runtime failures exit 1") {
  const fs::path dir = work_dir();
  CHECK(run_cli("train --manifest /nonexistent.jsonl --out " + (dir / "x.ckpt").string() +
                " --steps 2 " + kTinyArch)
            .code == 1);
  CHECK(run_cli("grad-check --model /nonexistent.ckpt").code == 1);
  CHECK(run_cli("eval --pred /nonexistent_a --gt /nonexistent_b").code == 1);
}

TEST_CASE("make-dataset is reproducible for a fixed seed") {
  const fs::path dir = work_dir();
  const std::string a = (dir / "ds_a").string(), b = (dir / "ds_b").string();
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string flags = " --images 8 --presets 3 --size 24 --holdout 1 --seed 9";
  CHECK(run_cli("make-dataset --out " + a + flags).code == 0);
  CHECK(run_cli("make-dataset --out " + b + flags).code == 0);

  auto canon = [](std::string s, const std::string& root) {
    std::size_t pos;
    while ((pos = s.find(root)) != std::string::npos) s.erase(pos, root.size());
    return s;
  };
  CHECK(canon(slurp(a + "/train_manifest.jsonl"), a) ==
        canon(slurp(b + "/train_manifest.jsonl"), b));
  CHECK(slurp(a + "/presets.json") == slurp(b + "/presets.json"));
  CHECK(slurp(a + "/src/img_0000.png") == slurp(b + "/src/img_0000.png"));
}

TEST_CASE("train emits a checkpoint and a loss log") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  CHECK(fs::exists(p.ckpt));
  const std::string csv = slurp(p.csv);
  CHECK(csv.find("step,loss") == 0);
  CHECK(csv.find("\n1,") != std::string::npos);
  CHECK(csv.find("\n30,") != std::string::npos);
}

TEST_CASE("grad-check passes on a trained checkpoint") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  const CmdResult r =
      run_cli("grad-check --model " + p.ckpt + " --samples 6 --pairs 1 --pair-size 8 --seed 2");
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("max rel err") != std::string::npos);
}

TEST_CASE("build-library is deterministic and reports its contents") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  const std::string lib2 = (p.dir / "refs2.rrl").string();
  const std::string manifest = p.dataset + "/train_manifest.jsonl";
  const CmdResult r1 =
      run_cli("build-library --manifest " + manifest + " --model " + p.ckpt + " --out " + p.library);
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("fingerprint") != std::string::npos);
  const CmdResult r2 =
      run_cli("build-library --manifest " + manifest + " --model " + p.ckpt + " --out " + lib2);
  REQUIRE(r2.code == 0);
  CHECK(slurp(p.library) == slurp(lib2));
}

TEST_CASE("select-refs writes a ranked selection") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  const std::string out = (p.dir / "selected.json").string();
  const CmdResult r =
      run_cli("select-refs --pool " + p.dataset + "/src --k 3 --out " + out);
  REQUIRE(r.code == 0);
  const std::string js = slurp(out);
  CHECK(js.find("\"k\": 3") != std::string::npos);
  CHECK(js.find("\"pool_size\": 10") != std::string::npos);
  CHECK(js.find("\"rank\": 1") != std::string::npos);
  CHECK(js.find("\"rank\": 3") != std::string::npos);

  // k beyond the pool is a runtime failure.
  CHECK(run_cli("select-refs --pool " + p.dataset + "/src --k 99 --out " + out).code == 1);
}

TEST_CASE("retouch produces identical output across runs and echoes weights") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  const std::string q = p.dataset + "/src/img_0003.png";
  const std::string o1 = (p.dir / "out1.png").string(), o2 = (p.dir / "out2.png").string();
  const std::string base =
      "retouch --library " + p.library + " --model " + p.ckpt + " --input " + q;
  const CmdResult r1 = run_cli(base + " --out " + o1 + " --top-k 2");
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("id=") != std::string::npos);
  CHECK(r1.out.find("sim=") != std::string::npos);
  CHECK(r1.out.find("weight=") != std::string::npos);
  const CmdResult r2 = run_cli(base + " --out " + o2 + " --top-k 2");
  REQUIRE(r2.code == 0);
  CHECK(slurp(o1) == slurp(o2));

  // Uniform aggregation over the whole library is also deterministic.
  const std::string u1 = (p.dir / "uni1.png").string(), u2 = (p.dir / "uni2.png").string();
  CHECK(run_cli(base + " --out " + u1 + " --uniform-all").code == 0);
  CHECK(run_cli(base + " --out " + u2 + " --uniform-all").code == 0);
  CHECK(slurp(u1) == slurp(u2));

  // Optional 3D LUT export.
  const std::string lut = (p.dir / "style.cube").string();
  CHECK(run_cli(base + " --out " + o1 + " --lut " + lut + " --lut-size 9").code == 0);
  const std::string cube = slurp(lut);
  CHECK(cube.find("LUT_3D_SIZE 9") != std::string::npos);
}

TEST_CASE("style transfer runs end to end") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  const std::string out = (p.dir / "styled.png").string();
  const CmdResult r = run_cli("style-transfer --model " + p.ckpt + " --content " + p.dataset +
                              "/src/img_0001.png --style " + p.dataset +
                              "/tgt/img_0002.png --out " + out);
  CHECK(r.code == 0);
  CHECK(fs::exists(out));
}

TEST_CASE("eval on identical directories reports perfect scores") {
  Pipeline& p = pipeline();
  REQUIRE(p.ok);
  const std::string csv = (p.dir / "eval.csv").string();
  const CmdResult r = run_cli("eval --pred " + p.dataset + "/src --gt " + p.dataset +
                              "/src --csv " + csv);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\"mean_psnr\": \"inf\"") != std::string::npos);
  CHECK(r.out.find("\"mean_ssim\": 1.0") != std::string::npos);
  const std::string rows = slurp(csv);
  CHECK(rows.find("image_id,psnr,ssim") == 0);
  CHECK(rows.find("img_0000,inf,1.000000") != std::string::npos);
}
