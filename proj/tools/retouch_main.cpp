// Command-line front end for the retouch pipeline. One binary, subcommand
// style; every artifact (datasets, checkpoints, libraries, images, reports)
// lives on disk so runs can be scripted and reproduced. Exit codes:
// 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "retouch/checkpoint.hpp"
#include "retouch/colorlab.hpp"
#include "retouch/common.hpp"
#include "retouch/decoder.hpp"
#include "retouch/encoder.hpp"
#include "retouch/gradcheck.hpp"
#include "retouch/image.hpp"
#include "retouch/metrics.hpp"
#include "retouch/model.hpp"
#include "retouch/parallel.hpp"
#include "retouch/presetlab.hpp"
#include "retouch/rar.hpp"
#include "retouch/refselect.hpp"
#include "retouch/trainer.hpp"

namespace fs = std::filesystem;
using namespace retouch;

namespace {

Exec exec_mode(bool serial) { return serial ? Exec::Serial : Exec::Parallel; }

ModelConfig arch_from(int latent, int grid, int embed_hidden, int branch_dim, int dec_hidden,
                      const std::vector<int>& blocks) {
  ModelConfig a;
  a.latent_dim = latent;
  a.grid = grid;
  a.embed_hidden = embed_hidden;
  a.branch_dim = branch_dim;
  a.dec_hidden = dec_hidden;
  a.dec_blocks = blocks;
  a.validate();
  return a;
}

// Registers the architecture flags shared by `train` and `grad-check`.
struct ArchFlags {
  int latent = 64, grid = 32, embed_hidden = 64, branch_dim = 128, dec_hidden = 128;
  std::vector<int> blocks{256, 512, 3};

  void attach(CLI::App* sub) {
    sub->add_option("--latent", latent, "Style latent dimension")->capture_default_str();
    sub->add_option("--grid", grid, "Encoder resampling grid side")->capture_default_str();
    sub->add_option("--embed-hidden", embed_hidden, "Encoder per-pixel hidden width")
        ->capture_default_str();
    sub->add_option("--branch-dim", branch_dim, "Encoder branch feature width")
        ->capture_default_str();
    sub->add_option("--dec-hidden", dec_hidden, "Decoder input-layer width")
        ->capture_default_str();
    sub->add_option("--dec-blocks", blocks, "Decoder block widths, last must be 3")
        ->delimiter(',')
        ->capture_default_str();
  }
  ModelConfig config() const {
    return arch_from(latent, grid, embed_hidden, branch_dim, dec_hidden, blocks);
  }
};

Model<float> load_model(const std::string& path) { return load_checkpoint(path).model; }

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".png" || ext == ".ppm") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

void maybe_export_lut(const std::string& lut_path, int lut_size, const Model<float>& model,
                      const std::vector<float>& z, Exec ex) {
  if (lut_path.empty()) return;
  const std::vector<float> lut = bake_lut(model, z, lut_size, ex);
  save_cube(lut_path, lut, lut_size);
  std::cout << "wrote LUT " << lut_path << " (size " << lut_size << ")\n";
}

// ---- subcommand bodies ----------------------------------------------------

struct MakeDatasetOpts {
  DatasetConfig cfg;
};

int run_make_dataset(const MakeDatasetOpts& o) {
  const DatasetPaths p = make_dataset(o.cfg);
  std::cout << "wrote " << p.train_manifest << "\n"
            << "wrote " << p.holdout_manifest << "\n"
            << "wrote " << p.presets_json << "\n"
            << "wrote " << p.groups_json << "\n";
  return 0;
}

struct TrainOpts {
  TrainConfig cfg;
  ArchFlags arch;
  bool serial = false;
};

int run_train(TrainOpts& o) {
  o.cfg.exec = exec_mode(o.serial);
  const TrainSummary s = train(o.cfg, o.arch.config());
  std::cout << "trained " << s.steps_done << " steps, final loss "
            << fmt_metric(s.final_loss) << "\n"
            << "wrote " << o.cfg.out_checkpoint << "\n";
  return 0;
}

struct BuildLibraryOpts {
  std::string manifest, model_path, out;
  bool serial = false;
};

int run_build_library(const BuildLibraryOpts& o) {
  Model<float> model = load_model(o.model_path);
  const std::vector<ManifestEntry> entries = load_manifest(o.manifest);
  ReferenceLibrary lib = build_library(entries, model, exec_mode(o.serial));
  save_library(o.out, lib);
  char fp[32];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(lib.fingerprint));
  std::cout << "library: " << lib.entries.size() << " references, latent dim "
            << lib.latent_dim << ", model fingerprint " << fp << "\n"
            << "wrote " << o.out << "\n";
  return 0;
}

struct SelectRefsOpts {
  std::string pool, out;
  int k = 0;
  bool serial = false;
};

int run_select_refs(const SelectRefsOpts& o) {
  // Pool: either a directory of images or a JSON-lines manifest whose
  // input_path column names the candidates.
  std::vector<std::string> paths;
  if (fs::is_directory(o.pool)) {
    for (const std::string& name : list_images(o.pool))
      paths.push_back((fs::path(o.pool) / name).string());
  } else {
    for (const ManifestEntry& e : load_manifest(o.pool)) paths.push_back(e.input_path);
  }
  if (paths.empty()) throw IoError("select-refs: no images found in pool " + o.pool);

  const Exec ex = exec_mode(o.serial);
  std::vector<ColorToneFeature> feats(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i)
    feats[i] = color_tone_feature(load_image(paths[i]), ex);

  const std::vector<int> picked = select_references(feats, o.k, ex);

  nlohmann::json j;
  j["k"] = o.k;
  j["pool_size"] = paths.size();
  j["selected"] = nlohmann::json::array();
  for (std::size_t r = 0; r < picked.size(); ++r) {
    j["selected"].push_back({{"rank", r + 1}, {"index", picked[r]}, {"path", paths[picked[r]]}});
    std::cout << (r + 1) << ". " << paths[picked[r]] << "\n";
  }
  std::ofstream out(o.out);
  if (!out) throw IoError("select-refs: cannot write " + o.out);
  out << j.dump(2) << "\n";
  std::cout << "wrote " << o.out << "\n";
  return 0;
}

struct RetouchOpts {
  std::string library, model_path, input, out, lut_path;
  RarConfig rar;
  int lut_size = 33;
  bool uniform_all = false;
  bool serial = false;
};

int run_retouch(const RetouchOpts& o) {
  Model<float> model = load_model(o.model_path);
  const ReferenceLibrary lib = load_library(o.library);
  const ImageRGB query = load_image(o.input);
  const Exec ex = exec_mode(o.serial);

  std::vector<float> z;
  if (o.uniform_all) {
    if (model_fingerprint(model) != lib.fingerprint)
      throw ConfigError("retouch: library was built by a different model; rebuild it");
    z = aggregate_uniform(lib);
    std::cout << "uniform aggregation over " << lib.entries.size() << " references\n";
    const ImageRGB out_img = decode_image(model, query, z, ex);
    save_image(o.out, out_img);
  } else {
    const RetouchResult res = retouch_query(query, lib, o.rar, model, ex);
    std::cout << "retrieved " << res.neighbors.size() << " of " << lib.entries.size()
              << " references (top-k " << o.rar.top_k << ", tau " << o.rar.tau << "):\n";
    for (std::size_t i = 0; i < res.neighbors.size(); ++i)
      std::cout << "  id=" << res.neighbors[i].id << " sim=" << fmt_metric(res.neighbors[i].similarity)
                << " weight=" << fmt_metric(res.weights[i]) << "\n";
    if (res.low_similarity)
      std::cerr << "warning: best content similarity is below 0.2; the library may not "
                   "cover this query's content\n";
    z = aggregate_latents(lib, res.neighbors, res.weights);
    save_image(o.out, res.image);
  }
  std::cout << "wrote " << o.out << "\n";
  maybe_export_lut(o.lut_path, o.lut_size, model, z, ex);
  return 0;
}

struct StyleTransferOpts {
  std::string model_path, content, style, out, lut_path;
  int lut_size = 33;
  bool serial = false;
};

int run_style_transfer(const StyleTransferOpts& o) {
  Model<float> model = load_model(o.model_path);
  const ImageRGB content = load_image(o.content);
  const ImageRGB style = load_image(o.style);
  const Exec ex = exec_mode(o.serial);
  const ImageRGB out_img = style_transfer(content, style, model, ex);
  save_image(o.out, out_img);
  std::cout << "wrote " << o.out << "\n";
  if (!o.lut_path.empty()) {
    const std::vector<float> z = encode(model, content, style, ex);
    maybe_export_lut(o.lut_path, o.lut_size, model, z, ex);
  }
  return 0;
}

struct EvalOpts {
  std::string pred, gt, csv, json_path;
  bool serial = false;
};

int run_eval(const EvalOpts& o) {
  const std::vector<std::string> pred_names = list_images(o.pred);
  const std::vector<std::string> gt_names = list_images(o.gt);
  std::vector<std::string> common;
  std::set_intersection(pred_names.begin(), pred_names.end(), gt_names.begin(), gt_names.end(),
                        std::back_inserter(common));
  if (common.empty())
    throw IoError("eval: no common image filenames between " + o.pred + " and " + o.gt);

  const Exec ex = exec_mode(o.serial);
  EvalReport report;
  for (const std::string& name : common) {
    const ImageRGB a = load_image((fs::path(o.pred) / name).string());
    const ImageRGB b = load_image((fs::path(o.gt) / name).string());
    EvalRow row;
    row.id = fs::path(name).stem().string();
    row.psnr = psnr(a, b);
    row.ssim = ssim(a, b, ex);
    report.rows.push_back(std::move(row));
  }

  if (!o.csv.empty()) {
    report.write_csv(o.csv);
    std::cout << "wrote " << o.csv << "\n";
  }
  const std::string summary = report.summary_json();
  if (!o.json_path.empty()) {
    std::ofstream out(o.json_path);
    if (!out) throw IoError("eval: cannot write " + o.json_path);
    out << summary << "\n";
    std::cout << "wrote " << o.json_path << "\n";
  }
  std::cout << summary << "\n";
  return 0;
}

struct GradCheckOpts {
  std::string model_path;
  GradCheckConfig cfg;
  ArchFlags arch;
  double tol = 1e-3;
  int pairs = 2;
  int pair_size = 16;
  std::uint64_t seed = 1;
};

int run_grad_check(const GradCheckOpts& o) {
  Model<double> m;
  if (!o.model_path.empty()) {
    Model<float> loaded = load_model(o.model_path);
    m = loaded.cast<double>();
  } else {
    m = Model<double>(o.arch.config());
    m.init(o.seed);
  }
  const PairBatch batch = make_gradcheck_batch(o.pairs, o.pair_size, o.pair_size, o.seed);
  GradCheckConfig cfg = o.cfg;
  cfg.seed = o.seed;
  const GradCheckReport rep = gradient_check(m, batch, cfg);

  for (const auto& [name, err] : rep.per_tensor)
    std::cout << "  " << name << "  max rel err " << fmt_metric(err) << "\n";
  std::cout << "checked " << rep.checked_entries << " parameter entries; worst tensor "
            << rep.worst_tensor << "\n"
            << "max rel err: params " << fmt_metric(rep.max_rel_err) << ", latent "
            << fmt_metric(rep.max_rel_err_latent) << ", directional "
            << fmt_metric(rep.dir_rel_err) << "\n";
  const bool ok = rep.pass(o.tol);
  std::cout << (ok ? "PASS" : "FAIL") << " (tolerance " << o.tol << ")\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  set_threads_from_env();

  CLI::App app{
      "retouch: reference-based photo retouching with a style auto-encoder.\n"
      "Train on (original, retouched) pairs, store reference styles in a library,\n"
      "and apply them to new images by content-based retrieval or direct transfer."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "retouch 1.0");

  MakeDatasetOpts md;
  md.cfg.seed = 1;
  auto* c_md = app.add_subcommand("make-dataset",
                                  "Generate a synthetic corpus of (original, retouched) pairs "
                                  "grouped into style groups");
  c_md->add_option("--out", md.cfg.out_dir, "Output directory")->required();
  c_md->add_option("--images", md.cfg.n_images, "Number of source images")->capture_default_str();
  c_md->add_option("--presets", md.cfg.n_presets, "Number of presets (preset 0 is the identity)")
      ->capture_default_str();
  c_md->add_option("--clusters", md.cfg.clusters, "Style groups; 0 means one per preset")
      ->capture_default_str();
  c_md->add_option("--size", md.cfg.image_size, "Rendered image side in pixels")
      ->capture_default_str();
  c_md->add_option("--holdout", md.cfg.holdout_groups, "Style groups held out of the train split")
      ->capture_default_str();
  c_md->add_option("--seed", md.cfg.seed, "Random seed")->capture_default_str();

  TrainOpts tr;
  tr.cfg.seed = 1;
  auto* c_tr = app.add_subcommand("train", "Train the style auto-encoder on a pair manifest");
  c_tr->add_option("--manifest", tr.cfg.manifest_path, "Training manifest (JSON lines)")
      ->required();
  c_tr->add_option("--out", tr.cfg.out_checkpoint, "Output checkpoint path")->required();
  c_tr->add_option("--steps", tr.cfg.steps, "Adam steps")->capture_default_str();
  c_tr->add_option("--batch", tr.cfg.batch, "Pairs per step")->capture_default_str();
  c_tr->add_option("--crop", tr.cfg.crop, "Square crop side fed to the encoder/decoder")
      ->capture_default_str();
  c_tr->add_option("--lr", tr.cfg.lr, "Adam learning rate")->capture_default_str();
  c_tr->add_option("--seed", tr.cfg.seed, "Random seed")->capture_default_str();
  c_tr->add_option("--checkpoint-interval", tr.cfg.checkpoint_interval,
                   "Write the checkpoint every N steps")
      ->capture_default_str();
  c_tr->add_option("--log-every", tr.cfg.log_every, "Loss CSV row interval")->capture_default_str();
  c_tr->add_option("--loss-csv", tr.cfg.loss_csv, "Append per-step loss rows here");
  c_tr->add_option("--resume", tr.cfg.resume_from, "Continue from this checkpoint");
  c_tr->add_flag("--cosine-lr", tr.cfg.cosine_lr, "Cosine-decay the learning rate to zero");
  c_tr->add_flag("--verbose", tr.cfg.verbose, "Progress lines on stderr");
  c_tr->add_flag("--serial", tr.serial, "Disable parallel execution");
  tr.arch.attach(c_tr);

  BuildLibraryOpts bl;
  auto* c_bl = app.add_subcommand("build-library",
                                  "Encode reference pairs into a retrieval library");
  c_bl->add_option("--manifest", bl.manifest, "Reference pair manifest (JSON lines)")->required();
  c_bl->add_option("--model", bl.model_path, "Trained checkpoint")->required();
  c_bl->add_option("--out", bl.out, "Output library path")->required();
  c_bl->add_flag("--serial", bl.serial, "Disable parallel execution");

  SelectRefsOpts sr;
  auto* c_sr = app.add_subcommand("select-refs",
                                  "Pick k diverse-yet-representative images from a pool for "
                                  "an artist to retouch");
  c_sr->add_option("--pool", sr.pool, "Image directory or JSON-lines manifest")->required();
  c_sr->add_option("--k", sr.k, "Number of references to select")->required();
  c_sr->add_option("--out", sr.out, "Output JSON listing the selection in rank order")
      ->required();
  c_sr->add_flag("--serial", sr.serial, "Disable parallel execution");

  RetouchOpts rt;
  auto* c_rt = app.add_subcommand("retouch",
                                  "Retouch an image by retrieving the most content-similar "
                                  "references and blending their styles");
  c_rt->add_option("--library", rt.library, "Reference library")->required();
  c_rt->add_option("--model", rt.model_path, "Trained checkpoint")->required();
  c_rt->add_option("--input", rt.input, "Query image")->required();
  c_rt->add_option("--out", rt.out, "Output image path")->required();
  c_rt->add_option("--top-k", rt.rar.top_k, "References to retrieve")->capture_default_str();
  c_rt->add_option("--tau", rt.rar.tau, "Softmax temperature on cosine similarities")
      ->capture_default_str();
  c_rt->add_flag("--uniform-all", rt.uniform_all,
                 "Skip retrieval; average every reference latent uniformly");
  c_rt->add_option("--lut", rt.lut_path, "Also export the applied transform as a .cube LUT");
  c_rt->add_option("--lut-size", rt.lut_size, "LUT lattice side")->capture_default_str();
  c_rt->add_flag("--serial", rt.serial, "Disable parallel execution");

  StyleTransferOpts st;
  auto* c_st = app.add_subcommand("style-transfer",
                                  "Transfer the color/tone of a style image onto a content "
                                  "image via a pseudo reference pair");
  c_st->add_option("--model", st.model_path, "Trained checkpoint")->required();
  c_st->add_option("--content", st.content, "Content image (defines output geometry)")
      ->required();
  c_st->add_option("--style", st.style, "Style image")->required();
  c_st->add_option("--out", st.out, "Output image path")->required();
  c_st->add_option("--lut", st.lut_path, "Also export the applied transform as a .cube LUT");
  c_st->add_option("--lut-size", st.lut_size, "LUT lattice side")->capture_default_str();
  c_st->add_flag("--serial", st.serial, "Disable parallel execution");

  EvalOpts ev;
  auto* c_ev = app.add_subcommand("eval",
                                  "Compare two image directories (paired by filename) with "
                                  "PSNR and SSIM");
  c_ev->add_option("--pred", ev.pred, "Directory of predictions")->required();
  c_ev->add_option("--gt", ev.gt, "Directory of ground truth")->required();
  c_ev->add_option("--csv", ev.csv, "Per-image CSV (image_id, psnr, ssim)");
  c_ev->add_option("--json", ev.json_path, "Write the aggregate JSON summary here too");
  c_ev->add_flag("--serial", ev.serial, "Disable parallel execution");

  GradCheckOpts gc;
  auto* c_gc = app.add_subcommand("grad-check",
                                  "Verify analytic gradients against central finite "
                                  "differences on a synthetic batch");
  c_gc->add_option("--model", gc.model_path,
                   "Checkpoint to check; omitted = fresh seeded initialization");
  c_gc->add_option("--samples", gc.cfg.samples_per_tensor,
                   "Sampled entries per tensor; 0 checks every entry")
      ->capture_default_str();
  c_gc->add_option("--fd-step", gc.cfg.h, "Central-difference step")->capture_default_str();
  c_gc->add_option("--tol", gc.tol, "Max relative error to pass")->capture_default_str();
  c_gc->add_option("--pairs", gc.pairs, "Synthetic pairs in the batch")->capture_default_str();
  c_gc->add_option("--pair-size", gc.pair_size, "Synthetic pair side in pixels")
      ->capture_default_str();
  c_gc->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  gc.arch.attach(c_gc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // help/version exit 0; any parse failure is a usage error
  }

  try {
    if (c_md->parsed()) return run_make_dataset(md);
    if (c_tr->parsed()) return run_train(tr);
    if (c_bl->parsed()) return run_build_library(bl);
    if (c_sr->parsed()) return run_select_refs(sr);
    if (c_rt->parsed()) return run_retouch(rt);
    if (c_st->parsed()) return run_style_transfer(st);
    if (c_ev->parsed()) return run_eval(ev);
    if (c_gc->parsed()) return run_grad_check(gc);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
