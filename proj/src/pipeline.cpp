#include "endo/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "endo/checkpoint.hpp"

namespace endo {

namespace {

void note(const std::string& stage, const std::string& message) {
  std::cerr << "[" << stage << "] " << message << std::endl;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Image> load_images(const Manifest& m) {
  std::vector<Image> images;
  for (const auto& e : m.entries) images.push_back(read_pgm(m.image_path(e)));
  return images;
}

Manifest load_filtered(const fs::path& input, SplitFilter filter) {
  const Manifest m = filter_manifest(read_manifest(manifest_path(input)), filter);
  if (m.entries.empty()) throw std::runtime_error("no manifest rows selected from " + input.string());
  return m;
}

}  // namespace

fs::path manifest_path(const fs::path& p) { return fs::is_directory(p) ? p / kManifestName : p; }

SplitFilter parse_split_filter(const std::string& s) {
  if (s == "all") return SplitFilter::All;
  if (s == "train") return SplitFilter::Train;
  if (s == "val") return SplitFilter::Val;
  if (s == "test") return SplitFilter::Test;
  if (s == "heldout") return SplitFilter::Heldout;
  throw std::invalid_argument("unknown split '" + s + "' (all, train, val, test, heldout)");
}

Manifest filter_manifest(const Manifest& m, SplitFilter f) {
  Manifest out;
  out.base_dir = m.base_dir;
  for (const auto& e : m.entries) {
    const bool keep = f == SplitFilter::All || (f == SplitFilter::Train && e.split == Split::Train) ||
                      (f == SplitFilter::Val && e.split == Split::Val) ||
                      (f == SplitFilter::Test && e.split == Split::Test) ||
                      (f == SplitFilter::Heldout && e.split != Split::Train);
    if (keep) out.entries.push_back(e);
  }
  return out;
}

void write_config_echo(const fs::path& out_dir, const RunConfig& config, const std::string& stage) {
  fs::create_directories(out_dir);
  write_text(out_dir / kConfigEcho, "# " + stage + "\n" + config.to_text());
}

Manifest gen_synth_stage(const RunConfig& config, std::size_t n, const fs::path& out) {
  note("gen-synth", std::to_string(n) + " images, seed " + std::to_string(config.seed));
  Manifest m = generate_dataset(n, config.seed, out, config.synthetic_data());
  write_config_echo(out, config, "gen-synth n=" + std::to_string(n));
  return m;
}

Manifest gen_pseudoreal_stage(const RunConfig& config, std::size_t n, const fs::path& out) {
  note("gen-pseudoreal", std::to_string(n) + " images, seed " + std::to_string(config.seed));
  Manifest m = generate_dataset(n, config.seed, out, config.pseudo_real_data());
  write_config_echo(out, config, "gen-pseudoreal n=" + std::to_string(n));
  return m;
}

CrfModel train_depth_stage(const RunConfig& config, const fs::path& data, const fs::path& out) {
  const Manifest m = read_manifest(manifest_path(data));
  const auto train = prepare_split(m, Split::Train, config.crf);
  const auto val = prepare_split(m, Split::Val, config.crf);
  if (train.empty()) throw std::runtime_error("no training images in " + data.string());
  note("train-depth", std::to_string(train.size()) + " train, " + std::to_string(val.size()) + " val images");
  const CrfTrainResult r = train_crf(train, val, CrfModel::create(config.crf, config.seed), config.depth_training());

  fs::create_directories(out);
  save_crf(out / "crf.ckpt", r.model);
  std::ostringstream log;
  log << "epoch,train_nll,val_log10,beta1,beta2\n";
  for (const auto& h : r.history) {
    log << h.epoch << ',' << num(h.train_nll) << ',' << (std::isnan(h.val_log10) ? "" : num(h.val_log10));
    for (double b : h.beta) log << ',' << num(b);
    log << '\n';
  }
  write_text(out / "depth_log.csv", log.str());
  write_config_echo(out, config, "train-depth data=" + fs::absolute(data).string());
  note("train-depth", "selected epoch " + std::to_string(r.best_epoch));
  return r.model;
}

DaStageResult train_da_stage(const RunConfig& config, const fs::path& synthetic, const fs::path& real,
                             const fs::path& out) {
  const Manifest syn = read_manifest(manifest_path(synthetic));
  const Manifest rl = read_manifest(manifest_path(real));
  const auto syn_train = load_images(filter_manifest(syn, SplitFilter::Train));
  const auto real_train = load_images(filter_manifest(rl, SplitFilter::Train));
  const DaConfig dc = config.adaptation();
  note("train-da", std::to_string(syn_train.size()) + " synthetic, " + std::to_string(real_train.size()) +
                       " pseudo-real images, " + std::to_string(dc.pretrain_t + dc.pretrain_d + dc.steps) +
                       " steps");
  DaStageResult r{train_da(syn_train, real_train, dc), 0.0};

  auto syn_held = load_images(filter_manifest(syn, SplitFilter::Heldout));
  auto real_held = load_images(filter_manifest(rl, SplitFilter::Heldout));
  const std::size_t n = std::min(syn_held.size(), real_held.size());
  if (n > 0) {
    syn_held.resize(n);
    real_held.resize(n);
    for (auto& img : real_held) img = r.training.transformer.transform(img);
    r.heldout_patch_accuracy = patch_accuracy(r.training.discriminator, real_held, syn_held);
  } else {
    r.heldout_patch_accuracy = std::nan("");
  }

  fs::create_directories(out);
  save_transformer(out / "transformer.ckpt", r.training.transformer);
  save_discriminator(out / "discriminator.ckpt", r.training.discriminator);
  write_da_log(out / "da_log.csv", r.training.log);
  write_text(out / "da_eval.txt", "heldout_images=" + std::to_string(n) +
                                      "\nheldout_patch_acc=" + num(r.heldout_patch_accuracy) + "\n");
  write_config_echo(out, config,
                    "train-da synthetic=" + fs::absolute(synthetic).string() + " real=" + fs::absolute(real).string());
  note("train-da", "held-out patch accuracy " + num(r.heldout_patch_accuracy));
  return r;
}

Manifest transform_stage(const RunConfig& config, const fs::path& transformer, const fs::path& input,
                         SplitFilter filter, const fs::path& out) {
  const TransformerNet t = load_transformer(transformer);
  const Manifest in = load_filtered(input, filter);
  note("transform", std::to_string(in.size()) + " images");
  fs::create_directories(out);
  Manifest m;
  m.base_dir = out;
  for (const auto& e : in.entries) {
    const fs::path img = e.image.filename(), depth = e.depth.filename();
    write_pgm(out / img, t.transform(read_pgm(in.image_path(e))));
    fs::copy_file(in.depth_path(e), out / depth, fs::copy_options::overwrite_existing);
    m.entries.push_back({e.index, img, depth, e.seed, e.split});
  }
  write_manifest(out / kManifestName, m);
  write_config_echo(out, config,
                    "transform model=" + fs::absolute(transformer).string() + " input=" + fs::absolute(input).string());
  return m;
}

Manifest predict_stage(const RunConfig& config, const fs::path& model, const fs::path& input, SplitFilter filter,
                       const fs::path& out, bool visualize) {
  const CrfModel crf = load_crf(model);
  const Manifest in = load_filtered(input, filter);
  note("predict", std::to_string(in.size()) + " images");
  fs::create_directories(out);
  Manifest m;
  m.base_dir = out;
  for (const auto& e : in.entries) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "pred_%05zu", e.index);
    const DepthMap d = predict_depth(read_pgm(in.image_path(e)), crf);
    const fs::path depth = std::string(stem) + ".dpth";
    write_depth(out / depth, d);
    if (visualize) write_pgm(out / (std::string(stem) + ".pgm"), depth_visualization(d));
    m.entries.push_back({e.index, fs::absolute(in.image_path(e)), depth, e.seed, e.split});
  }
  write_manifest(out / kManifestName, m);
  write_config_echo(out, config,
                    "predict model=" + fs::absolute(model).string() + " input=" + fs::absolute(input).string());
  return m;
}

EvalReport eval_stage(const RunConfig& config, const fs::path& predictions, const fs::path& truths,
                      SplitFilter truth_filter, const std::string& tag, const std::optional<fs::path>& out) {
  const Manifest p = read_manifest(manifest_path(predictions));
  const Manifest t = load_filtered(truths, truth_filter);
  EvalReport r = evaluate(p, t, tag);
  if (out) {
    fs::create_directories(*out);
    write_report_csv(*out / (tag + ".csv"), r);
    write_config_echo(*out, config,
                      "eval pred=" + fs::absolute(predictions).string() + " truth=" + fs::absolute(truths).string());
  }
  return r;
}

ReproResult repro(const RunConfig& config, const fs::path& out) {
  config.validate();
  fs::create_directories(out);
  write_config_echo(out, config, "repro");

  const fs::path syn = out / "synthetic", real = out / "pseudo_real";
  gen_synth_stage(config, config.n_synth, syn);
  RunConfig real_config = config;
  real_config.seed = config.seed + 1;  // an independent scene stream
  gen_pseudoreal_stage(real_config, config.n_real, real);

  train_depth_stage(config, syn, out / "depth");
  const DaStageResult da = train_da_stage(config, syn, real, out / "da");

  transform_stage(config, out / "da" / "transformer.ckpt", real, SplitFilter::Heldout, out / "transformed");
  predict_stage(config, out / "depth" / "crf.ckpt", real, SplitFilter::Heldout, out / "pred_raw", false);
  predict_stage(config, out / "depth" / "crf.ckpt", out / "transformed", SplitFilter::All, out / "pred_transformed",
                false);

  ReproResult r;
  r.raw = eval_stage(config, out / "pred_raw", real, SplitFilter::Heldout, "raw", out);
  r.transformed = eval_stage(config, out / "pred_transformed", out / "transformed", SplitFilter::All, "transformed", out);
  r.heldout_patch_accuracy = da.heldout_patch_accuracy;

  // Paired texture check on the first held-out images.
  const Manifest clean = filter_manifest(read_manifest(real / kCleanManifestName), SplitFilter::Heldout);
  const Manifest textured = filter_manifest(read_manifest(manifest_path(real)), SplitFilter::Heldout);
  const Manifest transformed = read_manifest(manifest_path(out / "transformed"));
  std::map<std::size_t, const ManifestEntry*> by_index;
  for (const auto& e : transformed.entries) by_index[e.index] = &e;
  for (std::size_t i = 0; i < textured.size() && r.texture_pairs < config.heldout_pairs; ++i) {
    const auto& e = textured.entries[i];
    const Image x = read_pgm(textured.image_path(e));
    const Image c = read_pgm(clean.image_path(clean.entries[i]));
    const Image tx = read_pgm(transformed.image_path(*by_index.at(e.index)));
    double raw = 0.0, adapted = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      raw += std::abs(x.pixels[k] - c.pixels[k]);
      adapted += std::abs(tx.pixels[k] - c.pixels[k]);
    }
    r.texture_l1_raw += raw / static_cast<double>(x.size());
    r.texture_l1_transformed += adapted / static_cast<double>(x.size());
    ++r.texture_pairs;
  }
  if (r.texture_pairs > 0) {
    r.texture_l1_raw /= static_cast<double>(r.texture_pairs);
    r.texture_l1_transformed /= static_cast<double>(r.texture_pairs);
  }

  std::ostringstream s;
  s << improvement_summary(r.raw, r.transformed);
  s << "held-out discriminator patch accuracy " << num(r.heldout_patch_accuracy) << '\n';
  s << "texture l1 to clean over " << r.texture_pairs << " pairs: raw " << num(r.texture_l1_raw) << " transformed "
    << num(r.texture_l1_transformed) << '\n';
  r.summary = s.str();
  write_text(out / "summary.txt", r.summary);

  std::ostringstream m;
  m << "images=" << r.raw.rows.size() << "\nssim_raw=" << num(r.raw.mean_ssim)
    << "\nssim_transformed=" << num(r.transformed.mean_ssim) << "\nnrmse_raw=" << num(r.raw.mean_nrmse)
    << "\nnrmse_transformed=" << num(r.transformed.mean_nrmse) << "\nhd_raw=" << num(r.raw.mean_hd)
    << "\nhd_transformed=" << num(r.transformed.mean_hd) << "\nheldout_patch_acc=" << num(r.heldout_patch_accuracy)
    << "\ntexture_pairs=" << r.texture_pairs << "\ntexture_l1_raw=" << num(r.texture_l1_raw)
    << "\ntexture_l1_transformed=" << num(r.texture_l1_transformed) << '\n';
  write_text(out / "metrics.txt", m.str());
  return r;
}

}  // namespace endo
