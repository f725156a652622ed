#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "endo/config.hpp"
#include "endo/metrics.hpp"

// Stages shared by the command-line subcommands and `repro`. Every stage
// writes `config.txt` (the resolved config plus the stage's inputs) into its
// output directory.
namespace endo {

namespace fs = std::filesystem;

inline constexpr char kConfigEcho[] = "config.txt";

// A directory argument means its manifest.tsv.
fs::path manifest_path(const fs::path& dir_or_file);

// Which manifest rows a stage reads. Heldout is val and test.
enum class SplitFilter { All, Train, Val, Test, Heldout };
SplitFilter parse_split_filter(const std::string& s);
Manifest filter_manifest(const Manifest& m, SplitFilter f);

void write_config_echo(const fs::path& out_dir, const RunConfig& config, const std::string& stage);

Manifest gen_synth_stage(const RunConfig& config, std::size_t n, const fs::path& out);
Manifest gen_pseudoreal_stage(const RunConfig& config, std::size_t n, const fs::path& out);

// Trains on the train split, selects on val. Writes crf.ckpt (+ sidecar)
// and depth_log.csv.
CrfModel train_depth_stage(const RunConfig& config, const fs::path& data, const fs::path& out);

struct DaStageResult {
  DaResult training;
  double heldout_patch_accuracy = 0.0;
};

// Trains on the train splits. Held-out accuracy compares transformed val and
// test images of `real` with val and test images of `synthetic`. Writes
// transformer.ckpt, discriminator.ckpt, da_log.csv and da_eval.txt.
DaStageResult train_da_stage(const RunConfig& config, const fs::path& synthetic, const fs::path& real,
                             const fs::path& out);

// Transformed images and copies of their depths, with a manifest.
Manifest transform_stage(const RunConfig& config, const fs::path& transformer, const fs::path& input,
                         SplitFilter filter, const fs::path& out);

// DPTH predictions (and 8-bit visualizations when asked) with a manifest
// whose image column points at the input image.
Manifest predict_stage(const RunConfig& config, const fs::path& model, const fs::path& input, SplitFilter filter,
                       const fs::path& out, bool visualize);

// Report of predictions against the selected truth rows. With an output
// directory the CSV is written there as `<tag>.csv`.
EvalReport eval_stage(const RunConfig& config, const fs::path& predictions, const fs::path& truths,
                      SplitFilter truth_filter, const std::string& tag, const std::optional<fs::path>& out);

struct ReproResult {
  EvalReport raw, transformed;
  double heldout_patch_accuracy = 0.0;
  std::size_t texture_pairs = 0;
  double texture_l1_raw = 0.0;          // mean |x_textured - x_clean|
  double texture_l1_transformed = 0.0;  // mean |T(x_textured) - x_clean|
  std::string summary;
};

// Synthetic set -> pseudo-real set -> depth model -> adaptation ->
// predictions on raw and transformed held-out pseudo-real images ->
// reports. Everything lands under `out`, with results in summary.txt and
// metrics.txt.
ReproResult repro(const RunConfig& config, const fs::path& out);

}  // namespace endo
