// Command-line front end. Errors end with exactly one line on stderr:
//   error kind=<usage|config|runtime> [key=<name>] msg=<text>
// Usage and config errors exit 2, runtime failures exit 1.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "endo/pipeline.hpp"

namespace {

using namespace endo;

constexpr int kUsageExit = 2;
constexpr int kRuntimeExit = 1;

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(const char* kind, const std::string& message, const std::string& key = {}) {
  std::cerr << "error kind=" << kind;
  if (!key.empty()) std::cerr << " key=" << key;
  std::cerr << " msg=" << one_line(message) << std::endl;
  return std::string(kind) == "runtime" ? kRuntimeExit : kUsageExit;
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::vector<std::string> sets;

  // Defaults, then the file, then --set pairs, then --seed.
  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

const std::vector<std::string> kSplits = {"all", "train", "val", "test", "heldout"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic endoscopy depth estimation with reverse domain adaptation"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--seed", common.seed, "Master seed (overrides the config)");
  app.add_option("--config", common.config, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--out", common.out, "Output directory");
  app.add_option("--set", common.sets, "Config override key=value (repeatable)");

  std::optional<std::size_t> n;
  std::string data, synthetic, real, model, input, pred, truth, tag = "eval", split = "all";
  bool pgm = false;

  auto* gen_synth = app.add_subcommand("gen-synth", "Render untextured synthetic images with depth");
  gen_synth->add_option("--n", n, "Number of images (default n_synth)")->check(CLI::PositiveNumber);

  auto* gen_real = app.add_subcommand("gen-pseudoreal", "Render then texture pseudo-real images");
  gen_real->add_option("--n", n, "Number of images (default n_real)")->check(CLI::PositiveNumber);

  auto* train_depth = app.add_subcommand("train-depth", "Train the CRF depth model on a dataset");
  train_depth->add_option("--data", data, "Dataset directory or manifest")->required();

  auto* train_da = app.add_subcommand("train-da", "Train the transformer and discriminator");
  train_da->add_option("--synthetic", synthetic, "Synthetic dataset")->required();
  train_da->add_option("--real", real, "Pseudo-real dataset")->required();

  auto* transform = app.add_subcommand("transform", "Map images into the synthetic domain");
  transform->add_option("--model", model, "Transformer checkpoint")->required()->check(CLI::ExistingFile);
  transform->add_option("--input", input, "Dataset directory or manifest")->required();
  transform->add_option("--split", split, "Rows to use")->check(CLI::IsMember(kSplits));

  auto* predict = app.add_subcommand("predict", "Predict depth maps");
  predict->add_option("--model", model, "CRF checkpoint")->required()->check(CLI::ExistingFile);
  predict->add_option("--input", input, "Dataset directory or manifest")->required();
  predict->add_option("--split", split, "Rows to use")->check(CLI::IsMember(kSplits));
  predict->add_flag("--pgm", pgm, "Also write normalized 8-bit depth images");

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth (CSV on stdout)");
  eval->add_option("--pred", pred, "Prediction manifest or directory")->required();
  eval->add_option("--truth", truth, "Ground-truth manifest or directory")->required();
  eval->add_option("--split", split, "Truth rows to use")->check(CLI::IsMember(kSplits));
  eval->add_option("--tag", tag, "Report name");

  auto* repro_cmd = app.add_subcommand("repro", "Run the full raw vs transformed experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << app.help() << '\n';
    return fail("usage", e.what());
  }

  const bool needs_out = !(eval->parsed() || repro_cmd->parsed());
  if (needs_out && common.out.empty()) {
    std::cerr << app.help() << '\n';
    return fail("usage", "--out is required");
  }

  RunConfig config;
  try {
    config = common.resolve();
  } catch (const ConfigError& e) {
    return fail("config", e.what(), e.key());
  } catch (const std::exception& e) {
    return fail("config", e.what());
  }

  try {
    const fs::path out = common.out;
    const SplitFilter filter = parse_split_filter(split);
    if (gen_synth->parsed()) {
      gen_synth_stage(config, n.value_or(config.n_synth), out);
    } else if (gen_real->parsed()) {
      gen_pseudoreal_stage(config, n.value_or(config.n_real), out);
    } else if (train_depth->parsed()) {
      train_depth_stage(config, data, out);
    } else if (train_da->parsed()) {
      train_da_stage(config, synthetic, real, out);
    } else if (transform->parsed()) {
      transform_stage(config, model, input, filter, out);
    } else if (predict->parsed()) {
      predict_stage(config, model, input, filter, out, pgm);
    } else if (eval->parsed()) {
      std::optional<fs::path> dir;
      if (!common.out.empty()) dir = out;
      std::cout << format_report_csv(eval_stage(config, pred, truth, filter, tag, dir));
    } else if (repro_cmd->parsed()) {
      std::cout << repro(config, common.out.empty() ? fs::path("repro_out") : out).summary;
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what(), e.key());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
