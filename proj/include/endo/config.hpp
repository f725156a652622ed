#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "endo/adversarial.hpp"
#include "endo/crf_model.hpp"
#include "endo/dataset.hpp"

namespace endo {

// Names the offending key in what() and key().
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::invalid_argument("key " + key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Every tunable of the pipeline, flat. Defaults are the module defaults.
struct RunConfig {
  std::uint64_t seed = 7;
  std::size_t n_synth = 560;
  std::size_t n_real = 300;
  std::size_t heldout_pairs = 50;  // paired images for the texture-removal check
  DatasetConfig data;              // textured flag is set per stage
  CrfConfig crf;
  CrfTrainConfig crf_train;
  DaConfig da;

  DatasetConfig synthetic_data() const;
  DatasetConfig pseudo_real_data() const;
  // Seeds of the trainers follow `seed`.
  CrfTrainConfig depth_training() const;
  DaConfig adaptation() const;

  // Sets one key from its text value after parsing and range checking.
  void set(const std::string& key, const std::string& value);
  // Cross-key checks (crop within the image, even batch, ...).
  void validate() const;
  // Every key in table order as `key=value` lines; loading this text gives
  // back an identical config.
  std::string to_text() const;

  static const std::vector<std::string>& keys();
};

// Defaults overlaid by `key=value` lines. Blank lines and lines starting
// with '#' are skipped; unknown keys and out-of-range values throw
// ConfigError.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace endo
