#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "endo/autodiff.hpp"
#include "endo/crf.hpp"
#include "endo/dataset.hpp"
#include "endo/optim.hpp"
#include "endo/superpixel.hpp"

namespace endo {

// Unary regressor: three 3x3 convs, superpixel average pooling, then a
// three-layer fully connected head producing one depth per superpixel.
struct UnaryNetShape {
  std::size_t conv1 = 8, conv2 = 16, conv3 = 16;
  std::size_t fc1 = 32, fc2 = 16;
};

struct CrfConfig {
  UnaryNetShape net;
  SlicParams slic;
  GraphParams graph;
  double lambda_beta = 0.0007;

  void validate() const;
};

class CrfModel {
 public:
  CrfConfig config;
  ParamStore params;

  // He-uniform weights, zero biases, beta = 1.
  static CrfModel create(const CrfConfig& config, std::uint64_t seed);

  std::vector<double> beta() const;
  void clamp_beta();
  // Sets every weight to zero and the final bias to b: the constant head.
  void make_constant(double b);

  // h for every label of spmap as a [p, 1] node. Parameters enter as
  // trainable leaves.
  Var unary(Graph& g, const Tensor& image, const SuperpixelMap& spmap);
  // Same forward pass with read-only parameters.
  Var unary(Graph& g, const Tensor& image, const SuperpixelMap& spmap) const;
  std::vector<double> unary_values(const Image& image, const SuperpixelMap& spmap) const;

  static constexpr const char* kBetaBlock = "crf.beta";
};

// An image segmented once, with its graph restricted to superpixels that
// have finite ground truth.
struct CrfSample {
  Tensor image;
  SuperpixelMap spmap;
  std::vector<bool> valid;
  SimilarityGraph graph;   // over valid labels, renumbered
  std::vector<double> y;   // pooled depth of valid labels
};

CrfSample prepare_sample(const Image& image, const DepthMap& depth, const CrfConfig& config);
std::vector<CrfSample> prepare_split(const Manifest& manifest, Split split, const CrfConfig& config);

// Mean |log10(pred) - log10(truth)| over the valid superpixels, with pred
// floored at 1e-6.
double log10_error(const CrfModel& model, const CrfSample& sample);

struct CrfTrainConfig {
  SgdConfig sgd;
  int epochs = 30;
  std::uint64_t seed = 7;
  // Start the final bias at the mean training depth instead of zero.
  bool init_head_bias = true;

  void validate() const;
};

struct CrfEpochStats {
  int epoch = 0;
  double train_nll = 0.0;  // mean per image over the epoch's steps
  double val_log10 = 0.0;  // NaN when there is no validation data
  std::vector<double> beta;
};

struct CrfTrainResult {
  CrfModel model;  // parameters of the selected epoch
  std::vector<CrfEpochStats> history;
  int best_epoch = -1;
};

// Per-image SGD over shuffled samples; the epoch with the lowest validation
// log10 error is kept (the last epoch when val is empty). Throws
// NonFiniteError with epoch/step context on divergence.
CrfTrainResult train_crf(const std::vector<CrfSample>& train, const std::vector<CrfSample>& val, CrfModel model,
                         const CrfTrainConfig& config);

// segment -> graph -> unary -> MAP -> broadcast.
DepthMap predict_depth(const Image& image, const CrfModel& model);

// Parameters in the checkpoint format plus `<path>.crf`, a key=value text
// sidecar with beta and the segmentation/network configuration.
void save_crf(const std::filesystem::path& path, const CrfModel& model);
CrfModel load_crf(const std::filesystem::path& path);

}  // namespace endo
