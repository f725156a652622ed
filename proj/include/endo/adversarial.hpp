#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "endo/autodiff.hpp"
#include "endo/image.hpp"
#include "endo/optim.hpp"
#include "endo/rng.hpp"

namespace endo {

// 7x7 conv to `channels` maps, `blocks` residual blocks, 1x1 conv to one
// map, then soft_clip onto (0, 1).
struct TransformerShape {
  std::size_t width = 64, height = 64;
  std::size_t channels = 64;
  std::size_t blocks = 10;
  double sharpness = 50.0;  // soft_clip steepness

  void validate() const;
};

class TransformerNet {
 public:
  TransformerShape shape;
  ParamStore params;

  // Channel 0 of the input conv and of the output conv carries the image
  // through unchanged, the other input channels are He-uniform, and the
  // second conv of every residual block starts at zero. The untrained net
  // is therefore the identity up to soft_clip distortion.
  static TransformerNet create(const TransformerShape& shape, std::uint64_t seed);

  // Fully convolutional: any HxWx1 input.
  Var forward(Graph& g, Var image);        // trainable leaves
  Var forward(Graph& g, Var image) const;  // read-only leaves
  // Throws std::invalid_argument unless the image has the configured dims.
  Image transform(const Image& image) const;
};

// conv 3x3 -> pool -> conv 3x3 -> conv 3x3 -> pool -> conv 3x3 -> conv 1x1
// to two logits, softmax per cell. Output grid is (H/4) x (W/4) x 2 with
// channel 0 the probability that the patch comes from a transformed real
// image.
struct DiscriminatorShape {
  std::size_t conv1 = 16, conv2 = 32, conv3 = 32, conv4 = 32;

  void validate() const;
};

class DiscriminatorNet {
 public:
  DiscriminatorShape shape;
  ParamStore params;

  static DiscriminatorNet create(const DiscriminatorShape& shape, std::uint64_t seed);

  Var forward(Graph& g, Var image);
  Var forward(Graph& g, Var image) const;
  Tensor probabilities(const Image& image) const;
};

inline constexpr double kProbabilityFloor = 1e-7;

// Per-patch cross-entropy: mean of -log D over the transformed batch plus
// mean of -log(1 - D) over the synthetic batch.
Var discriminator_loss(Graph& g, DiscriminatorNet& d, const std::vector<Tensor>& transformed,
                       const std::vector<Tensor>& synthetic);

struct TransformerLoss {
  Var total;        // adversarial + lambda * selfreg
  Var adversarial;  // mean over patches of -log(1 - D(T(x)))
  Var selfreg;      // mean |T(x) - x| per pixel
};

// D enters with read-only leaves, so gradients reach only T.
TransformerLoss transformer_loss(Graph& g, TransformerNet& t, const DiscriminatorNet& d,
                                 const std::vector<Tensor>& batch, double lambda);

// Fraction of patches on the correct side of 0.5, pooled over both sets.
double patch_accuracy(const DiscriminatorNet& d, const std::vector<Image>& transformed,
                      const std::vector<Image>& synthetic);

// Bounded reservoir of past transformer outputs.
class HistoryBuffer {
 public:
  HistoryBuffer(std::size_t capacity, std::uint64_t seed);

  // Returns the first k/2 items of new_batch and k/2 uniform draws from the
  // buffer, or the first k items of new_batch while the buffer holds fewer
  // than k/2. Then every item of new_batch is inserted: appended while there
  // is room, otherwise written over a uniformly chosen slot.
  std::vector<Tensor> push_sample(const std::vector<Tensor>& new_batch, std::size_t k);

  std::size_t sample_slot();
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<Tensor>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::vector<Tensor> items_;
  Rng rng_;
};

struct DaConfig {
  TransformerShape transformer;
  DiscriminatorShape discriminator;
  double lambda = 0.5;
  std::size_t buffer_capacity = 128;
  std::size_t batch = 8;  // k
  int n_t = 2, n_d = 1;
  int steps = 2000;  // S
  int pretrain_t = 800, pretrain_d = 200;
  double lr_t = 1e-3, lr_d = 1e-3;
  double momentum = 0.5;
  // Side of the random square crops both networks train on; 0 trains on
  // whole images. Transforms always run on whole images.
  std::size_t crop = 0;
  std::uint64_t seed = 7;

  void validate() const;
};

// One CSV row. Columns that a phase does not compute hold NaN and are
// written empty: pretraining T has no adversarial term or D columns,
// pretraining D has no T columns.
struct DaLogRow {
  int step = 0;
  double loss_t, loss_t_adv, loss_t_selfreg, loss_d, disc_patch_acc;
};

struct DaResult {
  TransformerNet transformer;
  DiscriminatorNet discriminator;
  std::vector<DaLogRow> log;
};

// pretrain_t self-regularization steps for T, pretrain_d steps for D, then
// `steps` rounds of n_t transformer updates and n_d discriminator updates.
// Discriminator batches of transformed images go through the history
// buffer. Throws NonFiniteError with step context on divergence.
DaResult train_da(const std::vector<Image>& synthetic, const std::vector<Image>& real, const DaConfig& config);

inline constexpr char kDaLogHeader[] = "step,loss_T,loss_T_adv,loss_T_selfreg,loss_D,disc_patch_acc";
void write_da_log(const std::filesystem::path& path, const std::vector<DaLogRow>& log);

// Checkpoint plus a `<path>.net` key=value sidecar with the architecture.
void save_transformer(const std::filesystem::path& path, const TransformerNet& t);
TransformerNet load_transformer(const std::filesystem::path& path);
void save_discriminator(const std::filesystem::path& path, const DiscriminatorNet& d);
DiscriminatorNet load_discriminator(const std::filesystem::path& path);

}  // namespace endo
