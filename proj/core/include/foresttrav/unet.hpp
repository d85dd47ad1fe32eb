#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "foresttrav/dataset.hpp"
#include "foresttrav/nn_ops.hpp"
#include "foresttrav/sparse_conv.hpp"

namespace foresttrav {

// Encoder channel plan per level; the decoder mirrors it.
inline constexpr std::array<std::size_t, 5> kUNetChannels = {16, 32, 64, 96,
                                                             128};

// 5-level sparse U-Net: a same-site stem, four strided+same-site encoder
// stages, four transposed+same-site decoder stages with skip concatenation,
// and a kernel-1 head emitting two class logits at the input coordinates.
struct UNetModel {
  struct Block {
    ConvParams<float> conv;
    BatchNormParams<float> bn;
  };

  Block stem;                 // 13 -> ch[0] at level 0
  std::array<Block, 4> down;  // strided ch[i] -> ch[i+1]
  std::array<Block, 4> enc;   // same-site at level i+1
  std::array<Block, 4> up;    // transposed ch[i+1] -> ch[i]
  std::array<Block, 4> dec;   // same-site 2*ch[i] -> ch[i] after the skip
  ConvParams<float> head;     // kernel 1, ch[0] -> 2
  NormalizationStats norm;    // input feature scaling carried with the model

  std::size_t parameter_count() const;
};

// Allocates the default architecture and draws fan-in-scaled uniform weights
// from the seed; batch norms start at identity.
UNetModel make_unet(std::uint64_t init_seed);

// Gradient buffers mirroring the trainable tensors of UNetModel.
struct UNetGradients {
  struct ConvGrads {
    std::vector<float> weights;
    std::vector<float> bias;
  };
  struct BnGrads {
    std::vector<float> gamma;
    std::vector<float> beta;
  };
  struct BlockGrads {
    ConvGrads conv;
    BnGrads bn;
  };

  BlockGrads stem;
  std::array<BlockGrads, 4> down;
  std::array<BlockGrads, 4> enc;
  std::array<BlockGrads, 4> up;
  std::array<BlockGrads, 4> dec;
  ConvGrads head;

  void allocate(const UNetModel& model);
  void zero();
};

// Named views over the model tensors in a fixed traversal order; gradient
// tensors enumerate in the identical order.
struct TensorRef {
  std::string name;
  std::vector<float>* values;
};
std::vector<TensorRef> parameter_tensors(UNetModel& model);
std::vector<TensorRef> gradient_tensors(UNetGradients& grads);
std::vector<TensorRef> buffer_tensors(UNetModel& model);  // running stats

// Coordinate sets, downsampled levels, and kernel maps for one input
// coordinate set; reusable across passes and across ensemble members.
struct UNetGeometry {
  std::array<std::vector<Coord4>, 5> coords;  // coords[0] = input
  std::array<ConvGeometry, 5> same;           // kernel-3 same-site per level
  std::array<ConvGeometry, 4> strided;        // level i -> i+1
  std::array<ConvGeometry, 4> transposed;     // level i+1 -> i
  ConvGeometry head;                          // kernel-1 at level 0
};
UNetGeometry build_unet_geometry(const std::vector<Coord4>& coords);

// One forward/backward pass with saved activations. Output logits sit at
// exactly the input coordinates. backward() is valid only after a forward in
// train mode and accumulates into `grads`.
class UNetAutograd {
 public:
  SparseTensor forward(UNetModel& model, const UNetGeometry& geom,
                       const SparseTensor& input, bool train_mode);
  void backward(const UNetModel& model, const SparseTensor& grad_logits,
                UNetGradients& grads);

 private:
  struct BlockTape {
    SparseTensor in;
    BatchNormContext<float> bn_ctx;
    std::vector<uint8_t> relu_mask;
  };

  const UNetGeometry* geom_ = nullptr;
  bool train_mode_ = false;
  BlockTape stem_;
  std::array<BlockTape, 4> down_;
  std::array<BlockTape, 4> enc_;
  std::array<BlockTape, 4> up_;
  std::array<BlockTape, 4> dec_;
  SparseTensor head_in_;
};

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 9e-4;
  std::size_t batch_size = 64;  // cubes per batch
  int patience = 5;
  int max_epochs = 250;
  std::uint64_t seed = 0;

  void validate() const;
};

// Signals a stop once the validation loss has failed to improve (strictly)
// for `patience` consecutive epochs after the best one.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Records one epoch's validation loss; true means stop after this epoch.
  bool record(double loss) {
    ++epoch_;
    if (loss < best_loss_) {
      best_loss_ = loss;
      best_epoch_ = epoch_;
      stale_ = 0;
      return false;
    }
    ++stale_;
    return stale_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int stale_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> log;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int skipped_steps = 0;  // optimizer steps dropped for non-finite gradients
};

// Concatenates cubes into one batch tensor (batch index = cube position)
// with features scaled by `norm`; labels stay index-aligned with the rows.
struct BatchData {
  SparseTensor input;
  std::vector<TravLabel> labels;
  std::size_t labeled = 0;
};
BatchData assemble_batch(const std::vector<const CubeSample*>& cubes,
                         const NormalizationStats& norm);

// Trains in shuffled batches with fresh augmentation each epoch, evaluates
// the validation loss after every epoch (no augmentation, eval-mode batch
// norm), early-stops on the validation loss, and restores the best weights.
// Computes model.norm from the training cubes. Throws DataError on empty
// splits.
TrainResult train_unet(UNetModel& model,
                       const std::vector<CubeSample>& train_cubes,
                       const std::vector<CubeSample>& val_cubes,
                       const TrainConfig& cfg);

// Majority vote: each model contributes its per-voxel argmax (equal logits
// count as non-traversable); the result is the vote fraction in [0, 1],
// always a multiple of 1/N. Models are taken non-const for the forward-pass
// plumbing but eval-mode passes leave them untouched.
ProbabilityMap ensemble_predict(std::vector<UNetModel>& models,
                                const FeatureMap& map);

}  // namespace foresttrav
