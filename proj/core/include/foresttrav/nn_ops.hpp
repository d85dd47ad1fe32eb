#pragma once

#include <cstdint>
#include <vector>

#include "foresttrav/sparse_conv.hpp"
#include "foresttrav/types.hpp"

namespace foresttrav {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

template <typename Scalar>
struct BatchNormParams {
  std::vector<Scalar> gamma;
  std::vector<Scalar> beta;
  std::vector<Scalar> running_mean;
  std::vector<Scalar> running_var;

  void allocate(std::size_t channels) {
    gamma.assign(channels, Scalar(1));
    beta.assign(channels, Scalar(0));
    running_mean.assign(channels, Scalar(0));
    running_var.assign(channels, Scalar(1));
  }
  std::size_t channels() const { return gamma.size(); }
};

// Saved activations for the backward pass.
template <typename Scalar>
struct BatchNormContext {
  std::vector<Scalar> x_hat;    // normalized inputs, [sites x channels]
  std::vector<Scalar> inv_std;  // per channel
};

// In-place normalization over all active sites of the batch using batch
// statistics (biased variance); updates the running stats with momentum.
// Throws DataError with fewer than two sites.
template <typename Scalar>
void batch_norm_train(SparseTensorT<Scalar>& x, BatchNormParams<Scalar>& params,
                      BatchNormContext<Scalar>& ctx);

// In-place normalization with the running statistics; no state is touched.
template <typename Scalar>
void batch_norm_eval(SparseTensorT<Scalar>& x,
                     const BatchNormParams<Scalar>& params);

// In-place dy -> dx; accumulates (+=) into grad_gamma / grad_beta, which
// must be pre-sized to the channel count.
template <typename Scalar>
void batch_norm_backward(SparseTensorT<Scalar>& grad,
                         const BatchNormParams<Scalar>& params,
                         const BatchNormContext<Scalar>& ctx,
                         std::vector<Scalar>& grad_gamma,
                         std::vector<Scalar>& grad_beta);

// In-place max(0, x); the returned mask marks positive entries for backward.
template <typename Scalar>
std::vector<uint8_t> relu(SparseTensorT<Scalar>& x);

template <typename Scalar>
void relu_backward(SparseTensorT<Scalar>& grad,
                   const std::vector<uint8_t>& mask);

// Mean softmax cross-entropy over labeled sites of a 2-channel logit tensor;
// unlabeled sites contribute nothing to the loss or gradient. Channel order
// follows TravLabel values (0 = NT, 1 = TR). When `grad_logits` is non-null
// it receives d(loss)/d(logits). Throws DataError when no site is labeled.
template <typename Scalar>
double masked_cross_entropy(const SparseTensorT<Scalar>& logits,
                            const std::vector<TravLabel>& labels,
                            SparseTensorT<Scalar>* grad_logits = nullptr);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 9e-4;  // decoupled: p -= lr * wd * p
};

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  int64_t t = 0;
};

// One bias-corrected Adam step with decoupled weight decay. Returns false
// and leaves everything untouched when any gradient entry is non-finite.
bool adam_step(std::vector<float>& params, const std::vector<float>& grads,
               AdamState& state, const AdamConfig& cfg);

}  // namespace foresttrav
