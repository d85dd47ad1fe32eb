#include "foresttrav/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "foresttrav/error.hpp"

namespace foresttrav {

template <typename Scalar>
void batch_norm_train(SparseTensorT<Scalar>& x, BatchNormParams<Scalar>& params,
                      BatchNormContext<Scalar>& ctx) {
  const std::size_t n = x.sites();
  const std::size_t c = x.channels;
  if (c != params.channels()) {
    throw std::invalid_argument("batch norm channel mismatch");
  }
  if (n < 2) {
    throw DataError("batch normalization needs at least two active sites");
  }

  std::vector<double> mean(c, 0.0);
  std::vector<double> var(c, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const Scalar* row = x.row(r);
    for (std::size_t j = 0; j < c; ++j) mean[j] += row[j];
  }
  for (std::size_t j = 0; j < c; ++j) mean[j] /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Scalar* row = x.row(r);
    for (std::size_t j = 0; j < c; ++j) {
      const double d = row[j] - mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < c; ++j) var[j] /= static_cast<double>(n);

  ctx.x_hat.resize(n * c);
  ctx.inv_std.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    ctx.inv_std[j] = static_cast<Scalar>(1.0 / std::sqrt(var[j] + kBatchNormEps));
    params.running_mean[j] = static_cast<Scalar>(
        kBatchNormMomentum * params.running_mean[j] +
        (1.0 - kBatchNormMomentum) * mean[j]);
    params.running_var[j] = static_cast<Scalar>(
        kBatchNormMomentum * params.running_var[j] +
        (1.0 - kBatchNormMomentum) * var[j]);
  }
  for (std::size_t r = 0; r < n; ++r) {
    Scalar* row = x.row(r);
    Scalar* hat = ctx.x_hat.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) {
      hat[j] = static_cast<Scalar>((row[j] - mean[j]) * ctx.inv_std[j]);
      row[j] = params.gamma[j] * hat[j] + params.beta[j];
    }
  }
}

template <typename Scalar>
void batch_norm_eval(SparseTensorT<Scalar>& x,
                     const BatchNormParams<Scalar>& params) {
  const std::size_t c = x.channels;
  if (c != params.channels()) {
    throw std::invalid_argument("batch norm channel mismatch");
  }
  std::vector<Scalar> scale(c);
  std::vector<Scalar> shift(c);
  for (std::size_t j = 0; j < c; ++j) {
    scale[j] = static_cast<Scalar>(
        params.gamma[j] / std::sqrt(params.running_var[j] + kBatchNormEps));
    shift[j] = params.beta[j] - scale[j] * params.running_mean[j];
  }
  for (std::size_t r = 0; r < x.sites(); ++r) {
    Scalar* row = x.row(r);
    for (std::size_t j = 0; j < c; ++j) row[j] = scale[j] * row[j] + shift[j];
  }
}

template <typename Scalar>
void batch_norm_backward(SparseTensorT<Scalar>& grad,
                         const BatchNormParams<Scalar>& params,
                         const BatchNormContext<Scalar>& ctx,
                         std::vector<Scalar>& grad_gamma,
                         std::vector<Scalar>& grad_beta) {
  const std::size_t n = grad.sites();
  const std::size_t c = grad.channels;
  if (ctx.x_hat.size() != n * c || ctx.inv_std.size() != c) {
    throw std::invalid_argument("batch norm context mismatch");
  }
  if (grad_gamma.size() != c || grad_beta.size() != c) {
    throw std::invalid_argument("gradient accumulators not pre-sized");
  }

  std::vector<double> sum_dy(c, 0.0);
  std::vector<double> sum_dy_xhat(c, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const Scalar* dy = grad.row(r);
    const Scalar* hat = ctx.x_hat.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) {
      sum_dy[j] += dy[j];
      sum_dy_xhat[j] += static_cast<double>(dy[j]) * hat[j];
    }
  }
  for (std::size_t j = 0; j < c; ++j) {
    grad_beta[j] += static_cast<Scalar>(sum_dy[j]);
    grad_gamma[j] += static_cast<Scalar>(sum_dy_xhat[j]);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    Scalar* dy = grad.row(r);
    const Scalar* hat = ctx.x_hat.data() + r * c;
    for (std::size_t j = 0; j < c; ++j) {
      const double centered = dy[j] - sum_dy[j] * inv_n -
                              static_cast<double>(hat[j]) * sum_dy_xhat[j] * inv_n;
      dy[j] = static_cast<Scalar>(params.gamma[j] * ctx.inv_std[j] * centered);
    }
  }
}

template <typename Scalar>
std::vector<uint8_t> relu(SparseTensorT<Scalar>& x) {
  std::vector<uint8_t> mask(x.features.size());
  for (std::size_t i = 0; i < x.features.size(); ++i) {
    const bool positive = x.features[i] > Scalar(0);
    mask[i] = positive ? 1 : 0;
    if (!positive) x.features[i] = Scalar(0);
  }
  return mask;
}

template <typename Scalar>
void relu_backward(SparseTensorT<Scalar>& grad,
                   const std::vector<uint8_t>& mask) {
  if (mask.size() != grad.features.size()) {
    throw std::invalid_argument("relu mask size mismatch");
  }
  for (std::size_t i = 0; i < grad.features.size(); ++i) {
    if (!mask[i]) grad.features[i] = Scalar(0);
  }
}

template <typename Scalar>
double masked_cross_entropy(const SparseTensorT<Scalar>& logits,
                            const std::vector<TravLabel>& labels,
                            SparseTensorT<Scalar>* grad_logits) {
  if (logits.channels != 2) {
    throw std::invalid_argument("cross entropy expects two logit channels");
  }
  if (labels.size() != logits.sites()) {
    throw std::invalid_argument("labels not aligned with logits");
  }
  std::size_t labeled = 0;
  for (TravLabel l : labels) {
    if (l != TravLabel::kUnlabeled) ++labeled;
  }
  if (labeled == 0) {
    throw DataError("cross entropy needs at least one labeled site");
  }

  if (grad_logits != nullptr) {
    grad_logits->coords = logits.coords;
    grad_logits->stride = logits.stride;
    grad_logits->allocate(logits.sites(), 2);
  }

  double loss = 0.0;
  const double inv_labeled = 1.0 / static_cast<double>(labeled);
  for (std::size_t r = 0; r < logits.sites(); ++r) {
    if (labels[r] == TravLabel::kUnlabeled) continue;
    const Scalar* row = logits.row(r);
    const double m = std::max<double>(row[0], row[1]);
    const double e0 = std::exp(row[0] - m);
    const double e1 = std::exp(row[1] - m);
    const double log_z = m + std::log(e0 + e1);
    const int cls = static_cast<int>(labels[r]);
    loss += log_z - row[cls];
    if (grad_logits != nullptr) {
      Scalar* g = grad_logits->row(r);
      const double p0 = e0 / (e0 + e1);
      const double p1 = e1 / (e0 + e1);
      g[0] = static_cast<Scalar>((p0 - (cls == 0 ? 1.0 : 0.0)) * inv_labeled);
      g[1] = static_cast<Scalar>((p1 - (cls == 1 ? 1.0 : 0.0)) * inv_labeled);
    }
  }
  return loss * inv_labeled;
}

bool adam_step(std::vector<float>& params, const std::vector<float>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adam gradient size mismatch");
  }
  for (float g : grads) {
    if (!std::isfinite(g)) return false;
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0f);
    state.v.assign(params.size(), 0.0f);
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam state size mismatch");
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    double p = params[i];
    p -= cfg.lr * cfg.weight_decay * p;
    p -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    params[i] = static_cast<float>(p);
  }
  return true;
}

template void batch_norm_train(SparseTensorT<float>&, BatchNormParams<float>&,
                               BatchNormContext<float>&);
template void batch_norm_train(SparseTensorT<double>&,
                               BatchNormParams<double>&,
                               BatchNormContext<double>&);
template void batch_norm_eval(SparseTensorT<float>&,
                              const BatchNormParams<float>&);
template void batch_norm_eval(SparseTensorT<double>&,
                              const BatchNormParams<double>&);
template void batch_norm_backward(SparseTensorT<float>&,
                                  const BatchNormParams<float>&,
                                  const BatchNormContext<float>&,
                                  std::vector<float>&, std::vector<float>&);
template void batch_norm_backward(SparseTensorT<double>&,
                                  const BatchNormParams<double>&,
                                  const BatchNormContext<double>&,
                                  std::vector<double>&, std::vector<double>&);
template std::vector<uint8_t> relu(SparseTensorT<float>&);
template std::vector<uint8_t> relu(SparseTensorT<double>&);
template void relu_backward(SparseTensorT<float>&,
                            const std::vector<uint8_t>&);
template void relu_backward(SparseTensorT<double>&,
                            const std::vector<uint8_t>&);
template double masked_cross_entropy(const SparseTensorT<float>&,
                                     const std::vector<TravLabel>&,
                                     SparseTensorT<float>*);
template double masked_cross_entropy(const SparseTensorT<double>&,
                                     const std::vector<TravLabel>&,
                                     SparseTensorT<double>*);

}  // namespace foresttrav
