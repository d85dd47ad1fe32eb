#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "foresttrav/error.hpp"
#include "foresttrav/nn_ops.hpp"
#include "foresttrav/rng.hpp"
#include "support/nn_oracles.hpp"

using namespace foresttrav;

namespace {

template <typename Scalar>
SparseTensorT<Scalar> random_rows(std::size_t n, std::size_t c, Rng& rng,
                                  double lo = -2.0, double hi = 3.0) {
  SparseTensorT<Scalar> t;
  t.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.coords[i] = Coord4{0, static_cast<int32_t>(i), 0, 0};
  }
  t.allocate(n, c);
  for (auto& v : t.features) v = static_cast<Scalar>(rng.uniform(lo, hi));
  return t;
}

// Per-channel batch mean and biased variance in double.
template <typename Scalar>
void batch_stats(const SparseTensorT<Scalar>& t, std::vector<double>& mean,
                 std::vector<double>& var) {
  mean.assign(t.channels, 0.0);
  var.assign(t.channels, 0.0);
  for (std::size_t r = 0; r < t.sites(); ++r) {
    for (std::size_t j = 0; j < t.channels; ++j) mean[j] += t.row(r)[j];
  }
  for (auto& m : mean) m /= static_cast<double>(t.sites());
  for (std::size_t r = 0; r < t.sites(); ++r) {
    for (std::size_t j = 0; j < t.channels; ++j) {
      const double d = t.row(r)[j] - mean[j];
      var[j] += d * d;
    }
  }
  for (auto& v : var) v /= static_cast<double>(t.sites());
}

}  // namespace

TEST_CASE("batch norm standardizes the batch and updates running stats") {
  Rng rng(420);
  SparseTensorT<float> x = random_rows<float>(200, 8, rng);
  std::vector<double> mean, var;
  batch_stats(x, mean, var);

  BatchNormParams<float> params;
  params.allocate(8);
  BatchNormContext<float> ctx;
  batch_norm_train(x, params, ctx);

  std::vector<double> out_mean, out_var;
  batch_stats(x, out_mean, out_var);
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(std::abs(out_mean[j]) < 1e-5);
    CHECK(out_var[j] == doctest::Approx(1.0).epsilon(1e-3));
    // Fresh running stats start at (0, 1) and blend with momentum 0.9.
    CHECK(params.running_mean[j] == doctest::Approx(0.1 * mean[j]).epsilon(1e-5));
    CHECK(params.running_var[j] ==
          doctest::Approx(0.9 + 0.1 * var[j]).epsilon(1e-5));
  }
}

TEST_CASE("batch norm applies the affine transform after standardizing") {
  Rng rng(421);
  SparseTensorT<float> x = random_rows<float>(60, 3, rng);
  const SparseTensorT<float> original = x;
  std::vector<double> mean, var;
  batch_stats(original, mean, var);

  BatchNormParams<float> params;
  params.allocate(3);
  params.gamma = {2.0f, 0.5f, -1.0f};
  params.beta = {1.0f, -3.0f, 0.25f};
  BatchNormContext<float> ctx;
  batch_norm_train(x, params, ctx);

  for (std::size_t r = 0; r < x.sites(); ++r) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double x_hat = (original.row(r)[j] - mean[j]) /
                           std::sqrt(var[j] + kBatchNormEps);
      CHECK(x.row(r)[j] ==
            doctest::Approx(params.gamma[j] * x_hat + params.beta[j])
                .epsilon(1e-4));
      CHECK(ctx.x_hat[r * 3 + j] == doctest::Approx(x_hat).epsilon(1e-4));
    }
  }
}

TEST_CASE("batch norm eval uses the running statistics and stays stateless") {
  BatchNormParams<float> params;
  params.allocate(2);
  params.gamma = {2.0f, 1.0f};
  params.beta = {0.0f, 3.0f};
  params.running_mean = {1.0f, -2.0f};
  params.running_var = {4.0f, 0.25f};
  const BatchNormParams<float> before = params;

  SparseTensorT<float> x;
  x.coords = {Coord4{0, 0, 0, 0}};
  x.allocate(1, 2);
  x.features = {3.0f, -1.0f};
  SparseTensorT<float> x2 = x;

  batch_norm_eval(x, params);
  CHECK(x.features[0] == doctest::Approx(2.0 * (3.0 - 1.0) / std::sqrt(4.0 + kBatchNormEps)));
  CHECK(x.features[1] == doctest::Approx((-1.0 + 2.0) / std::sqrt(0.25 + kBatchNormEps) + 3.0));

  batch_norm_eval(x2, params);
  CHECK(x2.features == x.features);
  CHECK(params.running_mean == before.running_mean);
  CHECK(params.running_var == before.running_var);

  // Eval mode handles a single site; train mode refuses it.
  BatchNormContext<float> ctx;
  SparseTensorT<float> single = x2;
  CHECK_THROWS_AS(batch_norm_train(single, params, ctx), DataError);
}

TEST_CASE("batch norm gradients match central differences") {
  Rng rng(422);
  const std::size_t n = 30, c = 4;
  SparseTensorT<double> x = random_rows<double>(n, c, rng);
  BatchNormParams<double> params;
  params.allocate(c);
  for (auto& g : params.gamma) g = rng.uniform(0.5, 1.5);
  for (auto& b : params.beta) b = rng.uniform(-0.5, 0.5);

  std::vector<double> weight(n * c);
  for (auto& w : weight) w = rng.uniform(-1.0, 1.0);

  const auto loss = [&]() {
    SparseTensorT<double> t = x;
    BatchNormParams<double> p = params;
    BatchNormContext<double> ctx;
    batch_norm_train(t, p, ctx);
    double acc = 0.0;
    for (std::size_t i = 0; i < t.features.size(); ++i) {
      acc += t.features[i] * weight[i];
    }
    return acc;
  };

  SparseTensorT<double> t = x;
  BatchNormParams<double> p = params;
  BatchNormContext<double> ctx;
  batch_norm_train(t, p, ctx);
  SparseTensorT<double> grad = t;
  grad.features = weight;
  std::vector<double> grad_gamma(c, 0.0);
  std::vector<double> grad_beta(c, 0.0);
  batch_norm_backward(grad, p, ctx, grad_gamma, grad_beta);

  for (std::size_t i = 0; i < x.features.size(); ++i) {
    const double fd = testing::central_diff(x.features[i], 1e-4, loss);
    CHECK(testing::close_rel(grad.features[i], fd, 1e-5));
  }
  for (std::size_t j = 0; j < c; ++j) {
    const double fd_g = testing::central_diff(params.gamma[j], 1e-4, loss);
    CHECK(testing::close_rel(grad_gamma[j], fd_g, 1e-5));
    const double fd_b = testing::central_diff(params.beta[j], 1e-4, loss);
    CHECK(testing::close_rel(grad_beta[j], fd_b, 1e-5));
  }
}

TEST_CASE("relu clamps negatives and the mask gates the gradient") {
  SparseTensorT<float> x;
  x.coords.resize(1);
  x.allocate(1, 5);
  x.features = {-1.0f, 0.0f, 2.0f, -0.5f, 3.0f};

  const std::vector<uint8_t> mask = relu(x);
  CHECK(x.features == std::vector<float>{0.0f, 0.0f, 2.0f, 0.0f, 3.0f});
  CHECK(mask == std::vector<uint8_t>{0, 0, 1, 0, 1});

  SparseTensorT<float> grad = x;
  grad.features = {5.0f, 5.0f, 5.0f, 5.0f, 5.0f};
  relu_backward(grad, mask);
  CHECK(grad.features == std::vector<float>{0.0f, 0.0f, 5.0f, 0.0f, 5.0f});

  SparseTensorT<float> bad = grad;
  CHECK_THROWS_AS(relu_backward(bad, std::vector<uint8_t>{1, 0}),
                  std::invalid_argument);
}

TEST_CASE("masked cross entropy: pinned losses and gradients") {
  SparseTensorT<float> logits;
  logits.coords.resize(3);
  logits.allocate(3, 2);
  // Row 0: saturated and correct. Row 1: maximal uncertainty. Row 2 is
  // unlabeled with extreme values that must not leak into anything.
  logits.features = {10.0f, -10.0f, 0.0f, 0.0f, 1000.0f, -1000.0f};
  const std::vector<TravLabel> labels = {TravLabel::kNonTraversable,
                                         TravLabel::kTraversable,
                                         TravLabel::kUnlabeled};

  SparseTensorT<float> grad;
  const double loss = masked_cross_entropy(logits, labels, &grad);
  // Mean of log(1 + exp(-20)) ~ 2.06e-9 and log(2).
  CHECK(loss == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-6));

  REQUIRE(grad.sites() == 3);
  CHECK(grad.row(2)[0] == 0.0f);
  CHECK(grad.row(2)[1] == 0.0f);
  // Uncertain row, true class TR: (softmax - onehot) / n_labeled.
  CHECK(grad.row(1)[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(grad.row(1)[1] == doctest::Approx(-0.25).epsilon(1e-6));
  // Saturated row barely moves.
  CHECK(std::abs(grad.row(0)[0]) < 1e-8f);
  CHECK(std::abs(grad.row(0)[1]) < 1e-8f);

  SUBCASE("single fully confident site") {
    SparseTensorT<float> one;
    one.coords.resize(1);
    one.allocate(1, 2);
    one.features = {10.0f, -10.0f};
    const double l = masked_cross_entropy(
        one, std::vector<TravLabel>{TravLabel::kNonTraversable});
    CHECK(l > 0.0);
    CHECK(l < 1e-8);
  }
}

TEST_CASE("masked cross entropy gradients match central differences") {
  Rng rng(423);
  const std::size_t n = 12;
  SparseTensorT<double> logits = random_rows<double>(n, 2, rng, -2.0, 2.0);
  std::vector<TravLabel> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % 3 == 0   ? TravLabel::kNonTraversable
                : i % 3 == 1 ? TravLabel::kTraversable
                             : TravLabel::kUnlabeled;
  }

  SparseTensorT<double> grad;
  masked_cross_entropy(logits, labels, &grad);

  const auto loss = [&]() { return masked_cross_entropy(logits, labels); };
  for (std::size_t i = 0; i < logits.features.size(); ++i) {
    const double fd = testing::central_diff(logits.features[i], 1e-4, loss);
    CHECK(testing::close_rel(grad.features[i], fd, 1e-6));
  }
}

TEST_CASE("masked cross entropy rejects degenerate inputs") {
  SparseTensorT<float> logits;
  logits.coords.resize(2);
  logits.allocate(2, 2);

  CHECK_THROWS_AS(masked_cross_entropy(
                      logits, std::vector<TravLabel>(2, TravLabel::kUnlabeled)),
                  DataError);
  CHECK_THROWS_AS(masked_cross_entropy(
                      logits, std::vector<TravLabel>{TravLabel::kTraversable}),
                  std::invalid_argument);

  SparseTensorT<float> three;
  three.coords.resize(2);
  three.allocate(2, 3);
  CHECK_THROWS_AS(masked_cross_entropy(
                      three, std::vector<TravLabel>(2, TravLabel::kTraversable)),
                  std::invalid_argument);
}

TEST_CASE("adam: first step moves a fresh parameter by the learning rate") {
  std::vector<float> p = {0.0f};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 1e-4;
  cfg.weight_decay = 0.0;

  CHECK(adam_step(p, {1.0f}, state, cfg));
  CHECK(state.t == 1);
  // Bias correction makes m_hat = v_hat = 1 on step one.
  CHECK(p[0] == doctest::Approx(-1e-4).epsilon(1e-5));
}

TEST_CASE("adam: zero gradients leave parameters alone without decay") {
  std::vector<float> p = {2.0f, -3.0f};
  AdamState state;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;

  for (int i = 0; i < 3; ++i) CHECK(adam_step(p, {0.0f, 0.0f}, state, cfg));
  CHECK(p[0] == 2.0f);
  CHECK(p[1] == -3.0f);
}

TEST_CASE("adam: decoupled weight decay shrinks parameters geometrically") {
  std::vector<float> p = {2.0f};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;

  for (int i = 0; i < 3; ++i) CHECK(adam_step(p, {0.0f}, state, cfg));
  CHECK(p[0] == doctest::Approx(2.0 * std::pow(1.0 - 0.01 * 0.1, 3)).epsilon(1e-6));
}

TEST_CASE("adam: non-finite gradients skip the step without side effects") {
  std::vector<float> p = {1.0f};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 1e-4;
  cfg.weight_decay = 0.0;
  CHECK(adam_step(p, {1.0f}, state, cfg));
  const std::vector<float> p_before = p;
  const std::vector<float> m_before = state.m;
  const std::vector<float> v_before = state.v;

  CHECK_FALSE(adam_step(p, {std::numeric_limits<float>::quiet_NaN()}, state, cfg));
  CHECK(p == p_before);
  CHECK(state.m == m_before);
  CHECK(state.v == v_before);
  CHECK(state.t == 1);

  CHECK_FALSE(adam_step(p, {std::numeric_limits<float>::infinity()}, state, cfg));
  CHECK(state.t == 1);

  CHECK_THROWS_AS(adam_step(p, {1.0f, 2.0f}, state, cfg), std::invalid_argument);
}
