#include "foresttrav/unet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "foresttrav/error.hpp"
#include "foresttrav/rng.hpp"

namespace foresttrav {

namespace {

constexpr std::size_t kInputDim = static_cast<std::size_t>(kFeatureDim);
constexpr std::size_t kNumClasses = 2;

void init_conv(ConvParams<float>& conv, Rng& rng) {
  const double fan_in =
      static_cast<double>(conv.kernel_volume) * static_cast<double>(conv.c_in);
  const double bound = 1.0 / std::sqrt(fan_in);
  for (float& w : conv.weights) {
    w = static_cast<float>(rng.uniform(-bound, bound));
  }
  for (float& b : conv.bias) {
    b = static_cast<float>(rng.uniform(-bound, bound));
  }
}

void allocate_block(UNetModel::Block& block, std::size_t c_in,
                    std::size_t c_out, std::size_t kernel_volume) {
  block.conv.c_in = c_in;
  block.conv.c_out = c_out;
  block.conv.kernel_volume = kernel_volume;
  block.conv.allocate();
  block.bn.allocate(c_out);
}

}  // namespace

UNetModel make_unet(std::uint64_t init_seed) {
  UNetModel model;
  allocate_block(model.stem, kInputDim, kUNetChannels[0], 27);
  for (int i = 0; i < 4; ++i) {
    allocate_block(model.down[i], kUNetChannels[i], kUNetChannels[i + 1], 27);
    allocate_block(model.enc[i], kUNetChannels[i + 1], kUNetChannels[i + 1],
                   27);
    allocate_block(model.up[i], kUNetChannels[i + 1], kUNetChannels[i], 27);
    allocate_block(model.dec[i], 2 * kUNetChannels[i], kUNetChannels[i], 27);
  }
  model.head.c_in = kUNetChannels[0];
  model.head.c_out = kNumClasses;
  model.head.kernel_volume = 1;
  model.head.allocate();

  Rng rng(init_seed);
  init_conv(model.stem.conv, rng);
  for (int i = 0; i < 4; ++i) {
    init_conv(model.down[i].conv, rng);
    init_conv(model.enc[i].conv, rng);
    init_conv(model.up[i].conv, rng);
    init_conv(model.dec[i].conv, rng);
  }
  init_conv(model.head, rng);
  return model;
}

std::size_t UNetModel::parameter_count() const {
  std::size_t count = 0;
  auto add_block = [&count](const Block& b) {
    count += b.conv.parameter_count();
    count += b.bn.gamma.size() + b.bn.beta.size();
  };
  add_block(stem);
  for (int i = 0; i < 4; ++i) {
    add_block(down[i]);
    add_block(enc[i]);
    add_block(up[i]);
    add_block(dec[i]);
  }
  count += head.parameter_count();
  return count;
}

void UNetGradients::allocate(const UNetModel& model) {
  auto alloc_block = [](BlockGrads& g, const UNetModel::Block& b) {
    g.conv.weights.assign(b.conv.weights.size(), 0.0f);
    g.conv.bias.assign(b.conv.bias.size(), 0.0f);
    g.bn.gamma.assign(b.bn.gamma.size(), 0.0f);
    g.bn.beta.assign(b.bn.beta.size(), 0.0f);
  };
  alloc_block(stem, model.stem);
  for (int i = 0; i < 4; ++i) {
    alloc_block(down[i], model.down[i]);
    alloc_block(enc[i], model.enc[i]);
    alloc_block(up[i], model.up[i]);
    alloc_block(dec[i], model.dec[i]);
  }
  head.weights.assign(model.head.weights.size(), 0.0f);
  head.bias.assign(model.head.bias.size(), 0.0f);
}

void UNetGradients::zero() {
  auto zero_vec = [](std::vector<float>& v) {
    std::fill(v.begin(), v.end(), 0.0f);
  };
  auto zero_block = [&zero_vec](BlockGrads& g) {
    zero_vec(g.conv.weights);
    zero_vec(g.conv.bias);
    zero_vec(g.bn.gamma);
    zero_vec(g.bn.beta);
  };
  zero_block(stem);
  for (int i = 0; i < 4; ++i) {
    zero_block(down[i]);
    zero_block(enc[i]);
    zero_block(up[i]);
    zero_block(dec[i]);
  }
  zero_vec(head.weights);
  zero_vec(head.bias);
}

namespace {

template <typename BlockLike, typename Push>
void visit_blocks(BlockLike& stem, std::array<BlockLike, 4>& down,
                  std::array<BlockLike, 4>& enc, std::array<BlockLike, 4>& up,
                  std::array<BlockLike, 4>& dec, const Push& push) {
  push("stem", stem);
  for (int i = 0; i < 4; ++i) {
    const std::string n = std::to_string(i);
    push("down" + n, down[i]);
    push("enc" + n, enc[i]);
    push("up" + n, up[i]);
    push("dec" + n, dec[i]);
  }
}

}  // namespace

std::vector<TensorRef> parameter_tensors(UNetModel& model) {
  std::vector<TensorRef> refs;
  visit_blocks(model.stem, model.down, model.enc, model.up, model.dec,
               [&refs](const std::string& name, UNetModel::Block& b) {
                 refs.push_back({name + ".conv.weight", &b.conv.weights});
                 refs.push_back({name + ".conv.bias", &b.conv.bias});
                 refs.push_back({name + ".bn.gamma", &b.bn.gamma});
                 refs.push_back({name + ".bn.beta", &b.bn.beta});
               });
  refs.push_back({"head.weight", &model.head.weights});
  refs.push_back({"head.bias", &model.head.bias});
  return refs;
}

std::vector<TensorRef> gradient_tensors(UNetGradients& grads) {
  std::vector<TensorRef> refs;
  visit_blocks(grads.stem, grads.down, grads.enc, grads.up, grads.dec,
               [&refs](const std::string& name, UNetGradients::BlockGrads& g) {
                 refs.push_back({name + ".conv.weight", &g.conv.weights});
                 refs.push_back({name + ".conv.bias", &g.conv.bias});
                 refs.push_back({name + ".bn.gamma", &g.bn.gamma});
                 refs.push_back({name + ".bn.beta", &g.bn.beta});
               });
  refs.push_back({"head.weight", &grads.head.weights});
  refs.push_back({"head.bias", &grads.head.bias});
  return refs;
}

std::vector<TensorRef> buffer_tensors(UNetModel& model) {
  std::vector<TensorRef> refs;
  visit_blocks(model.stem, model.down, model.enc, model.up, model.dec,
               [&refs](const std::string& name, UNetModel::Block& b) {
                 refs.push_back({name + ".bn.running_mean", &b.bn.running_mean});
                 refs.push_back({name + ".bn.running_var", &b.bn.running_var});
               });
  return refs;
}

UNetGeometry build_unet_geometry(const std::vector<Coord4>& coords) {
  UNetGeometry geom;
  geom.coords[0] = coords;
  int stride = 1;
  for (int level = 0; level < 4; ++level) {
    geom.strided[level] = build_kernel_map(geom.coords[level], stride,
                                           ConvKind::kStrided, 3);
    geom.coords[level + 1] = geom.strided[level].out_coords;
    stride *= 2;
  }
  stride = 1;
  for (int level = 0; level < 5; ++level) {
    geom.same[level] =
        build_kernel_map(geom.coords[level], stride, ConvKind::kSameSite, 3);
    stride *= 2;
  }
  for (int level = 0; level < 4; ++level) {
    const int in_stride = 2 << level;
    geom.transposed[level] =
        build_kernel_map(geom.coords[level + 1], in_stride,
                         ConvKind::kTransposed, 3, &geom.coords[level]);
    if (geom.transposed[level].out_coords.size() !=
        geom.coords[level].size()) {
      // Cannot happen for coordinates produced by the strided stage: every
      // fine site keeps its own parent cell within the kernel support.
      throw std::logic_error("transposed stage dropped target sites");
    }
  }
  geom.head = build_kernel_map(coords, 1, ConvKind::kSameSite, 1);
  return geom;
}

namespace {

SparseTensor concat_channels(const SparseTensor& a, const SparseTensor& b) {
  if (a.sites() != b.sites()) {
    throw std::invalid_argument("channel concat needs aligned rows");
  }
  SparseTensor out;
  out.coords = a.coords;
  out.stride = a.stride;
  out.allocate(a.sites(), a.channels + b.channels);
  for (std::size_t r = 0; r < a.sites(); ++r) {
    float* dst = out.row(r);
    std::copy(a.row(r), a.row(r) + a.channels, dst);
    std::copy(b.row(r), b.row(r) + b.channels, dst + a.channels);
  }
  return out;
}

}  // namespace

SparseTensor UNetAutograd::forward(UNetModel& model, const UNetGeometry& geom,
                                   const SparseTensor& input,
                                   bool train_mode) {
  geom_ = &geom;
  train_mode_ = train_mode;
  if (input.sites() == 0) {
    SparseTensor empty;
    empty.stride = input.stride;
    empty.allocate(0, kNumClasses);
    return empty;
  }

  auto run_block = [this](UNetModel::Block& block, BlockTape& tape,
                          const SparseTensor& in, const ConvGeometry& cg) {
    tape.in = in;
    SparseTensor out = sparse_conv_forward(in, block.conv, cg);
    if (train_mode_) {
      batch_norm_train(out, block.bn, tape.bn_ctx);
    } else {
      batch_norm_eval(out, block.bn);
    }
    tape.relu_mask = relu(out);
    return out;
  };

  SparseTensor x = run_block(model.stem, stem_, input, geom.same[0]);
  std::array<SparseTensor, 4> skips;
  for (int i = 0; i < 4; ++i) {
    skips[i] = x;
    SparseTensor d = run_block(model.down[i], down_[i], x, geom.strided[i]);
    x = run_block(model.enc[i], enc_[i], d, geom.same[i + 1]);
  }
  for (int i = 3; i >= 0; --i) {
    SparseTensor u = run_block(model.up[i], up_[i], x, geom.transposed[i]);
    SparseTensor cat = concat_channels(u, skips[i]);
    x = run_block(model.dec[i], dec_[i], cat, geom.same[i]);
  }
  head_in_ = x;
  return sparse_conv_forward(x, model.head, geom.head);
}

void UNetAutograd::backward(const UNetModel& model,
                            const SparseTensor& grad_logits,
                            UNetGradients& grads) {
  if (geom_ == nullptr || !train_mode_) {
    throw std::logic_error("backward without a train-mode forward pass");
  }
  const UNetGeometry& geom = *geom_;

  auto back_block = [](const UNetModel::Block& block, BlockTape& tape,
                       const ConvGeometry& cg, SparseTensor grad_out,
                       UNetGradients::BlockGrads& g) {
    relu_backward(grad_out, tape.relu_mask);
    batch_norm_backward(grad_out, block.bn, tape.bn_ctx, g.bn.gamma,
                        g.bn.beta);
    return sparse_conv_backward(tape.in, block.conv, cg, grad_out,
                                g.conv.weights, g.conv.bias);
  };

  SparseTensor gx = sparse_conv_backward(head_in_, model.head, geom.head,
                                         grad_logits, grads.head.weights,
                                         grads.head.bias);
  std::array<SparseTensor, 4> skip_grads;
  for (int i = 0; i <= 3; ++i) {
    SparseTensor gcat =
        back_block(model.dec[i], dec_[i], geom.same[i], std::move(gx),
                   grads.dec[i]);
    // Split the concatenation gradient back into the upsample path and the
    // skip path.
    const std::size_t c_up = model.up[i].conv.c_out;
    const std::size_t c_skip = gcat.channels - c_up;
    SparseTensor gu;
    gu.coords = gcat.coords;
    gu.stride = gcat.stride;
    gu.allocate(gcat.sites(), c_up);
    skip_grads[i].coords = gcat.coords;
    skip_grads[i].stride = gcat.stride;
    skip_grads[i].allocate(gcat.sites(), c_skip);
    for (std::size_t r = 0; r < gcat.sites(); ++r) {
      const float* src = gcat.row(r);
      std::copy(src, src + c_up, gu.row(r));
      std::copy(src + c_up, src + c_up + c_skip, skip_grads[i].row(r));
    }
    gx = back_block(model.up[i], up_[i], geom.transposed[i], std::move(gu),
                    grads.up[i]);
  }
  for (int i = 3; i >= 0; --i) {
    SparseTensor gd = back_block(model.enc[i], enc_[i], geom.same[i + 1],
                                 std::move(gx), grads.enc[i]);
    gx = back_block(model.down[i], down_[i], geom.strided[i], std::move(gd),
                    grads.down[i]);
    for (std::size_t j = 0; j < gx.features.size(); ++j) {
      gx.features[j] += skip_grads[i].features[j];
    }
  }
  back_block(model.stem, stem_, geom.same[0], std::move(gx), grads.stem);
}

void TrainConfig::validate() const {
  if (lr <= 0.0 || weight_decay < 0.0 || batch_size == 0 || patience <= 0 ||
      max_epochs <= 0) {
    throw ConfigError("training hyperparameters must be positive");
  }
  if (patience >= max_epochs) {
    throw ConfigError("patience must be below the epoch limit");
  }
}

BatchData assemble_batch(const std::vector<const CubeSample*>& cubes,
                         const NormalizationStats& norm) {
  BatchData batch;
  std::size_t total = 0;
  for (const CubeSample* cube : cubes) total += cube->size();
  batch.input.coords.reserve(total);
  batch.input.allocate(total, kInputDim);
  batch.input.coords.clear();
  batch.labels.reserve(total);

  std::size_t row = 0;
  for (std::size_t b = 0; b < cubes.size(); ++b) {
    const CubeSample& cube = *cubes[b];
    for (std::size_t s = 0; s < cube.size(); ++s) {
      batch.input.coords.push_back(Coord4{static_cast<int32_t>(b),
                                          cube.coords[s][0], cube.coords[s][1],
                                          cube.coords[s][2]});
      const FeatureVector f = norm.apply(cube.features[s]);
      std::copy(f.begin(), f.end(), batch.input.row(row));
      batch.labels.push_back(cube.labels[s]);
      if (cube.labels[s] != TravLabel::kUnlabeled) ++batch.labeled;
      ++row;
    }
  }
  return batch;
}

namespace {

double validation_loss(UNetModel& model, const std::vector<BatchData>& batches,
                       const std::vector<UNetGeometry>& geoms) {
  double loss_sum = 0.0;
  std::size_t labeled = 0;
  UNetAutograd pass;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const BatchData& batch = batches[i];
    if (batch.labeled == 0) continue;
    const SparseTensor logits =
        pass.forward(model, geoms[i], batch.input, /*train_mode=*/false);
    loss_sum += masked_cross_entropy(logits, batch.labels) *
                static_cast<double>(batch.labeled);
    labeled += batch.labeled;
  }
  if (labeled == 0) {
    throw DataError("validation set has no labeled sites");
  }
  return loss_sum / static_cast<double>(labeled);
}

}  // namespace

TrainResult train_unet(UNetModel& model,
                       const std::vector<CubeSample>& train_cubes,
                       const std::vector<CubeSample>& val_cubes,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (train_cubes.empty() || val_cubes.empty()) {
    throw DataError("training needs non-empty train and validation splits");
  }
  model.norm = compute_normalization(train_cubes);

  std::vector<BatchData> val_batches;
  std::vector<UNetGeometry> val_geoms;
  for (std::size_t start = 0; start < val_cubes.size();
       start += cfg.batch_size) {
    std::vector<const CubeSample*> refs;
    for (std::size_t i = start;
         i < std::min(val_cubes.size(), start + cfg.batch_size); ++i) {
      refs.push_back(&val_cubes[i]);
    }
    val_batches.push_back(assemble_batch(refs, model.norm));
    val_geoms.push_back(build_unet_geometry(val_batches.back().input.coords));
  }

  const std::vector<TensorRef> params = parameter_tensors(model);
  UNetGradients grads;
  grads.allocate(model);
  const std::vector<TensorRef> grad_refs = gradient_tensors(grads);
  std::vector<AdamState> adam_states(params.size());
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;

  Rng rng(cfg.seed);
  EarlyStopper stopper(cfg.patience);
  TrainResult result;

  std::vector<std::vector<float>> best_params;
  std::vector<std::vector<float>> best_buffers;
  const std::vector<TensorRef> buffers = buffer_tensors(model);
  auto snapshot = [&]() {
    best_params.clear();
    for (const TensorRef& p : params) best_params.push_back(*p.values);
    best_buffers.clear();
    for (const TensorRef& b : buffers) best_buffers.push_back(*b.values);
  };

  std::vector<std::size_t> order(train_cubes.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int64_t>(i)));
      std::swap(order[i], order[j]);
    }

    double train_loss_sum = 0.0;
    std::size_t train_labeled = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      std::vector<CubeSample> augmented;
      for (std::size_t i = start;
           i < std::min(order.size(), start + cfg.batch_size); ++i) {
        CubeSample cube = augment(train_cubes[order[i]], rng);
        if (cube.size() >= kMinCubeSites) augmented.push_back(std::move(cube));
      }
      if (augmented.empty()) continue;
      std::vector<const CubeSample*> refs;
      refs.reserve(augmented.size());
      for (const CubeSample& cube : augmented) refs.push_back(&cube);
      BatchData batch = assemble_batch(refs, model.norm);
      if (batch.labeled == 0) continue;

      const UNetGeometry geom = build_unet_geometry(batch.input.coords);
      UNetAutograd pass;
      const SparseTensor logits =
          pass.forward(model, geom, batch.input, /*train_mode=*/true);
      SparseTensor grad_logits;
      const double loss =
          masked_cross_entropy(logits, batch.labels, &grad_logits);
      train_loss_sum += loss * static_cast<double>(batch.labeled);
      train_labeled += batch.labeled;

      grads.zero();
      pass.backward(model, grad_logits, grads);
      bool applied = true;
      for (std::size_t p = 0; p < params.size(); ++p) {
        if (!adam_step(*params[p].values, *grad_refs[p].values,
                       adam_states[p], adam_cfg)) {
          applied = false;
        }
      }
      if (!applied) ++result.skipped_steps;
    }

    const double val_loss = validation_loss(model, val_batches, val_geoms);
    const auto t1 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_labeled == 0
                           ? std::numeric_limits<double>::quiet_NaN()
                           : train_loss_sum / static_cast<double>(train_labeled);
    stats.val_loss = val_loss;
    stats.seconds = std::chrono::duration<double>(t1 - t0).count();
    result.log.push_back(stats);

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      snapshot();
    }
    if (stopper.record(val_loss)) break;
  }

  if (!best_params.empty()) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      *params[p].values = best_params[p];
    }
    for (std::size_t b = 0; b < buffers.size(); ++b) {
      *buffers[b].values = best_buffers[b];
    }
  }
  return result;
}

ProbabilityMap ensemble_predict(std::vector<UNetModel>& models,
                                const FeatureMap& map) {
  if (models.empty()) {
    throw std::invalid_argument("ensemble needs at least one model");
  }
  ProbabilityMap probabilities;
  if (map.keys.empty()) return probabilities;

  std::vector<Coord4> coords;
  coords.reserve(map.keys.size());
  for (const VoxelKey& k : map.keys) {
    coords.push_back(Coord4{0, k.x, k.y, k.z});
  }
  const UNetGeometry geom = build_unet_geometry(coords);

  std::vector<std::uint32_t> votes(map.keys.size(), 0);
  for (UNetModel& model : models) {
    SparseTensor input;
    input.coords = coords;
    input.allocate(coords.size(), kInputDim);
    for (std::size_t r = 0; r < map.keys.size(); ++r) {
      const FeatureVector f = model.norm.apply(map.features[r]);
      std::copy(f.begin(), f.end(), input.row(r));
    }
    UNetAutograd pass;
    const SparseTensor logits =
        pass.forward(model, geom, input, /*train_mode=*/false);
    for (std::size_t r = 0; r < logits.sites(); ++r) {
      // Ties resolve to non-traversable.
      if (logits.row(r)[1] > logits.row(r)[0]) ++votes[r];
    }
  }
  const float n = static_cast<float>(models.size());
  for (std::size_t r = 0; r < map.keys.size(); ++r) {
    probabilities[map.keys[r]] = static_cast<float>(votes[r]) / n;
  }
  return probabilities;
}

}  // namespace foresttrav
