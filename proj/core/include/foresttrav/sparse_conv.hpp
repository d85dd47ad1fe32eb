#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "foresttrav/types.hpp"

namespace foresttrav {

// Lattice site of one sample in a batch. Coordinates live on the stride-1
// lattice at every level; a site at stride s has all of x, y, z divisible
// by s.
struct Coord4 {
  int32_t b = 0;
  int32_t x = 0;
  int32_t y = 0;
  int32_t z = 0;

  friend bool operator==(const Coord4&, const Coord4&) = default;
  friend auto operator<=>(const Coord4&, const Coord4&) = default;
};

struct Coord4Hash {
  size_t operator()(const Coord4& c) const noexcept {
    uint64_t h = static_cast<uint32_t>(c.b) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<uint32_t>(c.x) * 73856093ULL + (h << 6);
    h ^= static_cast<uint32_t>(c.y) * 19349669ULL + (h << 6);
    h ^= static_cast<uint32_t>(c.z) * 83492791ULL + (h << 6);
    return static_cast<size_t>(h ^ (h >> 29));
  }
};

// Features at active sites only, row-major [sites x channels].
template <typename Scalar>
struct SparseTensorT {
  std::vector<Coord4> coords;
  int stride = 1;
  std::size_t channels = 0;
  std::vector<Scalar> features;

  std::size_t sites() const { return coords.size(); }
  Scalar* row(std::size_t r) { return features.data() + r * channels; }
  const Scalar* row(std::size_t r) const {
    return features.data() + r * channels;
  }
  void allocate(std::size_t num_sites, std::size_t num_channels) {
    channels = num_channels;
    features.assign(num_sites * num_channels, Scalar(0));
  }
};

using SparseTensor = SparseTensorT<float>;

enum class ConvKind {
  kSameSite,    // outputs at the input coordinates, stride preserved
  kStrided,     // downsample by 2: outputs at unique floor-halved coords
  kTransposed,  // upsample by 2 onto caller-supplied target coordinates
};

// Per-offset gather/scatter lists realizing a sparse convolution. Bin k holds
// (input_row, output_row) pairs with in_coord = out_coord + offset_k * step,
// step = min(in_stride, out_stride); offsets enumerate {-1,0,1}^3 in
// x-fastest order for kernel 3, or just the center for kernel 1.
struct KernelMap {
  std::vector<std::vector<std::pair<int32_t, int32_t>>> bins;
  std::size_t num_inputs = 0;
  std::size_t num_outputs = 0;
};

// Output coordinate set and kernel map of one convolution.
struct ConvGeometry {
  std::vector<Coord4> out_coords;
  int out_stride = 1;
  KernelMap kmap;
};

// Builds the output coordinates and kernel map for a convolution over
// `in_coords`. Transposed convolutions require `target_coords` (the cached
// coordinates of the matching encoder level); targets that receive no
// contribution are dropped. kernel_size must be 1 (same-site only) or 3.
// Throws std::invalid_argument on stride or argument mismatches.
ConvGeometry build_kernel_map(const std::vector<Coord4>& in_coords,
                              int in_stride, ConvKind kind,
                              int kernel_size = 3,
                              const std::vector<Coord4>* target_coords = nullptr);

// Convolution parameters; weights laid out [kernel_volume][c_in][c_out].
template <typename Scalar>
struct ConvParams {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t kernel_volume = 27;
  std::vector<Scalar> weights;
  std::vector<Scalar> bias;

  void allocate() {
    weights.assign(kernel_volume * c_in * c_out, Scalar(0));
    bias.assign(c_out, Scalar(0));
  }
  std::size_t parameter_count() const {
    return weights.size() + bias.size();
  }
};

// out[r] = bias + sum over kernel offsets of in[p] * W[offset] for each
// (p, r) pair. Output rows follow `geom.out_coords`.
template <typename Scalar>
SparseTensorT<Scalar> sparse_conv_forward(const SparseTensorT<Scalar>& in,
                                          const ConvParams<Scalar>& params,
                                          const ConvGeometry& geom);

// Exact transpose of the forward map. Returns the input-feature gradient and
// accumulates (+=) into grad_weights / grad_bias, which must be pre-sized
// like the parameter arrays.
template <typename Scalar>
SparseTensorT<Scalar> sparse_conv_backward(const SparseTensorT<Scalar>& in,
                                           const ConvParams<Scalar>& params,
                                           const ConvGeometry& geom,
                                           const SparseTensorT<Scalar>& grad_out,
                                           std::vector<Scalar>& grad_weights,
                                           std::vector<Scalar>& grad_bias);

}  // namespace foresttrav
