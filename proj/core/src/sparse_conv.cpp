#include "foresttrav/sparse_conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace foresttrav {

namespace {

int32_t floor_div(int32_t a, int32_t b) {
  const int32_t q = a / b;
  return q * b > a ? q - 1 : q;
}

using CoordIndex = std::unordered_map<Coord4, int32_t, Coord4Hash>;

CoordIndex index_coords(const std::vector<Coord4>& coords) {
  CoordIndex index;
  index.reserve(coords.size() * 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!index.emplace(coords[i], static_cast<int32_t>(i)).second) {
      throw std::invalid_argument("duplicate coordinate in sparse tensor");
    }
  }
  return index;
}

void check_stride(const std::vector<Coord4>& coords, int stride,
                  const char* what) {
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  for (const Coord4& c : coords) {
    if (c.x % stride != 0 || c.y % stride != 0 || c.z % stride != 0) {
      throw std::invalid_argument(std::string(what) +
                                  " coordinates not divisible by the stride");
    }
  }
}

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

ConvGeometry build_kernel_map(const std::vector<Coord4>& in_coords,
                              int in_stride, ConvKind kind, int kernel_size,
                              const std::vector<Coord4>* target_coords) {
  if (kernel_size != 1 && kernel_size != 3) {
    throw std::invalid_argument("kernel size must be 1 or 3");
  }
  if (kernel_size == 1 && kind != ConvKind::kSameSite) {
    throw std::invalid_argument("kernel 1 convolutions are same-site only");
  }
  check_stride(in_coords, in_stride, "input");

  ConvGeometry geom;
  const std::size_t kernel_volume = kernel_size == 1 ? 1 : 27;

  switch (kind) {
    case ConvKind::kSameSite:
      geom.out_stride = in_stride;
      geom.out_coords = in_coords;
      break;
    case ConvKind::kStrided: {
      geom.out_stride = in_stride * 2;
      std::vector<Coord4> down;
      down.reserve(in_coords.size());
      for (const Coord4& c : in_coords) {
        down.push_back(Coord4{c.b, floor_div(c.x, geom.out_stride) * geom.out_stride,
                              floor_div(c.y, geom.out_stride) * geom.out_stride,
                              floor_div(c.z, geom.out_stride) * geom.out_stride});
      }
      std::sort(down.begin(), down.end());
      down.erase(std::unique(down.begin(), down.end()), down.end());
      geom.out_coords = std::move(down);
      break;
    }
    case ConvKind::kTransposed: {
      if (target_coords == nullptr) {
        throw std::invalid_argument(
            "transposed convolution needs target coordinates");
      }
      if (in_stride % 2 != 0) {
        throw std::invalid_argument(
            "transposed convolution needs an even input stride");
      }
      geom.out_stride = in_stride / 2;
      check_stride(*target_coords, geom.out_stride, "target");
      geom.out_coords = *target_coords;
      break;
    }
  }

  const int step = std::min(in_stride, geom.out_stride);
  const CoordIndex in_index = index_coords(in_coords);

  KernelMap kmap;
  kmap.bins.resize(kernel_volume);
  kmap.num_inputs = in_coords.size();

  if (kernel_volume == 1) {
    kmap.bins[0].reserve(geom.out_coords.size());
    for (std::size_t r = 0; r < geom.out_coords.size(); ++r) {
      kmap.bins[0].push_back(
          {static_cast<int32_t>(r), static_cast<int32_t>(r)});
    }
    kmap.num_outputs = geom.out_coords.size();
    geom.kmap = std::move(kmap);
    return geom;
  }

  std::vector<char> touched(geom.out_coords.size(), 0);
  for (std::size_t r = 0; r < geom.out_coords.size(); ++r) {
    const Coord4& out = geom.out_coords[r];
    int bin = 0;
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx, ++bin) {
          const Coord4 probe{out.b, out.x + dx * step, out.y + dy * step,
                             out.z + dz * step};
          const auto it = in_index.find(probe);
          if (it == in_index.end()) continue;
          kmap.bins[bin].push_back({it->second, static_cast<int32_t>(r)});
          touched[r] = 1;
        }
      }
    }
  }

  // Transposed targets without any contributing input are dropped so that
  // forward passes never emit unset rows. Same-site and strided outputs are
  // always touched through their defining input.
  if (kind == ConvKind::kTransposed &&
      std::find(touched.begin(), touched.end(), 0) != touched.end()) {
    std::vector<int32_t> remap(geom.out_coords.size(), -1);
    std::vector<Coord4> kept;
    kept.reserve(geom.out_coords.size());
    for (std::size_t r = 0; r < geom.out_coords.size(); ++r) {
      if (touched[r]) {
        remap[r] = static_cast<int32_t>(kept.size());
        kept.push_back(geom.out_coords[r]);
      }
    }
    geom.out_coords = std::move(kept);
    for (auto& bin : kmap.bins) {
      for (auto& pair : bin) pair.second = remap[pair.second];
    }
  }

  kmap.num_outputs = geom.out_coords.size();
  geom.kmap = std::move(kmap);
  return geom;
}

template <typename Scalar>
SparseTensorT<Scalar> sparse_conv_forward(const SparseTensorT<Scalar>& in,
                                          const ConvParams<Scalar>& params,
                                          const ConvGeometry& geom) {
  if (in.channels != params.c_in) {
    throw std::invalid_argument("convolution input channel mismatch");
  }
  if (geom.kmap.bins.size() != params.kernel_volume) {
    throw std::invalid_argument("kernel map volume mismatch");
  }
  if (geom.kmap.num_inputs != in.sites()) {
    throw std::invalid_argument("kernel map built for different coordinates");
  }

  SparseTensorT<Scalar> out;
  out.coords = geom.out_coords;
  out.stride = geom.out_stride;
  out.allocate(out.coords.size(), params.c_out);
  for (std::size_t r = 0; r < out.sites(); ++r) {
    std::copy(params.bias.begin(), params.bias.end(), out.row(r));
  }

  using Mat = RowMatrix<Scalar>;
  Eigen::Map<const Mat> in_mat(in.features.data(),
                               static_cast<Eigen::Index>(in.sites()),
                               static_cast<Eigen::Index>(params.c_in));
  Eigen::Map<Mat> out_mat(out.features.data(),
                          static_cast<Eigen::Index>(out.sites()),
                          static_cast<Eigen::Index>(params.c_out));

  Mat gathered;
  Mat product;
  for (std::size_t k = 0; k < params.kernel_volume; ++k) {
    const auto& bin = geom.kmap.bins[k];
    if (bin.empty()) continue;
    Eigen::Map<const Mat> w(params.weights.data() + k * params.c_in * params.c_out,
                            static_cast<Eigen::Index>(params.c_in),
                            static_cast<Eigen::Index>(params.c_out));
    gathered.resize(static_cast<Eigen::Index>(bin.size()),
                    static_cast<Eigen::Index>(params.c_in));
    for (std::size_t i = 0; i < bin.size(); ++i) {
      gathered.row(static_cast<Eigen::Index>(i)) = in_mat.row(bin[i].first);
    }
    product.noalias() = gathered * w;
    for (std::size_t i = 0; i < bin.size(); ++i) {
      out_mat.row(bin[i].second) += product.row(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

template <typename Scalar>
SparseTensorT<Scalar> sparse_conv_backward(const SparseTensorT<Scalar>& in,
                                           const ConvParams<Scalar>& params,
                                           const ConvGeometry& geom,
                                           const SparseTensorT<Scalar>& grad_out,
                                           std::vector<Scalar>& grad_weights,
                                           std::vector<Scalar>& grad_bias) {
  if (grad_out.sites() != geom.out_coords.size() ||
      grad_out.channels != params.c_out) {
    throw std::invalid_argument("gradient shape mismatch");
  }
  if (grad_weights.size() != params.weights.size() ||
      grad_bias.size() != params.bias.size()) {
    throw std::invalid_argument("gradient accumulators not pre-sized");
  }

  SparseTensorT<Scalar> grad_in;
  grad_in.coords = in.coords;
  grad_in.stride = in.stride;
  grad_in.allocate(in.sites(), params.c_in);

  using Mat = RowMatrix<Scalar>;
  Eigen::Map<const Mat> in_mat(in.features.data(),
                               static_cast<Eigen::Index>(in.sites()),
                               static_cast<Eigen::Index>(params.c_in));
  Eigen::Map<const Mat> gout_mat(grad_out.features.data(),
                                 static_cast<Eigen::Index>(grad_out.sites()),
                                 static_cast<Eigen::Index>(params.c_out));
  Eigen::Map<Mat> gin_mat(grad_in.features.data(),
                          static_cast<Eigen::Index>(grad_in.sites()),
                          static_cast<Eigen::Index>(params.c_in));

  // Bias gradient: every output row carries the bias once.
  for (std::size_t c = 0; c < params.c_out; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < grad_out.sites(); ++r) {
      acc += grad_out.row(r)[c];
    }
    grad_bias[c] += static_cast<Scalar>(acc);
  }

  Mat gathered_in;
  Mat gathered_gout;
  Mat product;
  for (std::size_t k = 0; k < params.kernel_volume; ++k) {
    const auto& bin = geom.kmap.bins[k];
    if (bin.empty()) continue;
    Eigen::Map<const Mat> w(params.weights.data() + k * params.c_in * params.c_out,
                            static_cast<Eigen::Index>(params.c_in),
                            static_cast<Eigen::Index>(params.c_out));
    Eigen::Map<Mat> gw(grad_weights.data() + k * params.c_in * params.c_out,
                       static_cast<Eigen::Index>(params.c_in),
                       static_cast<Eigen::Index>(params.c_out));
    gathered_in.resize(static_cast<Eigen::Index>(bin.size()),
                       static_cast<Eigen::Index>(params.c_in));
    gathered_gout.resize(static_cast<Eigen::Index>(bin.size()),
                         static_cast<Eigen::Index>(params.c_out));
    for (std::size_t i = 0; i < bin.size(); ++i) {
      gathered_in.row(static_cast<Eigen::Index>(i)) = in_mat.row(bin[i].first);
      gathered_gout.row(static_cast<Eigen::Index>(i)) =
          gout_mat.row(bin[i].second);
    }
    gw.noalias() += gathered_in.transpose() * gathered_gout;
    product.noalias() = gathered_gout * w.transpose();
    for (std::size_t i = 0; i < bin.size(); ++i) {
      gin_mat.row(bin[i].first) += product.row(static_cast<Eigen::Index>(i));
    }
  }
  return grad_in;
}

template SparseTensorT<float> sparse_conv_forward(const SparseTensorT<float>&,
                                                  const ConvParams<float>&,
                                                  const ConvGeometry&);
template SparseTensorT<double> sparse_conv_forward(const SparseTensorT<double>&,
                                                   const ConvParams<double>&,
                                                   const ConvGeometry&);
template SparseTensorT<float> sparse_conv_backward(
    const SparseTensorT<float>&, const ConvParams<float>&, const ConvGeometry&,
    const SparseTensorT<float>&, std::vector<float>&, std::vector<float>&);
template SparseTensorT<double> sparse_conv_backward(
    const SparseTensorT<double>&, const ConvParams<double>&,
    const ConvGeometry&, const SparseTensorT<double>&, std::vector<double>&,
    std::vector<double>&);

}  // namespace foresttrav
