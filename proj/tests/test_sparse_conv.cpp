#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "foresttrav/rng.hpp"
#include "foresttrav/sparse_conv.hpp"
#include "support/nn_oracles.hpp"

using namespace foresttrav;

namespace {

template <typename Scalar>
SparseTensorT<Scalar> random_tensor(std::vector<Coord4> coords,
                                    std::size_t channels, int stride,
                                    Rng& rng) {
  SparseTensorT<Scalar> t;
  t.coords = std::move(coords);
  t.stride = stride;
  t.allocate(t.coords.size(), channels);
  for (auto& v : t.features) v = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
  return t;
}

template <typename Scalar>
ConvParams<Scalar> random_params(std::size_t c_in, std::size_t c_out,
                                 std::size_t kernel_volume, Rng& rng) {
  ConvParams<Scalar> p;
  p.c_in = c_in;
  p.c_out = c_out;
  p.kernel_volume = kernel_volume;
  p.allocate();
  for (auto& v : p.weights) v = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
  for (auto& v : p.bias) v = static_cast<Scalar>(rng.uniform(-1.0, 1.0));
  return p;
}

std::vector<Coord4> random_cloud(std::size_t target, int lo, int hi,
                                 int batches, Rng& rng) {
  std::set<Coord4> seen;
  while (seen.size() < target) {
    seen.insert(Coord4{static_cast<int32_t>(rng.uniform_int(0, batches - 1)),
                       static_cast<int32_t>(rng.uniform_int(lo, hi)),
                       static_cast<int32_t>(rng.uniform_int(lo, hi)),
                       static_cast<int32_t>(rng.uniform_int(lo, hi))});
  }
  return {seen.begin(), seen.end()};
}

// Row-major dense block coords with site = (x*ny + y)*nz + z, batch 0.
std::vector<Coord4> dense_block(int nx, int ny, int nz) {
  std::vector<Coord4> coords;
  coords.reserve(static_cast<std::size_t>(nx) * ny * nz);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      for (int z = 0; z < nz; ++z) coords.push_back(Coord4{0, x, y, z});
    }
  }
  return coords;
}

template <typename Scalar>
std::unordered_map<Coord4, const Scalar*, Coord4Hash> rows_by_coord(
    const SparseTensorT<Scalar>& t) {
  std::unordered_map<Coord4, const Scalar*, Coord4Hash> index;
  for (std::size_t r = 0; r < t.sites(); ++r) index[t.coords[r]] = t.row(r);
  return index;
}

using Pair = std::pair<int32_t, int32_t>;

std::vector<Pair> sorted_bin(const KernelMap& kmap, int bin) {
  auto pairs = kmap.bins[static_cast<std::size_t>(bin)];
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

}  // namespace

TEST_CASE("kernel map: an isolated site pairs only with itself") {
  const std::vector<Coord4> coords = {Coord4{0, 3, -5, 7}};
  const ConvGeometry geom = build_kernel_map(coords, 1, ConvKind::kSameSite);

  CHECK(geom.out_coords == coords);
  CHECK(geom.out_stride == 1);
  REQUIRE(geom.kmap.bins.size() == 27);
  CHECK(geom.kmap.num_inputs == 1);
  CHECK(geom.kmap.num_outputs == 1);
  for (int bin = 0; bin < 27; ++bin) {
    if (bin == 13) {
      CHECK(sorted_bin(geom.kmap, bin) == std::vector<Pair>{{0, 0}});
    } else {
      CHECK(geom.kmap.bins[static_cast<std::size_t>(bin)].empty());
    }
  }
}

TEST_CASE("kernel map: adjacent sites land in the matching offset bins") {
  // in = out + offset, x-fastest bins: +x offset is bin 14, -x is bin 12.
  const std::vector<Coord4> coords = {Coord4{0, 0, 0, 0}, Coord4{0, 1, 0, 0}};
  const ConvGeometry geom = build_kernel_map(coords, 1, ConvKind::kSameSite);

  CHECK(sorted_bin(geom.kmap, 13) == std::vector<Pair>{{0, 0}, {1, 1}});
  CHECK(sorted_bin(geom.kmap, 14) == std::vector<Pair>{{1, 0}});
  CHECK(sorted_bin(geom.kmap, 12) == std::vector<Pair>{{0, 1}});
  for (int bin = 0; bin < 27; ++bin) {
    if (bin == 12 || bin == 13 || bin == 14) continue;
    CHECK(geom.kmap.bins[static_cast<std::size_t>(bin)].empty());
  }
}

TEST_CASE("kernel map: batches never pair across the batch index") {
  const std::vector<Coord4> coords = {Coord4{0, 0, 0, 0}, Coord4{1, 0, 0, 0},
                                      Coord4{1, 1, 0, 0}};
  const ConvGeometry geom = build_kernel_map(coords, 1, ConvKind::kSameSite);

  std::size_t total = 0;
  for (const auto& bin : geom.kmap.bins) total += bin.size();
  // Three identity pairs plus the single +x/-x neighborhood inside batch 1.
  CHECK(total == 5);
  CHECK(sorted_bin(geom.kmap, 14) == std::vector<Pair>{{2, 1}});
  CHECK(sorted_bin(geom.kmap, 12) == std::vector<Pair>{{1, 2}});
}

TEST_CASE("kernel map: brute-force pair enumeration on a random cloud") {
  Rng rng(401);
  const std::vector<Coord4> coords = random_cloud(80, -4, 4, 2, rng);
  const ConvGeometry geom = build_kernel_map(coords, 1, ConvKind::kSameSite);

  std::unordered_map<Coord4, int32_t, Coord4Hash> index;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    index[coords[i]] = static_cast<int32_t>(i);
  }
  int bin = 0;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx, ++bin) {
        std::vector<Pair> expected;
        for (std::size_t r = 0; r < coords.size(); ++r) {
          const Coord4 probe{coords[r].b, coords[r].x + dx, coords[r].y + dy,
                             coords[r].z + dz};
          const auto it = index.find(probe);
          if (it != index.end()) {
            expected.push_back({it->second, static_cast<int32_t>(r)});
          }
        }
        std::sort(expected.begin(), expected.end());
        CHECK(sorted_bin(geom.kmap, bin) == expected);
      }
    }
  }
}

TEST_CASE("kernel map: strided outputs are the unique floor-halved cells") {
  const std::vector<Coord4> coords = {Coord4{0, -1, -1, -1}, Coord4{0, 0, 0, 0},
                                      Coord4{0, 1, 1, 1}, Coord4{0, 2, 3, 2}};
  const ConvGeometry geom = build_kernel_map(coords, 1, ConvKind::kStrided);

  CHECK(geom.out_stride == 2);
  const std::vector<Coord4> expected = {Coord4{0, -2, -2, -2}, Coord4{0, 0, 0, 0},
                                        Coord4{0, 2, 2, 2}};
  CHECK(geom.out_coords == expected);

  // Gathers run with step 1 from every output cell. Bin 13 (center) only
  // catches (0,0,0); bin 26 = offset (+1,+1,+1) feeds output (-2,-2,-2) from
  // input row 0 and output (0,0,0) from row 2; bin 0 mirrors it; the input
  // (2,3,2) reaches output (2,2,2) at offset (0,+1,0) = bin 16.
  CHECK(sorted_bin(geom.kmap, 13) == std::vector<Pair>{{1, 1}});
  CHECK(sorted_bin(geom.kmap, 26) == std::vector<Pair>{{0, 0}, {2, 1}});
  CHECK(sorted_bin(geom.kmap, 0) == std::vector<Pair>{{0, 1}, {2, 2}});
  CHECK(sorted_bin(geom.kmap, 16) == std::vector<Pair>{{3, 2}});
}

TEST_CASE("kernel map: argument validation") {
  const std::vector<Coord4> ok = {Coord4{0, 0, 0, 0}};
  const std::vector<Coord4> dup = {Coord4{0, 1, 1, 1}, Coord4{0, 1, 1, 1}};
  const std::vector<Coord4> odd = {Coord4{0, 1, 0, 0}};

  CHECK_THROWS_AS(build_kernel_map(dup, 1, ConvKind::kSameSite),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_kernel_map(odd, 2, ConvKind::kSameSite),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_kernel_map(ok, 1, ConvKind::kSameSite, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_kernel_map(ok, 1, ConvKind::kStrided, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_kernel_map(ok, 1, ConvKind::kTransposed),
                  std::invalid_argument);  // missing targets
  const std::vector<Coord4> targets = {Coord4{0, 0, 0, 0}};
  CHECK_THROWS_AS(build_kernel_map(ok, 1, ConvKind::kTransposed, 3, &targets),
                  std::invalid_argument);  // odd input stride
}

TEST_CASE("same-site convolution matches the dense reference") {
  Rng rng(402);
  const int nx = 5, ny = 4, nz = 3;
  const std::size_t c_in = 3, c_out = 4;
  const auto in =
      random_tensor<float>(dense_block(nx, ny, nz), c_in, 1, rng);
  const auto params = random_params<float>(c_in, c_out, 27, rng);
  const ConvGeometry geom = build_kernel_map(in.coords, 1, ConvKind::kSameSite);

  const SparseTensor out = sparse_conv_forward(in, params, geom);
  const std::vector<float> expected = testing::dense_conv3(
      in.features, nx, ny, nz, c_in, c_out, params.weights, params.bias);

  REQUIRE(out.sites() == in.sites());
  const auto rows = rows_by_coord(out);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      for (int z = 0; z < nz; ++z) {
        const std::size_t site = static_cast<std::size_t>((x * ny + y) * nz + z);
        const float* got = rows.at(Coord4{0, x, y, z});
        for (std::size_t c = 0; c < c_out; ++c) {
          CHECK(got[c] ==
                doctest::Approx(expected[site * c_out + c]).epsilon(1e-4));
        }
      }
    }
  }
}

TEST_CASE("strided convolution matches the dense reference") {
  Rng rng(403);
  const int n = 4;
  const std::size_t c_in = 2, c_out = 3;
  const auto in = random_tensor<float>(dense_block(n, n, n), c_in, 1, rng);
  const auto params = random_params<float>(c_in, c_out, 27, rng);
  const ConvGeometry geom = build_kernel_map(in.coords, 1, ConvKind::kStrided);

  const SparseTensor out = sparse_conv_forward(in, params, geom);
  const std::vector<float> expected = testing::dense_conv3_strided(
      in.features, n, n, n, c_in, c_out, params.weights, params.bias);

  REQUIRE(out.sites() == 8);
  CHECK(out.stride == 2);
  const auto rows = rows_by_coord(out);
  for (int X = 0; X < 2; ++X) {
    for (int Y = 0; Y < 2; ++Y) {
      for (int Z = 0; Z < 2; ++Z) {
        const std::size_t site = static_cast<std::size_t>((X * 2 + Y) * 2 + Z);
        const float* got = rows.at(Coord4{0, 2 * X, 2 * Y, 2 * Z});
        for (std::size_t c = 0; c < c_out; ++c) {
          CHECK(got[c] ==
                doctest::Approx(expected[site * c_out + c]).epsilon(1e-4));
        }
      }
    }
  }
}

TEST_CASE("transposed convolution matches the dense reference") {
  Rng rng(404);
  const std::size_t c_in = 3, c_out = 2;
  std::vector<Coord4> coarse;
  for (int x = 0; x <= 2; x += 2) {
    for (int y = 0; y <= 2; y += 2) {
      for (int z = 0; z <= 2; z += 2) coarse.push_back(Coord4{0, x, y, z});
    }
  }
  const auto in = random_tensor<float>(coarse, c_in, 2, rng);
  const auto params = random_params<float>(c_in, c_out, 27, rng);
  const std::vector<Coord4> targets = dense_block(4, 4, 4);
  const ConvGeometry geom =
      build_kernel_map(in.coords, 2, ConvKind::kTransposed, 3, &targets);

  CHECK(geom.out_stride == 1);
  REQUIRE(geom.out_coords == targets);  // every fine cell touches a coarse one
  const SparseTensor out = sparse_conv_forward(in, params, geom);

  const auto coarse_rows = rows_by_coord(in);
  for (std::size_t r = 0; r < out.sites(); ++r) {
    const Coord4 o = out.coords[r];
    std::vector<float> expected(params.bias.begin(), params.bias.end());
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it =
              coarse_rows.find(Coord4{o.b, o.x + dx, o.y + dy, o.z + dz});
          if (it == coarse_rows.end()) continue;
          const float* w =
              params.weights.data() +
              static_cast<std::size_t>(testing::conv_bin(dx, dy, dz)) * c_in *
                  c_out;
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t co = 0; co < c_out; ++co) {
              expected[co] += it->second[ci] * w[ci * c_out + co];
            }
          }
        }
      }
    }
    for (std::size_t c = 0; c < c_out; ++c) {
      CHECK(out.row(r)[c] == doctest::Approx(expected[c]).epsilon(1e-4));
    }
  }
}

TEST_CASE("transposed convolution drops unreachable targets") {
  Rng rng(405);
  const auto in = random_tensor<float>({Coord4{0, 0, 0, 0}}, 2, 2, rng);
  const std::vector<Coord4> targets = {Coord4{0, 0, 0, 0}, Coord4{0, 8, 8, 8}};
  const ConvGeometry geom =
      build_kernel_map(in.coords, 2, ConvKind::kTransposed, 3, &targets);

  CHECK(geom.out_coords == std::vector<Coord4>{Coord4{0, 0, 0, 0}});
  CHECK(geom.kmap.num_outputs == 1);
  for (const auto& bin : geom.kmap.bins) {
    for (const auto& [p, r] : bin) {
      CHECK(p == 0);
      CHECK(r == 0);
    }
  }
}

TEST_CASE("identity kernel reproduces the input exactly") {
  Rng rng(406);
  const std::size_t c = 5;
  const auto in = random_tensor<float>(random_cloud(40, -3, 3, 1, rng), c, 1, rng);
  ConvParams<float> params;
  params.c_in = c;
  params.c_out = c;
  params.allocate();
  for (std::size_t i = 0; i < c; ++i) {
    params.weights[13 * c * c + i * c + i] = 1.0f;
  }
  const ConvGeometry geom = build_kernel_map(in.coords, 1, ConvKind::kSameSite);

  const SparseTensor out = sparse_conv_forward(in, params, geom);
  REQUIRE(out.coords == in.coords);
  CHECK(out.features == in.features);
}

TEST_CASE("zero weights leave exactly the bias on every row") {
  Rng rng(407);
  const auto in = random_tensor<float>(random_cloud(30, -3, 3, 1, rng), 4, 1, rng);
  ConvParams<float> params;
  params.c_in = 4;
  params.c_out = 3;
  params.allocate();
  params.bias = {0.5f, -1.25f, 2.0f};
  const ConvGeometry geom = build_kernel_map(in.coords, 1, ConvKind::kSameSite);

  const SparseTensor out = sparse_conv_forward(in, params, geom);
  for (std::size_t r = 0; r < out.sites(); ++r) {
    CHECK(out.row(r)[0] == 0.5f);
    CHECK(out.row(r)[1] == -1.25f);
    CHECK(out.row(r)[2] == 2.0f);
  }
}

TEST_CASE("empty input flows through as an empty output") {
  const ConvGeometry geom = build_kernel_map({}, 1, ConvKind::kSameSite);
  ConvParams<float> params;
  params.c_in = 3;
  params.c_out = 2;
  params.allocate();
  SparseTensor in;
  in.allocate(0, 3);

  const SparseTensor out = sparse_conv_forward(in, params, geom);
  CHECK(out.sites() == 0);
  CHECK(out.channels == 2);
}

TEST_CASE("forward validates tensor and kernel map compatibility") {
  Rng rng(408);
  const auto in = random_tensor<float>({Coord4{0, 0, 0, 0}}, 3, 1, rng);
  const auto params = random_params<float>(3, 2, 27, rng);
  const ConvGeometry geom = build_kernel_map(in.coords, 1, ConvKind::kSameSite);

  SparseTensor wrong_channels = in;
  wrong_channels.allocate(1, 4);
  CHECK_THROWS_AS(sparse_conv_forward(wrong_channels, params, geom),
                  std::invalid_argument);

  auto two_sites = random_tensor<float>(
      {Coord4{0, 0, 0, 0}, Coord4{0, 1, 0, 0}}, 3, 1, rng);
  CHECK_THROWS_AS(sparse_conv_forward(two_sites, params, geom),
                  std::invalid_argument);
}

TEST_CASE("convolution gradients match central differences") {
  Rng rng(409);
  const std::size_t c_in = 3, c_out = 2;
  auto in = random_tensor<double>(random_cloud(40, -3, 3, 2, rng), c_in, 1, rng);
  auto params = random_params<double>(c_in, c_out, 27, rng);
  const ConvGeometry geom = build_kernel_map(in.coords, 1, ConvKind::kSameSite);

  SparseTensorT<double> grad_out;
  grad_out.coords = geom.out_coords;
  grad_out.allocate(geom.out_coords.size(), c_out);
  for (auto& v : grad_out.features) v = rng.uniform(-1.0, 1.0);

  const auto loss = [&]() {
    const auto out = sparse_conv_forward(in, params, geom);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.features.size(); ++i) {
      acc += out.features[i] * grad_out.features[i];
    }
    return acc;
  };

  std::vector<double> gw(params.weights.size(), 0.0);
  std::vector<double> gb(params.bias.size(), 0.0);
  const auto grad_in = sparse_conv_backward(in, params, geom, grad_out, gw, gb);

  // The map is linear in every coefficient, so central differences are exact
  // up to roundoff.
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    const double fd = testing::central_diff(params.weights[i], 1e-3, loss);
    CHECK(testing::close_rel(gw[i], fd, 1e-7));
  }
  for (std::size_t i = 0; i < params.bias.size(); ++i) {
    const double fd = testing::central_diff(params.bias[i], 1e-3, loss);
    CHECK(testing::close_rel(gb[i], fd, 1e-7));
  }
  for (std::size_t i = 0; i < in.features.size(); ++i) {
    const double fd = testing::central_diff(in.features[i], 1e-3, loss);
    CHECK(testing::close_rel(grad_in.features[i], fd, 1e-7));
  }
}

TEST_CASE("strided gradients match central differences") {
  Rng rng(410);
  const std::size_t c_in = 2, c_out = 2;
  auto in = random_tensor<double>(random_cloud(25, -2, 3, 1, rng), c_in, 1, rng);
  auto params = random_params<double>(c_in, c_out, 27, rng);
  const ConvGeometry geom = build_kernel_map(in.coords, 1, ConvKind::kStrided);

  SparseTensorT<double> grad_out;
  grad_out.coords = geom.out_coords;
  grad_out.allocate(geom.out_coords.size(), c_out);
  for (auto& v : grad_out.features) v = rng.uniform(-1.0, 1.0);

  const auto loss = [&]() {
    const auto out = sparse_conv_forward(in, params, geom);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.features.size(); ++i) {
      acc += out.features[i] * grad_out.features[i];
    }
    return acc;
  };

  std::vector<double> gw(params.weights.size(), 0.0);
  std::vector<double> gb(params.bias.size(), 0.0);
  const auto grad_in = sparse_conv_backward(in, params, geom, grad_out, gw, gb);

  for (std::size_t i = 0; i < params.weights.size(); i += 7) {
    const double fd = testing::central_diff(params.weights[i], 1e-3, loss);
    CHECK(testing::close_rel(gw[i], fd, 1e-7));
  }
  for (std::size_t i = 0; i < in.features.size(); ++i) {
    const double fd = testing::central_diff(in.features[i], 1e-3, loss);
    CHECK(testing::close_rel(grad_in.features[i], fd, 1e-7));
  }
}

TEST_CASE("backward accumulates bias as grad-output column sums") {
  Rng rng(411);
  const std::size_t c_in = 2, c_out = 3;
  const auto in =
      random_tensor<float>(random_cloud(20, -3, 3, 1, rng), c_in, 1, rng);
  const auto params = random_params<float>(c_in, c_out, 27, rng);
  const ConvGeometry geom = build_kernel_map(in.coords, 1, ConvKind::kSameSite);

  SparseTensor grad_out;
  grad_out.coords = geom.out_coords;
  grad_out.allocate(geom.out_coords.size(), c_out);
  for (auto& v : grad_out.features) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  std::vector<float> gw(params.weights.size(), 0.0f);
  std::vector<float> gb(params.bias.size(), 0.0f);
  sparse_conv_backward(in, params, geom, grad_out, gw, gb);

  for (std::size_t c = 0; c < c_out; ++c) {
    double expected = 0.0;
    for (std::size_t r = 0; r < grad_out.sites(); ++r) {
      expected += grad_out.row(r)[c];
    }
    CHECK(gb[c] == doctest::Approx(expected).epsilon(1e-5));
  }

  // A second backward doubles every accumulator.
  std::vector<float> gw2 = gw;
  std::vector<float> gb2 = gb;
  sparse_conv_backward(in, params, geom, grad_out, gw2, gb2);
  for (std::size_t i = 0; i < gw.size(); ++i) {
    CHECK(gw2[i] == doctest::Approx(2.0f * gw[i]).epsilon(1e-5));
  }

  // Zero upstream gradient leaves everything at zero.
  SparseTensor zero_grad = grad_out;
  std::fill(zero_grad.features.begin(), zero_grad.features.end(), 0.0f);
  std::vector<float> gwz(params.weights.size(), 0.0f);
  std::vector<float> gbz(params.bias.size(), 0.0f);
  const auto gin = sparse_conv_backward(in, params, geom, zero_grad, gwz, gbz);
  for (float v : gin.features) CHECK(v == 0.0f);
  for (float v : gwz) CHECK(v == 0.0f);
  for (float v : gbz) CHECK(v == 0.0f);
}
