#include <doctest.h>

#include "hydra/net.hpp"
#include "helpers.hpp"

using namespace hydra;

namespace {

Tensor no_metadata() { return Tensor(); }

void zero_params(Network& net) {
  for (auto& layer : net.params)
    for (Tensor& p : layer) p.data().setZero();
}

}  // namespace

TEST_CASE("zero-weight network emits all-zero scores") {
  Network net = build_network<Real>(
      {LayerSpec::conv2d(4, 3, 1), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(3)},
      {4, 4, 2}, 0, 3, 99);
  zero_params(net);
  Rng rng(1);
  const Tensor x = testutil::random_tensor({4, 4, 2}, rng);
  const VectorT<Real> scores = forward(net, x, no_metadata(), false, 0);
  CHECK(scores.isZero());
}

TEST_CASE("single dense layer with identity weights passes input through") {
  Network net = build_network<Real>({LayerSpec::flatten(), LayerSpec::dense(2)}, {1, 1, 2}, 0, 2, 7);
  zero_params(net);
  net.params[1][0][0] = 1;  // W = I
  net.params[1][0][3] = 1;
  const Tensor x = Tensor::from_values({1, 1, 2}, {1, 2});
  const VectorT<Real> scores = forward(net, x, no_metadata(), false, 0);
  CHECK(scores[0] == Real(1));
  CHECK(scores[1] == Real(2));
}

TEST_CASE("two-layer forward matches a hand-unrolled oracle") {
  // flatten -> dense(3) -> relu -> dense(2) with explicit weights; the
  // expected scores are computed below with bare loops.
  Network net = build_network<Real>(
      {LayerSpec::flatten(), LayerSpec::dense(3), LayerSpec::relu(), LayerSpec::dense(2)},
      {1, 2, 2}, 0, 2, 0);
  const double w1[3][4] = {{0.5, -1.0, 0.25, 2.0}, {1.5, 0.5, -0.75, 0.0}, {-2.0, 1.0, 0.5, 1.0}};
  const double b1[3] = {0.1, -0.2, 0.3};
  const double w2[2][3] = {{1.0, -1.0, 0.5}, {0.25, 0.75, -0.5}};
  const double b2[2] = {-0.05, 0.15};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) net.params[1][0][r * 4 + c] = static_cast<Real>(w1[r][c]);
    net.params[1][1][r] = static_cast<Real>(b1[r]);
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) net.params[3][0][r * 3 + c] = static_cast<Real>(w2[r][c]);
    net.params[3][1][r] = static_cast<Real>(b2[r]);
  }

  const double x[4] = {0.3, -0.6, 1.2, 0.9};
  Tensor pixels({1, 2, 2});
  for (Index i = 0; i < 4; ++i) pixels[i] = static_cast<Real>(x[i]);

  double hidden[3];
  for (int r = 0; r < 3; ++r) {
    hidden[r] = b1[r];
    for (int c = 0; c < 4; ++c) hidden[r] += w1[r][c] * x[c];
    hidden[r] = std::max(hidden[r], 0.0);
  }
  double expected[2];
  for (int r = 0; r < 2; ++r) {
    expected[r] = b2[r];
    for (int c = 0; c < 3; ++c) expected[r] += w2[r][c] * hidden[c];
  }

  const VectorT<Real> scores = forward(net, pixels, no_metadata(), false, 0);
  CHECK(scores[0] == doctest::Approx(expected[0]).epsilon(1e-14));
  CHECK(scores[1] == doctest::Approx(expected[1]).epsilon(1e-14));
}

TEST_CASE("metadata is concatenated before the first dense layer") {
  Network net = build_network<Real>({LayerSpec::flatten(), LayerSpec::dense(1)}, {1, 1, 1}, 2, 1, 0);
  net.params[1][0][0] = 1;
  net.params[1][0][1] = 10;
  net.params[1][0][2] = 100;
  const Tensor pixels = Tensor::from_values({1, 1, 1}, {3});
  const Tensor md = Tensor::from_values({2}, {4, 5});
  const VectorT<Real> scores = forward(net, pixels, md, false, 0);
  CHECK(scores[0] == Real(3 + 40 + 500));
  CHECK_THROWS_WITH_AS(forward(net, pixels, Tensor::from_values({1}, {4}), false, 0),
                       doctest::Contains("metadata"), ContractError);
}

TEST_CASE("shape mismatches name the offending layer") {
  Network net = build_network<Real>({LayerSpec::flatten(), LayerSpec::dense(2)}, {2, 2, 1}, 0, 2, 0);
  CHECK_THROWS_WITH_AS(forward(net, Tensor({2, 3, 1}), no_metadata(), false, 0),
                       doctest::Contains("input"), ContractError);
  CHECK_THROWS_AS(build_network<Real>({LayerSpec::dense(2)}, {2, 2, 1}, 0, 2, 0), ContractError);
  CHECK_THROWS_WITH_AS(
      build_network<Real>({LayerSpec::flatten(), LayerSpec::dense(3)}, {2, 2, 1}, 0, 2, 0),
      doctest::Contains("final layer"), ContractError);
  CHECK_THROWS_AS(build_network<Real>({LayerSpec::conv2d(2, 4), LayerSpec::flatten(),
                                       LayerSpec::dense(2)},
                                      {4, 4, 1}, 0, 2, 0),
                  ContractError);  // even kernel
}

TEST_CASE("residual block with zero F is exactly the identity") {
  const Index flat = 3 * 3 * 2;
  Network net = build_network<Real>({LayerSpec::residual_block(3), LayerSpec::flatten()},
                                    {3, 3, 2}, 0, flat, 5);
  zero_params(net);
  Rng rng(2);
  const Tensor x = testutil::random_tensor({3, 3, 2}, rng);
  const VectorT<Real> out = forward(net, x, no_metadata(), false, 0);
  CHECK(out == x.data());
}

TEST_CASE("residual block with identity F doubles a nonnegative input") {
  const Index flat = 3 * 3 * 1;
  Network net = build_network<Real>({LayerSpec::residual_block(3), LayerSpec::flatten()},
                                    {3, 3, 1}, 0, flat, 5);
  zero_params(net);
  net.params[0][0][4] = 1;  // conv1: center tap of the 3x3 kernel
  net.params[0][2][4] = 1;  // conv2: center tap
  Rng rng(3);
  const Tensor x = testutil::random_tensor({3, 3, 1}, rng, 0.0, 1.0);
  const VectorT<Real> out = forward(net, x, no_metadata(), false, 0);
  for (Index i = 0; i < flat; ++i) CHECK(out[i] == doctest::Approx(2.0 * x[i]).epsilon(1e-14));
}

TEST_CASE("random residual block equals separately computed F(x) plus x") {
  const Index flat = 4 * 4 * 3;
  Network net = build_network<Real>({LayerSpec::residual_block(3), LayerSpec::flatten()},
                                    {4, 4, 3}, 0, flat, 17);
  Rng rng(4);
  const Tensor x = testutil::random_tensor({4, 4, 3}, rng);
  // Oracle: F(x) via the conv helpers, then add x.
  const Tensor a = detail::conv_apply(x, net.params[0][0], net.params[0][1], Index{1}, Index{1},
                                      static_cast<MatrixT<Real>*>(nullptr));
  const Tensor r = detail::relu_apply(a);
  const Tensor f = detail::conv_apply(r, net.params[0][2], net.params[0][3], Index{1}, Index{1},
                                      static_cast<MatrixT<Real>*>(nullptr));
  const Tensor expected = x + f;
  const VectorT<Real> out = forward(net, x, no_metadata(), false, 0);
  for (Index i = 0; i < flat; ++i) CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("dense block with zero internal layers is the identity") {
  const Index flat = 2 * 2 * 3;
  Network net = build_network<Real>({LayerSpec::dense_block(0, 0, 3), LayerSpec::flatten()},
                                    {2, 2, 3}, 0, flat, 1);
  Rng rng(5);
  const Tensor x = testutil::random_tensor({2, 2, 3}, rng);
  CHECK(forward(net, x, no_metadata(), false, 0) == x.data());
}

TEST_CASE("dense block grows channels by layers x growth") {
  const Index c_in = 3, growth = 4, layers = 2;
  const Index flat = 2 * 2 * (c_in + layers * growth);
  Network net = build_network<Real>({LayerSpec::dense_block(layers, growth, 3), LayerSpec::flatten()},
                                    {2, 2, c_in}, 0, flat, 1);
  CHECK(net.bound[0].out_shape == std::vector<Index>{2, 2, c_in + layers * growth});
  Rng rng(6);
  const Tensor x = testutil::random_tensor({2, 2, c_in}, rng);
  CHECK(forward(net, x, no_metadata(), false, 0).size() == flat);
}

TEST_CASE("dense block layer 1 consumes exactly the block input") {
  // Instrumented check: with a 1x1 identity kernel the first internal
  // layer's output equals relu(x), so its input must have been x, in order.
  const Index c = 2;
  const Index flat = 2 * 2 * (c + c);
  Network net = build_network<Real>({LayerSpec::dense_block(1, c, 1), LayerSpec::flatten()},
                                    {2, 2, c}, 0, flat, 1);
  zero_params(net);
  net.params[0][0][0] = 1;  // kernel (1,1,c,c): identity channel map
  net.params[0][0][3] = 1;
  Rng rng(7);
  const Tensor x = testutil::random_tensor({2, 2, c}, rng, 0.0, 1.0);
  const VectorT<Real> out = forward(net, x, no_metadata(), false, 0);
  for (Index r = 0; r < 2; ++r)
    for (Index col = 0; col < 2; ++col)
      for (Index ch = 0; ch < c; ++ch) {
        const Index base = (r * 2 + col) * (2 * c);
        CHECK(out[base + ch] == x.at(r, col, ch));          // prefix is x
        CHECK(out[base + c + ch] == x.at(r, col, ch));      // new channels = relu(x) = x
      }
}

TEST_CASE("eval-mode forward is bit-stable and dropout masks reproduce") {
  Network net = build_network<Real>(
      {LayerSpec::conv2d(4, 3, 2), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(8),
       LayerSpec::relu(), LayerSpec::dropout(0.5), LayerSpec::dense(3)},
      {6, 6, 2}, 0, 3, 123);
  Rng rng(8);
  const Tensor x = testutil::random_tensor({6, 6, 2}, rng);

  const VectorT<Real> a = forward(net, x, no_metadata(), false, 0);
  const VectorT<Real> b = forward(net, x, no_metadata(), false, 999);
  CHECK(a == b);  // eval mode ignores the seed entirely

  const VectorT<Real> t1 = forward(net, x, no_metadata(), true, 42);
  const VectorT<Real> t2 = forward(net, x, no_metadata(), true, 42);
  CHECK(t1 == t2);  // same seed, same mask
  const VectorT<Real> t3 = forward(net, x, no_metadata(), true, 43);
  CHECK(t1 != t3);  // different seed, different mask (overwhelmingly)
}

TEST_CASE("inverted dropout preserves expected activations") {
  // scores = dropout(flatten(x)); average over many seeds approaches x.
  const Index n = 64;
  Network net =
      build_network<Real>({LayerSpec::flatten(), LayerSpec::dropout(0.5)}, {1, 1, n}, 0, n, 0);
  Tensor x = Tensor::full({1, 1, n}, Real(1));
  VectorT<double> sum = VectorT<double>::Zero(n);
  const int draws = 10000;
  for (int s = 0; s < draws; ++s)
    sum += forward(net, x, no_metadata(), true, static_cast<std::uint64_t>(s)).cast<double>();
  const VectorT<Real> eval_out = forward(net, x, no_metadata(), false, 0);
  for (Index i = 0; i < n; ++i) {
    CHECK(sum[i] / draws == doctest::Approx(static_cast<double>(eval_out[i])).epsilon(0.02));
  }
}

TEST_CASE("non-finite activations raise divergence errors naming the layer") {
  Network net = build_network<Real>({LayerSpec::flatten(), LayerSpec::dense(2)}, {1, 1, 2}, 0, 2, 3);
  net.params[1][0][0] = std::numeric_limits<Real>::infinity();
  const Tensor x = Tensor::full({1, 1, 2}, Real(1));
  CHECK_THROWS_WITH_AS(forward(net, x, no_metadata(), false, 0), doctest::Contains("layer 1"),
                       DivergenceError);
}

TEST_CASE("softmax cross entropy basics") {
  VectorT<Real> uniform = VectorT<Real>::Constant(5, Real(1.25));
  CHECK(softmax_cross_entropy(uniform, 2, Real(1)) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(softmax_cross_entropy(uniform, 2, Real(2.5)) ==
        doctest::Approx(2.5 * std::log(5.0)).epsilon(1e-12));

  VectorT<Real> v(2);
  v << Real(0), Real(std::log(3.0));
  CHECK(softmax_cross_entropy(v, 1, Real(1)) == doctest::Approx(-std::log(0.75)).epsilon(1e-12));

  // Shift invariance to 1e-12 while scores + c is exactly representable;
  // for huge shifts the input itself quantizes, so only stability (no
  // overflow, small drift) can be asserted.
  Rng rng(9);
  for (int it = 0; it < 100; ++it) {
    VectorT<Real> scores(4);
    for (Index i = 0; i < 4; ++i) scores[i] = static_cast<Real>(rng.uniform(-5, 5));
    const double base = softmax_cross_entropy(scores, 1, Real(1));
    for (double c : {-7.25, 1e-3, 1.0, 128.0}) {
      VectorT<Real> shifted = scores.array() + Real(c);
      CHECK(softmax_cross_entropy(shifted, 1, Real(1)) == doctest::Approx(base).epsilon(1e-12));
    }
    VectorT<Real> huge = scores.array() + Real(1e9);
    CHECK(softmax_cross_entropy(huge, 1, Real(1)) == doctest::Approx(base).epsilon(1e-6));
  }

  CHECK_THROWS_AS(softmax_cross_entropy(v, 5, Real(1)), ContractError);
  v[0] = std::numeric_limits<Real>::quiet_NaN();
  CHECK_THROWS_AS(softmax_cross_entropy(v, 1, Real(1)), DivergenceError);
}
