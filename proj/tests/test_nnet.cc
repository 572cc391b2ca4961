// tests/test_nnet.cc

// Copyright 2026  The uasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include "doctest.h"
#include "uasr/common.h"
#include "oracles.h"
#include "uasr/nnet.h"

using namespace uasr;

TEST_CASE("matrix products agree with each other") {
  Rng rng(81);
  Tensor2 a(4, 3), b(3, 5), c(4, 5);
  for (double &v : a.data()) v = rng.normal();
  for (double &v : b.data()) v = rng.normal();
  for (double &v : c.data()) v = rng.normal();
  const Tensor2 ab = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      CHECK(ab(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  const Tensor2 atc = matmul_tn(a, c);  // 3 x 5
  const Tensor2 cbt = matmul_nt(c, b);  // 4 x 3
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += a(i, k) * c(i, j);
      CHECK(atc(k, j) == doctest::Approx(s).epsilon(1e-14));
    }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) s += c(i, j) * b(k, j);
      CHECK(cbt(i, k) == doctest::Approx(s).epsilon(1e-14));
    }
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("convolution matches the direct sum and its transpose") {
  Rng rng(82);
  const MultiKernelConv1d layer = MultiKernelConv1d::init(3, {1, 3, 5}, 2, rng);
  Tensor2 x(6, 3), g(6, layer.out_channels());
  for (double &v : x.data()) v = rng.normal();
  for (double &v : g.data()) v = rng.normal();
  const Tensor2 y = conv1d_forward(layer, x);
  const oracle::Mat ref = oracle::conv(layer, oracle::to_mat(x));
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t c = 0; c < layer.out_channels(); ++c)
      CHECK(y(t, c) == doctest::Approx(ref[t][c]).epsilon(1e-12));
  // <conv_nobias(x), g> == <x, conv_t(g)>
  const Tensor2 y0 = conv1d_forward(layer, x, false);
  const Tensor2 gx = conv1d_input_grad(layer, g);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y0.size(); ++i) lhs += y0.data()[i] * g.data()[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x.data()[i] * gx.data()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("dense layer and softmax gradients agree with finite differences") {
  Rng rng(83);
  DenseLayer h = DenseLayer::init(4, 5, Activation::kRelu, rng);
  DenseLayer o = DenseLayer::init(5, 3, Activation::kSoftmaxRows, rng);
  for (double &v : h.bias.data()) v = 0.1 * rng.normal();
  Tensor2 x(6, 4), target(6, 3);
  for (double &v : x.data()) v = rng.normal();
  for (double &v : target.data()) v = rng.normal();
  auto loss = [&] {
    const Tensor2 y = dense_apply(o, dense_apply(h, x).output).output;
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * target.data()[i];
    return s;
  };
  const DenseResult r1 = dense_apply(h, x);
  const DenseResult r2 = dense_apply(o, r1.output);
  DenseGrads g1 = zero_grads(h), g2 = zero_grads(o);
  const Tensor2 back = dense_backward(o, r2.context, target, &g2);
  dense_backward(h, r1.context, back, &g1);
  std::vector<Tensor2> grads{g1.weight, g1.bias, g2.weight, g2.bias};
  const GradCheckReport rep =
      gradient_check(loss, {&h.weight, &h.bias, &o.weight, &o.bias}, grads, 1e-6);
  CHECK(rep.passed);
  for (std::size_t t = 0; t < 6; ++t) {
    double s = 0.0;
    for (double v : r2.output.row(t)) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("Adam first step moves each weight by the learning rate") {
  Tensor2 w{{1.0, -2.0, 3.0}};
  AdamState st({0.1, 0.5, 0.9, 1e-8}, ConstParamRefs{&w});
  const std::vector<Tensor2> g{Tensor2{{0.5, -3.0, 0.0}}};
  adam_step(st, {&w}, g);
  CHECK(w(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(w(0, 1) == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(w(0, 2) == 3.0);
  CHECK(st.step_count == 1);
}

TEST_CASE("checkpoints round-trip and reject corruption") {
  Checkpoint c{{3, 1, 4}, {Tensor2{{1.5, -0.25}}, Tensor2(0, 0)}};
  const std::string bytes = serialize_checkpoint(c);
  CHECK(deserialize_checkpoint(bytes) == c);
  CHECK_THROWS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)));
  std::string bad = bytes;
  bad[0] ^= 0x55;
  CHECK_THROWS(deserialize_checkpoint(bad));
}

TEST_CASE("gradient check flags a wrong gradient") {
  Tensor2 w{{2.0}};
  auto loss = [&] { return w(0, 0) * w(0, 0); };
  CHECK(gradient_check(loss, {&w}, std::vector<Tensor2>{Tensor2{{4.0}}}, 1e-6).passed);
  CHECK_FALSE(gradient_check(loss, {&w}, std::vector<Tensor2>{Tensor2{{3.0}}}, 1e-6).passed);
}

TEST_CASE("five-point stencil cancels the h^2 truncation term") {
  // d/dw w^5 at 1 is 5.  The three-point error is 10 h^2, the five-point one
  // is -4 h^4.
  Tensor2 w{{1.0}};
  auto loss = [&] { return std::pow(w(0, 0), 5); };
  const std::vector<Tensor2> exact{Tensor2{{5.0}}};
  const auto second = gradient_check(loss, {&w}, exact, 1.0, 1e-2, 1e-6, false);
  const auto fourth = gradient_check(loss, {&w}, exact, 1.0, 1e-2, 1e-6, true);
  CHECK(second.worst_numeric - 5.0 == doctest::Approx(1e-3).epsilon(1e-3));
  CHECK(fourth.worst_numeric - 5.0 == doctest::Approx(-4e-8).epsilon(1e-2));
  CHECK(w(0, 0) == 1.0);
}
