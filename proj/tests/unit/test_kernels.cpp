// Copyright 2026 The nirv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nirv/error.hpp"
#include "nirv/kernels.hpp"
#include "nirv/optim.hpp"

using namespace nirv;
using Td = Tensor<double>;

namespace {

Td random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Td t(std::move(shape));
  for (double& v : t.data) v = u(rng);
  return t;
}

double dot(const Td& a, const Td& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("sine activation at pi/60 with omega 30") {
  const Td x({1}, std::vector<double>{std::numbers::pi / 60.0});
  CHECK(kernels::sine_forward(x, 30.0)[0] == doctest::Approx(1.0).epsilon(1e-12));
  const Td z({1}, std::vector<double>{0.0});
  CHECK(kernels::sine_forward(z, 30.0)[0] == 0.0);
}

TEST_CASE("linear forward against naive loop") {
  std::mt19937_64 rng(1);
  const Td in = random_tensor({3, 4}, rng), w = random_tensor({5, 4}, rng),
           b = random_tensor({5}, rng);
  const Td out = kernels::linear_forward(in, w, b);
  REQUIRE(out.shape == Shape{3, 5});
  for (int i = 0; i < 3; ++i)
    for (int o = 0; o < 5; ++o) {
      double s = b[o];
      for (int k = 0; k < 4; ++k) s += w[o * 4 + k] * in[i * 4 + k];
      CHECK(out[i * 5 + o] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("conv3x3 forward against naive zero-padded loop") {
  std::mt19937_64 rng(2);
  const Td in = random_tensor({2, 3, 4, 5}, rng), k = random_tensor({2, 3, 3, 3}, rng),
           b = random_tensor({2}, rng);
  const Td out = kernels::conv3x3_forward(in, k, b);
  REQUIRE(out.shape == Shape{2, 2, 4, 5});
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 2; ++o)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) {
          double s = b[o];
          for (int c = 0; c < 3; ++c)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= 4 || xx < 0 || xx >= 5) continue;
                s += k[((o * 3 + c) * 3 + dy + 1) * 3 + dx + 1] *
                     in[((n * 3 + c) * 4 + yy) * 5 + xx];
              }
          CHECK(out[((n * 2 + o) * 4 + y) * 5 + x] == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("pixel shuffle placement and inverse") {
  Td in({1, 4, 1, 1}, std::vector<double>{0, 1, 2, 3});
  const Td out = kernels::pixel_shuffle(in, 2);
  REQUIRE(out.shape == Shape{1, 1, 2, 2});
  CHECK(out.data == std::vector<double>{0, 1, 2, 3});
  std::mt19937_64 rng(3);
  const Td x = random_tensor({2, 18, 3, 2}, rng);
  const Td y = kernels::pixel_shuffle(x, 3);
  CHECK(y.shape == Shape{2, 2, 9, 6});
  CHECK(kernels::pixel_unshuffle(y, 3).data == x.data);
  // channel c*r*r + i*r + j lands at offset (i, j)
  const std::size_t c = 1, i = 2, j = 0, h = 1, w = 1;
  CHECK(y[((0 * 2 + c) * 9 + h * 3 + i) * 6 + w * 3 + j] ==
        x[((0 * 18 + c * 9 + i * 3 + j) * 3 + h) * 2 + w]);
}

TEST_CASE("linear backward passes gradient check") {
  std::mt19937_64 rng(4);
  const Td r = random_tensor({3, 5}, rng);
  auto loss = [&](const std::vector<Td>& v) {
    return dot(kernels::linear_forward(v[0], v[1], v[2]), r);
  };
  auto grad = [&](const std::vector<Td>& v) {
    Td gw(v[1].shape), gb(v[2].shape);
    Td gi = kernels::linear_backward(v[0], v[1], r, gw, gb);
    return std::vector<Td>{gi, gw, gb};
  };
  const auto rep = grad_check(loss, grad,
                              {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng),
                               random_tensor({5}, rng)},
                              1e-6);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("sine backward passes gradient check") {
  std::mt19937_64 rng(5);
  const Td r = random_tensor({7}, rng);
  auto loss = [&](const std::vector<Td>& v) { return dot(kernels::sine_forward(v[0], 30.0), r); };
  auto grad = [&](const std::vector<Td>& v) {
    return std::vector<Td>{kernels::sine_backward(v[0], 30.0, r)};
  };
  const auto rep = grad_check(loss, grad, {random_tensor({7}, rng, -0.2, 0.2)}, 1e-5, 1e-6);
  CHECK(rep.passed);
}

TEST_CASE("conv3x3 backward passes gradient check") {
  std::mt19937_64 rng(6);
  const Td r = random_tensor({2, 3, 4, 4}, rng);
  auto loss = [&](const std::vector<Td>& v) {
    return dot(kernels::conv3x3_forward(v[0], v[1], v[2]), r);
  };
  auto grad = [&](const std::vector<Td>& v) {
    Td gk(v[1].shape), gb(v[2].shape);
    Td gi = kernels::conv3x3_backward(v[0], v[1], r, gk, gb);
    return std::vector<Td>{gi, gk, gb};
  };
  const auto rep = grad_check(loss, grad,
                              {random_tensor({2, 2, 4, 4}, rng),
                               random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)},
                              1e-6);
  CHECK(rep.passed);
}

TEST_CASE("pixel shuffle backward is unshuffle") {
  std::mt19937_64 rng(7);
  const Td r = random_tensor({1, 2, 4, 4}, rng);
  auto loss = [&](const std::vector<Td>& v) { return dot(kernels::pixel_shuffle(v[0], 2), r); };
  auto grad = [&](const std::vector<Td>& v) {
    (void)v;
    return std::vector<Td>{kernels::pixel_unshuffle(r, 2)};
  };
  CHECK(grad_check(loss, grad, {random_tensor({1, 8, 2, 2}, rng)}, 1e-6).passed);
}

TEST_CASE("grad check reports a wrong gradient") {
  auto loss = [](const std::vector<Td>& v) { return v[0][0] * v[0][0]; };
  auto grad = [](const std::vector<Td>& v) {
    Td g(v[0].shape);
    g[0] = 3.0 * v[0][0];
    return std::vector<Td>{g};
  };
  const auto rep = grad_check(loss, grad, {Td({1}, std::vector<double>{1.0})}, 1e-4);
  CHECK_FALSE(rep.passed);
  CHECK(rep.max_rel_error == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
}

TEST_CASE("first Adam step moves by the learning rate") {
  for (double g0 : {1.0, -2.5, 1e-3}) {
    std::vector<double> p = {0.0};
    const std::vector<double> g = {g0};
    AdamState<double> state;
    adam_step<double>(p, g, state, 5e-4);
    // m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps)
    const double expected = -5e-4 * g0 / (std::abs(g0) + 1e-8);
    CHECK(p[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("Adam matches a hand-rolled second step") {
  std::vector<double> p = {1.0};
  AdamState<double> state;
  adam_step<double>(p, std::vector<double>{0.5}, state, 0.1);
  adam_step<double>(p, std::vector<double>{-0.25}, state, 0.1);
  const double m = 0.9 * (0.1 * 0.5) + 0.1 * -0.25;
  const double v = 0.999 * (0.001 * 0.25) + 0.001 * 0.0625;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  const double expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8);
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("conv3x3 delta and zero kernels") {
  std::mt19937_64 rng(8);
  const Td in = random_tensor({1, 1, 5, 6}, rng);
  Td delta({1, 1, 3, 3});
  delta[4] = 1.0;
  CHECK(kernels::conv3x3_forward(in, delta, Td({1})).data == in.data);
  const Td out = kernels::conv3x3_forward(in, Td({2, 1, 3, 3}), Td({2}, std::vector<double>{0.7, -2.0}));
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(out[i] == 0.7);
    CHECK(out[30 + i] == -2.0);
  }
}

TEST_CASE("pixel shuffle r=1 and value multiset") {
  std::mt19937_64 rng(9);
  const Td x = random_tensor({2, 3, 4, 5}, rng);
  CHECK(kernels::pixel_shuffle(x, 1).data == x.data);
  const Td y = random_tensor({1, 4, 2, 2}, rng);
  const Td s = kernels::pixel_shuffle(y, 2);
  CHECK(s.shape == Shape{1, 1, 4, 4});
  auto a = y.data, b = s.data;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK_THROWS_AS(kernels::pixel_shuffle(random_tensor({1, 6, 2, 2}, rng), 2), CodecError);
}

TEST_CASE("every kernel passes gradient checks on 20 random instances") {
  std::mt19937_64 rng(10);
  double worst_linear = 0.0, worst_sine = 0.0, worst_conv = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 1 + rng() % 3, i = 1 + rng() % 6, o = 1 + rng() % 6;
    const Td rl = random_tensor({b, o}, rng);
    auto lin_loss = [&](const std::vector<Td>& v) {
      return dot(kernels::linear_forward(v[0], v[1], v[2]), rl);
    };
    auto lin_grad = [&](const std::vector<Td>& v) {
      Td gw(v[1].shape), gb(v[2].shape);
      Td gi = kernels::linear_backward(v[0], v[1], rl, gw, gb);
      return std::vector<Td>{gi, gw, gb};
    };
    const auto lr = grad_check(lin_loss, lin_grad,
                               {random_tensor({b, i}, rng), random_tensor({o, i}, rng),
                                random_tensor({o}, rng)},
                               1e-5);
    CHECK(lr.passed);
    worst_linear = std::max(worst_linear, lr.max_rel_error);

    const Td rs = random_tensor({b, o}, rng);
    auto sin_loss = [&](const std::vector<Td>& v) { return dot(kernels::sine_forward(v[0], 30.0), rs); };
    auto sin_grad = [&](const std::vector<Td>& v) {
      return std::vector<Td>{kernels::sine_backward(v[0], 30.0, rs)};
    };
    const auto sr = grad_check(sin_loss, sin_grad, {random_tensor({b, o}, rng)}, 1e-5, 1e-6);
    CHECK(sr.passed);
    worst_sine = std::max(worst_sine, sr.max_rel_error);

    const Td rc = random_tensor({1, 3, 5, 5}, rng);
    auto conv_loss = [&](const std::vector<Td>& v) {
      return dot(kernels::conv3x3_forward(v[0], v[1], v[2]), rc);
    };
    auto conv_grad = [&](const std::vector<Td>& v) {
      Td gk(v[1].shape), gb(v[2].shape);
      Td gi = kernels::conv3x3_backward(v[0], v[1], rc, gk, gb);
      return std::vector<Td>{gi, gk, gb};
    };
    const auto cr = grad_check(conv_loss, conv_grad,
                               {random_tensor({1, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng),
                                random_tensor({3}, rng)},
                               1e-5);
    CHECK(cr.passed);
    worst_conv = std::max(worst_conv, cr.max_rel_error);
  }
  CHECK(worst_linear < 1e-6);
  CHECK(worst_sine < 1e-6);
  CHECK(worst_conv < 1e-5);
}

TEST_CASE("Adam with zero gradient leaves parameters unchanged") {
  std::vector<float> p = {1.5f, -2.0f, 0.25f};
  const auto before = p;
  AdamState<float> state;
  for (int i = 0; i < 5; ++i) adam_step<float>(p, std::vector<float>(3, 0.0f), state, 1e-3);
  CHECK(p == before);
  for (float v : state.second_moment) CHECK(v >= 0.0f);
  std::vector<double> q = {0.0};
  AdamState<double> s2;
  adam_step<double>(q, std::vector<double>{2.0}, s2, 0.1);
  const double after_one = q[0];
  adam_step<double>(q, std::vector<double>{2.0}, s2, 0.1);
  CHECK(after_one < 0.0);
  CHECK(q[0] < after_one);
  CHECK_THROWS_AS(adam_step<double>(q, std::vector<double>{1.0, 2.0}, s2, 0.1), CodecError);
}
