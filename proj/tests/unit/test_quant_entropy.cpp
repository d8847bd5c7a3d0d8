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


#include <cmath>
#include <random>

#include "doctest.h"
#include "nirv/error.hpp"
#include "nirv/optim.hpp"
#include "nirv/quant_entropy.hpp"

using namespace nirv;

namespace {

// Biases and factors zero, huge matrices: C(0) = 1/2 and C is nearly a step.
ProbabilityModel<double> step_model() {
  ProbabilityModel<double> pm;
  auto p = pm.params();
  for (std::size_t i : {0, 1, 2, 24, 25, 26}) p[i] = 10.0;
  for (std::size_t i = 9; i < 18; ++i) p[i] = 10.0;
  return pm;
}

QuantizedLatent<double> latent_from(Shape shape, std::vector<double> values, double scale) {
  QuantizedLatent<double> q;
  q.surrogate = Tensor<double>(std::move(shape), std::move(values));
  q.scale = scale;
  return q;
}

}  // namespace

TEST_CASE("decode weights") {
  const std::vector<std::int32_t> lat = {3, -2};
  const auto w = decode_weights<double>(lat, 0.02, {2});
  CHECK(w[0] == doctest::Approx(0.06));
  CHECK(w[1] == doctest::Approx(-0.04));
  const auto z = decode_weights<double>(lat, 0.0, {2});
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  const std::vector<std::int32_t> zeros(6, 0);
  const auto w2 = decode_weights<float>(zeros, 0.7f, {2, 3});
  CHECK(w2.shape == Shape{2, 3});
  for (float v : w2.data) CHECK(v == 0.0f);
}

TEST_CASE("rounding is half away from zero") {
  CHECK(round_latent(2.4) == 2);
  CHECK(round_latent(2.5) == 3);
  CHECK(round_latent(-2.5) == -3);
  CHECK(round_latent(-2.4) == -2);
  CHECK(round_latent(7.0) == 7);
  CHECK(round_latent(-0.5f) == -1);
  const Tensor<double> s({3}, std::vector<double>{2.4, 2.5, -2.5});
  CHECK(ste_round(s).data == std::vector<double>{2, 3, -3});
}

TEST_CASE("straight-through gradient of phi * round(x)") {
  // d/dx [phi * ste_round(x)] = phi * identity
  const Tensor<double> upstream({2}, std::vector<double>{0.3, 0.3});
  const auto g = ste_round_backward(upstream);
  CHECK(g.data == upstream.data);
}

TEST_CASE("bind then decode reproduces phi times latent") {
  auto q = latent_from({4}, {0.1, 0.2, 0.3, 0.4}, 0.25);
  const std::vector<std::int32_t> values = {5, -3, 0, 12};
  q.bind(values);
  CHECK(q.latent() == values);
  const auto w = decode_weights(q);
  for (int i = 0; i < 4; ++i) CHECK(w[i] == 0.25 * values[i]);
}

TEST_CASE("noise support, mean, and reproducibility") {
  Rng rng(42);
  const Tensor<double> s({100000}, 1.5);
  const auto out = noisy_sample(s, rng);
  double mean = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double n = out[i] - 1.5;
    CHECK(n >= -0.5);
    CHECK(n < 0.5);
    mean += n;
  }
  mean /= static_cast<double>(out.size());
  CHECK(std::abs(mean) < 0.01);
  Rng a(7), b(7);
  CHECK(uniform_noise<float>({16}, a).data == uniform_noise<float>({16}, b).data);
  const auto first = uniform_noise<float>({16}, a);
  CHECK(first.data != uniform_noise<float>({16}, a).data);
}

TEST_CASE("probability model is a proper CDF") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    ProbabilityModel<double> pm(rng, 1.0 + 5.0 * trial);
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (double& p : pm.params()) p += jitter(rng);
    CHECK(pm.cdf(-200.0) < 1e-3);
    CHECK(pm.cdf(200.0) > 1.0 - 1e-3);
    double prev = pm.logit(-200.0);
    for (double x = -199.5; x <= 200.0; x += 0.5) {
      const double l = pm.logit(x);
      CHECK(l > prev);
      CHECK(pm.cdf(x) >= pm.cdf(x - 0.5));
      prev = l;
    }
    // each term may be raised to the floor
    double mass = 0.0;
    for (int k = -40; k <= 40; ++k) {
      const double p = pm.likelihood(k);
      CHECK(p > 0.0);
      mass += p;
    }
    CHECK(mass <= 1.0 + 81 * ProbabilityModel<double>::kLikelihoodFloor);
  }
}

TEST_CASE("likelihood gradients match finite differences") {
  Rng rng(5);
  ProbabilityModel<double> base(rng, 4.0);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (double& p : base.params()) p += jitter(rng);
  Tensor<double> params({ProbabilityModel<double>::kNumParams});
  std::copy(base.params().begin(), base.params().end(), params.data.begin());
  const Tensor<double> samples({6}, std::vector<double>{-3.2, -1.1, 0.0, 0.4, 2.7, 5.1});

  auto model_of = [](const Tensor<double>& p) {
    ProbabilityModel<double> pm;
    std::copy(p.data.begin(), p.data.end(), pm.params().begin());
    return pm;
  };
  auto loss = [&](const std::vector<Tensor<double>>& v) {
    return model_of(v[0]).self_information(v[1].span(), {}, {});
  };
  auto grad = [&](const std::vector<Tensor<double>>& v) {
    Tensor<double> gp(v[0].shape), gs(v[1].shape);
    model_of(v[0]).self_information(v[1].span(), gs.span(), gp.span());
    return std::vector<Tensor<double>>{gp, gs};
  };
  const auto rep = grad_check(loss, grad, {params, samples}, 1e-4, 1e-6);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("entropy loss of half and full probability") {
  const ProbabilityModel<double> pm = step_model();
  CHECK(pm.cdf(0.0) == doctest::Approx(0.5));
  // samples at +-1/2 straddle the step: p = C(1) - C(0) = 1/2
  auto q = latent_from({4}, {0.5, -0.5, 0.5, -0.5}, 1.0);
  const std::vector<const QuantizedLatent<double>*> lat = {&q};
  const std::vector<ProbabilityModel<double>> pms = {pm};
  const std::vector<Tensor<double>> zero = {Tensor<double>({4})};
  CHECK(entropy_loss<double>(lat, pms, zero) == doctest::Approx(4.0).epsilon(1e-9));
  // samples at the step center carry (almost) all the mass
  auto d = latent_from({4}, {0.0, 0.0, 0.0, 0.0}, 1.0);
  const std::vector<const QuantizedLatent<double>*> lat2 = {&d};
  CHECK(entropy_loss<double>(lat2, pms, zero) < 1e-6);
}

TEST_CASE("fitted model on uniform 16-symbol latents costs about 4 bits") {
  Rng rng(11);
  std::uniform_int_distribution<int> sym(0, 15);
  std::vector<double> values(2048);
  for (double& v : values) v = sym(rng);
  auto q = latent_from({values.size()}, values, 1.0);
  const std::vector<const QuantizedLatent<double>*> lat = {&q};
  std::vector<ProbabilityModel<double>> pms = {ProbabilityModel<double>(rng, 10.0)};
  AdamState<double> adam;
  for (int step = 0; step < 3000; ++step) {
    std::vector<Tensor<double>> noise = {uniform_noise<double>(q.shape(), rng)};
    std::vector<std::array<double, 28>> g(1);
    g[0].fill(0.0);
    entropy_loss<double>(lat, pms, noise, nullptr, &g);
    for (double& v : g[0]) v /= static_cast<double>(values.size());
    adam_step<double>(pms[0].params(), g[0], adam, 1e-2);
  }
  double bits = 0.0;
  const int evals = 20;
  for (int e = 0; e < evals; ++e) bits += entropy_loss<double>(lat, pms, rng);
  bits /= evals * static_cast<double>(values.size());
  const double oracle = std::log2(16.0);
  CHECK(bits == doctest::Approx(oracle).epsilon(0.05));
}

TEST_CASE("probability-model optimization lowers the rate") {
  Rng rng(19);
  std::normal_distribution<double> gauss(0.0, 6.0);
  std::vector<double> values(1000);
  for (double& v : values) v = std::round(gauss(rng));
  auto q = latent_from({values.size()}, values, 1.0);
  const std::vector<const QuantizedLatent<double>*> lat = {&q};
  std::vector<ProbabilityModel<double>> pms = {ProbabilityModel<double>(rng, 1.0)};
  const std::vector<Tensor<double>> noise = {uniform_noise<double>(q.shape(), rng)};
  const double initial = entropy_loss<double>(lat, pms, noise);
  AdamState<double> adam;
  double sum = 0.0;
  for (int step = 0; step < 100; ++step) {
    std::vector<std::array<double, 28>> g(1);
    g[0].fill(0.0);
    sum += entropy_loss<double>(lat, pms, noise, nullptr, &g);
    adam_step<double>(pms[0].params(), g[0], adam, 1e-2);
  }
  CHECK(sum / 100.0 < initial);
}

TEST_CASE("straight-through training reaches the target within one step") {
  Rng rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = 64;
  std::vector<double> target(n);
  for (double& t : target) t = u(rng);
  std::vector<double> surrogate(n, 0.0);
  std::vector<double> scale = {0.05};
  AdamState<double> sa, pa;
  for (int step = 0; step < 4000; ++step) {
    std::vector<double> gs(n), gp = {0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double r = round_latent(surrogate[i]);
      const double diff = scale[0] * r - target[i];
      gs[i] = 2.0 * diff * scale[0];  // straight-through
      gp[0] += 2.0 * diff * r;
    }
    adam_step<double>(surrogate, gs, sa, 0.05);
    adam_step<double>(scale, gp, pa, 1e-4);
  }
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(scale[0] * round_latent(surrogate[i]) - target[i]) <= std::abs(scale[0]));
  }
}

TEST_CASE("frequency tables") {
  const std::vector<std::int32_t> zeros = {0, 0, 0, 0};
  const auto t0 = build_frequency_table(zeros);
  CHECK(t0.min_symbol == 0);
  CHECK(t0.max_symbol() == 0);
  CHECK(t0.counts == std::vector<std::uint32_t>{5});
  const std::vector<std::int32_t> pm1 = {-1, 1};
  const auto t1 = build_frequency_table(pm1);
  CHECK(t1.min_symbol == -1);
  CHECK(t1.counts == std::vector<std::uint32_t>{2, 1, 2});
  CHECK(t1.total == 5);
  try {
    build_frequency_table(std::vector<std::int32_t>{});
    FAIL("expected EmptyTensor");
  } catch (const CodecError& e) {
    CHECK(e.code() == ErrorCode::kEmptyTensor);
  }
}

TEST_CASE("frequency table invariants on random tensors") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> len(1, 300), lo(-1000, 1000), span(0, 50);
    const int a = lo(rng), b = a + span(rng);
    std::uniform_int_distribution<int> sym(a, b);
    std::vector<std::int32_t> s(len(rng));
    for (auto& v : s) v = sym(rng);
    const auto t = build_frequency_table(s);
    std::uint64_t sum = 0;
    for (auto c : t.counts) {
      CHECK(c >= 1);
      sum += c;
    }
    CHECK(sum == t.total);
    CHECK(t.total == s.size() + t.counts.size());
    for (auto v : s) CHECK(t.contains(v));
    ByteWriter w;
    t.serialize(w);
    const auto bytes = w.take();
    ByteReader r(bytes);
    CHECK(FrequencyTable::deserialize(r) == t);
    CHECK(r.remaining() == 0);
  }
}
