#include <cmath>

#include "doctest.h"
#include "odm/errors.hpp"
#include "odm/nn/graph.hpp"
#include "odm/nn/optim.hpp"
#include "odm/util/rng.hpp"

using namespace odm;

namespace {

// Scalar loss used for gradient checking: weighted sum of the node value,
// with fixed pseudo-random weights so every output element matters.
struct LossProbe {
  nn::Tensor weights;
  explicit LossProbe(const std::vector<int>& shape, std::uint64_t seed) : weights(shape) {
    auto gen = rng::make(seed);
    for (auto& w : weights.data) w = rng::uniformf(gen, -1.f, 1.f);
  }
  double loss(const nn::Tensor& v) const {
    double acc = 0;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
      acc += static_cast<double>(v.data[i]) * weights.data[i];
    }
    return acc;
  }
  nn::Tensor grad() const { return weights; }
};

nn::Tensor random_input(const std::vector<int>& shape, std::uint64_t seed, float lo = -1.f,
                        float hi = 1.f) {
  nn::Tensor t(shape);
  auto gen = rng::make(seed);
  for (auto& v : t.data) v = rng::uniformf(gen, lo, hi);
  return t;
}

// Compares analytic parameter + input gradients against central finite
// differences of the probe loss at the graph's first output.
void check_gradients(nn::Graph& g, const nn::Tensor& input, std::uint64_t seed,
                     double tol = 4e-2) {
  const int out_node = g.outputs().front();
  nn::Runner runner(g);
  runner.forward({input});
  LossProbe probe(runner.value(out_node).shape, seed);

  runner.zero_grads();
  runner.backward(out_node, probe.grad());

  const float eps = 5e-4f;
  auto numeric = [&](float* slot) {
    const float saved = *slot;
    *slot = saved + eps;
    nn::Runner r1(g);
    r1.forward({input});
    const double up = probe.loss(r1.value(out_node));
    *slot = saved - eps;
    nn::Runner r2(g);
    r2.forward({input});
    const double down = probe.loss(r2.value(out_node));
    *slot = saved;
    return (up - down) / (2.0 * eps);
  };

  for (std::size_t p = 0; p < g.params().size(); ++p) {
    auto& value = g.params()[p].value;
    const std::size_t stride = std::max<std::size_t>(1, value.data.size() / 9);
    for (std::size_t i = 0; i < value.data.size(); i += stride) {
      const double expect = numeric(&value.data[i]);
      const double got = runner.param_grads()[p].data[i];
      CAPTURE(g.params()[p].name);
      CAPTURE(i);
      CHECK(got == doctest::Approx(expect).epsilon(tol).scale(1.0));
    }
  }
  {
    nn::Tensor in_copy = input;
    const std::size_t stride = std::max<std::size_t>(1, in_copy.data.size() / 7);
    for (std::size_t i = 0; i < in_copy.data.size(); i += stride) {
      const float saved = in_copy.data[i];
      in_copy.data[i] = saved + eps;
      nn::Runner r1(g);
      r1.forward({in_copy});
      const double up = probe.loss(r1.value(out_node));
      in_copy.data[i] = saved - eps;
      nn::Runner r2(g);
      r2.forward({in_copy});
      const double down = probe.loss(r2.value(out_node));
      in_copy.data[i] = saved;
      const double expect = (up - down) / (2.0 * eps);
      const double got = runner.grad(g.input_nodes().front()).data[i];
      CAPTURE(i);
      CHECK(got == doctest::Approx(expect).epsilon(tol).scale(1.0));
    }
  }
}

}  // namespace

TEST_CASE("conv2d forward matches a hand-computed 1x1 case") {
  nn::Graph g;
  const int in = g.add_input({2, 2, 1});
  g.mark_output(g.conv2d(in, 1, 1, 1, 1, 1, nn::Pad::Same, nn::Act::None));
  g.params()[0].value.data = {2.f};   // weight
  g.params()[1].value.data = {0.5f};  // bias
  nn::Tensor x({1, 2, 2, 1});
  x.data = {1.f, 2.f, 3.f, 4.f};
  const auto out = nn::infer(g, {x});
  CHECK(out[0].data[0] == doctest::Approx(2.5f));
  CHECK(out[0].data[3] == doctest::Approx(8.5f));
}

TEST_CASE("conv2d gradients (same padding, fused relu)") {
  auto gen = rng::make(7);
  nn::Graph g;
  const int in = g.add_input({5, 5, 2});
  g.mark_output(g.conv2d(in, 3, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu));
  g.init_params(gen);
  check_gradients(g, random_input({2, 5, 5, 2}, 11), 21);
}

TEST_CASE("conv2d gradients (valid padding, stride 2)") {
  auto gen = rng::make(8);
  nn::Graph g;
  const int in = g.add_input({6, 6, 2});
  g.mark_output(g.conv2d(in, 2, 3, 3, 2, 2, nn::Pad::Valid, nn::Act::None));
  g.init_params(gen);
  check_gradients(g, random_input({2, 6, 6, 2}, 12), 22);
}

TEST_CASE("depthwise conv gradients with multiplier 2") {
  auto gen = rng::make(9);
  nn::Graph g;
  const int in = g.add_input({4, 4, 3});
  g.mark_output(g.depthwise_conv2d(in, 2, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu6));
  g.init_params(gen);
  check_gradients(g, random_input({2, 4, 4, 3}, 13, 0.f, 1.f), 23);
}

TEST_CASE("dense gradients with sigmoid") {
  auto gen = rng::make(10);
  nn::Graph g;
  const int in = g.add_input({6});
  g.mark_output(g.dense(in, 4, nn::Act::Sigmoid));
  g.init_params(gen);
  check_gradients(g, random_input({3, 6}, 14), 24);
}

TEST_CASE("pool gradients") {
  nn::Graph g;
  const int in = g.add_input({4, 4, 2});
  const int mx = g.max_pool(in, 2, 2, 2, 2, nn::Pad::Valid);
  const int av = g.avg_pool(in, 3, 3, 2, 2, nn::Pad::Same);
  g.mark_output(g.concat(mx, av));
  check_gradients(g, random_input({2, 4, 4, 2}, 15), 25);
}

TEST_CASE("unet-style graph gradients (concat + upsample + tanh)") {
  auto gen = rng::make(11);
  nn::Graph g;
  const int in = g.add_input({4, 4, 2});
  const int c1 = g.conv2d(in, 3, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu);
  const int p1 = g.max_pool(c1, 2, 2, 2, 2, nn::Pad::Valid);
  const int c2 = g.conv2d(p1, 4, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu);
  const int u1 = g.upsample2x(c2);
  const int cat = g.concat(u1, c1);
  const int c3 = g.conv2d(cat, 2, 3, 3, 1, 1, nn::Pad::Same, nn::Act::None);
  g.mark_output(g.activation(c3, nn::Act::Tanh));
  g.init_params(gen);
  check_gradients(g, random_input({2, 4, 4, 2}, 16), 26);
}

TEST_CASE("residual add and reshape gradients") {
  auto gen = rng::make(12);
  nn::Graph g;
  const int in = g.add_input({3, 3, 2});
  const int c1 = g.conv2d(in, 2, 3, 3, 1, 1, nn::Pad::Same, nn::Act::Relu);
  const int sum = g.add(in, c1, nn::Act::Relu);
  const int flat = g.reshape(sum, {18});
  g.mark_output(g.dense(flat, 3, nn::Act::None));
  g.init_params(gen);
  check_gradients(g, random_input({2, 3, 3, 2}, 17), 27);
}

TEST_CASE("softmax node gradients") {
  auto gen = rng::make(13);
  nn::Graph g;
  const int in = g.add_input({5});
  const int d = g.dense(in, 4, nn::Act::None);
  g.mark_output(g.softmax(d));
  g.init_params(gen);
  check_gradients(g, random_input({3, 5}, 18), 28);
}

TEST_CASE("softmax cross-entropy loss and gradient") {
  nn::Tensor logits({2, 3});
  logits.data = {1.f, 2.f, 0.5f, -1.f, 0.f, 1.f};
  nn::Tensor d;
  const float loss = nn::softmax_cross_entropy(logits, {1, 2}, &d);

  auto row_loss = [&](int r, int y) {
    double denom = 0;
    for (int i = 0; i < 3; ++i) denom += std::exp(static_cast<double>(logits.data[r * 3 + i]));
    return -std::log(std::exp(static_cast<double>(logits.data[r * 3 + y])) / denom);
  };
  CHECK(loss == doctest::Approx((row_loss(0, 1) + row_loss(1, 2)) / 2.0).epsilon(1e-5));

  const float eps = 1e-3f;
  logits.data[0] += eps;
  const float up = nn::softmax_cross_entropy(logits, {1, 2}, nullptr);
  logits.data[0] -= 2 * eps;
  const float down = nn::softmax_cross_entropy(logits, {1, 2}, nullptr);
  CHECK(d.data[0] == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-2));
}

TEST_CASE("sigmoid bce matches finite differences and stays finite at extremes") {
  nn::Tensor logits({1, 4});
  logits.data = {30.f, -30.f, 0.5f, -0.25f};
  nn::Tensor targets({1, 4});
  targets.data = {1.f, 0.f, 0.f, 1.f};
  nn::Tensor d;
  const float loss = nn::sigmoid_bce(logits, targets, &d);
  CHECK(std::isfinite(loss));
  const float eps = 1e-3f;
  for (std::size_t i = 2; i < 4; ++i) {
    logits.data[i] += eps;
    const float up = nn::sigmoid_bce(logits, targets, nullptr);
    logits.data[i] -= 2 * eps;
    const float down = nn::sigmoid_bce(logits, targets, nullptr);
    logits.data[i] += eps;
    CHECK(d.data[i] == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-2));
  }
}

TEST_CASE("adam first step follows the sign of the gradient") {
  std::vector<nn::Param> params{{"w", nn::Tensor({2})}};
  params[0].value.data = {1.f, -2.f};
  std::vector<nn::Tensor> grads{nn::Tensor({2})};
  grads[0].data = {0.5f, -1.5f};

  nn::Adam opt({0.1f, 0.9f, 0.999f, 1e-8f});
  opt.step(params, grads);

  // t=1: mhat=g, vhat=g^2, so the update is lr * sign(g)
  CHECK(params[0].value.data[0] == doctest::Approx(1.f - 0.1f).epsilon(1e-4));
  CHECK(params[0].value.data[1] == doctest::Approx(-2.f + 0.1f).epsilon(1e-4));
}

TEST_CASE("a small classifier fits two gaussian blobs") {
  auto gen = rng::make(99);
  const int n = 64;
  nn::Tensor x({n, 8});
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    for (int j = 0; j < 8; ++j) {
      x.data[static_cast<std::size_t>(i) * 8 + j] =
          rng::normalf(gen) * 0.3f + (i % 2 ? 1.5f : -1.5f);
    }
  }
  nn::Graph g;
  const int in = g.add_input({8});
  const int h = g.dense(in, 8, nn::Act::Relu);
  g.mark_output(g.dense(h, 2, nn::Act::None));
  g.init_params(gen);

  nn::Runner runner(g);
  nn::Adam opt({5e-2f});
  float last_loss = 0.f;
  for (int step = 0; step < 60; ++step) {
    runner.zero_grads();
    runner.forward({x});
    nn::Tensor d;
    last_loss = nn::softmax_cross_entropy(runner.value(g.outputs()[0]), y, &d);
    runner.backward(g.outputs()[0], d);
    opt.step(g.params(), runner.param_grads());
  }
  CHECK(last_loss < 0.05f);
}

TEST_CASE("runner rejects wrong input shapes") {
  nn::Graph g;
  const int in = g.add_input({4, 4, 1});
  g.mark_output(g.conv2d(in, 1, 3, 3, 1, 1, nn::Pad::Same, nn::Act::None));
  nn::Runner r(g);
  CHECK_THROWS_AS(r.forward({nn::Tensor({1, 4, 5, 1})}), ShapeMismatch);
}

TEST_CASE("clamp mask marks clipped pixels") {
  nn::Tensor t({4});
  t.data = {-0.5f, 0.2f, 0.9f, 1.7f};
  nn::Tensor mask;
  const auto c = nn::clamp01_with_mask(t, &mask);
  CHECK(c.data == std::vector<float>{0.f, 0.2f, 0.9f, 1.f});
  CHECK(mask.data == std::vector<float>{0.f, 1.f, 1.f, 0.f});
}
