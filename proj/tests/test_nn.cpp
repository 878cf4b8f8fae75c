#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "hyfem/nn.hpp"
#include "support.hpp"

using namespace hyfem;
using namespace hyfem::nn;
using hyfem::testing::random_head;
using hyfem::testing::random_mlp;
using hyfem::testing::random_vector;

TEST_CASE("identity layer passes input through") {
  Mlp m;
  m.layers.push_back(Layer{Matrix::Identity(2, 2), Vector::Zero(2), Activation::Identity});
  const Vector out = forward(m, Vector{{1.0, 2.0}});
  CHECK(out(0) == 1.0);
  CHECK(out(1) == 2.0);
}

TEST_CASE("relu layer splits sign") {
  Mlp m;
  m.layers.push_back(Layer{Matrix{{1.0}, {-1.0}}, Vector::Zero(2), Activation::ReLU});
  const Vector out = forward(m, Vector{{3.0}});
  CHECK(out(0) == 3.0);
  CHECK(out(1) == 0.0);
}

TEST_CASE("forward agrees with a straight-line evaluator") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Mlp m = random_mlp({5, 7, 4}, {Activation::ReLU, Activation::Softmax}, rng);
    const Vector x = random_vector(5, rng, 2.0);
    const Vector got = forward(m, x);
    const auto want = hyfem::testing::straight_line_forward(m, {x.data(), x.data() + x.size()});
    for (Eigen::Index i = 0; i < got.size(); ++i) CHECK(std::abs(got(i) - want[static_cast<std::size_t>(i)]) <= 1e-12);
  }
}

TEST_CASE("forward is deterministic and rejects wrong widths") {
  std::mt19937_64 rng(3);
  const Mlp m = random_mlp({3, 4, 2}, {Activation::ReLU, Activation::Identity}, rng);
  const Vector x = random_vector(3, rng);
  const Vector a = forward(m, x);
  const Vector b = forward(m, x);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  CHECK_THROWS_AS(forward(m, Vector(Vector::Zero(4))), StructuralError);
}

TEST_CASE("softmax normalises for inputs up to magnitude 50") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector z(1 + trial % 9);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = u(rng);
    const Vector p = softmax<double>(z);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
    CHECK(p.minCoeff() >= 0.0);
  }
}

TEST_CASE("validate catches inconsistent layers") {
  Mlp m;
  m.layers.push_back(Layer{Matrix::Zero(3, 2), Vector::Zero(3), Activation::ReLU});
  m.layers.push_back(Layer{Matrix::Zero(2, 4), Vector::Zero(2), Activation::Softmax});
  CHECK_THROWS_AS(m.validate(), StructuralError);
  m.layers[1].weights = Matrix::Zero(2, 3);
  CHECK_NOTHROW(m.validate());
  m.layers[0].bias = Vector::Zero(2);
  CHECK_THROWS_AS(m.validate(), StructuralError);
}

TEST_CASE("make_layer draws within the fan-based bound") {
  std::mt19937_64 rng(5);
  const auto layer = make_layer<double>(6, 10, Activation::ReLU, rng);
  const double limit = std::sqrt(6.0 / 16.0);
  CHECK(layer.weights.cwiseAbs().maxCoeff() <= limit);
  CHECK(layer.bias.isZero());
}

TEST_CASE("uniform prediction gives ln(C) loss") {
  for (Eigen::Index C : {2, 5, 10}) {
    Mlp head;
    head.layers.push_back(Layer{Matrix::Zero(3, 2), Vector::Zero(3), Activation::ReLU});
    head.layers.push_back(Layer{Matrix::Zero(C, 3), Vector::Zero(C), Activation::Softmax});
    Mlp ext;
    ext.layers.push_back(Layer{Matrix::Ones(2, 2), Vector::Zero(2), Activation::ReLU});
    const std::vector<Mlp> extractors{ext};
    const std::vector<Vector> blocks{Vector{{0.3, -0.7}}};
    for (Eigen::Index label = 0; label < C; ++label) {
      const auto lg = loss_and_grad<double>(extractors, head, blocks, label);
      CHECK(lg.loss == doctest::Approx(std::log(double(C))).epsilon(1e-14));
    }
  }
}

TEST_CASE("label outside class range is an input error") {
  std::mt19937_64 rng(1);
  const std::vector<Mlp> extractors{random_mlp({2, 2}, {Activation::ReLU}, rng)};
  const Mlp head = random_head(2, 3, 4, rng);
  const std::vector<Vector> blocks{random_vector(2, rng)};
  CHECK_THROWS_AS(loss_and_grad<double>(extractors, head, blocks, 4), InputError);
  CHECK_THROWS_AS(loss_and_grad<double>(extractors, head, blocks, -1), InputError);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) CHECK(hyfem::testing::gradient_trial(rng) <= 1e-4);
}

TEST_CASE("backward through a softmax output matches the direct cross-entropy delta") {
  std::mt19937_64 rng(9);
  const Mlp head = random_head(4, 5, 3, rng);
  const Vector z = random_vector(4, rng);
  const auto cache = forward_cached(head, z);
  const Eigen::Index label = 1;
  Vector g = Vector::Zero(3);
  g(label) = -1.0 / cache.output(label);
  auto via_jacobian = Gradients::zeros_like(head);
  backward(head, cache, g, via_jacobian);
  Vector delta = cache.output;
  delta(label) -= 1.0;
  auto direct = Gradients::zeros_like(head);
  backward_from_preactivation(head, cache, delta, direct);
  CHECK((flatten(via_jacobian) - flatten(direct)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("sgd step arithmetic") {
  Mlp m;
  m.layers.push_back(Layer{Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 1.0), Activation::Identity});
  auto g = Gradients::zeros_like(m);
  g.weights[0](0, 0) = 2.0;
  g.bias[0](0) = 2.0;
  const Mlp stepped = sgd_step(m, g, 0.5);
  CHECK(stepped.layers[0].weights(0, 0) == 0.0);
  CHECK(stepped.layers[0].bias(0) == 0.0);

  const Mlp unchanged = sgd_step(m, Gradients::zeros_like(m), 0.5);
  CHECK(unchanged.layers[0].weights(0, 0) == 1.0);
  CHECK(unchanged.layers[0].bias(0) == 1.0);
}

TEST_CASE("lr = 0 leaves parameters bit-identical") {
  std::mt19937_64 rng(4);
  const Mlp m = random_head(3, 4, 2, rng);
  auto g = Gradients::zeros_like(m);
  for (auto& w : g.weights) w = hyfem::testing::random_matrix(w.rows(), w.cols(), rng);
  const Mlp after = sgd_step(m, g, 0.0);
  const Vector a = flatten(m), b = flatten(after);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("two sequential steps equal one step with the summed gradient") {
  std::mt19937_64 rng(6);
  const Mlp m = random_head(3, 4, 2, rng);
  auto g1 = Gradients::zeros_like(m), g2 = Gradients::zeros_like(m);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    g1.weights[l] = hyfem::testing::random_matrix(g1.weights[l].rows(), g1.weights[l].cols(), rng);
    g2.weights[l] = hyfem::testing::random_matrix(g2.weights[l].rows(), g2.weights[l].cols(), rng);
    g1.bias[l] = random_vector(g1.bias[l].size(), rng);
    g2.bias[l] = random_vector(g2.bias[l].size(), rng);
  }
  const double lr = 0.1;
  const Mlp two = sgd_step(sgd_step(m, g1, lr), g2, lr);
  auto sum = g1;
  sum += g2;
  const Mlp one = sgd_step(m, sum, lr);
  CHECK((flatten(two) - flatten(one)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("sgd rejects incongruent gradients and negative rates") {
  std::mt19937_64 rng(8);
  Mlp m = random_head(3, 4, 2, rng);
  const Mlp other = random_head(3, 5, 2, rng);
  CHECK_THROWS_AS(apply_sgd(m, Gradients::zeros_like(other), 0.1), StructuralError);
  CHECK_THROWS_AS(apply_sgd(m, Gradients::zeros_like(m), -0.1), InputError);
}

TEST_CASE("non-finite updates are reported") {
  std::mt19937_64 rng(8);
  Mlp m = random_head(2, 2, 2, rng);
  auto g = Gradients::zeros_like(m);
  g.weights[0](0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(apply_sgd(m, g, 0.1), NumericalError);
}

TEST_CASE("flatten and unflatten are inverse") {
  std::mt19937_64 rng(10);
  const Mlp m = random_head(3, 4, 5, rng);
  Mlp copy = random_head(3, 4, 5, rng);
  unflatten_into(copy, flatten(m));
  CHECK(squared_distance(m, copy) == 0.0);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(Vector{{0.2, 0.5, 0.5}}) == 1);
  CHECK(argmax(Vector{{1.0, 1.0}}) == 0);
}
