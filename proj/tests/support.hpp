#pragma once

// Test-only oracles, kept independent from the code paths they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "hyfem/matching.hpp"
#include "hyfem/nn.hpp"

namespace hyfem::testing {

using nn::Activation;
using nn::Matrix;
using nn::Mlp;
using nn::Vector;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale);
}

// Random weights and biases (biases are nonzero, unlike make_mlp).
inline Mlp random_mlp(const std::vector<Eigen::Index>& widths, const std::vector<Activation>& acts,
                      std::mt19937_64& rng, double scale = 0.7) {
  Mlp m;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    m.layers.push_back(nn::Layer{random_matrix(widths[l + 1], widths[l], rng, scale),
                                 random_vector(widths[l + 1], rng, scale), acts[l]});
  return m;
}

inline Mlp random_head(Eigen::Index in, Eigen::Index hidden, Eigen::Index classes, std::mt19937_64& rng,
                       double scale = 0.7) {
  return random_mlp({in, hidden, classes}, {Activation::ReLU, Activation::Softmax}, rng, scale);
}

// Scalar loops only: matrix-vector product, activation, stable softmax.
inline std::vector<double> straight_line_forward(const Mlp& model, const std::vector<double>& input) {
  std::vector<double> a = input;
  for (const auto& layer : model.layers) {
    std::vector<double> z(static_cast<std::size_t>(layer.out_width()));
    for (Eigen::Index r = 0; r < layer.out_width(); ++r) {
      double s = layer.bias(r);
      for (Eigen::Index c = 0; c < layer.in_width(); ++c) s += layer.weights(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = s;
    }
    switch (layer.activation) {
      case Activation::Identity: break;
      case Activation::ReLU:
        for (auto& v : z) v = v > 0 ? v : 0.0;
        break;
      case Activation::Softmax: {
        double mx = z[0];
        for (auto v : z) mx = std::max(mx, v);
        double sum = 0;
        for (auto& v : z) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (auto& v : z) v /= sum;
        break;
      }
    }
    a = std::move(z);
  }
  return a;
}

inline double min_abs_preactivation(const Mlp& model, const Vector& input) {
  double out = std::numeric_limits<double>::infinity();
  const auto cache = nn::forward_cached(model, input);
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    if (model.layers[l].activation == Activation::ReLU) out = std::min(out, cache.pre[l].cwiseAbs().minCoeff());
  return out;
}

// Central finite differences of f over a flat parameter vector.
template <typename F>
Vector finite_difference_gradient(F&& f, Vector params, double h = 1e-5) {
  Vector g(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double orig = params(i);
    params(i) = orig + h;
    const double up = f(params);
    params(i) = orig - h;
    const double down = f(params);
    params(i) = orig;
    g(i) = (up - down) / (2 * h);
  }
  return g;
}

inline double max_relative_error(const Vector& analytic, const Vector& numeric, double floor = 1e-6) {
  double worst = 0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / denom);
  }
  return worst;
}

// Exhaustive minimum over all permutations, summed in row order.
inline double brute_force_assignment(const Matrix& cost, std::vector<Eigen::Index>* best_perm = nullptr) {
  const auto n = static_cast<std::size_t>(cost.rows());
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) total += cost(Eigen::Index(i), perm[i]);
    if (total < best) {
      best = total;
      if (best_perm) *best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return n == 0 ? 0.0 : best;
}

// Plain gradient descent on a differentiable objective until the gradient
// norm drops below tol.
template <typename Objective, typename Gradient>
Vector gradient_descent(Objective&&, Gradient&& grad, Vector x, double step, double tol = 1e-10,
                        int max_iter = 200000) {
  for (int it = 0; it < max_iter; ++it) {
    const Vector g = grad(x);
    if (g.norm() < tol) break;
    x -= step * g;
  }
  return x;
}

// One random (extractors, head, sample) instance with widths <= 8: maximum
// per-coordinate relative error between backprop and central differences.
// The default step balances roundoff (eps * loss / h) against truncation
// (h^2) for the loss magnitudes these random nets produce.
// Samples that sit within 1e-3 of a ReLU kink are redrawn, the derivative is
// not defined there.
inline double gradient_trial(std::mt19937_64& rng, double h = 1e-4) {
  std::uniform_int_distribution<int> width(1, 8);
  std::uniform_int_distribution<int> nblocks(1, 3);
  const int D = nblocks(rng);
  const Eigen::Index E = width(rng);
  const Eigen::Index H = width(rng);
  const Eigen::Index C = std::max(2, width(rng));
  std::vector<Mlp> extractors;
  std::vector<Vector> blocks;
  for (int d = 0; d < D; ++d) {
    const Eigen::Index in = width(rng);
    if (d % 2 == 0)
      extractors.push_back(random_mlp({in, E}, {Activation::ReLU}, rng));
    else
      extractors.push_back(random_mlp({in, width(rng), E}, {Activation::ReLU, Activation::Identity}, rng));
    blocks.push_back(random_vector(in, rng));
  }
  const Mlp head = random_head(E * D, H, C, rng);
  const Eigen::Index label = std::uniform_int_distribution<Eigen::Index>(0, C - 1)(rng);

  auto near_kink = [&] {
    double m = std::numeric_limits<double>::infinity();
    Vector z(E * D);
    for (int d = 0; d < D; ++d) {
      m = std::min(m, min_abs_preactivation(extractors[d], blocks[d]));
      z.segment(d * E, E) = nn::forward(extractors[d], blocks[d]);
    }
    return std::min(m, min_abs_preactivation(head, z)) < 1e-3;
  };
  for (int tries = 0; near_kink() && tries < 100; ++tries)
    for (int d = 0; d < D; ++d) blocks[d] = random_vector(blocks[d].size(), rng);

  const auto lg = nn::loss_and_grad<double>(extractors, head, blocks, label);
  Vector analytic(0);
  for (const auto& g : lg.extractors) {
    const Vector f = nn::flatten(g);
    analytic.conservativeResize(analytic.size() + f.size());
    analytic.tail(f.size()) = f;
  }
  {
    const Vector f = nn::flatten(lg.head);
    analytic.conservativeResize(analytic.size() + f.size());
    analytic.tail(f.size()) = f;
  }

  Vector params(analytic.size());
  Eigen::Index k = 0;
  for (const auto& e : extractors) {
    const Vector f = nn::flatten(e);
    params.segment(k, f.size()) = f;
    k += f.size();
  }
  params.segment(k, nn::parameter_count(head)) = nn::flatten(head);

  auto loss = [&](const Vector& p) {
    auto ex = extractors;
    auto hd = head;
    Eigen::Index off = 0;
    for (auto& e : ex) {
      const auto n = nn::parameter_count(e);
      nn::unflatten_into(e, Vector(p.segment(off, n)));
      off += n;
    }
    nn::unflatten_into(hd, Vector(p.segment(off, nn::parameter_count(hd))));
    const auto out = straight_line_forward(hd, [&] {
      std::vector<double> z;
      for (int d = 0; d < D; ++d) {
        std::vector<double> in(blocks[d].data(), blocks[d].data() + blocks[d].size());
        const auto e = straight_line_forward(ex[d], in);
        z.insert(z.end(), e.begin(), e.end());
      }
      return z;
    }());
    return -std::log(out[static_cast<std::size_t>(label)]);
  };
  const Vector numeric = finite_difference_gradient(loss, params, h);
  return max_relative_error(analytic, numeric);
}

// Minimises sum_k dist(Pi_k theta_0, w_k) by plain gradient descent over the
// raw head parameters, starting from prev. Written against the weight
// matrices directly, not the neuron-row helpers.
inline matching::GlobalHead least_squares_head(const std::vector<matching::MatchingPattern>& patterns,
                                               const std::vector<matching::EmbeddedHead>& heads,
                                               const matching::GlobalHead& prev, double tol = 1e-10) {
  const auto& L0 = prev.model.layers;
  const Eigen::Index H = L0[0].out_width(), In = L0[0].in_width(), C = L0[1].out_width();
  const Eigen::Index nW = H * In, nb = H, nV = C * H, nc = C;
  Vector x(nW + nb + nV + nc);
  x << L0[0].weights.reshaped(), L0[0].bias, L0[1].weights.reshaped(), L0[1].bias;
  auto W = [&](Vector& v, Eigen::Index j, Eigen::Index c) -> double& { return v(c * H + j); };
  auto b = [&](Vector& v, Eigen::Index j) -> double& { return v(nW + j); };
  auto V = [&](Vector& v, Eigen::Index y, Eigen::Index j) -> double& { return v(nW + nb + j * C + y); };
  auto cb = [&](Vector& v, Eigen::Index y) -> double& { return v(nW + nb + nV + y); };

  auto grad = [&](Vector v) {
    Vector g = Vector::Zero(v.size());
    for (std::size_t k = 0; k < heads.size(); ++k) {
      const auto& lk = heads[k].model.layers;
      for (Eigen::Index i = 0; i < lk[0].out_width(); ++i) {
        const Eigen::Index j = patterns[k].assignment[static_cast<std::size_t>(i)];
        for (Eigen::Index c = 0; c < In; ++c)
          W(g, j, c) += 2 * heads[k].column_mask(c) * (W(v, j, c) - lk[0].weights(i, c));
        b(g, j) += 2 * (b(v, j) - lk[0].bias(i));
        for (Eigen::Index y = 0; y < C; ++y) V(g, y, j) += 2 * (V(v, y, j) - lk[1].weights(y, i));
      }
      for (Eigen::Index y = 0; y < C; ++y) cb(g, y) += 2 * (cb(v, y) - lk[1].bias(y));
    }
    return g;
  };
  const double step = 0.25 / static_cast<double>(std::max<std::size_t>(heads.size(), 1));
  x = gradient_descent([](const Vector&) { return 0.0; }, grad, x, step, tol);

  matching::GlobalHead out = prev;
  auto& L = out.model.layers;
  L[0].weights = x.segment(0, nW).reshaped(H, In);
  L[0].bias = x.segment(nW, nb);
  L[1].weights = x.segment(nW + nb, nV).reshaped(C, H);
  L[1].bias = x.segment(nW + nb + nV, nc);
  return out;
}

}  // namespace hyfem::testing
