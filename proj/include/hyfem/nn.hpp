#pragma once

// Dense feed-forward networks with exact backpropagation.
//
// Everything here is templated on the scalar type and header-only; the rest
// of the library uses the double instantiation through the aliases at the
// bottom of the file.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyfem/errors.hpp"

namespace hyfem::nn {

enum class Activation { Identity, ReLU, Softmax };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> bias;     // out
  Activation activation = Activation::Identity;

  Eigen::Index in_width() const { return weights.cols(); }
  Eigen::Index out_width() const { return weights.rows(); }
  bool all_finite() const { return weights.allFinite() && bias.allFinite(); }
};

template <typename Scalar>
struct BasicMlp {
  std::vector<DenseLayer<Scalar>> layers;

  Eigen::Index input_width() const { return layers.empty() ? 0 : layers.front().in_width(); }
  Eigen::Index output_width() const { return layers.empty() ? 0 : layers.back().out_width(); }

  // Throws StructuralError when bias sizes or consecutive widths disagree,
  // or when a softmax appears anywhere but the last layer.
  void validate() const {
    if (layers.empty()) throw StructuralError("mlp has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      if (layer.bias.size() != layer.out_width())
        throw StructuralError("layer " + std::to_string(l) + ": bias size does not match output width");
      if (l > 0 && layers[l - 1].out_width() != layer.in_width())
        throw StructuralError("layer " + std::to_string(l) + ": input width does not match previous layer");
      if (layer.activation == Activation::Softmax && l + 1 != layers.size())
        throw StructuralError("softmax is only supported on the output layer");
    }
  }

  bool all_finite() const {
    for (const auto& layer : layers)
      if (!layer.all_finite()) return false;
    return true;
  }
};

// Parameter-shaped container for gradients.
template <typename Scalar>
struct BasicGradients {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> bias;

  static BasicGradients zeros_like(const BasicMlp<Scalar>& model) {
    BasicGradients g;
    g.weights.reserve(model.layers.size());
    g.bias.reserve(model.layers.size());
    for (const auto& layer : model.layers) {
      g.weights.push_back(MatrixX<Scalar>::Zero(layer.weights.rows(), layer.weights.cols()));
      g.bias.push_back(VectorX<Scalar>::Zero(layer.bias.size()));
    }
    return g;
  }

  bool congruent_with(const BasicMlp<Scalar>& model) const {
    if (weights.size() != model.layers.size() || bias.size() != model.layers.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      const auto& layer = model.layers[l];
      if (weights[l].rows() != layer.weights.rows() || weights[l].cols() != layer.weights.cols() ||
          bias[l].size() != layer.bias.size())
        return false;
    }
    return true;
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : bias)
      if (!b.allFinite()) return false;
    return true;
  }

  BasicGradients& operator+=(const BasicGradients& other) {
    if (other.weights.size() != weights.size()) throw StructuralError("gradient bundles differ in depth");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      bias[l] += other.bias[l];
    }
    return *this;
  }

  BasicGradients& operator*=(Scalar s) {
    for (auto& w : weights) w *= s;
    for (auto& b : bias) b *= s;
    return *this;
  }
};

// ---------------------------------------------------------------------------
// Construction

// Weights uniform in [-sqrt(6/(in+out)), +sqrt(6/(in+out))], zero bias.
template <typename Scalar, typename URBG>
DenseLayer<Scalar> make_layer(Eigen::Index in, Eigen::Index out, Activation act, URBG& rng) {
  if (in < 1 || out < 1) throw StructuralError("layer widths must be >= 1");
  const Scalar limit = std::sqrt(Scalar(6) / Scalar(in + out));
  std::uniform_real_distribution<Scalar> dist(-limit, limit);
  DenseLayer<Scalar> layer;
  layer.weights.resize(out, in);
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
  layer.bias = VectorX<Scalar>::Zero(out);
  layer.activation = act;
  return layer;
}

// widths = {in, hidden..., out}; hidden layers use `hidden`, the last layer `output`.
template <typename Scalar, typename URBG>
BasicMlp<Scalar> make_mlp(std::span<const Eigen::Index> widths, Activation hidden, Activation output, URBG& rng) {
  if (widths.size() < 2) throw StructuralError("an mlp needs at least input and output widths");
  BasicMlp<Scalar> model;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const bool last = l + 2 == widths.size();
    model.layers.push_back(make_layer<Scalar>(widths[l], widths[l + 1], last ? output : hidden, rng));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Forward

template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& z) {
  const Scalar shift = z.maxCoeff();
  VectorX<Scalar> e = (z.array() - shift).exp().matrix();
  return e / e.sum();
}

template <typename Scalar>
VectorX<Scalar> activate(Activation act, const VectorX<Scalar>& pre) {
  switch (act) {
    case Activation::Identity: return pre;
    case Activation::ReLU: return pre.cwiseMax(Scalar(0));
    case Activation::Softmax: return softmax<Scalar>(pre);
  }
  return pre;
}

template <typename Scalar>
struct ForwardCache {
  std::vector<VectorX<Scalar>> inputs;  // input seen by each layer
  std::vector<VectorX<Scalar>> pre;     // pre-activation of each layer
  VectorX<Scalar> output;
};

template <typename Scalar>
ForwardCache<Scalar> forward_cached(const BasicMlp<Scalar>& model, const VectorX<Scalar>& input) {
  if (model.layers.empty()) throw StructuralError("mlp has no layers");
  if (input.size() != model.input_width())
    throw StructuralError("input width " + std::to_string(input.size()) + " does not match model input width " +
                          std::to_string(model.input_width()));
  ForwardCache<Scalar> cache;
  cache.inputs.reserve(model.layers.size());
  cache.pre.reserve(model.layers.size());
  VectorX<Scalar> a = input;
  for (const auto& layer : model.layers) {
    if (layer.in_width() != a.size()) throw StructuralError("consecutive layer widths do not match");
    cache.inputs.push_back(a);
    VectorX<Scalar> z = layer.weights * a + layer.bias;
    a = activate<Scalar>(layer.activation, z);
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(a);
  return cache;
}

template <typename Scalar>
VectorX<Scalar> forward(const BasicMlp<Scalar>& model, const VectorX<Scalar>& input) {
  return forward_cached(model, input).output;
}

// ---------------------------------------------------------------------------
// Backward

// Accumulates dL/dparams into `grads` given dL/d(pre-activation of the last
// layer) and returns dL/d(input).
template <typename Scalar>
VectorX<Scalar> backward_from_preactivation(const BasicMlp<Scalar>& model, const ForwardCache<Scalar>& cache,
                                            VectorX<Scalar> delta, BasicGradients<Scalar>& grads) {
  if (!grads.congruent_with(model)) throw StructuralError("gradient bundle is not congruent with the model");
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    const auto& layer = model.layers[i];
    grads.weights[i].noalias() += delta * cache.inputs[i].transpose();
    grads.bias[i] += delta;
    VectorX<Scalar> upstream = layer.weights.transpose() * delta;
    if (i == 0) return upstream;
    const auto& prev = model.layers[i - 1];
    switch (prev.activation) {
      case Activation::Identity: delta = std::move(upstream); break;
      case Activation::ReLU:
        delta = (cache.pre[i - 1].array() > Scalar(0)).select(upstream, Scalar(0));
        break;
      case Activation::Softmax: throw StructuralError("softmax is only supported on the output layer");
    }
  }
  return {};
}

// Same as above but starts from dL/d(output activation).
template <typename Scalar>
VectorX<Scalar> backward(const BasicMlp<Scalar>& model, const ForwardCache<Scalar>& cache,
                         const VectorX<Scalar>& grad_output, BasicGradients<Scalar>& grads) {
  const auto& last = model.layers.back();
  VectorX<Scalar> delta;
  switch (last.activation) {
    case Activation::Identity: delta = grad_output; break;
    case Activation::ReLU: delta = (cache.pre.back().array() > Scalar(0)).select(grad_output, Scalar(0)); break;
    case Activation::Softmax: {
      const auto& p = cache.output;
      delta = (p.array() * (grad_output.array() - p.dot(grad_output))).matrix();
      break;
    }
  }
  return backward_from_preactivation(model, cache, std::move(delta), grads);
}

// ---------------------------------------------------------------------------
// Updates and parameter-space helpers

// p <- p - lr * g for every parameter. lr = 0 leaves the model bit-identical.
template <typename Scalar>
void apply_sgd(BasicMlp<Scalar>& model, const BasicGradients<Scalar>& grads, Scalar lr) {
  if (!(lr >= Scalar(0))) throw InputError("learning rate must be non-negative");
  if (!grads.congruent_with(model)) throw StructuralError("gradient bundle is not congruent with the model");
  if (lr == Scalar(0)) return;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    model.layers[l].weights -= lr * grads.weights[l];
    model.layers[l].bias -= lr * grads.bias[l];
  }
  if (!model.all_finite()) throw NumericalError("sgd step produced non-finite parameters");
}

template <typename Scalar>
BasicMlp<Scalar> sgd_step(BasicMlp<Scalar> model, const BasicGradients<Scalar>& grads, Scalar lr) {
  apply_sgd(model, grads, lr);
  return model;
}

template <typename Scalar>
bool same_shape(const BasicMlp<Scalar>& a, const BasicMlp<Scalar>& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].weights.rows() != b.layers[l].weights.rows() ||
        a.layers[l].weights.cols() != b.layers[l].weights.cols())
      return false;
  return true;
}

// Sum of squared parameter differences.
template <typename Scalar>
Scalar squared_distance(const BasicMlp<Scalar>& a, const BasicMlp<Scalar>& b) {
  if (!same_shape(a, b)) throw StructuralError("squared_distance: models differ in shape");
  Scalar total = 0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    total += (a.layers[l].weights - b.layers[l].weights).squaredNorm();
    total += (a.layers[l].bias - b.layers[l].bias).squaredNorm();
  }
  return total;
}

// grads += scale * (a - b), i.e. the gradient of (scale/2)*||a - b||^2 w.r.t. a.
template <typename Scalar>
void add_difference(BasicGradients<Scalar>& grads, const BasicMlp<Scalar>& a, const BasicMlp<Scalar>& b,
                    Scalar scale) {
  if (!same_shape(a, b) || !grads.congruent_with(a)) throw StructuralError("add_difference: shape mismatch");
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    grads.weights[l] += scale * (a.layers[l].weights - b.layers[l].weights);
    grads.bias[l] += scale * (a.layers[l].bias - b.layers[l].bias);
  }
}

template <typename Scalar>
Eigen::Index parameter_count(const BasicMlp<Scalar>& model) {
  Eigen::Index n = 0;
  for (const auto& layer : model.layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

// Layer by layer: column-major weights, then bias.
template <typename Scalar>
VectorX<Scalar> flatten(const BasicMlp<Scalar>& model) {
  VectorX<Scalar> out(parameter_count(model));
  Eigen::Index k = 0;
  for (const auto& layer : model.layers) {
    out.segment(k, layer.weights.size()) = layer.weights.reshaped();
    k += layer.weights.size();
    out.segment(k, layer.bias.size()) = layer.bias;
    k += layer.bias.size();
  }
  return out;
}

template <typename Scalar>
VectorX<Scalar> flatten(const BasicGradients<Scalar>& grads) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) n += grads.weights[l].size() + grads.bias[l].size();
  VectorX<Scalar> out(n);
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    out.segment(k, grads.weights[l].size()) = grads.weights[l].reshaped();
    k += grads.weights[l].size();
    out.segment(k, grads.bias[l].size()) = grads.bias[l];
    k += grads.bias[l].size();
  }
  return out;
}

template <typename Scalar>
void unflatten_into(BasicMlp<Scalar>& model, const VectorX<Scalar>& params) {
  if (params.size() != parameter_count(model)) throw StructuralError("unflatten: parameter count mismatch");
  Eigen::Index k = 0;
  for (auto& layer : model.layers) {
    layer.weights.reshaped() = params.segment(k, layer.weights.size());
    k += layer.weights.size();
    layer.bias = params.segment(k, layer.bias.size());
    k += layer.bias.size();
  }
}

// Lowest index wins ties.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

// ---------------------------------------------------------------------------
// Extractors + head

template <typename Scalar>
struct LossAndGrad {
  Scalar loss = 0;
  std::vector<BasicGradients<Scalar>> extractors;
  BasicGradients<Scalar> head;
};

template <typename Scalar>
VectorX<Scalar> embed(std::span<const BasicMlp<Scalar>> extractors, std::span<const VectorX<Scalar>> blocks) {
  if (extractors.size() != blocks.size())
    throw StructuralError("number of blocks does not match number of extractors");
  Eigen::Index width = 0;
  for (const auto& e : extractors) width += e.output_width();
  VectorX<Scalar> z(width);
  Eigen::Index offset = 0;
  for (std::size_t b = 0; b < extractors.size(); ++b) {
    VectorX<Scalar> out = forward(extractors[b], blocks[b]);
    z.segment(offset, out.size()) = out;
    offset += out.size();
  }
  return z;
}

template <typename Scalar>
VectorX<Scalar> predict(std::span<const BasicMlp<Scalar>> extractors, const BasicMlp<Scalar>& head,
                        std::span<const VectorX<Scalar>> blocks) {
  return forward(head, embed(extractors, blocks));
}

// Cross-entropy of the softmax head and the exact gradient with respect to
// every extractor and head parameter. `blocks[i]` feeds `extractors[i]`;
// embeddings are concatenated in that order in front of the head.
// The gradients are accumulated into `out` scaled by `weight`; the weighted
// loss is added to out.loss.
template <typename Scalar>
void accumulate_loss_and_grad(std::span<const BasicMlp<Scalar>> extractors, const BasicMlp<Scalar>& head,
                              std::span<const VectorX<Scalar>> blocks, Eigen::Index label, Scalar weight,
                              LossAndGrad<Scalar>& out) {
  if (head.layers.empty() || head.layers.back().activation != Activation::Softmax)
    throw StructuralError("head must end in a softmax layer");
  if (label < 0 || label >= head.output_width())
    throw InputError("label " + std::to_string(label) + " outside [0, " + std::to_string(head.output_width()) + ")");
  if (extractors.size() != blocks.size())
    throw StructuralError("number of blocks does not match number of extractors");
  if (out.extractors.size() != extractors.size() || !out.head.congruent_with(head))
    throw StructuralError("gradient accumulator does not match the model");

  std::vector<ForwardCache<Scalar>> caches;
  caches.reserve(extractors.size());
  Eigen::Index width = 0;
  for (std::size_t b = 0; b < extractors.size(); ++b) {
    caches.push_back(forward_cached(extractors[b], blocks[b]));
    width += caches.back().output.size();
  }
  VectorX<Scalar> z(width);
  Eigen::Index offset = 0;
  for (const auto& c : caches) {
    z.segment(offset, c.output.size()) = c.output;
    offset += c.output.size();
  }

  const auto head_cache = forward_cached(head, z);
  const auto& logits = head_cache.pre.back();
  const Scalar shift = logits.maxCoeff();
  const Scalar log_norm = std::log((logits.array() - shift).exp().sum()) + shift;
  out.loss += weight * (log_norm - logits(label));

  VectorX<Scalar> delta = weight * head_cache.output;
  delta(label) -= weight;
  const VectorX<Scalar> dz = backward_from_preactivation(head, head_cache, std::move(delta), out.head);

  offset = 0;
  for (std::size_t b = 0; b < extractors.size(); ++b) {
    const Eigen::Index w = caches[b].output.size();
    backward(extractors[b], caches[b], VectorX<Scalar>(dz.segment(offset, w)), out.extractors[b]);
    offset += w;
  }
}

template <typename Scalar>
LossAndGrad<Scalar> zero_loss_and_grad(std::span<const BasicMlp<Scalar>> extractors, const BasicMlp<Scalar>& head) {
  LossAndGrad<Scalar> out;
  out.extractors.reserve(extractors.size());
  for (const auto& e : extractors) out.extractors.push_back(BasicGradients<Scalar>::zeros_like(e));
  out.head = BasicGradients<Scalar>::zeros_like(head);
  return out;
}

template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(std::span<const BasicMlp<Scalar>> extractors, const BasicMlp<Scalar>& head,
                                  std::span<const VectorX<Scalar>> blocks, Eigen::Index label) {
  auto out = zero_loss_and_grad(extractors, head);
  accumulate_loss_and_grad(extractors, head, blocks, label, Scalar(1), out);
  return out;
}

template <typename Scalar>
Scalar cross_entropy(const VectorX<Scalar>& probabilities, Eigen::Index label) {
  return -std::log(probabilities(label));
}

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Layer = DenseLayer<double>;
using Mlp = BasicMlp<double>;
using Gradients = BasicGradients<double>;

}  // namespace hyfem::nn
