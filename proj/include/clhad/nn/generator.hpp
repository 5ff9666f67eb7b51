#pragma once

#include <vector>

#include "clhad/error.hpp"
#include "clhad/nn/layers.hpp"

namespace clhad {

// Fully connected encoder-decoder, decoder mirroring the encoder exactly.
// Hidden layers use the leaky rectifier, the output a logistic squash so
// reconstructions live in (0,1) like the normalized inputs.
struct GeneratorConfig {
  Index input_dim = 0;                // 2C
  std::vector<Index> hidden;          // default {C, C/2}
  Index latent = 0;                   // default ceil(2C/8), must be < 2C
  double leak = 0.2;

  static GeneratorConfig defaults(Index input_dim) {
    GeneratorConfig cfg;
    cfg.input_dim = input_dim;
    cfg.hidden = {input_dim / 2, input_dim / 4};
    cfg.latent = (input_dim + 7) / 8;
    return cfg;
  }

  void validate() const {
    if (input_dim < 2) throw ArgumentError("generator: input_dim must be >= 2");
    if (latent < 1 || latent >= input_dim)
      throw ArgumentError("generator: latent dim must satisfy 1 <= L < input_dim");
    for (Index h : hidden)
      if (h < 1) throw ArgumentError("generator: hidden dims must be >= 1");
  }
};

template <typename Scalar>
struct GeneratorCache {
  std::vector<MatrixX<Scalar>> inputs;   // input to each layer
  std::vector<MatrixX<Scalar>> preacts;  // z before activation
  std::vector<MatrixX<Scalar>> outputs;  // activation outputs
};

template <typename Scalar>
class Generator {
 public:
  Generator() = default;

  Generator(const GeneratorConfig& cfg, Index& cursor) : cfg_(cfg) {
    cfg_.validate();
    param_begin_ = cursor;
    std::vector<Index> dims;
    dims.push_back(cfg.input_dim);
    for (Index h : cfg.hidden) dims.push_back(h);
    dims.push_back(cfg.latent);
    for (auto it = cfg.hidden.rbegin(); it != cfg.hidden.rend(); ++it) dims.push_back(*it);
    dims.push_back(cfg.input_dim);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      layers_.push_back(Dense<Scalar>::allocate(dims[l], dims[l + 1], cursor));
    param_count_ = cursor - param_begin_;
  }

  void init(ParamStore<Scalar>& ps, Rng& rng) const {
    for (const auto& layer : layers_) layer.init(ps, rng);
  }

  MatrixX<Scalar> forward(const ParamStore<Scalar>& ps, const MatrixX<Scalar>& batch,
                          GeneratorCache<Scalar>* cache = nullptr) const {
    if (batch.cols() != cfg_.input_dim)
      throw ShapeError("generator: batch has " + std::to_string(batch.cols()) +
                       " columns, expected " + std::to_string(cfg_.input_dim));
    if (cache) {
      cache->inputs.clear();
      cache->preacts.clear();
      cache->outputs.clear();
    }
    MatrixX<Scalar> x = batch;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      MatrixX<Scalar> z = layers_[l].forward(ps, x);
      MatrixX<Scalar> y = z;
      apply_activation(y, act(l), static_cast<Scalar>(cfg_.leak));
      if (cache) {
        cache->inputs.push_back(std::move(x));
        cache->preacts.push_back(std::move(z));
        cache->outputs.push_back(y);
      }
      x = std::move(y);
    }
    return x;
  }

  // Accumulates parameter gradients; the input gradient is discarded
  // (nothing upstream of the generator is trainable).
  void backward(ParamStore<Scalar>& ps, const GeneratorCache<Scalar>& cache,
                const MatrixX<Scalar>& d_output) const {
    MatrixX<Scalar> dy = d_output;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const MatrixX<Scalar> dz =
          dy.cwiseProduct(activation_grad(cache.preacts[l], cache.outputs[l], act(l),
                                          static_cast<Scalar>(cfg_.leak)));
      dy = layers_[l].backward(ps, cache.inputs[l], dz);
    }
  }

  const GeneratorConfig& config() const { return cfg_; }
  Index param_begin() const { return param_begin_; }
  Index param_count() const { return param_count_; }

 private:
  Activation act(std::size_t layer) const {
    return layer + 1 == layers_.size() ? Activation::Sigmoid : Activation::Leaky;
  }

  GeneratorConfig cfg_;
  std::vector<Dense<Scalar>> layers_;
  Index param_begin_ = 0;
  Index param_count_ = 0;
};

}  // namespace clhad
