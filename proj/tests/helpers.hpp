#pragma once

// Shared test fixtures: tiny hand-built models and datasets.

#include <cstdint>
#include <vector>

#include "jrlab/dataset.hpp"
#include "jrlab/mlp.hpp"
#include "jrlab/tensor.hpp"

namespace jrlab::testing {

// Single identity-activation layer: logits = W x + b.
inline Mlp linear_model(Tensor W, Tensor b) {
    Mlp m;
    Layer layer;
    layer.weight = std::move(W);
    layer.bias = std::move(b);
    layer.activation = Activation::Identity;
    m.layers.push_back(std::move(layer));
    return m;
}

inline Mlp linear_model(Tensor W) {
    Tensor b = Tensor::zeros({W.rows()});
    return linear_model(std::move(W), std::move(b));
}

// logits = x.
inline Mlp identity_model(std::size_t n) {
    Tensor W = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) W.at(i, i) = 1.0;
    return linear_model(std::move(W));
}

// Random tanh MLP with a small, well-scaled spread of weights.
inline Mlp random_tanh(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    return xavier_init(dims, Activation::Tanh, seed);
}

// Random batch with entries in [-1, 1].
inline Tensor random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Tensor X = Tensor::zeros({rows, cols});
    Rng rng(seed);
    for (double& v : X.data) v = rng.uniform(-1.0, 1.0);
    return X;
}

// Identity preprocessing: raw equals model space.
inline Preprocess plain_pre() {
    Preprocess p;
    p.mean = 0.0;
    p.std_dev = 1.0;
    return p;
}

// Small synthetic image dataset for end-to-end paths.
inline Dataset tiny_blobs(std::size_t classes, std::size_t side, std::size_t per_class,
                          std::uint64_t noise_seed) {
    BlobSpec spec;
    spec.classes = classes;
    spec.side = side;
    spec.prototype_seed = 404;
    return make_blobs(spec, per_class, noise_seed);
}

}  // namespace jrlab::testing
