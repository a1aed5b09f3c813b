#pragma once

#include <vector>

#include "jrlab/mlp.hpp"
#include "jrlab/tensor.hpp"

namespace jrlab {

// Softmax probabilities of one logit row at temperature T (> 0), computed
// with max-subtraction so large logits cannot overflow.
std::vector<double> softmax_row(const double* logits, std::size_t n, double temperature = 1.0);

struct LossGrad {
    double loss;     // mean negative log-likelihood over the batch
    Tensor dlogits;  // [B x C]: (p - onehot) / (B * T)
};

// Mean softmax cross-entropy at temperature T with its logit gradient.
// Labels must lie in [0, C); violations throw IndexError.
LossGrad softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                               double temperature = 1.0);

// Index of the row maximum; ties resolve to the lowest index.
int argmax_row(const double* v, std::size_t n);

// Argmax class per row of an eval-mode forward pass.
std::vector<int> predict(const Mlp& model, const Tensor& X);

}  // namespace jrlab
