#pragma once

#include <cstdint>
#include <vector>

#include "jrlab/grad.hpp"
#include "jrlab/mlp.hpp"
#include "jrlab/rng.hpp"
#include "jrlab/tensor.hpp"

namespace jrlab {

enum class JacMethod { Exact, Projection, Cyclo };

// Squared Frobenius norm of the input-output Jacobian, batch-averaged,
// together with its parameter gradient.  All three producers below agree
// on this contract, so they are interchangeable inside the training step:
//   value  = (1/B) sum_a ||J(x^a)||_F^2      (estimate for Projection)
//   grads  = d(value)/d(theta)
//   per_sample[a] = ||J(x^a)||_F^2 (or its estimate), before the 1/B
struct JacobianResult {
    double value = 0.0;
    ParamGrads grads;
    JacMethod method = JacMethod::Exact;
    std::size_t n_proj = 0;
    Rng::State rng_state_used{0, 0};  // stream position before any draw
    std::vector<double> per_sample;
};

// [B x C] rows drawn uniformly from the unit sphere S^{C-1}: i.i.d.
// standard normals, each row normalised.
Tensor sample_unit_sphere(std::size_t batch, std::size_t C, Rng& rng);

// Exact evaluation: one vector-Jacobian product per output class, summed.
// The trace must be eval-mode (no dropout masks).
JacobianResult jacreg_exact(const Mlp& model, const ForwardTrace& trace);
JacobianResult jacreg_exact(const Mlp& model, const Tensor& X);

// Random-projection estimate: n_proj draws of per-sample unit vectors
// v, accumulating C * ||v.J||^2 / (n_proj * B).  Unbiased in expectation
// with relative error O((n_proj * B)^{-1/2}); with n_proj = 1 a training
// step costs about one extra backprop.
JacobianResult jacreg_estimate(const Mlp& model, const ForwardTrace& trace, std::size_t n_proj,
                               Rng& rng);
JacobianResult jacreg_estimate(const Mlp& model, const Tensor& X, std::size_t n_proj, Rng& rng);

// Deterministic-projection mode: the estimator's accumulation driven by
// caller-chosen [B x C] projection batches instead of sphere draws.
// Feeding the C one-hot basis batches reproduces jacreg_exact exactly.
JacobianResult jacreg_with_projections(const Mlp& model, const ForwardTrace& trace,
                                       const std::vector<Tensor>& projections);

// Closed-form gradients via layerwise Jacobian chains: for each layer the
// cycle matrix Omega = J^(l-1)..J^(1) J^T J^(L)..J^(l+1) is assembled from
// prefix/suffix products, and bias/weight gradients follow from the
// analytic recursion (top layer first).  No sampling, no second reverse
// pass; requires twice-differentiable activations, so relu models throw
// UnsupportedActivationError.  Single input x (rank 1).
JacobianResult cyclopropagation(const Mlp& model, const Tensor& x);

// Per-sample exact ||J(x^a)||_F^2 without parameter gradients (cheap path
// for logging and evaluation).
std::vector<double> jacobian_sq_norms(const Mlp& model, const Tensor& X);

// Monte-Carlo study of the one-shot estimator C * ||v.J||^2 for a fixed
// Jacobian, against its analytic moments: the estimator is unbiased with
//   var = 2C/(C+2) Tr[(JJ^T)^2] - 2/(C+2) ||J||_F^4
// which never exceeds 2(C-1)/(C+2) * ||J||_F^4.
struct EstimatorStats {
    std::size_t n_samples = 0;
    double mean = 0.0;
    double variance = 0.0;     // unbiased sample variance
    double mean_se = 0.0;      // standard error of the sample mean
    double exact_sq_norm = 0.0;
    double closed_form_variance = 0.0;
    double variance_bound = 0.0;  // 2(C-1)/(C+2) * exact^2
};
EstimatorStats estimator_stats(const Tensor& J, std::size_t n_samples, Rng& rng);

}  // namespace jrlab
