#pragma once

#include <functional>

#include "jrlab/mlp.hpp"
#include "jrlab/tensor.hpp"

namespace jrlab {

// Parameter gradients of a scalar whose logit-gradient is `dlogits`
// [B x n_out], replayed over `trace`.  Dropout masks recorded in the trace
// are honoured, so this differentiates exactly the traced function.
ParamGrads backprop_params(const Mlp& model, const ForwardTrace& trace, const Tensor& dlogits);

// Vector-Jacobian product rows: given V [B x n_out], returns V.J with rows
// u^a = (v^a)^T J(x^a) of width n_in, where J is the Jacobian of logits
// with respect to the layer-0 input of the traced graph.
Tensor vjp_input(const Mlp& model, const ForwardTrace& trace, const Tensor& V);

// vjp_input plus the intermediate backpropagated rows p[l] [B x n_l] for
// l = 0..L (p[L] = V, p[0] = V.J), retained so a second reverse pass can
// differentiate functions of the VJP with respect to the parameters.
struct VjpChain {
    std::vector<Tensor> p;
    const Tensor& input_grad() const { return p.front(); }
};
VjpChain vjp_input_chain(const Mlp& model, const ForwardTrace& trace, const Tensor& V);

// Accumulates scale * d(sum_a ||u^a||^2)/d(theta) into `acc` by running
// reverse-mode over the VJP recursion itself, and returns
// sum_a ||u^a||^2.  When `per_sample` is non-null it receives ||u^a||^2
// per row.  Requires an eval-mode trace (masks would make the squared
// norm depend on them; callers evaluate the penalty on the clean graph).
double sq_vjp_param_grads(const Mlp& model, const ForwardTrace& trace, const VjpChain& chain,
                          double scale, ParamGrads& acc, std::vector<double>* per_sample = nullptr);

// Fused backward for a supervised cotangent plus weighted squared-VJP
// penalties: accumulates
//   d/d(theta) [ f + w * sum_mu sum_a ||(v_mu^a)^T J(x^a)||^2 ]
// into `acc`, where f is the traced scalar with logit-gradient `dlogits`
// and each projections[mu] is a [B x n_out] cotangent batch.  Returns the
// unweighted penalty sum_mu sum_a ||u||^2.  All penalty chains and the
// supervised flow share one top-down sweep, so the penalty costs one VJP
// chain plus one bottom-up pass per projection instead of a full extra
// backward each.  Requires an eval-mode trace (the penalty is defined on
// the dropout-free graph).
double joint_backward(const Mlp& model, const ForwardTrace& trace, const Tensor& dlogits,
                      const std::vector<Tensor>& projections, double w, ParamGrads& acc);

// Central-difference Jacobian [n_out x n_in] of the eval-mode logits at a
// single input x (rank-1 tensor).  Oracle-grade, O(n_in) forward passes.
Tensor finite_diff_jacobian(const Mlp& model, const Tensor& x, double h = 1e-5);

// Central-difference gradient of a scalar functional of the parameters;
// 2 * param_count evaluations of f.  Oracle-grade, for verification only.
ParamGrads finite_diff_param_grads(const Mlp& model,
                                   const std::function<double(const Mlp&)>& f, double h = 1e-5);

// Largest elementwise deviation between two gradient sets, normalised by
// max(1, largest |entry|): the "relative" error used by gradient checks.
double grad_max_rel_error(const ParamGrads& got, const ParamGrads& want);

}  // namespace jrlab
