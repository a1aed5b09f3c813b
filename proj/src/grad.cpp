#include "jrlab/grad.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jrlab/errors.hpp"
#include "jrlab/linalg.hpp"

namespace jrlab {

namespace {

// dpre = dact (.) sigma'(pre), computed row-block at once.
Tensor times_deriv(const Layer& layer, const Tensor& pre, const Tensor& act,
                   const Tensor& dact) {
    Tensor out = Tensor::zeros(pre.shape);
    activation_deriv(layer.activation, pre.data.data(), act.data.data(), out.data.data(),
                     pre.size());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= dact.data[i];
    return out;
}

void check_cotangent(const Mlp& model, const ForwardTrace& trace, const Tensor& V,
                     const char* who) {
    require_congruent(model, trace);
    if (V.ndim() != 2 || V.rows() != trace.batch || V.cols() != model.output_width())
        throw DimensionError(std::string(who) + ": cotangent is not [B x n_out]");
}

}  // namespace

ParamGrads backprop_params(const Mlp& model, const ForwardTrace& trace, const Tensor& dlogits) {
    check_cotangent(model, trace, dlogits, "backprop_params");
    const std::size_t B = trace.batch;
    const std::size_t L = model.layer_count();
    ParamGrads grads = ParamGrads::zeros_like(model);

    Tensor dact = dlogits;
    for (std::size_t li = L; li-- > 0;) {
        const Layer& layer = model.layers[li];
        const std::size_t n_out = layer.fan_out(), n_in = layer.fan_in();
        Tensor dpre = times_deriv(layer, trace.preact[li], trace.act[li + 1], dact);

        // copy the layer input only when a dropout mask has to be applied
        const Tensor& mask_in = trace.mask[li];
        Tensor masked;
        const Tensor* in = &trace.act[li];
        if (mask_in.size() != 0) {
            masked = layer_input(trace, li);
            in = &masked;
        }
        gemm_tn(model.precision, n_out, n_in, B, 1.0, dpre.data.data(), in->data.data(), 1.0,
                grads.weight[li].data.data());
        for (std::size_t r = 0; r < B; ++r) {
            const double* row = dpre.row(r);
            for (std::size_t c = 0; c < n_out; ++c) grads.bias[li].data[c] += row[c];
        }
        if (li > 0) {
            Tensor next = Tensor::zeros({B, n_in});
            gemm_nn(model.precision, B, n_in, n_out, 1.0, dpre.data.data(),
                    layer.weight.data.data(), 0.0, next.data.data());
            const Tensor& mask = trace.mask[li];
            if (mask.size() != 0)
                for (std::size_t i = 0; i < next.size(); ++i) next.data[i] *= mask.data[i];
            dact = std::move(next);
        }
    }
    return grads;
}

VjpChain vjp_input_chain(const Mlp& model, const ForwardTrace& trace, const Tensor& V) {
    check_cotangent(model, trace, V, "vjp_input");
    const std::size_t B = trace.batch;
    const std::size_t L = model.layer_count();
    VjpChain chain;
    chain.p.assign(L + 1, Tensor{});
    chain.p[L] = V;
    for (std::size_t li = L; li-- > 0;) {
        const Layer& layer = model.layers[li];
        const std::size_t n_in = layer.fan_in();
        Tensor q = times_deriv(layer, trace.preact[li], trace.act[li + 1], chain.p[li + 1]);
        Tensor p = Tensor::zeros({B, n_in});
        gemm_nn(model.precision, B, n_in, layer.fan_out(), 1.0, q.data.data(),
                layer.weight.data.data(), 0.0, p.data.data());
        const Tensor& mask = trace.mask[li];
        if (mask.size() != 0)
            for (std::size_t i = 0; i < p.size(); ++i) p.data[i] *= mask.data[i];
        chain.p[li] = std::move(p);
    }
    return chain;
}

Tensor vjp_input(const Mlp& model, const ForwardTrace& trace, const Tensor& V) {
    return std::move(vjp_input_chain(model, trace, V).p.front());
}

// Reverse-mode over the VJP recursion.  Forward objects: for layer l
// (1-based), q_l = p_l (.) sigma'_l and p_{l-1} = q_l W_l, ending in
// u = p_0 whose squared norm s is the scalar of interest.  The sweep below
// first walks the chain bottom-up carrying pbar (adjoint of p_{l-1}),
// collecting the direct W contribution q_l^T pbar and the adjoint of
// sigma'_l; a second top-down sweep then pushes the sigma' adjoints through
// the forward pre-activations, where they pick up sigma'' terms and the
// remaining W and bias contributions.
double sq_vjp_param_grads(const Mlp& model, const ForwardTrace& trace, const VjpChain& chain,
                          double scale, ParamGrads& acc, std::vector<double>* per_sample) {
    require_congruent(model, trace);
    const std::size_t B = trace.batch;
    const std::size_t L = model.layer_count();
    if (chain.p.size() != L + 1)
        throw StateError("sq_vjp_param_grads: chain does not match model depth");
    if (!acc.congruent_with(model))
        throw DimensionError("sq_vjp_param_grads: accumulator has wrong shapes");
    for (const Tensor& m : trace.mask)
        if (m.size() != 0)
            throw StateError("sq_vjp_param_grads: needs an eval-mode trace without dropout");

    std::vector<Tensor> deriv(L), second(L), abar(L);
    for (std::size_t li = 0; li < L; ++li) {
        const Tensor& pre = trace.preact[li];
        const Tensor& act = trace.act[li + 1];
        deriv[li] = Tensor::zeros(pre.shape);
        second[li] = Tensor::zeros(pre.shape);
        activation_deriv(model.layers[li].activation, pre.data.data(), act.data.data(),
                         deriv[li].data.data(), pre.size());
        activation_second_deriv(model.layers[li].activation, pre.data.data(), act.data.data(),
                                second[li].data.data(), pre.size());
    }

    const Tensor& u = chain.p[0];
    double s = 0.0;
    if (per_sample) per_sample->assign(B, 0.0);
    for (std::size_t r = 0; r < B; ++r) {
        const double row = dot(u.row(r), u.row(r), u.cols());
        s += row;
        if (per_sample) (*per_sample)[r] = row;
    }

    // Bottom-up: adjoint of p_{l-1} -> contributions at layer l.  The first
    // layer reads pbar = 2u; fold that factor into the GEMM alphas (exact,
    // power of two) rather than materialising a scaled copy of u.
    Tensor pbar;
    for (std::size_t li = 0; li < L; ++li) {
        const Layer& layer = model.layers[li];
        const std::size_t n_out = layer.fan_out(), n_in = layer.fan_in();
        const Tensor& p_up = chain.p[li + 1];
        const Tensor& pb = li == 0 ? u : pbar;
        const double boost = li == 0 ? 2.0 : 1.0;

        Tensor q = Tensor::zeros({B, n_out});
        for (std::size_t i = 0; i < q.size(); ++i)
            q.data[i] = p_up.data[i] * deriv[li].data[i];

        Tensor qbar = Tensor::zeros({B, n_out});
        gemm_nt(model.precision, B, n_out, n_in, boost, pb.data.data(),
                layer.weight.data.data(), 0.0, qbar.data.data());
        gemm_tn(model.precision, n_out, n_in, B, boost * scale, q.data.data(), pb.data.data(), 1.0,
                acc.weight[li].data.data());

        abar[li] = Tensor::zeros({B, n_out});
        Tensor next = Tensor::zeros({B, n_out});
        for (std::size_t i = 0; i < qbar.size(); ++i) {
            abar[li].data[i] = p_up.data[i] * qbar.data[i];
            next.data[i] = deriv[li].data[i] * qbar.data[i];
        }
        pbar = std::move(next);
    }

    // Top-down: pre-activation adjoints gather sigma'' terms plus whatever
    // flows back down from layers above through the forward pass.
    Tensor prebar_up;  // adjoint of preact[li + 1]
    for (std::size_t li = L; li-- > 0;) {
        const Layer& layer = model.layers[li];
        const std::size_t n_out = layer.fan_out();
        Tensor prebar = Tensor::zeros({B, n_out});
        if (li + 1 < L) {
            const Layer& upper = model.layers[li + 1];
            Tensor zbar = Tensor::zeros({B, n_out});
            gemm_nn(model.precision, B, n_out, upper.fan_out(), 1.0, prebar_up.data.data(),
                    upper.weight.data.data(), 0.0, zbar.data.data());
            for (std::size_t i = 0; i < prebar.size(); ++i)
                prebar.data[i] = second[li].data[i] * abar[li].data[i]
                                 + deriv[li].data[i] * zbar.data[i];
        } else {
            for (std::size_t i = 0; i < prebar.size(); ++i)
                prebar.data[i] = second[li].data[i] * abar[li].data[i];
        }
        gemm_tn(model.precision, n_out, layer.fan_in(), B, scale, prebar.data.data(),
                trace.act[li].data.data(), 1.0, acc.weight[li].data.data());
        for (std::size_t r = 0; r < B; ++r) {
            const double* row = prebar.row(r);
            for (std::size_t c = 0; c < n_out; ++c) acc.bias[li].data[c] += scale * row[c];
        }
        prebar_up = std::move(prebar);
    }
    return s;
}

double joint_backward(const Mlp& model, const ForwardTrace& trace, const Tensor& dlogits,
                      const std::vector<Tensor>& projections, double w, ParamGrads& acc) {
    check_cotangent(model, trace, dlogits, "joint_backward");
    const std::size_t B = trace.batch;
    const std::size_t L = model.layer_count();
    if (!acc.congruent_with(model))
        throw DimensionError("joint_backward: accumulator has wrong shapes");
    for (const Tensor& m : trace.mask)
        if (m.size() != 0)
            throw StateError("joint_backward: needs an eval-mode trace without dropout");
    for (const Tensor& V : projections)
        check_cotangent(model, trace, V, "joint_backward");

    std::vector<Tensor> deriv(L), second(L), abar(L);
    for (std::size_t li = 0; li < L; ++li) {
        const Tensor& pre = trace.preact[li];
        const Tensor& act = trace.act[li + 1];
        deriv[li] = Tensor::zeros(pre.shape);
        second[li] = Tensor::zeros(pre.shape);
        abar[li] = Tensor::zeros(pre.shape);
        activation_deriv(model.layers[li].activation, pre.data.data(), act.data.data(),
                         deriv[li].data.data(), pre.size());
        activation_second_deriv(model.layers[li].activation, pre.data.data(), act.data.data(),
                                second[li].data.data(), pre.size());
    }

    // Per projection: VJP chain, then the bottom-up sweep of
    // sq_vjp_param_grads with the sigma' adjoints summed into `abar`
    // instead of spent on a private top-down pass.
    double ssum = 0.0;
    for (const Tensor& V : projections) {
        const VjpChain chain = vjp_input_chain(model, trace, V);
        const Tensor& u = chain.p[0];
        for (std::size_t r = 0; r < B; ++r) ssum += dot(u.row(r), u.row(r), u.cols());

        Tensor pbar;
        for (std::size_t li = 0; li < L; ++li) {
            const Layer& layer = model.layers[li];
            const std::size_t n_out = layer.fan_out(), n_in = layer.fan_in();
            const Tensor& p_up = chain.p[li + 1];
            const Tensor& pb = li == 0 ? u : pbar;
            const double boost = li == 0 ? 2.0 : 1.0;

            Tensor q = Tensor::zeros({B, n_out});
            for (std::size_t i = 0; i < q.size(); ++i)
                q.data[i] = p_up.data[i] * deriv[li].data[i];

            Tensor qbar = Tensor::zeros({B, n_out});
            gemm_nt(model.precision, B, n_out, n_in, boost, pb.data.data(),
                    layer.weight.data.data(), 0.0, qbar.data.data());
            gemm_tn(model.precision, n_out, n_in, B, boost * w, q.data.data(), pb.data.data(),
                    1.0, acc.weight[li].data.data());

            Tensor next = Tensor::zeros({B, n_out});
            for (std::size_t i = 0; i < qbar.size(); ++i) {
                abar[li].data[i] += p_up.data[i] * qbar.data[i];
                next.data[i] = deriv[li].data[i] * qbar.data[i];
            }
            pbar = std::move(next);
        }
    }

    // One shared top-down sweep: the supervised cotangent seeds the
    // downflow at the top layer and the penalty sigma' adjoints inject
    // with weight w at every layer; below that both flow identically
    // (multiply by W, then by sigma').
    Tensor prebar_up;
    for (std::size_t li = L; li-- > 0;) {
        const Layer& layer = model.layers[li];
        const std::size_t n_out = layer.fan_out();
        Tensor prebar = Tensor::zeros({B, n_out});
        if (li + 1 < L) {
            const Layer& upper = model.layers[li + 1];
            Tensor zbar = Tensor::zeros({B, n_out});
            gemm_nn(model.precision, B, n_out, upper.fan_out(), 1.0, prebar_up.data.data(),
                    upper.weight.data.data(), 0.0, zbar.data.data());
            for (std::size_t i = 0; i < prebar.size(); ++i)
                prebar.data[i] = w * second[li].data[i] * abar[li].data[i]
                                 + deriv[li].data[i] * zbar.data[i];
        } else {
            for (std::size_t i = 0; i < prebar.size(); ++i)
                prebar.data[i] = w * second[li].data[i] * abar[li].data[i]
                                 + deriv[li].data[i] * dlogits.data[i];
        }
        gemm_tn(model.precision, n_out, layer.fan_in(), B, 1.0, prebar.data.data(),
                trace.act[li].data.data(), 1.0, acc.weight[li].data.data());
        for (std::size_t r = 0; r < B; ++r) {
            const double* row = prebar.row(r);
            for (std::size_t c = 0; c < n_out; ++c) acc.bias[li].data[c] += row[c];
        }
        prebar_up = std::move(prebar);
    }
    return ssum;
}

ParamGrads finite_diff_param_grads(const Mlp& model,
                                   const std::function<double(const Mlp&)>& f, double h) {
    Mlp probe = model;
    ParamGrads g = ParamGrads::zeros_like(model);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        for (std::size_t i = 0; i < model.layers[l].weight.size(); ++i) {
            double& w = probe.layers[l].weight.data[i];
            const double keep = w;
            w = keep + h;
            const double up = f(probe);
            w = keep - h;
            const double dn = f(probe);
            w = keep;
            g.weight[l].data[i] = (up - dn) / (2.0 * h);
        }
        for (std::size_t i = 0; i < model.layers[l].bias.size(); ++i) {
            double& b = probe.layers[l].bias.data[i];
            const double keep = b;
            b = keep + h;
            const double up = f(probe);
            b = keep - h;
            const double dn = f(probe);
            b = keep;
            g.bias[l].data[i] = (up - dn) / (2.0 * h);
        }
    }
    return g;
}

double grad_max_rel_error(const ParamGrads& got, const ParamGrads& want) {
    if (got.weight.size() != want.weight.size())
        throw DimensionError("grad_max_rel_error: layer count mismatch");
    const double scale = std::max(1.0, std::max(got.max_abs(), want.max_abs()));
    double worst = 0.0;
    for (std::size_t l = 0; l < got.weight.size(); ++l) {
        for (std::size_t i = 0; i < got.weight[l].size(); ++i)
            worst = std::max(worst,
                             std::fabs(got.weight[l].data[i] - want.weight[l].data[i]));
        for (std::size_t i = 0; i < got.bias[l].size(); ++i)
            worst = std::max(worst, std::fabs(got.bias[l].data[i] - want.bias[l].data[i]));
    }
    return worst / scale;
}

Tensor finite_diff_jacobian(const Mlp& model, const Tensor& x, double h) {
    if (x.ndim() != 1 || x.size() != model.input_width())
        throw DimensionError("finite_diff_jacobian: x is not a rank-1 input");
    const std::size_t I = x.size();
    const std::size_t C = model.output_width();
    Tensor J = Tensor::zeros({C, I});
    Tensor probes = Tensor::zeros({2, I});
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t k = 0; k < I; ++k) {
            probes.at(0, k) = x.data[k];
            probes.at(1, k) = x.data[k];
        }
        probes.at(0, i) += h;
        probes.at(1, i) -= h;
        Tensor z = forward_logits(model, probes);
        for (std::size_t c = 0; c < C; ++c) J.at(c, i) = (z.at(0, c) - z.at(1, c)) / (2.0 * h);
    }
    return J;
}

}  // namespace jrlab
