#include "jrlab/jacreg.hpp"

#include <cmath>
#include <string>

#include "jrlab/errors.hpp"
#include "jrlab/linalg.hpp"

namespace jrlab {

Tensor sample_unit_sphere(std::size_t batch, std::size_t C, Rng& rng) {
    if (C == 0) throw DimensionError("sample_unit_sphere: zero dimension");
    Tensor V = Tensor::zeros({batch, C});
    for (std::size_t r = 0; r < batch; ++r) {
        double* row = V.row(r);
        double norm = 0.0;
        do {
            rng.fill_normal(row, C);
            norm = std::sqrt(dot(row, row, C));
        } while (!(norm > 1e-150));  // astronomically unlikely, but stay exact
        for (std::size_t c = 0; c < C; ++c) row[c] /= norm;
    }
    return V;
}

namespace {

// Shared accumulation: a set of projection batches, each pushed through
// the VJP and its parameter-gradient pass with a common scale.
struct Accumulator {
    explicit Accumulator(const Mlp& model, std::size_t batch)
        : grads(ParamGrads::zeros_like(model)), per_sample(batch, 0.0) {}
    double value = 0.0;
    ParamGrads grads;
    std::vector<double> per_sample;
};

void accumulate_projection(const Mlp& model, const ForwardTrace& trace, const Tensor& V,
                           double scale, double per_sample_scale, Accumulator& acc) {
    VjpChain chain = vjp_input_chain(model, trace, V);
    std::vector<double> sq;
    const double s = sq_vjp_param_grads(model, trace, chain, scale, acc.grads, &sq);
    acc.value += scale * s;
    for (std::size_t a = 0; a < sq.size(); ++a) acc.per_sample[a] += per_sample_scale * sq[a];
}

}  // namespace

JacobianResult jacreg_exact(const Mlp& model, const ForwardTrace& trace) {
    require_congruent(model, trace);
    const std::size_t B = trace.batch;
    const std::size_t C = model.output_width();
    Accumulator acc(model, B);
    Tensor V = Tensor::zeros({B, C});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t r = 0; r < B; ++r) {
            double* row = V.row(r);
            for (std::size_t k = 0; k < C; ++k) row[k] = (k == c) ? 1.0 : 0.0;
        }
        accumulate_projection(model, trace, V, 1.0 / static_cast<double>(B), 1.0, acc);
    }
    JacobianResult out;
    out.value = acc.value;
    out.grads = std::move(acc.grads);
    out.method = JacMethod::Exact;
    out.n_proj = C;
    out.per_sample = std::move(acc.per_sample);
    return out;
}

JacobianResult jacreg_exact(const Mlp& model, const Tensor& X) {
    return jacreg_exact(model, forward(model, X));
}

JacobianResult jacreg_estimate(const Mlp& model, const ForwardTrace& trace, std::size_t n_proj,
                               Rng& rng) {
    require_congruent(model, trace);
    if (n_proj == 0) throw ConfigError("jacreg_estimate: n_proj must be at least 1");
    const std::size_t B = trace.batch;
    const std::size_t C = model.output_width();
    JacobianResult out;
    out.rng_state_used = rng.state();
    Accumulator acc(model, B);
    const double scale = static_cast<double>(C)
                         / (static_cast<double>(n_proj) * static_cast<double>(B));
    const double per_sample_scale = static_cast<double>(C) / static_cast<double>(n_proj);
    for (std::size_t mu = 0; mu < n_proj; ++mu) {
        Tensor V = sample_unit_sphere(B, C, rng);
        accumulate_projection(model, trace, V, scale, per_sample_scale, acc);
    }
    out.value = acc.value;
    out.grads = std::move(acc.grads);
    out.method = JacMethod::Projection;
    out.n_proj = n_proj;
    out.per_sample = std::move(acc.per_sample);
    return out;
}

JacobianResult jacreg_estimate(const Mlp& model, const Tensor& X, std::size_t n_proj, Rng& rng) {
    return jacreg_estimate(model, forward(model, X), n_proj, rng);
}

JacobianResult jacreg_with_projections(const Mlp& model, const ForwardTrace& trace,
                                       const std::vector<Tensor>& projections) {
    require_congruent(model, trace);
    if (projections.empty())
        throw ConfigError("jacreg_with_projections: need at least one projection batch");
    const std::size_t B = trace.batch;
    const std::size_t C = model.output_width();
    const std::size_t n_proj = projections.size();
    Accumulator acc(model, B);
    const double scale = static_cast<double>(C)
                         / (static_cast<double>(n_proj) * static_cast<double>(B));
    const double per_sample_scale = static_cast<double>(C) / static_cast<double>(n_proj);
    for (const Tensor& V : projections) {
        if (V.ndim() != 2 || V.rows() != B || V.cols() != C)
            throw DimensionError("jacreg_with_projections: projection batch must be [B x C]");
        accumulate_projection(model, trace, V, scale, per_sample_scale, acc);
    }
    JacobianResult out;
    out.value = acc.value;
    out.grads = std::move(acc.grads);
    out.method = JacMethod::Projection;
    out.n_proj = n_proj;
    out.per_sample = std::move(acc.per_sample);
    return out;
}

std::vector<double> jacobian_sq_norms(const Mlp& model, const Tensor& X) {
    ForwardTrace trace = forward(model, X);
    const std::size_t B = trace.batch;
    const std::size_t C = model.output_width();
    std::vector<double> out(B, 0.0);
    Tensor V = Tensor::zeros({B, C});
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t r = 0; r < B; ++r) {
            double* row = V.row(r);
            for (std::size_t k = 0; k < C; ++k) row[k] = (k == c) ? 1.0 : 0.0;
        }
        Tensor U = vjp_input(model, trace, V);
        for (std::size_t r = 0; r < B; ++r) out[r] += dot(U.row(r), U.row(r), U.cols());
    }
    return out;
}

// --- closed-form gradients --------------------------------------------

namespace {

// C = A * B for plain 2-D tensors.
Tensor matmul(Precision p, const Tensor& A, const Tensor& B) {
    Tensor C = Tensor::zeros({A.rows(), B.cols()});
    if (A.cols() != B.rows()) throw DimensionError("matmul: inner dimensions differ");
    gemm_nn(p, A.rows(), B.cols(), A.cols(), 1.0, A.data.data(), B.data.data(), 0.0,
            C.data.data());
    return C;
}

Tensor transpose(const Tensor& A) {
    Tensor T = Tensor::zeros({A.cols(), A.rows()});
    for (std::size_t r = 0; r < A.rows(); ++r)
        for (std::size_t c = 0; c < A.cols(); ++c) T.at(c, r) = A.at(r, c);
    return T;
}

}  // namespace

JacobianResult cyclopropagation(const Mlp& model, const Tensor& x) {
    model.validate();
    for (const Layer& l : model.layers)
        if (l.activation == Activation::Relu)
            throw UnsupportedActivationError(
                "closed-form jacobian gradients need a twice-differentiable activation; "
                "relu is not");
    if (x.ndim() != 1 || x.size() != model.input_width())
        throw DimensionError("cyclopropagation: x must be rank-1 of the input width");

    const std::size_t L = model.layer_count();
    Tensor X = Tensor::from({1, x.size()}, x.data);
    ForwardTrace trace = forward(model, X);

    // sigma', sigma'' per layer as flat rows, and layerwise Jacobians
    // Jl[l] = diag(sigma'(pre)) W.
    std::vector<Tensor> deriv(L), second(L), Jl(L);
    for (std::size_t l = 0; l < L; ++l) {
        const Layer& layer = model.layers[l];
        const std::size_t n_out = layer.fan_out();
        deriv[l] = Tensor::zeros({n_out});
        second[l] = Tensor::zeros({n_out});
        activation_deriv(layer.activation, trace.preact[l].data.data(),
                         trace.act[l + 1].data.data(), deriv[l].data.data(), n_out);
        activation_second_deriv(layer.activation, trace.preact[l].data.data(),
                                trace.act[l + 1].data.data(), second[l].data.data(), n_out);
        Jl[l] = layer.weight;
        for (std::size_t r = 0; r < n_out; ++r) {
            double* row = Jl[l].row(r);
            for (std::size_t c = 0; c < layer.fan_in(); ++c) row[c] *= deriv[l].data[r];
        }
    }

    // Prefix products down[l] = J^(l)...J^(1) (1-based l) and suffix
    // products up[l] = J^(L)...J^(l+1); up[L] and down[0] are implicit
    // identities and never materialised.
    std::vector<Tensor> down(L + 1), up(L + 1);
    down[1] = Jl[0];
    for (std::size_t l = 2; l <= L; ++l) down[l] = matmul(model.precision, Jl[l - 1], down[l - 1]);
    if (L >= 1) up[L - 1] = Jl[L - 1];
    for (std::size_t l = L - 1; l-- > 0;) up[l] = matmul(model.precision, up[l + 1], Jl[l]);

    const Tensor& J = down[L];
    Tensor Jt = transpose(J);

    JacobianResult out;
    out.method = JacMethod::Cyclo;
    out.value = squared_norm(J);
    out.per_sample = {out.value};
    out.grads = ParamGrads::zeros_like(model);

    // Walk layers top-down carrying bt = dR/db of the layer above.
    Tensor bt_up;
    for (std::size_t l = L; l >= 1; --l) {
        const Layer& layer = model.layers[l - 1];
        const std::size_t n_out = layer.fan_out(), n_in = layer.fan_in();

        // Omega = down[l-1] . J^T . up[l] with the identity ends skipped.
        Tensor left = (l == 1) ? Jt : matmul(model.precision, down[l - 1], Jt);
        Tensor omega = (l == L) ? std::move(left) : matmul(model.precision, left, up[l]);

        // dR/db: the division by sigma' of the layer above cancels against
        // the sigma' inside its layerwise Jacobian, leaving plain W^T bt.
        Tensor bt = Tensor::zeros({n_out});
        for (std::size_t j = 0; j < n_out; ++j) {
            double diag = 0.0;
            const double* wrow = layer.weight.row(j);
            for (std::size_t k = 0; k < n_in; ++k) diag += wrow[k] * omega.at(k, j);
            bt.data[j] = second[l - 1].data[j] * diag;
        }
        if (l < L) {
            const Layer& upper = model.layers[l];
            for (std::size_t j = 0; j < n_out; ++j) {
                double s = 0.0;
                for (std::size_t ju = 0; ju < upper.fan_out(); ++ju)
                    s += upper.weight.at(ju, j) * bt_up.data[ju];
                bt.data[j] += deriv[l - 1].data[j] * s;
            }
        }

        // dR/dW = bt z^T + diag(sigma') Omega^T, reported for the full
        // squared norm (twice the half-norm convention used internally).
        const double* z_prev = trace.act[l - 1].row(0);
        Tensor& wg = out.grads.weight[l - 1];
        for (std::size_t j = 0; j < n_out; ++j) {
            double* row = wg.row(j);
            for (std::size_t k = 0; k < n_in; ++k)
                row[k] = 2.0 * (bt.data[j] * z_prev[k] + deriv[l - 1].data[j] * omega.at(k, j));
        }
        for (std::size_t j = 0; j < n_out; ++j) out.grads.bias[l - 1].data[j] = 2.0 * bt.data[j];
        bt_up = std::move(bt);
    }
    return out;
}

EstimatorStats estimator_stats(const Tensor& J, std::size_t n_samples, Rng& rng) {
    if (J.ndim() != 2) throw DimensionError("estimator_stats: J must be 2-D");
    if (n_samples < 2) throw ConfigError("estimator_stats: need at least 2 samples");
    const std::size_t C = J.rows();
    const double Cd = static_cast<double>(C);

    // Gram matrix JJ^T collapses every draw to a C-dimensional quadratic form.
    Tensor G = Tensor::zeros({C, C});
    gemm_nt(Precision::f64, C, C, J.cols(), 1.0, J.data.data(), J.data.data(), 0.0,
            G.data.data());

    double tr = 0.0, tr2 = 0.0;
    for (std::size_t i = 0; i < C; ++i) tr += G.at(i, i);
    for (double v : G.data) tr2 += v * v;  // ||JJ^T||_F^2 = Tr[(JJ^T)^2]

    EstimatorStats st;
    st.n_samples = n_samples;
    st.exact_sq_norm = tr;
    st.closed_form_variance = 2.0 * Cd / (Cd + 2.0) * tr2 - 2.0 / (Cd + 2.0) * tr * tr;
    st.variance_bound = 2.0 * (Cd - 1.0) / (Cd + 2.0) * tr * tr;

    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> q(C);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Tensor v = sample_unit_sphere(1, C, rng);
        const double* vr = v.row(0);
        for (std::size_t i = 0; i < C; ++i) q[i] = dot(G.row(i), vr, C);
        const double draw = Cd * dot(q.data(), vr, C);
        sum += draw;
        sum_sq += draw * draw;
    }
    const double n = static_cast<double>(n_samples);
    st.mean = sum / n;
    st.variance = (sum_sq - n * st.mean * st.mean) / (n - 1.0);
    if (st.variance < 0.0) st.variance = 0.0;  // cancellation guard
    st.mean_se = std::sqrt(st.variance / n);
    return st;
}

}  // namespace jrlab
